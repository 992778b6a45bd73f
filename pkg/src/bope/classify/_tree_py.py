"""Pure numpy implementation of the tree kernels.

Mirrors ``_tree.pyx`` operation for operation so both backends return
bit-identical trees: node totals are accumulated in row order (``bincount``),
left-side statistics in sorted order (``cumsum``), and ties resolve to the
lowest feature index, then the lowest threshold.
"""
import numpy as np


def grow_tree(xt, order, g, h, max_depth, lam, min_leaf, min_child_weight):
    p, n = xt.shape
    cap = 2 * n - 1
    if max_depth < 62:
        cap = min(cap, (1 << (max_depth + 1)) - 1)

    feature = np.full(cap, -1, dtype=np.intp)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.intp)
    right = np.full(cap, -1, dtype=np.intp)
    value = np.zeros(cap)
    leaf_of_row = np.zeros(n, dtype=np.intp)

    node_of = np.zeros(n, dtype=np.intp)
    slot_node = np.array([0], dtype=np.intp)
    n_nodes = 1

    for depth in range(max_depth + 1):
        n_slots = slot_node.shape[0]
        active = node_of >= 0
        idx = node_of[active]
        tot_g = np.bincount(idx, weights=g[active], minlength=n_slots)
        tot_h = np.bincount(idx, weights=h[active], minlength=n_slots)
        tot_c = np.bincount(idx, minlength=n_slots)

        if depth == max_depth:
            ok = tot_h + lam > 0
            value[slot_node[ok]] = -tot_g[ok] / (tot_h[ok] + lam)
            leaf_of_row[active] = slot_node[idx]
            node_of[active] = -1
            break

        parent = tot_g * tot_g / (tot_h + lam)
        best_gain = np.full(n_slots, -np.inf)
        best_feat = np.full(n_slots, -1, dtype=np.intp)
        best_thr = np.zeros(n_slots)

        for f in range(p):
            o = order[f]
            nd = node_of[o]
            keep = nd >= 0
            o = o[keep]
            nd = nd[keep]
            perm = np.argsort(nd, kind="stable")
            o = o[perm]
            nd = nd[perm]
            bounds = np.searchsorted(nd, np.arange(n_slots + 1))
            vals = xt[f, o]
            gs = g[o]
            hs = h[o]
            for k in range(n_slots):
                s, e = bounds[k], bounds[k + 1]
                if e - s < 2:
                    continue
                v = vals[s:e]
                gl = np.cumsum(gs[s:e])[:-1]
                hl = np.cumsum(hs[s:e])[:-1]
                cl = np.arange(1, e - s)
                cr = tot_c[k] - cl
                hr = tot_h[k] - hl
                ok = (v[1:] > v[:-1]) & (cl >= min_leaf) & (cr >= min_leaf)
                ok &= (hl >= min_child_weight) & (hr >= min_child_weight)
                ok &= (hl + lam > 0) & (hr + lam > 0)
                if not ok.any():
                    continue
                gr = tot_g[k] - gl
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[k]
                gain = np.where(ok, gain, -np.inf)
                j = int(np.argmax(gain))
                if gain[j] > best_gain[k]:
                    best_gain[k] = gain[j]
                    best_feat[k] = f
                    lo, hi = v[j], v[j + 1]
                    thr = lo + 0.5 * (hi - lo)
                    best_thr[k] = lo if thr >= hi else thr

        split = (best_feat >= 0) & (best_gain >= 0.0)
        child_slot = np.full(n_slots, -1, dtype=np.intp)
        n_split = int(split.sum())
        child_slot[split] = 2 * np.arange(n_split)
        split_nodes = slot_node[split]
        feature[split_nodes] = best_feat[split]
        threshold[split_nodes] = best_thr[split]
        left[split_nodes] = n_nodes + 2 * np.arange(n_split)
        right[split_nodes] = n_nodes + 2 * np.arange(n_split) + 1

        leaf = ~split & (tot_h + lam > 0)
        value[slot_node[leaf]] = -tot_g[leaf] / (tot_h[leaf] + lam)

        rows = np.flatnonzero(active)
        k = node_of[rows]
        cs = child_slot[k]
        to_leaf = cs < 0
        leaf_of_row[rows[to_leaf]] = slot_node[k[to_leaf]]
        node_of[rows[to_leaf]] = -1
        inner = rows[~to_leaf]
        ki = k[~to_leaf]
        go_left = xt[best_feat[ki], inner] <= best_thr[ki]
        node_of[inner] = np.where(go_left, child_slot[ki], child_slot[ki] + 1)

        if n_split == 0:
            break
        slot_node = n_nodes + np.arange(2 * n_split, dtype=np.intp)
        n_nodes += 2 * n_split

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes], leaf_of_row)


def predict_trees(x, feature, threshold, left, right, value, roots, scale, out):
    n = x.shape[0]
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.intp)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            ri = rows[inner]
            ni = node[inner]
            go_left = x[ri, f[inner]] <= threshold[ni]
            node[inner] = np.where(go_left, left[ni], right[ni])
        out += scale * value[node]
