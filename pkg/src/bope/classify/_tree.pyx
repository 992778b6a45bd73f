# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled level-wise regression-tree growth on gradient/hessian pairs.

Exact greedy split search over presorted feature orders. Must stay
arithmetically identical to ``_tree_py.grow_tree``: same summation order,
same gain expression, same tie-breaking (lowest feature, then lowest
threshold). Do not build with -ffast-math.
"""
import numpy as np

from libc.math cimport INFINITY


def grow_tree(const double[:, ::1] xt, const Py_ssize_t[:, ::1] order,
              const double[::1] g, const double[::1] h,
              int max_depth, double lam, Py_ssize_t min_leaf,
              double min_child_weight):
    cdef Py_ssize_t p = xt.shape[0]
    cdef Py_ssize_t n = xt.shape[1]
    cdef Py_ssize_t cap = 2 * n - 1
    if max_depth < 62 and (1 << (max_depth + 1)) - 1 < cap:
        cap = (1 << (max_depth + 1)) - 1
    cdef Py_ssize_t max_slots = (cap + 1) // 2

    feature_a = np.full(cap, -1, dtype=np.intp)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.intp)
    right_a = np.full(cap, -1, dtype=np.intp)
    value_a = np.zeros(cap, dtype=np.float64)
    leaf_of_row_a = np.zeros(n, dtype=np.intp)

    cdef Py_ssize_t[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef Py_ssize_t[::1] left = left_a
    cdef Py_ssize_t[::1] right = right_a
    cdef double[::1] value = value_a
    cdef Py_ssize_t[::1] leaf_of_row = leaf_of_row_a

    cdef Py_ssize_t[::1] node_of = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] slot_node = np.zeros(max_slots, dtype=np.intp)
    cdef Py_ssize_t[::1] next_slot_node = np.zeros(max_slots, dtype=np.intp)
    cdef Py_ssize_t[::1] child_slot = np.zeros(max_slots, dtype=np.intp)
    cdef double[::1] tot_g = np.zeros(max_slots)
    cdef double[::1] tot_h = np.zeros(max_slots)
    cdef Py_ssize_t[::1] tot_c = np.zeros(max_slots, dtype=np.intp)
    cdef double[::1] parent = np.zeros(max_slots)
    cdef double[::1] acc_g = np.zeros(max_slots)
    cdef double[::1] acc_h = np.zeros(max_slots)
    cdef Py_ssize_t[::1] acc_c = np.zeros(max_slots, dtype=np.intp)
    cdef double[::1] last = np.zeros(max_slots)
    cdef double[::1] best_gain = np.zeros(max_slots)
    cdef Py_ssize_t[::1] best_feat = np.zeros(max_slots, dtype=np.intp)
    cdef double[::1] best_thr = np.zeros(max_slots)

    cdef Py_ssize_t n_slots = 1, n_nodes = 1, new_slots
    cdef Py_ssize_t i, j, k, f, node, cl, cr, d
    cdef double v, gl, gr, hl, hr, gain, thr

    with nogil:
        slot_node[0] = 0
        for d in range(max_depth + 1):
            for k in range(n_slots):
                tot_g[k] = 0.0
                tot_h[k] = 0.0
                tot_c[k] = 0
            for i in range(n):
                k = node_of[i]
                if k >= 0:
                    tot_g[k] += g[i]
                    tot_h[k] += h[i]
                    tot_c[k] += 1

            if d == max_depth:
                for k in range(n_slots):
                    node = slot_node[k]
                    if tot_h[k] + lam > 0:
                        value[node] = -tot_g[k] / (tot_h[k] + lam)
                    child_slot[k] = -1
                for i in range(n):
                    k = node_of[i]
                    if k >= 0:
                        leaf_of_row[i] = slot_node[k]
                        node_of[i] = -1
                break

            for k in range(n_slots):
                parent[k] = tot_g[k] * tot_g[k] / (tot_h[k] + lam)
                best_gain[k] = -INFINITY
                best_feat[k] = -1
                best_thr[k] = 0.0

            for f in range(p):
                for k in range(n_slots):
                    acc_g[k] = 0.0
                    acc_h[k] = 0.0
                    acc_c[k] = 0
                for j in range(n):
                    i = order[f, j]
                    k = node_of[i]
                    if k < 0:
                        continue
                    v = xt[f, i]
                    cl = acc_c[k]
                    if cl > 0 and v > last[k]:
                        cr = tot_c[k] - cl
                        if cl >= min_leaf and cr >= min_leaf:
                            hl = acc_h[k]
                            hr = tot_h[k] - hl
                            if (hl >= min_child_weight and hr >= min_child_weight
                                    and hl + lam > 0 and hr + lam > 0):
                                gl = acc_g[k]
                                gr = tot_g[k] - gl
                                gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[k]
                                if gain > best_gain[k]:
                                    best_gain[k] = gain
                                    best_feat[k] = f
                                    thr = last[k] + 0.5 * (v - last[k])
                                    if thr >= v:
                                        thr = last[k]
                                    best_thr[k] = thr
                    acc_g[k] += g[i]
                    acc_h[k] += h[i]
                    acc_c[k] = cl + 1
                    last[k] = v

            new_slots = 0
            for k in range(n_slots):
                node = slot_node[k]
                if best_feat[k] >= 0 and best_gain[k] >= 0.0:
                    feature[node] = best_feat[k]
                    threshold[node] = best_thr[k]
                    left[node] = n_nodes
                    right[node] = n_nodes + 1
                    child_slot[k] = new_slots
                    next_slot_node[new_slots] = n_nodes
                    next_slot_node[new_slots + 1] = n_nodes + 1
                    new_slots += 2
                    n_nodes += 2
                else:
                    if tot_h[k] + lam > 0:
                        value[node] = -tot_g[k] / (tot_h[k] + lam)
                    child_slot[k] = -1

            for i in range(n):
                k = node_of[i]
                if k < 0:
                    continue
                if child_slot[k] < 0:
                    leaf_of_row[i] = slot_node[k]
                    node_of[i] = -1
                elif xt[best_feat[k], i] <= best_thr[k]:
                    node_of[i] = child_slot[k]
                else:
                    node_of[i] = child_slot[k] + 1

            if new_slots == 0:
                break
            for k in range(new_slots):
                slot_node[k] = next_slot_node[k]
            n_slots = new_slots

    return (feature_a[:n_nodes], threshold_a[:n_nodes], left_a[:n_nodes],
            right_a[:n_nodes], value_a[:n_nodes], leaf_of_row_a)


def predict_trees(const double[:, ::1] x, const Py_ssize_t[::1] feature,
                  const double[::1] threshold, const Py_ssize_t[::1] left,
                  const Py_ssize_t[::1] right, const double[::1] value,
                  const Py_ssize_t[::1] roots, double scale, double[::1] out):
    """Add ``scale * tree(x)`` for every tree (flattened node arrays) into ``out``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t t, i, node
    with nogil:
        for t in range(roots.shape[0]):
            for i in range(n):
                node = roots[t]
                while feature[node] >= 0:
                    if x[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                out[i] += scale * value[node]
