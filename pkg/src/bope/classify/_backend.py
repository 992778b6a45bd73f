"""Select the compiled tree kernels when available, else the numpy fallback.

Set ``BOPE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _tree_py

python_kernels = _tree_py
compiled_kernels = None

if os.environ.get("BOPE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _tree as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if kernels is compiled_kernels else "python"

grow_tree = kernels.grow_tree
predict_trees = kernels.predict_trees
