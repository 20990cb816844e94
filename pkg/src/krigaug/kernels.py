"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy reference in ``_pykernels`` takes over. Setting the environment
variable ``KRIGAUG_PURE_PYTHON=1`` forces the fallback. Both backends return
bit-identical results.
"""

import os

from . import _pykernels

if os.environ.get("KRIGAUG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

pair_bin_sums = _impl.pair_bin_sums
build_tree = _impl.build_tree
predict_forest = _impl.predict_forest


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
