"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the NumPy
fallback. Set ``WIPEPLAN_BACKEND=python`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("WIPEPLAN_BACKEND", "").lower() not in ("python", "py", "pure"):
    try:
        from . import _ckernels as _impl  # noqa: F811
    except ImportError:
        _impl = _pykernels
    else:
        BACKEND = "cython"

node_heights = _impl.node_heights
net_force = _impl.net_force
solve_depth = _impl.solve_depth
label_mask = _impl.label_mask
two_opt = _impl.two_opt
ball_filter = _impl.ball_filter

__all__ = ["BACKEND", "node_heights", "net_force", "solve_depth", "label_mask", "two_opt", "ball_filter"]
