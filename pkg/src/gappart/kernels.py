"""Hot-kernel dispatch.

Loads the compiled ``_ckernels`` extension when it is importable and falls back
to the NumPy versions in ``_pykernels`` otherwise. Setting the environment
variable ``GAPPART_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("GAPPART_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

edge_pair_sum = _impl.edge_pair_sum
edge_pair_grad = _impl.edge_pair_grad
maxpool_sets = _impl.maxpool_sets
maxpool_sets_grad = _impl.maxpool_sets_grad
min_ncut_enumerate = _impl.min_ncut_enumerate


def backends():
    """Every importable kernel implementation, keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
