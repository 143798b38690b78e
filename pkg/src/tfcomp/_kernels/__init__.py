"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``TFCOMP_PURE_PYTHON=1``
forces the numpy fallback.  Both expose ``weighted_sup_4d``,
``weighted_lp`` and ``kn_sum`` with identical contracts.
"""
import os

from . import _py

BACKEND = "python"
_impl = _py
if os.environ.get("TFCOMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _py

weighted_sup_4d = _impl.weighted_sup_4d
weighted_lp = _impl.weighted_lp
kn_sum = _impl.kn_sum


def backends():
    """Available backend modules keyed by name (the fallback is always present)."""
    out = {"python": _py}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "backends", "weighted_sup_4d", "weighted_lp", "kn_sum"]
