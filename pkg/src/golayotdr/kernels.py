"""Kernel backend selection.

The compiled Cython module is used when it was built; otherwise the numpy
implementation is loaded.  Set ``GOLAYOTDR_BACKEND=python`` to force the
fallback (``cython`` makes a missing extension an import error).
"""
import os
from types import ModuleType

from . import _pykernels


def _load_cython() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_requested = os.environ.get("GOLAYOTDR_BACKEND", "auto").lower()
_cython = None if _requested == "python" else _load_cython()
if _requested == "cython" and _cython is None:
    raise ImportError("GOLAYOTDR_BACKEND=cython but the compiled extension is not built")

BACKEND = "cython" if _cython is not None else "python"
_impl: ModuleType = _cython if _cython is not None else _pykernels

synthesize = _impl.synthesize
correlate_at_lags = _impl.correlate_at_lags


def available_backends() -> dict[str, ModuleType]:
    """Every importable backend by name, regardless of the active selection."""
    found = {"python": _pykernels}
    compiled = _load_cython()
    if compiled is not None:
        found["cython"] = compiled
    return found
