"""Choose the collision-kernel implementation at import time.

The compiled module is used when it was built; ``KINEX_BACKEND=python``
forces the numpy fallback and ``KINEX_BACKEND=cython`` makes a missing
extension an import error.
"""

from __future__ import annotations

import os

from . import _qbme_py

_requested = os.environ.get("KINEX_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"KINEX_BACKEND must be auto, python or cython, got {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _qbme_c as _compiled
    except ImportError:
        if _requested == "cython":
            raise
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_kernel(name: str | None = None):
    """Return ``qbme_kernel`` for ``name`` (``None`` means the active backend)."""
    name = BACKEND if name is None else name
    if name == "python":
        return _qbme_py.qbme_kernel
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled backend is not available")
        return _compiled.qbme_kernel
    raise ValueError(f"unknown backend {name!r}")


def available() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])
