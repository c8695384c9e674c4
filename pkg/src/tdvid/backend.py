"""Kernel backend selection.

The fused operator kernels come in two flavours: numba @njit loops and a
pure-numpy composition. The default is numba when it imports, numpy
otherwise. Override with the environment variable

    TDVID_BACKEND=numpy   force the numpy fallback
    TDVID_BACKEND=numba   require numba (ImportError if unavailable)

or pass backend_name explicitly to the operator functions.
"""

from __future__ import annotations

import os

ENV_VAR = "TDVID_BACKEND"
_CHOICES = ("numba", "numpy")

_numba_ok: bool | None = None


def numba_available() -> bool:
    global _numba_ok
    if _numba_ok is None:
        try:
            import numba  # noqa: F401

            _numba_ok = True
        except ImportError:
            _numba_ok = False
    return _numba_ok


def resolve(name: str | None = None) -> str:
    """Resolve a backend name (explicit arg > env var > auto-detect)."""
    if name is None:
        name = os.environ.get(ENV_VAR, "").strip().lower() or None
    if name is None:
        return "numba" if numba_available() else "numpy"
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}, expected one of {_CHOICES}")
    if name == "numba" and not numba_available():
        raise ImportError("TDVID_BACKEND=numba requested but numba is not importable")
    return name
