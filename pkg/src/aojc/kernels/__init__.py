"""Kernel backend selection.

The slot loop exists once, in `_slot_loop.py`.  By default it is compiled
with numba (cached, GIL released); setting the environment variable
``AOJC_KERNEL=python`` before import selects the uncompiled function instead,
which is bit-for-bit identical and useful for debugging or numba-free
installs.  ``get_kernel``/``available_backends`` let tests and benchmarks
request a specific backend explicitly.
"""

from __future__ import annotations

import os
from typing import Callable

from ._slot_loop import run_slots as _py_run_slots

__all__ = ["get_kernel", "available_backends", "default_backend", "run_slots"]

_ENV_VAR = "AOJC_KERNEL"
_kernels: dict[str, Callable] = {"python": _py_run_slots}


def _build_numba_kernel() -> Callable:
    from numba import njit

    return njit(cache=True, nogil=True)(_py_run_slots)


def available_backends() -> tuple[str, ...]:
    try:
        import numba  # noqa: F401
    except ImportError:
        return ("python",)
    return ("numba", "python")


def default_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice:
        if choice not in ("numba", "python"):
            raise ValueError(f"{_ENV_VAR} must be 'numba' or 'python', got {choice!r}")
        return choice
    return "numba" if "numba" in available_backends() else "python"


def get_kernel(backend: str | None = None) -> Callable:
    """Return the slot-loop callable for the given backend (default: env)."""
    name = backend if backend is not None else default_backend()
    if name not in ("numba", "python"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name not in _kernels:
        if name == "numba" and "numba" not in available_backends():
            raise RuntimeError("numba backend requested but numba is not installed")
        _kernels[name] = _build_numba_kernel()
    return _kernels[name]


def run_slots(*args, backend: str | None = None):
    """Dispatch to the selected backend's slot loop."""
    return get_kernel(backend)(*args)
