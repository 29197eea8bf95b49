"""Selects the stencil-kernel implementation at import time.

The compiled extension is preferred when importable; otherwise the
numpy fallback is used.  ``STRINGLAB_BACKEND=numpy|compiled`` forces a
choice (raising if a forced compiled backend is unavailable), and
:func:`use` swaps the live implementation, which the benchmark uses to
time both paths in one process.
"""

import os

from . import _kernels_py

try:
    from . import _kernels  # compiled extension, built by setup.py
except ImportError:
    _kernels = None

_IMPLS = {"numpy": _kernels_py}
if _kernels is not None:
    _IMPLS["compiled"] = _kernels

HAVE_COMPILED = _kernels is not None

_forced = os.environ.get("STRINGLAB_BACKEND")
if _forced:
    if _forced not in _IMPLS:
        raise ImportError(
            f"STRINGLAB_BACKEND={_forced!r} requested but only {sorted(_IMPLS)} available"
        )
    _active_name = _forced
else:
    _active_name = "compiled" if HAVE_COMPILED else "numpy"

fd4_axis0 = _IMPLS[_active_name].fd4_axis0


def active_backend() -> str:
    return _active_name


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def use(name: str) -> None:
    """Switch the live kernel implementation (mainly for benchmarks/tests)."""
    global fd4_axis0, _active_name
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_IMPLS)}")
    _active_name = name
    fd4_axis0 = _IMPLS[name].fd4_axis0
