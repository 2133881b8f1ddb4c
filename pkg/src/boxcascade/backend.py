"""Execution backend selection.

Hot kernels exist twice: numba @njit scalar loops (kernels_numba) and a
vectorized pure-numpy fallback (kernels_numpy).  The default is chosen once
from the environment:

    BOXCASCADE_BACKEND=numba   force the jit backend (error if unavailable)
    BOXCASCADE_BACKEND=numpy   force the pure-numpy fallback
    unset                      numba when importable, else numpy

Both backends are deterministic given the same seeds.  Their integer entropy
layers and split masses of the polynomial-form laws agree bit for bit; count
draws agree in distribution and are pinned per backend.
"""

from __future__ import annotations

import contextlib
import os
import warnings

_CACHE: dict = {}
_default_name: str | None = None


def _load(name: str):
    if name in _CACHE:
        return _CACHE[name]
    if name == "numpy":
        from . import kernels_numpy as mod
    elif name == "numba":
        from . import kernels_numba as mod
    else:
        raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")
    _CACHE[name] = mod
    return mod


def default_name() -> str:
    global _default_name
    if _default_name is None:
        env = os.environ.get("BOXCASCADE_BACKEND", "").strip().lower()
        if env in ("numba", "numpy"):
            _default_name = env
        elif env:
            raise ValueError(f"BOXCASCADE_BACKEND={env!r} not understood")
        else:
            try:
                import numba  # noqa: F401
                _default_name = "numba"
            except Exception:  # pragma: no cover (env without numba)
                warnings.warn("numba unavailable, falling back to the numpy backend")
                _default_name = "numpy"
    return _default_name


def get_backend(name: str | None = None):
    """Kernel module for ``name`` (or the process-wide default)."""
    return _load(name or default_name())


@contextlib.contextmanager
def use(name: str):
    """Temporarily switch the default backend (tests, benchmarks)."""
    global _default_name
    prev = default_name()
    _load(name)
    _default_name = name
    try:
        yield
    finally:
        _default_name = prev
