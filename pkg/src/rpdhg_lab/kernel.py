"""Backend selection for the hot kernels.

The package ships a Cython extension for the PDHG inner loop and the Jacobi
eigensolver, plus a pure-NumPy fallback with identical semantics.  The
compiled backend is picked at import when available; ``use_backend`` switches
globally (the benchmark and the equivalence tests use this), and call sites
may resolve a specific backend explicitly.
"""

from __future__ import annotations

from . import _kernel_py

try:
    from . import _kernel  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _kernel = None

SPAN_DONE = _kernel_py.SPAN_DONE
SPAN_SOLVED = _kernel_py.SPAN_SOLVED
SPAN_NONFINITE = _kernel_py.SPAN_NONFINITE
SPAN_GUARD = _kernel_py.SPAN_GUARD

_BACKENDS = {"python": _kernel_py}
if _kernel is not None:
    _BACKENDS["cython"] = _kernel

_active = "cython" if _kernel is not None else "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend() -> str:
    return _active


def use_backend(name: str) -> None:
    """Switch the process-wide default backend."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = name


def resolve(name: str | None = None):
    """Return the backend module for ``name`` ('auto'/None means the default)."""
    if name is None or name == "auto":
        return _BACKENDS[_active]
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    return _BACKENDS[name]


def jacobi_eigvals(S, backend: str | None = None):
    return resolve(backend).jacobi_eigvals(S)
