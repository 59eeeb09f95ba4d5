"""Element assembly kernels with a compiled fast path.

Importing this package picks the Cython extension when it was built and
falls back to the NumPy implementation otherwise.  Both expose the same
``local_poisson_systems`` contract and produce results that agree to
floating-point roundoff.
"""

try:
    from sparseiga._kernels._compiled import local_poisson_systems

    _BACKEND = "compiled"
except ImportError:
    from sparseiga._kernels._fallback import local_poisson_systems

    _BACKEND = "fallback"

__all__ = ["local_poisson_systems", "kernel_backend"]


def kernel_backend() -> str:
    """Name of the active kernel implementation: "compiled" or "fallback"."""
    return _BACKEND
