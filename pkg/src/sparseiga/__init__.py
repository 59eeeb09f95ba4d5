"""Sparse-grid isogeometric Poisson solver.

B-spline Galerkin discretizations of the Poisson problem on NURBS-mapped
domains, solved either on a single tensor-product space or as a sparse-grid
combination of anisotropic components, with profit-based component
selection, a simple parallel scheduler, and a convergence benchmark
harness.
"""

from sparseiga._kernels import kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
