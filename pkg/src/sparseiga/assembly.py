"""Galerkin assembly of the Poisson problem on a mapped patch.

The analysis space is a tensor product of open-knot B-spline spaces
composed with the patch map (the basis is polynomial in the parametric
variables even when the geometry is rational).  Assembly runs element by
element with tensor Gauss quadrature; the per-element work is delegated to
a kernel (compiled when available, NumPy otherwise) over chunks of
elements, and homogeneous Dirichlet conditions are imposed by eliminating
boundary coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from sparseiga import _kernels
from sparseiga.geometry import NurbsPatch
from sparseiga.splines import KnotVector, collocation_matrix, dyadic_level_knots, eval_basis

__all__ = [
    "EmptyInteriorError",
    "gauss_rule",
    "DiscreteSpace",
    "QuadGrid",
    "AssembledSystem",
    "assemble_poisson",
    "full_stiffness",
]

# soft cap on floats held per gathered kernel operand
_CHUNK_BUDGET = 4_000_000


class EmptyInteriorError(ValueError):
    """The space has no interior degrees of freedom to solve for."""


def gauss_rule(q: int):
    """Gauss-Legendre rule with q points on [0, 1]; weights sum to 1."""
    if not 1 <= q <= 10:
        raise ValueError(f"quadrature points per direction must be in [1, 10], got {q}")
    nodes, weights = np.polynomial.legendre.leggauss(q)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True)
class DiscreteSpace:
    """Tensor-product B-spline analysis space on the parametric cube."""

    knotvectors: tuple

    def __post_init__(self):
        kvs = tuple(self.knotvectors)
        if not 1 <= len(kvs) <= 3:
            raise ValueError("space dimension must be 1, 2 or 3")
        for kv in kvs:
            if not isinstance(kv, KnotVector):
                raise TypeError("knotvectors must be KnotVector instances")
        object.__setattr__(self, "knotvectors", kvs)

    @classmethod
    def from_levels(cls, levels, degree, regularity, grading=1.0):
        """Space with 2**level graded elements per direction."""
        kvs = tuple(
            dyadic_level_knots(lv, degree, regularity, grading) for lv in levels
        )
        return cls(kvs)

    @property
    def d(self) -> int:
        return len(self.knotvectors)

    @property
    def dims(self) -> tuple:
        return tuple(kv.n for kv in self.knotvectors)

    @property
    def n_dofs(self) -> int:
        return int(np.prod(self.dims))

    def interior_mask(self) -> np.ndarray:
        """Boolean grid marking coefficients free under homogeneous Dirichlet."""
        mask = np.ones(self.dims, dtype=bool)
        for axis, n in enumerate(self.dims):
            m = np.zeros(n, dtype=bool)
            m[1:-1] = True
            shape = [1] * self.d
            shape[axis] = n
            mask &= m.reshape(shape)
        return mask

    def interior_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask().ravel())

    def boundary_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask().ravel())

    def eval_grid(self, coeffs, points_per_dir, gradient=False):
        """Evaluate a coefficient vector on a tensor grid of parameters.

        Returns the value grid, plus the parametric gradient stacked on a
        trailing axis when gradient=True.
        """
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.size != self.n_dofs:
            raise ValueError(
                f"coefficient vector has {coeffs.size} entries, space has {self.n_dofs}"
            )
        ct = coeffs.reshape(self.dims)
        vmats = [
            collocation_matrix(kv, pts, deriv=0)
            for kv, pts in zip(self.knotvectors, points_per_dir)
        ]
        vals = _tensor_apply(vmats, ct)
        if not gradient:
            return vals
        grads = np.empty(vals.shape + (self.d,))
        for m in range(self.d):
            mats = list(vmats)
            mats[m] = collocation_matrix(
                self.knotvectors[m], points_per_dir[m], deriv=1
            )
            grads[..., m] = _tensor_apply(mats, ct)
        return vals, grads


def _tensor_apply(mats, tensor):
    d = len(mats)
    if d == 1:
        return mats[0] @ tensor
    if d == 2:
        return np.einsum("xi,yj,ij->xy", mats[0], mats[1], tensor, optimize=True)
    return np.einsum(
        "xi,yj,zk,ijk->xyz", mats[0], mats[1], mats[2], tensor, optimize=True
    )


class QuadGrid:
    """Tensor Gauss integration grid on a patch, for norms and references.

    Cells are the graded dyadic elements of the given per-direction levels,
    so any solution on coarser (nested) levels is smooth within each cell.

    Attributes
    ----------
    points_per_dir : list of 1D arrays of parameter values.
    x : ndarray, shape (npts, d), mapped points in C grid order.
    weights : ndarray, shape (npts,), quad weight times |det J|.
    jinv_t : ndarray, shape (npts, d, d), transposed inverse Jacobian for
        pushing parametric gradients to physical space.
    """

    def __init__(self, patch: NurbsPatch, levels, quad_points, grading=1.0):
        d = patch.dim
        levels = tuple(int(lv) for lv in levels)
        if len(levels) != d:
            raise ValueError(f"expected {d} levels, got {len(levels)}")
        gnodes, gweights = gauss_rule(quad_points)
        pts = []
        wts = []
        for lv in levels:
            kv = dyadic_level_knots(lv, 1, 0, grading)
            bp = kv.breakpoints
            h = np.diff(bp)
            pts.append((bp[:-1, None] + h[:, None] * gnodes[None, :]).ravel())
            wts.append((h[:, None] * gweights[None, :]).ravel())
        x, jac, det = patch.eval_grid(pts, jacobian=True, check=True)
        wgrid = _outer_product(wts)
        self.patch = patch
        self.levels = levels
        self.grading = float(grading)
        self.points_per_dir = pts
        self.grid_shape = x.shape[:-1]
        self.x = x.reshape(-1, d)
        self.weights = (wgrid * det).ravel()
        self.jinv_t = np.linalg.inv(jac.reshape(-1, d, d)).transpose(0, 2, 1)

    def integrate(self, values) -> float:
        """Integral over the physical domain of a grid-sampled integrand."""
        return float(self.weights @ np.ravel(values))


def _outer_product(vecs):
    out = vecs[0]
    for v in vecs[1:]:
        out = out[..., None] * v
    return out


@dataclass
class AssembledSystem:
    """Stiffness matrix and load vector after Dirichlet elimination."""

    matrix: sps.csr_matrix
    rhs: np.ndarray
    space: DiscreteSpace
    interior: np.ndarray

    def expand(self, interior_coeffs) -> np.ndarray:
        """Scatter interior coefficients into a full vector, zero on boundary."""
        full = np.zeros(self.space.n_dofs)
        full[self.interior] = interior_coeffs
        return full


def _direction_tables(kv: KnotVector, gnodes, gweights):
    """Per-element basis tables and flattened quad data for one direction."""
    bp = kv.breakpoints
    nel = kv.n_elements
    p = kv.degree
    q = gnodes.size
    vals = np.empty((nel, q, p + 1))
    ders = np.empty((nel, q, p + 1))
    offsets = kv.element_offsets()
    pts = np.empty(nel * q)
    wts = np.empty(nel * q)
    for e in range(nel):
        a, b = bp[e], bp[e + 1]
        h = b - a
        for g in range(q):
            xi = a + h * gnodes[g]
            first, table = eval_basis(kv, xi, max_deriv=1)
            # interior Gauss nodes never sit on knots, so the span is the
            # element's own and first matches its offset
            if first != offsets[e]:
                raise AssertionError("quadrature node escaped its element")
            vals[e, g] = table[0]
            ders[e, g] = table[1]
            pts[e * q + g] = xi
            wts[e * q + g] = h * gweights[g]
    return vals, ders, offsets, pts, wts


def _evaluate_forcing(forcing, x):
    out = np.asarray(forcing(x), dtype=np.float64)
    if out.ndim == 0:
        return np.full(x.shape[0], float(out))
    if out.shape != (x.shape[0],):
        raise ValueError(
            f"forcing returned shape {out.shape} for {x.shape[0]} points"
        )
    return out


def _group_elements(grid, nels, q):
    """Regroup a tensor quad grid from point order to (element, local qp)."""
    d = len(nels)
    trailing = grid.shape[d:]
    inter = []
    for nel in nels:
        inter.extend([nel, q])
    arr = grid.reshape(tuple(inter) + trailing)
    order = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    order += list(range(2 * d, 2 * d + len(trailing)))
    arr = np.transpose(arr, order)
    return np.ascontiguousarray(
        arr.reshape((int(np.prod(nels)), q**d) + trailing)
    )


def _assemble_full(space: DiscreteSpace, patch: NurbsPatch, forcing, quad_points, kernel):
    """Assemble the full (uneliminated) system; forcing may be None."""
    if patch.dim != space.d:
        raise ValueError("patch and space dimensions differ")
    d = space.d
    degrees = [kv.degree for kv in space.knotvectors]
    q = quad_points if quad_points is not None else max(degrees) + 1
    q = int(q)
    gnodes, gweights = gauss_rule(q)
    if kernel is None:
        kernel = _kernels.local_poisson_systems

    tabs = [_direction_tables(kv, gnodes, gweights) for kv in space.knotvectors]
    nels = [t[0].shape[0] for t in tabs]
    kmax = max(p + 1 for p in degrees)
    max_nel = max(nels)
    values = np.zeros((d, max_nel, q, kmax))
    derivs = np.zeros((d, max_nel, q, kmax))
    for axis, (v, dv, _, _, _) in enumerate(tabs):
        values[axis, : nels[axis], :, : v.shape[2]] = v
        derivs[axis, : nels[axis], :, : dv.shape[2]] = dv

    x, jac, det = patch.eval_grid([t[3] for t in tabs], jacobian=True, check=True)
    wgrid = _outer_product([t[4] for t in tabs])
    jinv = np.linalg.inv(jac.reshape(-1, d, d)).reshape(jac.shape)
    metric = np.einsum("...mi,...ni->...mn", jinv, jinv) * (det * wgrid)[..., None, None]
    if forcing is not None:
        rhs_density = _evaluate_forcing(forcing, x.reshape(-1, d)).reshape(det.shape)
        load = rhs_density * det * wgrid
    else:
        load = np.zeros_like(det)

    metric_el = _group_elements(metric, nels, q)
    load_el = _group_elements(load, nels, q)

    n_elems = int(np.prod(nels))
    n_qp = q**d
    qp_index = np.stack(
        np.unravel_index(np.arange(n_qp), (q,) * d), axis=1
    ).astype(np.int32)
    loc_dims = tuple(p + 1 for p in degrees)
    n_loc = int(np.prod(loc_dims))
    fn_index = np.stack(
        np.unravel_index(np.arange(n_loc), loc_dims), axis=1
    ).astype(np.int32)
    elem_multi = np.stack(
        np.unravel_index(np.arange(n_elems), nels), axis=1
    ).astype(np.int64)

    dims = space.dims
    strides = np.ones(d, dtype=np.int64)
    for axis in range(d - 2, -1, -1):
        strides[axis] = strides[axis + 1] * dims[axis + 1]
    offsets = [t[2].astype(np.int64) for t in tabs]

    n_dofs = space.n_dofs
    chunk = max(1, _CHUNK_BUDGET // max(1, n_qp * n_loc))
    matrix = sps.csr_matrix((n_dofs, n_dofs))
    rhs = np.zeros(n_dofs)
    idx32 = n_dofs < np.iinfo(np.int32).max
    for start in range(0, n_elems, chunk):
        stop = min(start + chunk, n_elems)
        em = np.ascontiguousarray(elem_multi[start:stop])
        nc = stop - start
        out_a = np.zeros((nc, n_loc, n_loc))
        out_b = np.zeros((nc, n_loc))
        kernel(
            values,
            derivs,
            em,
            qp_index,
            fn_index,
            np.ascontiguousarray(metric_el[start:stop]),
            np.ascontiguousarray(load_el[start:stop]),
            out_a,
            out_b,
        )
        dofs = np.zeros((nc, n_loc), dtype=np.int64)
        for axis in range(d):
            gi = offsets[axis][em[:, axis]][:, None] + fn_index[None, :, axis]
            dofs += gi * strides[axis]
        if idx32:
            dofs = dofs.astype(np.int32)
        rows = np.broadcast_to(dofs[:, :, None], (nc, n_loc, n_loc)).ravel()
        cols = np.broadcast_to(dofs[:, None, :], (nc, n_loc, n_loc)).ravel()
        matrix = matrix + sps.coo_matrix(
            (out_a.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)
        ).tocsr()
        np.add.at(rhs, dofs.ravel().astype(np.int64), out_b.ravel())

    return matrix, rhs


def assemble_poisson(
    space: DiscreteSpace,
    patch: NurbsPatch,
    forcing,
    quad_points=None,
    kernel=None,
) -> AssembledSystem:
    """Assemble stiffness and load with homogeneous Dirichlet elimination.

    Parameters
    ----------
    space : DiscreteSpace
    patch : NurbsPatch
    forcing : callable
        Maps an (npts, d) array of physical points to (npts,) values.
    quad_points : int, optional
        Gauss points per direction per element; defaults to max degree + 1.
    kernel : callable, optional
        Assembly kernel override (used by benchmarks); defaults to the
        active backend.

    Raises
    ------
    EmptyInteriorError
        If every degree of freedom sits on the Dirichlet boundary.
    """
    interior = space.interior_dofs()
    if interior.size == 0:
        raise EmptyInteriorError(
            f"space of shape {space.dims} has no interior degrees of freedom"
        )
    matrix, rhs = _assemble_full(space, patch, forcing, quad_points, kernel)
    sub = matrix[interior][:, interior].tocsr()
    return AssembledSystem(sub, rhs[interior], space, interior)


def full_stiffness(
    space: DiscreteSpace, patch: NurbsPatch, quad_points=None, kernel=None
) -> sps.csr_matrix:
    """Stiffness matrix over all degrees of freedom, no boundary treatment."""
    matrix, _ = _assemble_full(space, patch, None, quad_points, kernel)
    return matrix
