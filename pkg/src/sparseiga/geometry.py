"""NURBS patch geometry: mapped domains for the Poisson benchmarks.

A patch maps the parametric unit cube [0, 1]^d onto a physical domain via
rational tensor-product splines.  Evaluation goes through homogeneous
coordinates, so polynomial patches (all weights 1) and genuinely rational
ones (the quarter annulus) share one code path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from sparseiga.splines import KnotVector, collocation_matrix

__all__ = [
    "InvalidGeometryError",
    "NurbsPatch",
    "map_point",
    "unit_hypercube",
    "quarter_annulus",
    "save_patch",
    "load_patch",
]


class InvalidGeometryError(ValueError):
    """The geometry map is not orientation-preserving where evaluated."""


@dataclass(frozen=True)
class NurbsPatch:
    """Tensor-product NURBS patch with parametric dimension == spatial.

    Parameters
    ----------
    knotvectors : tuple of KnotVector
        One per parametric direction; their degrees are the geometry
        degrees, independent of any analysis space built on the patch.
    control_points : ndarray, shape (n_1, ..., n_d, d)
    weights : ndarray, shape (n_1, ..., n_d), strictly positive.
    """

    knotvectors: tuple
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        kvs = tuple(self.knotvectors)
        d = len(kvs)
        if not 1 <= d <= 3:
            raise ValueError(f"parametric dimension must be 1, 2 or 3, got {d}")
        for kv in kvs:
            if not isinstance(kv, KnotVector):
                raise TypeError("knotvectors must be KnotVector instances")
        shape = tuple(kv.n for kv in kvs)
        pts = np.ascontiguousarray(self.control_points, dtype=np.float64)
        wts = np.ascontiguousarray(self.weights, dtype=np.float64)
        if pts.shape != shape + (d,):
            raise ValueError(
                f"control point array must have shape {shape + (d,)}, got {pts.shape}"
            )
        if wts.shape != shape:
            raise ValueError(f"weight array must have shape {shape}, got {wts.shape}")
        if np.any(wts <= 0.0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "knotvectors", kvs)
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def dim(self) -> int:
        return len(self.knotvectors)

    @property
    def is_polynomial(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    def _homogeneous(self) -> np.ndarray:
        hw = np.empty(self.weights.shape + (self.dim + 1,))
        hw[..., : self.dim] = self.control_points * self.weights[..., None]
        hw[..., self.dim] = self.weights
        return hw

    def eval_grid(self, points_per_dir, jacobian=False, check=True):
        """Evaluate the map on a tensor grid of parameter values.

        Parameters
        ----------
        points_per_dir : sequence of 1D arrays, one per direction.
        jacobian : bool
            Also return the Jacobian and its determinant.
        check : bool
            Raise InvalidGeometryError if det J <= 0 anywhere (only
            meaningful with jacobian=True).

        Returns
        -------
        x : ndarray, shape grid + (d,)
        jac : ndarray, shape grid + (d, d), with jac[..., i, m] the
            derivative of x_i along direction m.  Only with jacobian=True.
        det : ndarray, shape grid.  Only with jacobian=True.
        """
        d = self.dim
        if len(points_per_dir) != d:
            raise ValueError(f"expected {d} point arrays, got {len(points_per_dir)}")
        hw = self._homogeneous()
        vmats = [
            collocation_matrix(kv, pts, deriv=0)
            for kv, pts in zip(self.knotvectors, points_per_dir)
        ]
        homog = _contract(vmats, hw)
        wgt = homog[..., d]
        x = homog[..., :d] / wgt[..., None]
        if not jacobian:
            return x

        jac = np.empty(wgt.shape + (d, d))
        for m in range(d):
            dmats = list(vmats)
            dmats[m] = collocation_matrix(self.knotvectors[m], points_per_dir[m], deriv=1)
            dh = _contract(dmats, hw)
            # quotient rule in homogeneous form
            jac[..., :, m] = (dh[..., :d] - x * dh[..., d, None]) / wgt[..., None]
        det = np.linalg.det(jac)
        if check and np.any(det <= 0.0):
            raise InvalidGeometryError(
                f"geometry map is degenerate: min det J = {det.min():#.3g}"
            )
        return x, jac, det

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "degrees": [kv.degree for kv in self.knotvectors],
            "knots": [kv.knots.tolist() for kv in self.knotvectors],
            "points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "NurbsPatch":
        required = {"dim", "degrees", "knots", "points", "weights"}
        missing = required - set(data)
        if missing:
            raise ValueError(f"patch record is missing fields: {sorted(missing)}")
        d = int(data["dim"])
        degrees = data["degrees"]
        knots = data["knots"]
        if len(degrees) != d or len(knots) != d:
            raise ValueError("degrees/knots length must match dim")
        kvs = tuple(
            KnotVector(int(p), np.asarray(k, dtype=np.float64))
            for p, k in zip(degrees, knots)
        )
        return cls(kvs, np.asarray(data["points"], dtype=np.float64),
                   np.asarray(data["weights"], dtype=np.float64))


def _contract(mats, tensor):
    """Apply one matrix per tensor direction, keeping the trailing axis."""
    d = len(mats)
    if d == 1:
        return np.einsum("xi,iw->xw", mats[0], tensor)
    if d == 2:
        return np.einsum("xi,yj,ijw->xyw", mats[0], mats[1], tensor)
    return np.einsum("xi,yj,zk,ijkw->xyzw", mats[0], mats[1], mats[2], tensor)


def map_point(patch: NurbsPatch, xi):
    """Map one parametric point; returns (x, jacobian, det).

    Raises InvalidGeometryError when det J <= 0 at the point.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    if xi.shape != (patch.dim,):
        raise ValueError(f"expected a point with {patch.dim} coordinates")
    pts = [np.array([c]) for c in xi]
    x, jac, det = patch.eval_grid(pts, jacobian=True, check=True)
    flat = (0,) * patch.dim
    return x[flat], jac[flat], float(det[flat])


def _line_kv() -> KnotVector:
    return KnotVector(1, np.array([0.0, 0.0, 1.0, 1.0]))


def _arc_kv() -> KnotVector:
    return KnotVector(2, np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]))


def unit_hypercube(d: int) -> NurbsPatch:
    """Identity map on [0, 1]^d as a degree-1 polynomial patch."""
    if not 1 <= d <= 3:
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    kvs = tuple(_line_kv() for _ in range(d))
    grids = np.meshgrid(*([np.array([0.0, 1.0])] * d), indexing="ij")
    pts = np.stack(grids, axis=-1)
    return NurbsPatch(kvs, pts, np.ones((2,) * d))


def quarter_annulus(d: int, r_in=1.0, r_out=2.0, height=1.0) -> NurbsPatch:
    """Exact quarter annulus (d=2) or its prism extrusion along z (d=3).

    Direction 1 is radial (degree 1), direction 2 sweeps the arc from
    angle 0 to pi/2 as a single rational quadratic segment, direction 3
    (if any) is linear in z up to `height`.
    """
    if d not in (2, 3):
        raise ValueError(f"quarter annulus needs d in (2, 3), got {d}")
    if not 0.0 < r_in < r_out:
        raise ValueError("radii must satisfy 0 < r_in < r_out")
    s = np.sqrt(2.0) / 2.0
    arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pts2 = np.empty((2, 3, 2))
    pts2[0] = r_in * arc
    pts2[1] = r_out * arc
    w2 = np.tile(np.array([1.0, s, 1.0]), (2, 1))
    if d == 2:
        return NurbsPatch((_line_kv(), _arc_kv()), pts2, w2)
    if height <= 0.0:
        raise ValueError("height must be positive")
    pts3 = np.empty((2, 3, 2, 3))
    pts3[..., 0, :2] = pts2
    pts3[..., 1, :2] = pts2
    pts3[..., 0, 2] = 0.0
    pts3[..., 1, 2] = height
    w3 = np.repeat(w2[:, :, None], 2, axis=2)
    return NurbsPatch((_line_kv(), _arc_kv(), _line_kv()), pts3, w3)


def save_patch(path, patch: NurbsPatch) -> None:
    """Write a patch to a JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(patch.to_json(), fh, indent=2)
        fh.write("\n")


def load_patch(path) -> NurbsPatch:
    """Read a patch from a JSON file written by save_patch."""
    with open(path, encoding="utf-8") as fh:
        return NurbsPatch.from_json(json.load(fh))
