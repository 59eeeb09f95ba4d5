"""Univariate B-spline spaces on [0, 1].

Open knot vectors with controlled interior regularity, dyadically refined
levels with optional radical grading toward both endpoints, and pointwise
basis evaluation (values and derivatives of the nonzero functions at a
parameter location).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KnotVector",
    "make_open_knot_vector",
    "grade_point",
    "dyadic_level_knots",
    "eval_basis",
    "collocation_matrix",
]


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector on [0, 1] together with its polynomial degree.

    Parameters
    ----------
    degree : int
        Polynomial degree p >= 1.
    knots : ndarray
        Nondecreasing knots with first and last values 0 and 1, each of
        multiplicity exactly p + 1, and interior multiplicities <= p + 1.
    """

    degree: int
    knots: np.ndarray
    breakpoints: np.ndarray = field(init=False, repr=False, compare=False)
    multiplicities: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = self.degree
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        knots = np.ascontiguousarray(self.knots, dtype=np.float64)
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for an open vector")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must span [0, 1]")
        uniq, counts = np.unique(knots, return_counts=True)
        if counts[0] != p + 1 or counts[-1] != p + 1:
            raise ValueError("end knots must have multiplicity degree + 1")
        if uniq.size > 2 and np.max(counts[1:-1]) > p + 1:
            raise ValueError("interior knot multiplicity exceeds degree + 1")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "breakpoints", uniq)
        object.__setattr__(self, "multiplicities", counts)

    @property
    def n(self) -> int:
        """Dimension of the spline space."""
        return self.knots.size - self.degree - 1

    @property
    def n_elements(self) -> int:
        """Number of nonempty knot spans."""
        return self.breakpoints.size - 1

    def element_spans(self) -> np.ndarray:
        """Knot index i of each nonempty span [knots[i], knots[i+1])."""
        k = self.knots
        return np.nonzero(k[:-1] < k[1:])[0]

    def element_offsets(self) -> np.ndarray:
        """First active basis index on each element, in element order."""
        return self.element_spans() - self.degree


def make_open_knot_vector(degree, breakpoints, regularity) -> KnotVector:
    """Open knot vector over given breakpoints with C^regularity interior joins.

    Interior breakpoints are repeated degree - regularity times;
    regularity may range from -1 (discontinuous) to degree - 1.
    """
    p = int(degree)
    r = int(regularity)
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if not -1 <= r <= p - 1:
        raise ValueError(f"regularity must be in [-1, {p - 1}], got {r}")
    bpts = np.asarray(breakpoints, dtype=np.float64)
    if bpts.ndim != 1 or bpts.size < 2:
        raise ValueError("need at least two breakpoints")
    if np.any(np.diff(bpts) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    if bpts[0] != 0.0 or bpts[-1] != 1.0:
        raise ValueError("breakpoints must start at 0 and end at 1")
    mult = p - r
    knots = np.concatenate(
        [
            np.zeros(p + 1),
            np.repeat(bpts[1:-1], mult),
            np.ones(p + 1),
        ]
    )
    return KnotVector(p, knots)


def grade_point(t, gamma):
    """Radical grading map of [0, 1] onto itself with exponent gamma >= 1.

    Points are pulled toward both endpoints symmetrically; gamma = 1 is the
    identity.  Accepts scalars or arrays.
    """
    if gamma < 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {gamma}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("grading input must lie in [0, 1]")
    scale = 2.0 ** (gamma - 1.0)
    lower = scale * t**gamma
    upper = 1.0 - scale * (1.0 - t) ** gamma
    out = np.where(t <= 0.5, lower, upper)
    if out.ndim == 0:
        return float(out)
    return out


def dyadic_level_knots(level, degree, regularity, grading=1.0) -> KnotVector:
    """Knot vector of refinement level alpha: 2**alpha elements on [0, 1].

    Breakpoints are the graded images of the uniform dyadic grid; level 0
    gives the trivial open vector with a single element.
    """
    alpha = int(level)
    if alpha < 0:
        raise ValueError(f"level must be >= 0, got {alpha}")
    bpts = grade_point(np.linspace(0.0, 1.0, 2**alpha + 1), grading)
    # guard the exact-endpoint invariant against rounding in the power map
    bpts[0] = 0.0
    bpts[-1] = 1.0
    return make_open_knot_vector(degree, bpts, regularity)


def _find_span(kv: KnotVector, xi: float, side: str) -> int:
    """Knot index i of the nonempty span used to evaluate at xi.

    side "right" takes the limit from above (span with knots[i] <= xi <
    knots[i+1]), side "left" from below.  At the domain endpoints both
    sides fall back to the single adjacent element.
    """
    k = kv.knots
    p = kv.degree
    n = kv.n
    if side == "right":
        i = int(np.searchsorted(k, xi, side="right")) - 1
    elif side == "left":
        i = int(np.searchsorted(k, xi, side="left")) - 1
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    i = min(max(i, p), n - 1)
    # walk to a nonempty span (repeated interior knots leave zero-width spans)
    while k[i] == k[i + 1]:
        i = i - 1 if side == "left" else i + 1
    return i


def _ders_basis_funs(i, xi, p, nders, knots):
    """Values and derivatives of the p+1 basis functions active on span i.

    Returns an array of shape (nders + 1, p + 1); row k holds the k-th
    derivatives.  Derivatives of order > p are identically zero.
    """
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - knots[i + 1 - j]
        right[j] = knots[i + j] - xi
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    if nders == 0:
        return ders

    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, min(nders, p) + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    fac = float(p)
    for k in range(1, min(nders, p) + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


def eval_basis(kv: KnotVector, xi, max_deriv=0, side=None):
    """Evaluate the nonzero basis functions at parameter xi.

    Parameters
    ----------
    kv : KnotVector
    xi : float
        Location in [0, 1].
    max_deriv : int
        Highest derivative order requested.
    side : str, optional
        "right" (default) evaluates the limit from above, "left" from
        below; they differ only where the basis is discontinuous in the
        requested derivative.  xi = 1.0 always uses the left limit.

    Returns
    -------
    first : int
        Index of the first active basis function.
    table : ndarray, shape (max_deriv + 1, degree + 1)
        Row k holds the k-th derivatives of the active functions, so
        ``table[0]`` are the values.
    """
    xi = float(xi)
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"evaluation point {xi} outside [0, 1]")
    if max_deriv < 0:
        raise ValueError("max_deriv must be >= 0")
    if side is None:
        side = "left" if xi == 1.0 else "right"
    i = _find_span(kv, xi, side)
    table = _ders_basis_funs(i, xi, kv.degree, int(max_deriv), kv.knots)
    return i - kv.degree, table


def collocation_matrix(kv: KnotVector, points, deriv=0) -> np.ndarray:
    """Dense matrix of basis values (or a single derivative) at many points.

    Entry [j, m] is the deriv-th derivative of basis function m at
    points[j].  Shape (len(points), kv.n).
    """
    pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
    out = np.zeros((pts.size, kv.n))
    p = kv.degree
    for j, xi in enumerate(pts):
        first, table = eval_basis(kv, xi, max_deriv=deriv)
        out[j, first : first + p + 1] = table[deriv]
    return out
