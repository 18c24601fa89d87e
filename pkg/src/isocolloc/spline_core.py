"""B-spline and NURBS spaces on the unit interval and the unit square.

Univariate bases are evaluated with the Cox-de Boor recursion in the
triangular-table form of Piegl & Tiller (algorithms A2.1 and A2.3), vectorized
over evaluation points. Periodic spaces reuse the same kernel on an extended
knot vector whose first ``p`` and last ``p`` basis functions are identified.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "KnotVector",
    "SplineSpace1D",
    "BasisSpan",
    "TensorSpace",
    "make_open_uniform",
    "make_open",
    "make_periodic_uniform",
    "find_span",
    "basis_ders",
    "basis_span",
    "greville",
    "eval_spline",
    "tensor_basis_ders",
    "nurbs_basis_2d",
    "DERIV_ORDERS_2D",
]

_DOMAIN_TOL = 1e-12

# (order in xi, order in eta) for each row returned by tensor_basis_ders
DERIV_ORDERS_2D = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Nondecreasing knot sequence with a polynomial degree.

    Interior breakpoints must be simple (maximal smoothness). End values may
    be repeated up to ``degree + 1`` times; with exactly ``degree + 1``
    repetitions at both ends the vector is *open*.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        p = int(self.degree)
        if knots.ndim != 1:
            raise ValueError("knots must be a 1D sequence")
        if p < 0:
            raise ValueError(f"degree must be nonnegative, got {p}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if knots.size - p - 1 < p + 1:
            raise ValueError(
                f"{knots.size} knots give {knots.size - p - 1} basis functions, "
                f"need at least {p + 1} for degree {p}"
            )
        values, counts = np.unique(knots, return_counts=True)
        if counts[0] > p + 1 or counts[-1] > p + 1:
            raise ValueError("end knots repeated more than degree+1 times")
        if np.any(counts[1:-1] > 1):
            raise ValueError("interior knots must have multiplicity one")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "degree", p)

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, n={self.n}, n_el={self.n_el})"

    @property
    def p(self) -> int:
        return self.degree

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple:
        return float(self.knots[self.degree]), float(self.knots[self.n])

    @property
    def is_open(self) -> bool:
        p = self.degree
        k = self.knots
        return bool(np.all(k[: p + 1] == k[0]) and np.all(k[-p - 1 :] == k[-1]))

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knots inside the domain, endpoints included."""
        lo, hi = self.domain
        k = np.unique(self.knots)
        return k[(k >= lo) & (k <= hi)]

    @property
    def elements(self) -> np.ndarray:
        """Array of shape (n_el, 2) with the nonzero knot spans."""
        b = self.breakpoints
        return np.column_stack([b[:-1], b[1:]])

    @property
    def n_el(self) -> int:
        return self.breakpoints.size - 1

    @property
    def meshsize(self) -> float:
        return float(np.max(np.diff(self.breakpoints)))

    h = meshsize


def make_open(breakpoints: Sequence[float], p: int) -> KnotVector:
    """Open knot vector with simple interior knots at ``breakpoints``."""
    b = np.asarray(breakpoints, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("need at least two breakpoints")
    knots = np.concatenate([np.full(p, b[0]), b, np.full(p, b[-1])])
    return KnotVector(knots, p)


def make_open_uniform(n_el: int, p: int) -> KnotVector:
    """Open knot vector on [0, 1] with ``n_el`` equal elements.

    >>> make_open_uniform(3, 3).knots * 3
    array([0., 0., 0., 0., 1., 2., 3., 3., 3., 3.])
    """
    if int(n_el) != n_el or n_el < 1:
        raise ValueError(f"n_el must be a positive integer, got {n_el}")
    if int(p) != p or p < 1:
        raise ValueError(f"degree must be a positive integer, got {p}")
    return make_open(np.linspace(0.0, 1.0, int(n_el) + 1), int(p))


def find_span(kv: KnotVector, x) -> np.ndarray:
    """Index ``s`` of the knot span ``[t_s, t_{s+1})`` containing each ``x``.

    The right end of the domain is assigned to the last nonzero span so that
    open bases are interpolatory there.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = kv.domain
    if np.any(x < lo - _DOMAIN_TOL) or np.any(x > hi + _DOMAIN_TOL):
        bad = x[(x < lo - _DOMAIN_TOL) | (x > hi + _DOMAIN_TOL)].ravel()[0]
        raise ValueError(f"point {bad!r} outside the domain [{lo}, {hi}]")
    span = np.searchsorted(kv.knots, x, side="right") - 1
    return np.clip(span, kv.degree, kv.n - 1)


def _ders_table(knots, p, span, x, r):
    """Nonzero basis derivatives, shape (npts, r+1, p+1). Requires r <= p."""
    npts = x.size
    ndu = np.zeros((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(npts)
        for k in range(j):
            # lower triangle stores knot differences
            ndu[:, j, k] = right[:, k + 1] + left[:, j - k]
            temp = ndu[:, k, j - 1] / ndu[:, j, k]
            ndu[:, k, j] = saved + right[:, k + 1] * temp
            saved = left[:, j - k] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, r + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    a = np.zeros((npts, 2, p + 1))
    for i in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, r + 1):
            d = np.zeros(npts)
            ik, pk = i - k, p - k
            if i >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, ik]
                d += a[:, s2, 0] * ndu[:, ik, pk]
            j1 = 1 if ik >= -1 else -ik
            j2 = k - 1 if i - 1 <= pk else p - i
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, ik + j]
                d += a[:, s2, j] * ndu[:, ik + j, pk]
            if i <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, i]
                d += a[:, s2, k] * ndu[:, i, pk]
            ders[:, k, i] = d
            s1, s2 = s2, s1
    for k in range(1, r + 1):
        ders[:, k, :] *= factorial(p) / factorial(p - k)
    return ders


def basis_ders(kv: KnotVector, x, r: int = 0):
    """Derivatives up to order ``r`` of the nonzero basis functions at ``x``.

    Returns ``(first, values)``: ``first`` has the shape of ``x`` and holds the
    index of the first active function; ``values`` has shape
    ``x.shape + (r+1, p+1)``. Orders above ``p`` are returned as zeros.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    p = kv.degree
    span = find_span(kv, xf)
    rr = min(r, p)
    table = _ders_table(kv.knots, p, span, xf, rr)
    if r > rr:
        table = np.concatenate([table, np.zeros((xf.size, r - rr, p + 1))], axis=1)
    return (span - p).reshape(shape), table.reshape(shape + (r + 1, p + 1))


class BasisSpan(NamedTuple):
    first_index: int
    values: np.ndarray


def basis_span(kv: KnotVector, x: float, r: int = 0) -> BasisSpan:
    """Values and derivatives up to order ``r`` of the ``p+1`` active functions."""
    if r < 0 or r > kv.degree:
        raise ValueError(f"derivative order must be in [0, {kv.degree}], got {r}")
    first, values = basis_ders(kv, float(x), r)
    return BasisSpan(int(first), values)


@dataclass(frozen=True, eq=False)
class SplineSpace1D:
    """Open or periodic univariate spline space on [0, 1].

    For the periodic kind ``kv`` is the extended knot vector and basis
    function ``i`` is identified with ``i + n_el`` for ``i < p``.
    """

    kv: KnotVector
    periodic: bool = False

    def __post_init__(self):
        if not self.periodic and not self.kv.is_open:
            raise ValueError("open spline spaces need an open knot vector")

    @classmethod
    def open(cls, kv: KnotVector) -> "SplineSpace1D":
        return cls(kv, periodic=False)

    @property
    def kind(self) -> str:
        return "periodic" if self.periodic else "open"

    @property
    def degree(self) -> int:
        return self.kv.degree

    @property
    def n_el(self) -> int:
        return self.kv.n_el

    @property
    def dim(self) -> int:
        return self.kv.n_el if self.periodic else self.kv.n

    @property
    def elements(self) -> np.ndarray:
        return self.kv.elements

    @property
    def breakpoints(self) -> np.ndarray:
        return self.kv.breakpoints

    @property
    def meshsize(self) -> float:
        return self.kv.meshsize

    def dof(self, index):
        """Global degree of freedom of (extended) basis function ``index``."""
        index = np.asarray(index)
        return index % self.dim if self.periodic else index

    def basis_matrix(self, x, r: int = 0) -> np.ndarray:
        """Dense matrix ``B[i, j]`` = r-th derivative of basis ``j`` at ``x[i]``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        first, vals = basis_ders(self.kv, x, r)
        p = self.degree
        B = np.zeros((x.size, self.dim))
        rows = np.repeat(np.arange(x.size), p + 1)
        cols = self.dof(first[:, None] + np.arange(p + 1)).ravel()
        np.add.at(B, (rows, cols), vals[:, r, :].ravel())
        return B

    def greville(self) -> np.ndarray:
        """Greville abscissae of the ``dim`` basis functions (sorted)."""
        g = greville(self.kv)
        if not self.periodic:
            return g
        lo, hi = self.kv.domain
        g = lo + np.mod(g[: self.dim] - lo, hi - lo)
        g[np.isclose(g, hi, rtol=0, atol=1e-13)] = lo
        return np.sort(g)


def make_periodic_uniform(n_el: int, p: int) -> SplineSpace1D:
    """Periodic space of degree ``p`` with ``n_el`` equal elements on [0, 1]."""
    return make_periodic(np.linspace(0.0, 1.0, int(n_el) + 1), p)


def make_periodic(breakpoints: Sequence[float], p: int) -> SplineSpace1D:
    b = np.asarray(breakpoints, dtype=float)
    n_el = b.size - 1
    if p < 1:
        raise ValueError(f"degree must be positive, got {p}")
    if n_el < p:
        raise ValueError(f"periodic space of degree {p} needs at least {p} elements, got {n_el}")
    period = b[-1] - b[0]
    knots = np.concatenate([b[n_el - p : n_el] - period, b, b[1 : p + 1] + period])
    return SplineSpace1D(KnotVector(knots, p), periodic=True)


def greville(kv: Union[KnotVector, SplineSpace1D]) -> np.ndarray:
    """Greville abscissae ``(t_{i+1} + ... + t_{i+p}) / p``.

    >>> greville(make_open_uniform(3, 3)) * 9
    array([0., 1., 3., 6., 8., 9.])
    """
    if isinstance(kv, SplineSpace1D):
        return kv.greville()
    p = kv.degree
    if p == 0:
        return 0.5 * (kv.knots[:-1] + kv.knots[1:])
    t = kv.knots
    csum = np.concatenate([[0.0], np.cumsum(t)])
    i = np.arange(kv.n)
    return (csum[i + p + 1] - csum[i + 1]) / p


def eval_spline(space: SplineSpace1D, coeffs, x, r: int = 0):
    """r-th derivative of ``sum_i coeffs[i] * N_i`` at ``x``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} coefficients, got shape {coeffs.shape}")
    x = np.asarray(x, dtype=float)
    first, vals = basis_ders(space.kv, x, r)
    idx = space.dof(first[..., None] + np.arange(space.degree + 1))
    return np.sum(coeffs[idx] * vals[..., r, :], axis=-1)


@dataclass(frozen=True, eq=False)
class TensorSpace:
    """Tensor product of two open spaces, optionally rational.

    Basis function ``(i, j)`` has linear index ``k = i + j * n`` (x-fastest,
    zero-based). ``weights`` has shape ``(n, m)`` when given.
    """

    space_x: SplineSpace1D
    space_y: SplineSpace1D
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.space_x.periodic or self.space_y.periodic:
            raise ValueError("tensor spaces are built from open factors")
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != (self.n, self.m):
                raise ValueError(f"weights must have shape {(self.n, self.m)}, got {w.shape}")
            if np.any(w <= 0):
                raise ValueError("NURBS weights must be strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.space_x.dim

    @property
    def m(self) -> int:
        return self.space_y.dim

    @property
    def dim(self) -> int:
        return self.n * self.m

    @property
    def degrees(self) -> tuple:
        return self.space_x.degree, self.space_y.degree

    def index(self, i, j):
        return np.asarray(i) + np.asarray(j) * self.n

    def unindex(self, k):
        k = np.asarray(k)
        return k % self.n, k // self.n

    def boundary_mask(self) -> np.ndarray:
        """True for basis functions that do not vanish on the boundary."""
        i, j = self.unindex(np.arange(self.dim))
        return (i == 0) | (i == self.n - 1) | (j == 0) | (j == self.m - 1)


def tensor_basis_ders(ts: TensorSpace, xi, eta, r: int = 2):
    """Parametric derivatives of the active tensor (or rational) basis.

    Returns ``(indices, ders)`` with ``indices`` of shape ``(N, nloc)`` and
    ``ders`` of shape ``(N, nd, nloc)``; the rows of ``ders`` follow
    ``DERIV_ORDERS_2D`` truncated to total order ``r`` (nd = 1, 3 or 6).
    """
    if r not in (0, 1, 2):
        raise ValueError("only derivative orders up to 2 are supported")
    xi = np.atleast_1d(np.asarray(xi, dtype=float)).ravel()
    eta = np.atleast_1d(np.asarray(eta, dtype=float)).ravel()
    p, q = ts.degrees
    fx, bx = basis_ders(ts.space_x.kv, xi, r)
    fy, by = basis_ders(ts.space_y.kv, eta, r)
    ix = fx[:, None] + np.arange(p + 1)
    iy = fy[:, None] + np.arange(q + 1)
    indices = (ix[:, None, :] + iy[:, :, None] * ts.n).reshape(xi.size, -1)
    orders = [o for o in DERIV_ORDERS_2D if sum(o) <= r]
    # entries ordered (j, i) so that the flattened local index matches `indices`
    ders = np.stack(
        [(by[:, b, :, None] * bx[:, a, None, :]).reshape(xi.size, -1) for a, b in orders],
        axis=1,
    )
    if ts.weights is None:
        return indices, ders
    w = ts.weights.T.ravel()[indices]
    A = ders * w[:, None, :]
    W = A.sum(axis=2)
    R = np.empty_like(A)
    R[:, 0] = A[:, 0] / W[:, 0, None]
    if r >= 1:
        for d in (1, 2):
            R[:, d] = (A[:, d] - R[:, 0] * W[:, d, None]) / W[:, 0, None]
    if r >= 2:
        Rx, Ry = R[:, 1], R[:, 2]
        Wx, Wy = W[:, 1, None], W[:, 2, None]
        R[:, 3] = (A[:, 3] - 2 * Rx * Wx - R[:, 0] * W[:, 3, None]) / W[:, 0, None]
        R[:, 4] = (A[:, 4] - Rx * Wy - Ry * Wx - R[:, 0] * W[:, 4, None]) / W[:, 0, None]
        R[:, 5] = (A[:, 5] - 2 * Ry * Wy - R[:, 0] * W[:, 5, None]) / W[:, 0, None]
    return indices, R


def nurbs_basis_2d(ts: TensorSpace, xi: float, eta: float, r: int = 2):
    """Active basis functions at one point ``(xi, eta)``.

    Returns ``(indices, ders)`` with ``ders[d, a]`` the derivative listed in
    ``DERIV_ORDERS_2D[d]`` of function ``indices[a]``.
    """
    p, q = ts.degrees
    if r > min(p, q):
        raise ValueError(f"derivative order {r} exceeds min degree {min(p, q)}")
    indices, ders = tensor_basis_ders(ts, xi, eta, r)
    return indices[0], ders[0]
