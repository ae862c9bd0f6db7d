"""B-spline and NURBS evaluation on open knot vectors.

All evaluation routines come in two flavours: a scalar one that mirrors the
textbook signature, and an ``*_array`` one vectorised over many parameter
values, which is what the assembly code uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

KNOT_TOL = 1e-12


class DomainError(ValueError):
    """Parameter outside the knot-vector domain."""


@dataclass(frozen=True, eq=False)
class KnotVector:
    knots: np.ndarray
    degree: int

    def __post_init__(self):
        U = np.asarray(self.knots, dtype=float).copy()
        U.setflags(write=False)
        object.__setattr__(self, "knots", U)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if p < 0:
            raise ValueError("degree must be non-negative")
        if np.any(np.diff(U) < 0):
            raise ValueError("knot vector must be non-decreasing")
        n = len(U) - p - 1
        if n < p + 1:
            raise ValueError(f"too few knots ({len(U)}) for degree {p}")
        for end in (U[0], U[-1]):
            m = int(np.sum(np.abs(U - end) <= KNOT_TOL))
            if m != p + 1:
                raise ValueError(
                    f"knot vector is not open: end value {end} has multiplicity {m}, expected {p + 1}"
                )

    @property
    def p(self) -> int:
        return self.degree

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def unique(self) -> np.ndarray:
        return unique_knots(self.knots)

    def multiplicities(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct knot values and their multiplicities."""
        u = self.unique()
        m = np.array([np.sum(np.abs(self.knots - v) <= KNOT_TOL) for v in u])
        return u, m

    def interior(self) -> tuple[np.ndarray, np.ndarray]:
        u, m = self.multiplicities()
        return u[1:-1], m[1:-1]

    @property
    def n_spans(self) -> int:
        return len(self.unique()) - 1

    def span_index(self, k: int) -> int:
        """Knot index ``i`` with ``knots[i] < knots[i+1]`` for the k-th non-empty span."""
        starts = np.nonzero(np.diff(self.knots) > KNOT_TOL)[0]
        return int(starts[k])

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return (self.degree == other.degree and len(self.knots) == len(other.knots)
                and np.allclose(self.knots, other.knots, atol=KNOT_TOL, rtol=0))

    def __repr__(self):
        return f"KnotVector(p={self.degree}, knots={np.array2string(self.knots, precision=4)})"


def unique_knots(U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    keep = np.concatenate([[True], np.diff(U) > KNOT_TOL])
    return U[keep]


def open_knot_vector(degree: int, interior: Sequence[float] = (), a: float = 0.0, b: float = 1.0) -> KnotVector:
    """Open knot vector on ``[a, b]`` with the given (sorted) interior knots."""
    U = np.concatenate([np.full(degree + 1, a), np.sort(np.asarray(interior, float)),
                        np.full(degree + 1, b)])
    return KnotVector(U, degree)


def _check_domain(kv: KnotVector, xi) -> np.ndarray:
    x = np.asarray(xi, dtype=float)
    a, b = kv.domain
    tol = KNOT_TOL * max(1.0, abs(b - a))
    if x.size and not (a - tol <= x.min() and x.max() <= b + tol):  # also catches NaN
        bad = x[(x < a - tol) | (x > b + tol) | ~np.isfinite(x)]
        raise DomainError(f"parameter {bad.ravel()[0]!r} outside domain [{a}, {b}]")
    return np.clip(x, a, b)


def find_span(kv: KnotVector, xi: float) -> int:
    """Index ``i`` with ``knots[i] <= xi < knots[i+1]``; the right end maps to the last span."""
    return int(find_spans(kv, np.array([xi]))[0])


def find_spans(kv: KnotVector, xi, checked: bool = False) -> np.ndarray:
    x = np.asarray(xi, dtype=float) if checked else _check_domain(kv, xi)
    U = kv.knots
    s = np.searchsorted(U, x, side="right") - 1
    return np.clip(s, kv.degree, kv.n - 1)


def _raise_degree(U, spans, q, lower, x=None):
    """One Cox-de Boor step from degree ``q-1`` to ``q`` on the non-zero functions of each span.

    ``lower`` (m, q) holds ``N_{s-q+1..s, q-1}``. With ``x`` the result is the
    degree ``q`` basis, otherwise the derivative recurrence
    ``q (N_i / (u_{i+q} - u_i) - N_{i+1} / (u_{i+q+1} - u_{i+1}))`` is applied.
    """
    m = lower.shape[0]
    i = spans[:, None] - q + np.arange(q + 1)
    pad = np.zeros((m, q + 2))
    pad[:, 1:q + 1] = lower
    d1 = U[i + q] - U[i]
    d2 = U[i + q + 1] - U[i + 1]
    a = np.divide(1.0, d1, out=np.zeros_like(d1), where=d1 > 0)
    b = np.divide(1.0, d2, out=np.zeros_like(d2), where=d2 > 0)
    if x is None:
        return q * (pad[:, :q + 1] * a - pad[:, 1:] * b)
    return (x[:, None] - U[i]) * a * pad[:, :q + 1] + (U[i + q + 1] - x[:, None]) * b * pad[:, 1:]


def _ders_basis(U: np.ndarray, p: int, spans: np.ndarray, x: np.ndarray, nd: int) -> np.ndarray:
    """Non-zero basis functions and derivatives, vectorised over points and functions.

    Returns array (m, nd+1, p+1).
    """
    m = x.shape[0]
    levels = [np.ones((m, 1))]
    for q in range(1, p + 1):
        levels.append(_raise_degree(U, spans, q, levels[-1], x))
    ders = np.zeros((m, nd + 1, p + 1))
    ders[:, 0] = levels[p]
    for k in range(1, min(nd, p) + 1):
        d = levels[p - k]
        for q in range(p - k + 1, p + 1):
            d = _raise_degree(U, spans, q, d)
        ders[:, k] = d
    return ders


def bspline_basis(kv: KnotVector, xi: float) -> np.ndarray:
    """The ``p+1`` non-zero B-spline values at ``xi``."""
    span = find_span(kv, xi)
    x = _check_domain(kv, [xi])
    return _ders_basis(kv.knots, kv.degree, np.array([span]), x, 0)[0, 0]


def bspline_basis_ders(kv: KnotVector, xi: float, k: int) -> np.ndarray:
    """Table ``(k+1, p+1)``: row ``d`` holds the d-th derivatives. Rows beyond ``p`` are zero."""
    span = find_span(kv, xi)
    x = _check_domain(kv, [xi])
    return _ders_basis(kv.knots, kv.degree, np.array([span]), x, k)[0]


def bspline_basis_ders_array(kv: KnotVector, xi, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised basis derivatives: ``(spans (m,), ders (m, k+1, p+1))``."""
    x = np.atleast_1d(_check_domain(kv, xi))
    spans = find_spans(kv, x, checked=True)
    return spans, _ders_basis(kv.knots, kv.degree, spans, x, k)


def rationalize(ders: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Quotient rule on weighted B-spline derivatives (up to second order).

    ``ders`` is (m, nd+1, p+1) and ``w`` the (m, p+1) local weights.
    """
    nd = ders.shape[1] - 1
    if nd > 2:
        raise ValueError("rational derivatives implemented up to order 2")
    wN = ders * w[:, None, :]
    W = wN.sum(axis=2)  # (m, nd+1)
    R = np.empty_like(wN)
    R[:, 0] = wN[:, 0] / W[:, 0, None]
    if nd >= 1:
        R[:, 1] = (wN[:, 1] - R[:, 0] * W[:, 1, None]) / W[:, 0, None]
    if nd >= 2:
        R[:, 2] = (wN[:, 2] - 2.0 * R[:, 1] * W[:, 1, None] - R[:, 0] * W[:, 2, None]) / W[:, 0, None]
    return R


class ControlPoint2D(NamedTuple):
    x: float
    y: float
    w: float = 1.0


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    """Planar NURBS curve. ``points`` is (n, 2), ``weights`` is (n,)."""

    kv: KnotVector
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        P = np.array(self.points, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if P.shape[0] != self.kv.n or w.shape[0] != self.kv.n:
            raise ValueError(f"expected {self.kv.n} control points, got {P.shape[0]} / {w.shape[0]} weights")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        P.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_control_points(cls, kv: KnotVector, cps: Sequence[ControlPoint2D]) -> "NurbsCurve":
        cps = [ControlPoint2D(*c) for c in cps]
        return cls(kv, [(c.x, c.y) for c in cps], [c.w for c in cps])

    @property
    def degree(self) -> int:
        return self.kv.degree

    @property
    def n(self) -> int:
        return self.kv.n

    def homogeneous(self) -> np.ndarray:
        return np.column_stack([self.points * self.weights[:, None], self.weights])

    @classmethod
    def from_homogeneous(cls, kv: KnotVector, Pw: np.ndarray) -> "NurbsCurve":
        w = Pw[:, -1]
        return cls(kv, Pw[:, :-1] / w[:, None], w)

    def with_points(self, points: np.ndarray) -> "NurbsCurve":
        return NurbsCurve(self.kv, points, self.weights)

    def basis_array(self, xi, nd: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Rational basis at many parameters: ``(conn (m, p+1), R (m, nd+1, p+1))``."""
        spans, ders = bspline_basis_ders_array(self.kv, xi, nd)
        p = self.degree
        conn = spans[:, None] - p + np.arange(p + 1)[None, :]
        return conn, rationalize(ders, self.weights[conn])

    def evaluate(self, xi, nd: int = 0) -> np.ndarray:
        """Points and parametric derivatives, shape (m, nd+1, 2)."""
        conn, R = self.basis_array(xi, nd)
        return np.einsum("mdk,mkj->mdj", R, self.points[conn])


def nurbs_basis_1d(curve: NurbsCurve, xi: float, nd: int = 0) -> np.ndarray:
    """Rational basis (and derivatives) at ``xi``: table ``(nd+1, p+1)``."""
    return curve.basis_array(np.array([xi]), nd)[1][0]


def curve_point(curve: NurbsCurve, xi: float, nd: int = 0) -> np.ndarray:
    """Curve point, or ``(nd+1, 2)`` table of the point and its parametric derivatives."""
    out = curve.evaluate(np.array([xi]), nd)[0]
    return out[0] if nd == 0 else out


@dataclass(frozen=True, eq=False)
class NurbsPatch:
    """Bivariate NURBS patch; ``points`` is (n1, n2, 2), ``weights`` (n1, n2).

    The first index runs along ``kv_u`` (xi), the second along ``kv_v`` (eta).
    """

    kv_u: KnotVector
    kv_v: KnotVector
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        P = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        shape = (self.kv_u.n, self.kv_v.n)
        if P.shape != shape + (2,) or w.shape != shape:
            raise ValueError(f"control net must be {shape}, got {P.shape[:2]} / {w.shape}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        P.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)

    @property
    def degrees(self) -> tuple[int, int]:
        return self.kv_u.degree, self.kv_v.degree

    @property
    def shape(self) -> tuple[int, int]:
        return self.kv_u.n, self.kv_v.n

    def homogeneous(self) -> np.ndarray:
        return np.concatenate([self.points * self.weights[..., None], self.weights[..., None]], axis=2)

    @classmethod
    def from_homogeneous(cls, kv_u, kv_v, Pw) -> "NurbsPatch":
        w = Pw[..., -1]
        return cls(kv_u, kv_v, Pw[..., :-1] / w[..., None], w)

    def boundary_curve(self, side: str) -> NurbsCurve:
        """Boundary curve on ``side`` in {'eta0', 'eta1', 'xi0', 'xi1'}."""
        if side == "eta0":
            return NurbsCurve(self.kv_u, self.points[:, 0], self.weights[:, 0])
        if side == "eta1":
            return NurbsCurve(self.kv_u, self.points[:, -1], self.weights[:, -1])
        if side == "xi0":
            return NurbsCurve(self.kv_v, self.points[0, :], self.weights[0, :])
        if side == "xi1":
            return NurbsCurve(self.kv_v, self.points[-1, :], self.weights[-1, :])
        raise ValueError(f"unknown side {side!r}")

    def basis_array(self, xi, eta):
        """Bivariate rational basis with first derivatives at paired parameters.

        Returns ``(iu, iv, R, dR)`` with local index grids ``iu (m, p1+1)``,
        ``iv (m, p2+1)``, ``R (m, p1+1, p2+1)`` and ``dR (m, 2, p1+1, p2+1)``.
        """
        su, Nu = bspline_basis_ders_array(self.kv_u, xi, 1)
        sv, Nv = bspline_basis_ders_array(self.kv_v, eta, 1)
        p1, p2 = self.degrees
        iu = su[:, None] - p1 + np.arange(p1 + 1)
        iv = sv[:, None] - p2 + np.arange(p2 + 1)
        w = self.weights[iu[:, :, None], iv[:, None, :]]
        return (iu, iv) + _bivariate(Nu, Nv, w)

    def evaluate(self, xi, eta, ders: bool = False):
        iu, iv, R, dR = self.basis_array(np.atleast_1d(xi), np.atleast_1d(eta))
        X = self.points[iu[:, :, None], iv[:, None, :]]
        pt = np.einsum("mab,mabj->mj", R, X)
        if not ders:
            return pt
        return pt, np.einsum("mdab,mabj->mdj", dR, X)


def _bivariate(Nu, Nv, w):
    """Tensor-product rational basis from univariate tables (m, 2, k) and weights (m, k1, k2)."""
    B = Nu[:, 0, :, None] * Nv[:, 0, None, :]
    Bu = Nu[:, 1, :, None] * Nv[:, 0, None, :]
    Bv = Nu[:, 0, :, None] * Nv[:, 1, None, :]
    W = np.einsum("mab,mab->m", w, B)
    Wu = np.einsum("mab,mab->m", w, Bu)
    Wv = np.einsum("mab,mab->m", w, Bv)
    R = w * B / W[:, None, None]
    dR = np.stack([(w * Bu - R * Wu[:, None, None]) / W[:, None, None],
                   (w * Bv - R * Wv[:, None, None]) / W[:, None, None]], axis=1)
    return R, dR


def surface_point(patch: NurbsPatch, xi: float, eta: float, ders: bool = False):
    """Patch point; with ``ders`` also the (2, 2) table of d/dxi and d/deta."""
    out = patch.evaluate(xi, eta, ders)
    if ders:
        return out[0][0], out[1][0]
    return out[0]
