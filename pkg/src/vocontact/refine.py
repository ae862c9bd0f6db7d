"""Knot insertion, order elevation, k-refinement and varying-order patches.

Every transformation runs on homogeneous control points ``(w*x, w*y, w)`` so
rational geometry is reproduced exactly up to rounding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .nurbs import (KNOT_TOL, KnotVector, NurbsCurve, NurbsPatch, _bivariate, _ders_basis,
                    unique_knots)


class RefinementError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


# --------------------------------------------------------------------------
# homogeneous kernels on (n, d) coefficient arrays

def _insert_once(U: np.ndarray, p: int, Pw: np.ndarray, u: float):
    """Boehm insertion of a single knot (NURBS book A5.1 with r=1)."""
    n = Pw.shape[0]
    k = int(np.searchsorted(U, u, side="right") - 1)
    k = min(max(k, p), n - 1)
    s = int(np.sum(np.abs(U - u) <= KNOT_TOL))
    if s + 1 > p:
        raise RefinementError(f"inserting {u} would exceed multiplicity {p}")
    Q = np.empty((n + 1,) + Pw.shape[1:])
    Q[: k - p + 1] = Pw[: k - p + 1]
    Q[k - s + 1:] = Pw[k - s:]
    for i in range(k - p + 1, k - s + 1):
        a = (u - U[i]) / (U[i + p] - U[i])
        Q[i] = a * Pw[i] + (1.0 - a) * Pw[i - 1]
    return np.insert(U, k + 1, u), Q


def _insert_many(U, p, Pw, knots):
    for u in knots:
        U, Pw = _insert_once(U, p, Pw, float(u))
    return U, Pw


def insertion_matrix(U: np.ndarray, p: int, knots) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``A`` with ``P_fine = A @ P_coarse`` after inserting ``knots``."""
    n = len(U) - p - 1
    U2, A = _insert_many(np.asarray(U, float), p, np.eye(n), knots)
    return U2, A


def _elevate(U: np.ndarray, p: int, Pw: np.ndarray, t: int):
    """Raise the order by ``t``: Bezier decomposition, per-segment elevation, recomposition."""
    if t == 0:
        return U.copy(), Pw.copy()
    kv = KnotVector(U, p)
    u_int, m_int = kv.interior()
    extra = [u for u, m in zip(u_int, m_int) for _ in range(p - m)]
    Ub, Pb = _insert_many(U, p, Pw, extra)
    nseg = len(u_int) + 1
    q = p + t
    E = np.zeros((q + 1, p + 1))
    for i in range(q + 1):
        for j in range(max(0, i - t), min(p, i) + 1):
            E[i, j] = comb(p, j) * comb(t, i - j) / comb(q, i)
    Pe = np.empty((nseg * q + 1,) + Pw.shape[1:])
    for s in range(nseg):
        Pe[s * q: s * q + q + 1] = np.tensordot(E, Pb[s * p: s * p + p + 1], axes=1)
    a, b = U[0], U[-1]
    # target: every distinct knot multiplicity raised by t
    Ut = np.concatenate([np.full(q + 1, a)] + [np.full(m + t, u) for u, m in zip(u_int, m_int)]
                        + [np.full(q + 1, b)])
    fill = [u for u, m in zip(u_int, m_int) for _ in range(q - (m + t))]
    Ubz, A = insertion_matrix(Ut, q, fill)
    flat = Pe.reshape(Pe.shape[0], -1)
    sol, *_ = np.linalg.lstsq(A, flat, rcond=None)
    return Ut, sol.reshape((A.shape[1],) + Pw.shape[1:])


# --------------------------------------------------------------------------
# curves

def insert_knot(curve: NurbsCurve, xi: float, times: int = 1) -> NurbsCurve:
    a, b = curve.kv.domain
    if not (a < xi < b):
        raise RefinementError(f"knot {xi} must lie strictly inside ({a}, {b})")
    U, Pw = _insert_many(curve.kv.knots, curve.degree, curve.homogeneous(), [xi] * times)
    return NurbsCurve.from_homogeneous(KnotVector(U, curve.degree), Pw)


def refine_knots(curve: NurbsCurve, knots: Sequence[float]) -> NurbsCurve:
    for u in sorted(knots):
        curve = insert_knot(curve, u)
    return curve


def elevate_order(curve: NurbsCurve, t: int) -> NurbsCurve:
    if t < 0:
        raise RefinementError("elevation steps must be non-negative")
    U, Pw = _elevate(curve.kv.knots, curve.degree, curve.homogeneous(), int(t))
    return NurbsCurve.from_homogeneous(KnotVector(U, curve.degree + t), Pw)


def k_refine(curve: NurbsCurve, target_order: int, knots: Sequence[float]) -> NurbsCurve:
    """Elevate to ``target_order`` first, then insert ``knots``."""
    if target_order < curve.degree:
        raise RefinementError("target order below current order")
    return refine_knots(elevate_order(curve, target_order - curve.degree), knots)


def uniform_subdivision_knots(kv: KnotVector, parts: int) -> list[float]:
    """Interior knots splitting every existing span into ``parts`` equal pieces."""
    u = kv.unique()
    out = []
    for a, b in zip(u[:-1], u[1:]):
        out.extend(a + (b - a) * np.arange(1, parts) / parts)
    return out


# --------------------------------------------------------------------------
# patches

def _patch_apply(patch: NurbsPatch, direction: str, fn):
    Pw = patch.homogeneous()
    if direction == "u":
        n1, n2, d = Pw.shape
        U, Q = fn(patch.kv_u.knots, patch.kv_u.degree, Pw.reshape(n1, n2 * d))
        p = len(U) - Q.shape[0] - 1
        return NurbsPatch.from_homogeneous(KnotVector(U, p), patch.kv_v, Q.reshape(-1, n2, d))
    if direction == "v":
        Pt = np.transpose(Pw, (1, 0, 2))
        n2, n1, d = Pt.shape
        U, Q = fn(patch.kv_v.knots, patch.kv_v.degree, Pt.reshape(n2, n1 * d))
        p = len(U) - Q.shape[0] - 1
        return NurbsPatch.from_homogeneous(patch.kv_u, KnotVector(U, p),
                                           np.transpose(Q.reshape(-1, n1, d), (1, 0, 2)))
    raise ValueError(direction)


def insert_knots_patch(patch: NurbsPatch, direction: str, knots: Sequence[float]) -> NurbsPatch:
    knots = sorted(float(k) for k in knots)
    if not knots:
        return patch
    return _patch_apply(patch, direction, lambda U, p, P: _insert_many(U, p, P, knots))


def elevate_patch(patch: NurbsPatch, direction: str, t: int) -> NurbsPatch:
    if t == 0:
        return patch
    return _patch_apply(patch, direction, lambda U, p, P: _elevate(U, p, P, t))


def reorient(patch: NurbsPatch, side: str) -> NurbsPatch:
    """Re-parameterise so that ``side`` becomes the eta=0 edge (same geometry)."""
    P, w, ku, kv = patch.points, patch.weights, patch.kv_u, patch.kv_v

    def flip(k: KnotVector) -> KnotVector:
        a, b = k.domain
        return KnotVector((a + b) - k.knots[::-1], k.degree)

    if side == "eta0":
        return patch
    if side == "eta1":
        # reverse both directions to keep the orientation
        return NurbsPatch(flip(ku), flip(kv), P[::-1, ::-1], w[::-1, ::-1])
    if side == "xi0":
        return NurbsPatch(flip(kv), ku, np.transpose(P, (1, 0, 2))[::-1], w.T[::-1])
    if side == "xi1":
        return NurbsPatch(kv, flip(ku), np.transpose(P, (1, 0, 2))[:, ::-1], w.T[:, ::-1])
    raise ConfigurationError(f"invalid contact side {side!r}")


# --------------------------------------------------------------------------
# varying-order patches

_PLAN_RE = re.compile(r"^\s*N(\d+)\s*(?:[-–]\s*N(\d+)(?:\s*[.·]\s*(\d+))?)?\s*$")


@dataclass(frozen=True)
class RefinementPlan:
    """Discretisation recipe for one body.

    ``order_u`` is the bulk order along the contact direction, ``order_v`` the
    transverse one (``None`` keeps the base order). The contact layer is
    k-refined to ``contact_order`` and then elevated ``extra_steps`` times.
    ``insert_u``/``insert_v`` are interior knots added to the base patch after
    elevation; ``subdivisions`` adds uniform splits of every base span.
    """

    order_u: int
    contact_order: int
    extra_steps: int = 0
    order_v: int | None = None
    subdivisions: tuple[int, int] = (1, 1)
    insert_u: tuple[float, ...] = ()
    insert_v: tuple[float, ...] = ()
    contact_side: str = "eta0"
    lagrange: bool = False

    def __post_init__(self):
        if self.contact_order < self.order_u:
            raise ConfigurationError("contact order must be >= bulk order")
        if self.extra_steps < 0:
            raise ConfigurationError("extra elevation steps must be >= 0")
        if self.contact_side not in ("eta0", "eta1", "xi0", "xi1"):
            raise ConfigurationError(f"invalid contact side {self.contact_side!r}")

    @property
    def effective_contact_order(self) -> int:
        return self.contact_order + self.extra_steps

    @property
    def is_uniform(self) -> bool:
        return self.contact_order == self.order_u and self.extra_steps == 0

    @property
    def name(self) -> str:
        if self.lagrange:
            return "L1"
        if self.is_uniform:
            return f"N{self.order_u}"
        if self.extra_steps == 0:
            return f"N{self.order_u}-N{self.contact_order}"
        return f"N{self.order_u}-N{self.contact_order}.{self.extra_steps}"

    def with_mesh(self, **kw) -> "RefinementPlan":
        from dataclasses import replace
        return replace(self, **kw)


def parse_plan(text: str, **mesh) -> RefinementPlan:
    """Parse ``"N2"``, ``"N2-N4"``, ``"N2-N2.2"`` (also ``N2-N2·2``) or ``"L1"``."""
    if text.strip().upper() == "L1":
        return RefinementPlan(1, 1, 0, order_v=1, lagrange=True, **mesh)
    m = _PLAN_RE.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse discretisation plan {text!r}")
    p = int(m.group(1))
    if m.group(2) is None:
        return RefinementPlan(p, p, 0, **mesh)
    return RefinementPlan(p, int(m.group(2)), int(m.group(3) or 0), **mesh)


@dataclass(frozen=True, eq=False)
class VoPatch:
    """Patch whose eta=0 boundary row is replaced by an independent layer curve.

    Control points are numbered layer first, then bulk rows ``j = 1..n2-1``
    lexicographically along u.
    """

    bulk: NurbsPatch
    layer: NurbsCurve
    name: str = ""

    def __post_init__(self):
        lu = unique_knots(self.layer.kv.knots)
        bu = self.bulk.kv_u.unique()
        if len(lu) != len(bu) or not np.allclose(lu, bu, atol=1e-12, rtol=0):
            raise RefinementError("layer and bulk element boundaries differ")

    @property
    def n_layer(self) -> int:
        return self.layer.n

    @property
    def n1(self) -> int:
        return self.bulk.kv_u.n

    @property
    def n2(self) -> int:
        return self.bulk.kv_v.n

    @property
    def n_cp(self) -> int:
        return self.n_layer + self.n1 * (self.n2 - 1)

    @property
    def p1(self) -> int:
        return self.bulk.kv_u.degree

    @property
    def p2(self) -> int:
        return self.bulk.kv_v.degree

    @property
    def pc(self) -> int:
        return self.layer.degree

    @property
    def n_elements(self) -> tuple[int, int]:
        return self.bulk.kv_u.n_spans, self.bulk.kv_v.n_spans

    def cp_index(self, i, j):
        """Global index of bulk control point (i, j), j >= 1."""
        return self.n_layer + (np.asarray(j) - 1) * self.n1 + np.asarray(i)

    def control_points(self) -> np.ndarray:
        return np.concatenate([self.layer.points,
                               self.bulk.points[:, 1:].transpose(1, 0, 2).reshape(-1, 2)])

    def weights(self) -> np.ndarray:
        return np.concatenate([self.layer.weights, self.bulk.weights[:, 1:].T.reshape(-1)])

    def layer_indices(self) -> np.ndarray:
        return np.arange(self.n_layer)

    def edge_indices(self, side: str) -> np.ndarray:
        """Control points on a patch edge (layer end points included on xi edges)."""
        if side == "eta0":
            return self.layer_indices()
        if side == "eta1":
            return self.cp_index(np.arange(self.n1), self.n2 - 1)
        j = np.arange(1, self.n2)
        if side == "xi0":
            return np.concatenate([[0], self.cp_index(0, j)])
        if side == "xi1":
            return np.concatenate([[self.n_layer - 1], self.cp_index(self.n1 - 1, j)])
        raise ConfigurationError(side)

    def dof_counts(self) -> tuple[int, int, int]:
        """(interface, bulk, total) degrees of freedom, two per control point."""
        inter = 2 * self.n_layer
        total = 2 * self.n_cp
        return inter, total - inter, total

    # -- element basis -------------------------------------------------------
    def element_spans(self, a: int, b: int) -> tuple[int, int, int]:
        return (self.bulk.kv_u.span_index(a), self.bulk.kv_v.span_index(b),
                self.layer.kv.span_index(a))

    def element_box(self, a: int, b: int) -> tuple[float, float, float, float]:
        su, sv, _ = self.element_spans(a, b)
        U, V = self.bulk.kv_u.knots, self.bulk.kv_v.knots
        return U[su], U[su + 1], V[sv], V[sv + 1]

    def element_connectivity(self, a: int, b: int) -> np.ndarray:
        su, sv, sl = self.element_spans(a, b)
        p1, p2, pc = self.p1, self.p2, self.pc
        iu = np.arange(su - p1, su + 1)
        jv = np.arange(sv - p2, sv + 1)
        if sv - p2 == 0:
            layer = np.arange(sl - pc, sl + 1)
            bulk = self.cp_index(iu[None, :], jv[1:, None]).ravel()
            return np.concatenate([layer, bulk])
        return self.cp_index(iu[None, :], jv[:, None]).ravel()

    def element_basis(self, a: int, b: int, xi, eta):
        """Basis values and parametric gradients on element (a, b).

        Returns ``R (m, n_e)`` and ``dR (m, 2, n_e)`` ordered as
        :meth:`element_connectivity`.
        """
        xi = np.atleast_1d(np.asarray(xi, float))
        eta = np.atleast_1d(np.asarray(eta, float))
        su, sv, sl = self.element_spans(a, b)
        p1, p2, pc = self.p1, self.p2, self.pc
        m = xi.shape[0]
        Nu = _ders_basis(self.bulk.kv_u.knots, p1, np.full(m, su), xi, 1)
        Nv = _ders_basis(self.bulk.kv_v.knots, p2, np.full(m, sv), eta, 1)
        iu = np.arange(su - p1, su + 1)
        jv = np.arange(sv - p2, sv + 1)
        if sv - p2 != 0:
            w = np.broadcast_to(self.bulk.weights[iu[:, None], jv[None, :]], (m, p1 + 1, p2 + 1))
            R, dR = _bivariate(Nu, Nv, w)
            # connectivity order is row-major in v then u
            return (R.transpose(0, 2, 1).reshape(m, -1),
                    dR.transpose(0, 1, 3, 2).reshape(m, 2, -1))
        Nl = _ders_basis(self.layer.kv.knots, pc, np.full(m, sl), xi, 1)
        wl = self.layer.weights[sl - pc: sl + 1]
        wb = self.bulk.weights[iu[:, None], jv[None, 1:]].T.reshape(-1)  # (p2*(p1+1),)
        # weighted B-spline products and their derivatives
        Bl = np.stack([Nl[:, 1] * Nv[:, 0, :1], Nl[:, 0] * Nv[:, 1, :1]], axis=1)  # d/dxi, d/deta
        B0l = Nl[:, 0] * Nv[:, 0, :1]
        B0b = (Nv[:, 0, 1:, None] * Nu[:, 0, None, :]).reshape(m, -1)
        Bb = np.stack([(Nv[:, 0, 1:, None] * Nu[:, 1, None, :]).reshape(m, -1),
                       (Nv[:, 1, 1:, None] * Nu[:, 0, None, :]).reshape(m, -1)], axis=1)
        w = np.concatenate([wl, wb])
        B0 = np.concatenate([B0l, B0b], axis=1) * w
        B1 = np.concatenate([Bl, Bb], axis=2) * w
        W = B0.sum(axis=1)
        dW = B1.sum(axis=2)
        R = B0 / W[:, None]
        dR = (B1 - R[:, None, :] * dW[:, :, None]) / W[:, None, None]
        return R, dR

    def evaluate(self, a: int, b: int, xi, eta):
        R, dR = self.element_basis(a, b, xi, eta)
        X = self.control_points()[self.element_connectivity(a, b)]
        return R @ X, np.einsum("mdk,kj->mdj", dR, X)


def vo_element_basis(patch: VoPatch, element, xi, eta):
    """Basis of element ``(a, b)`` (span indices) at the given parameters."""
    a, b = element
    return patch.element_basis(a, b, xi, eta)


def _split_knots(plan: RefinementPlan, kv: KnotVector, extra: tuple, parts: int) -> list[float]:
    knots = list(extra)
    if parts > 1:
        knots += uniform_subdivision_knots(kv, parts)
    return sorted(knots)


def bulk_patch(base: NurbsPatch, plan: RefinementPlan) -> NurbsPatch:
    """Reoriented base, elevated to the bulk orders, then knot-refined."""
    base = reorient(base, plan.contact_side)
    ku = _split_knots(plan, base.kv_u, plan.insert_u, plan.subdivisions[0])
    kvv = _split_knots(plan, base.kv_v, plan.insert_v, plan.subdivisions[1])
    p1, p2 = base.degrees
    if plan.order_u < p1:
        raise ConfigurationError(f"bulk order {plan.order_u} below geometric order {p1}")
    q2 = p2 if plan.order_v is None else plan.order_v
    if q2 < p2:
        raise ConfigurationError(f"transverse order {q2} below geometric order {p2}")
    patch = elevate_patch(elevate_patch(base, "u", plan.order_u - p1), "v", q2 - p2)
    return insert_knots_patch(insert_knots_patch(patch, "u", ku), "v", kvv)


def build_vo_patch(base: NurbsPatch, plan: RefinementPlan) -> VoPatch:
    if plan.lagrange:
        return lagrange_patch(base, plan)
    bulk = bulk_patch(base, plan)
    oriented = reorient(base, plan.contact_side)
    ku = _split_knots(plan, oriented.kv_u, plan.insert_u, plan.subdivisions[0])
    layer = k_refine(oriented.boundary_curve("eta0"), plan.contact_order, ku)
    layer = elevate_order(layer, plan.extra_steps)
    return VoPatch(bulk, layer, plan.name)


def lagrange_patch(base: NurbsPatch, plan: RefinementPlan) -> VoPatch:
    """Bilinear patch interpolating the exact geometry at the refined knot grid."""
    ref = bulk_patch(base, RefinementPlan(max(base.degrees[0], 1), max(base.degrees[0], 1),
                                          order_v=None, subdivisions=plan.subdivisions,
                                          insert_u=plan.insert_u, insert_v=plan.insert_v,
                                          contact_side=plan.contact_side))
    u = ref.kv_u.unique()
    v = ref.kv_v.unique()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = ref.evaluate(uu.ravel(), vv.ravel()).reshape(len(u), len(v), 2)
    ku = KnotVector(np.concatenate([[u[0]], u, [u[-1]]]), 1)
    kv = KnotVector(np.concatenate([[v[0]], v, [v[-1]]]), 1)
    lin = NurbsPatch(ku, kv, pts, np.ones(pts.shape[:2]))
    return VoPatch(lin, lin.boundary_curve("eta0"), "L1")


def standard_vo(patch: NurbsPatch, name: str = "") -> VoPatch:
    """Wrap a plain patch (layer = its own eta0 boundary row)."""
    return VoPatch(patch, patch.boundary_curve("eta0"), name)
