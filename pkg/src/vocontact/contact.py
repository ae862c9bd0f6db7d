"""Gauss-point-to-surface penalty contact with Coulomb friction.

Conventions
-----------
``t`` is the contact traction acting on the slave per unit slave length,
``t = t_N n - t_T`` with ``t_N = -eps_N gN`` (``gN < 0`` in penetration) and
``t_T`` the tangential traction built from the stick vector
``x_m(xi_bar) - x_m(xi_sl)``. Residual contributions are ``f_s = -N^T t J w``
for the slave and ``f_m = R(xi_bar)^T t J w`` for the master, so that
``r = f_int + f_c``.

All pair-level vectors use a local numbering: slave layer DOFs first
(``2*i + c``), then master layer DOFs (``2*(n_s + j) + c``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .mesh import POLICIES, gauss_rule
from .nurbs import NurbsCurve
from .refine import ConfigurationError

PROJ_TOL = 1e-10
PROJ_MAXIT = 30
_I2 = np.eye(2)


# --------------------------------------------------------------------------
# surfaces

@dataclass(frozen=True, eq=False)
class ContactSurface:
    """Contact layer of a deformable body.

    ``curve`` is the reference layer; its control point ``i`` is control point
    ``i`` of ``body``. ``sign`` orients the outward normal
    ``n = sign * (x_xi[1], -x_xi[0]) / |x_xi|``.
    """

    curve: NurbsCurve
    body: int
    sign: float = 1.0

    @property
    def n_cp(self) -> int:
        return self.curve.n

    def evaluate(self, points: np.ndarray, xi, nd: int = 2):
        """Connectivity, basis ``(m, nd+1, p+1)`` and derivatives ``(m, nd+1, 2)``."""
        conn, R = self.curve.basis_array(xi, nd)
        return conn, R, np.einsum("mdk,mkj->mdj", R, points[conn])

    def sample_parameters(self) -> np.ndarray:
        u = self.curve.kv.unique()
        k = self.curve.degree + 1
        s = [a + (b - a) * (np.arange(k) + 0.5) / k for a, b in zip(u[:-1], u[1:])]
        return np.concatenate(s + [u[[0, -1]]])

    @cached_property
    def _samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Seed parameters with their (configuration independent) basis."""
        S = self.sample_parameters()
        return (S,) + self.curve.basis_array(S, 0)

    def sample_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Seed parameters and the current positions there."""
        S, conn, R = self._samples
        return S, np.einsum("mk,mkj->mj", R[:, 0], points[conn])


@dataclass(frozen=True)
class RigidLine:
    """Rigid flat master ``y = y0``; ``sign`` gives the normal ``(0, sign)``."""

    y0: float
    sign: float = 1.0
    body = None
    n_cp = 0


@dataclass
class ProjectionResult:
    xi_bar: np.ndarray
    x_bar: np.ndarray
    tau1: np.ndarray
    x_xixi: np.ndarray
    n_bar: np.ndarray
    gN: np.ndarray
    m11: np.ndarray
    kappa: np.ndarray
    c11: np.ndarray
    boundary: np.ndarray  # clamped to an end of the parameter domain
    converged: np.ndarray


def closest_point_projection(x_s, master, master_points=None) -> ProjectionResult:
    """Project slave points ``x_s (m, 2)`` onto the current master curve.

    A dense sampling of the master seeds a Newton iteration on
    ``(x_s - x(xi)) . x_xi = 0``.
    """
    x_s = np.atleast_2d(np.asarray(x_s, float))
    m = x_s.shape[0]
    if isinstance(master, RigidLine):
        n = np.tile([0.0, master.sign], (m, 1))
        xb = np.column_stack([x_s[:, 0], np.full(m, master.y0)])
        one = np.ones(m)
        return ProjectionResult(x_s[:, 0].copy(), xb, np.tile([1.0, 0.0], (m, 1)), np.zeros((m, 2)),
                                n, (x_s - xb) @ np.array([0.0, master.sign]), one, 0 * one,
                                one.copy(), np.zeros(m, bool), np.ones(m, bool))
    if master_points is None:
        master_points = master.curve.points
    a, b = master.curve.kv.domain
    S, XS = master.sample_points(master_points)
    d2 = ((x_s[:, None, :] - XS[None, :, :]) ** 2).sum(-1)
    xi = S[np.argmin(d2, axis=1)]
    best = xi.copy()
    conv = np.zeros(m, bool)
    for _ in range(PROJ_MAXIT):
        _, _, D = master.evaluate(master_points, xi, 2)
        r = x_s - D[:, 0]
        F = np.einsum("mj,mj->m", r, D[:, 1])
        dF = -np.einsum("mj,mj->m", D[:, 1], D[:, 1]) + np.einsum("mj,mj->m", r, D[:, 2])
        bad = dF >= 0  # not a local minimum direction: fall back to a gradient step
        dF = np.where(bad, -np.einsum("mj,mj->m", D[:, 1], D[:, 1]), dF)
        step = -F / dF
        new = np.clip(xi + step, a, b)
        done = np.abs(new - xi) <= PROJ_TOL
        xi = new
        conv |= done
        if conv.all():
            break
    if not conv.all():
        # keep the better of Newton result and sampled seed
        _, _, D1 = master.evaluate(master_points, xi, 0)
        _, _, D0 = master.evaluate(master_points, best, 0)
        worse = ((x_s - D1[:, 0]) ** 2).sum(-1) > ((x_s - D0[:, 0]) ** 2).sum(-1)
        xi = np.where(~conv & worse, best, xi)
    _, _, D = master.evaluate(master_points, xi, 2)
    tau = D[:, 1]
    m11 = np.einsum("mj,mj->m", tau, tau)
    n = master.sign * np.column_stack([tau[:, 1], -tau[:, 0]]) / np.sqrt(m11)[:, None]
    gN = np.einsum("mj,mj->m", x_s - D[:, 0], n)
    kappa = np.einsum("mj,mj->m", n, D[:, 2])
    c11 = 1.0 / (m11 - gN * kappa)
    boundary = (xi <= a + 1e-14) | (xi >= b - 1e-14)
    return ProjectionResult(xi, D[:, 0], tau, D[:, 2], n, gN, m11, kappa, c11, boundary, conv)


# --------------------------------------------------------------------------
# point laws

def normal_traction(gN, n_bar, eps_N):
    """Penalty normal traction ``-eps_N gN n`` in penetration, zero otherwise."""
    gN = np.asarray(gN, float)
    tN = np.where(gN < 0, -eps_N * gN, 0.0)
    return tN[..., None] * np.asarray(n_bar, float)


def friction_return_map(trial, tN, mu):
    """Radial return of trial tangential tractions ``(m, 2)``.

    Returns ``(t_T, slip)`` where ``|t_T| <= mu tN`` and ``slip`` flags points
    on the Coulomb cone.
    """
    trial = np.atleast_2d(np.asarray(trial, float))
    tN = np.atleast_1d(np.asarray(tN, float))
    norm = np.linalg.norm(trial, axis=-1)
    slip = norm - mu * tN > 0
    scale = np.where(slip, mu * tN / np.where(slip, norm, 1.0), 1.0)
    return trial * scale[:, None], slip


# --------------------------------------------------------------------------
# pair

@dataclass
class PointData:
    """Per slave quadrature point output of one evaluation."""

    x: np.ndarray
    X_ref: np.ndarray
    gN: np.ndarray
    tN: np.ndarray
    tT: np.ndarray  # tangential traction on the slave (vector)
    active: np.ndarray
    slip: np.ndarray
    xi_bar: np.ndarray
    weight: np.ndarray  # w * J (current length measure)


@dataclass
class ContactResult:
    f_s: np.ndarray  # (n_s, 2)
    f_m: np.ndarray  # (n_m, 2)
    rows: np.ndarray | None
    cols: np.ndarray | None
    vals: np.ndarray | None
    points: PointData

    def dense_tangent(self) -> np.ndarray:
        n = 2 * (self.f_s.shape[0] + self.f_m.shape[0])
        K = np.zeros((n, n))
        np.add.at(K, (self.rows, self.cols), self.vals)
        return K

    def force_vector(self) -> np.ndarray:
        return np.concatenate([self.f_s.ravel(), self.f_m.ravel()])


@dataclass(eq=False)
class ContactPair:
    slave: ContactSurface
    master: ContactSurface | RigidLine
    eps_N: float
    eps_T: float = 0.0
    mu: float = 0.0
    policy: str = "default"
    xi_sl: np.ndarray = field(init=False)
    _quad: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.eps_N <= 0:
            raise ConfigurationError("eps_N must be positive")
        if self.mu < 0:
            raise ConfigurationError("friction coefficient must be non-negative")
        if self.mu > 0 and self.eps_T <= 0:
            raise ConfigurationError("eps_T must be positive with friction")
        if self.policy not in POLICIES:
            raise ConfigurationError(f"unknown quadrature policy {self.policy!r}")
        c = self.slave.curve
        u = c.kv.unique()
        n = c.degree + 1
        if self.policy == "ironing-3x":
            n *= 3
        xs, ws, el = [], [], []
        for e, (a, b) in enumerate(zip(u[:-1], u[1:])):
            x, w = gauss_rule(n, a, b)
            xs.append(x)
            ws.append(w)
            el.append(np.full(n, e))
        xi = np.concatenate(xs)
        conn, R = c.basis_array(xi, 1)
        # force spans from the element of each point (Gauss points are interior)
        self._quad = (xi, np.concatenate(ws), np.concatenate(el), conn, R[:, 0], R[:, 1])
        self.xi_sl = np.full(len(xi), np.nan)

    @property
    def frictional(self) -> bool:
        return self.mu > 0

    @property
    def n_points(self) -> int:
        return len(self._quad[0])

    @property
    def n_s(self) -> int:
        return self.slave.n_cp

    @property
    def n_m(self) -> int:
        return self.master.n_cp

    @property
    def quadrature(self):
        """``(xi, w, element)`` of the slave quadrature points."""
        return self._quad[:3]

    # ------------------------------------------------------------------
    def evaluate(self, xs: np.ndarray, xm: np.ndarray | None = None, tangent: bool = True,
                 elements=None) -> ContactResult:
        """Contact forces (and tangent triplets) for current layer coordinates."""
        xi_q, w_q, el_q, conn_s, Ns, dNs = self._quad
        sel = np.arange(len(xi_q)) if elements is None else np.flatnonzero(np.isin(el_q, elements))
        ns_tot, nm_tot = self.n_s, self.n_m
        rigid = isinstance(self.master, RigidLine)
        Ns_, dNs_, cs = Ns[sel], dNs[sel], conn_s[sel]
        x = np.einsum("qk,qkj->qj", Ns_, xs[cs])
        a_s = np.einsum("qk,qkj->qj", dNs_, xs[cs])
        J = np.linalg.norm(a_s, axis=1)
        pr = closest_point_projection(x, self.master, xm)
        active = pr.gN < 0
        tN = np.where(active, -self.eps_N * pr.gN, 0.0)
        tT = np.zeros_like(x)
        slip = np.zeros(len(sel), bool)
        xi_sl = self.xi_sl[sel]
        fric = active & self.frictional & ~np.isnan(xi_sl)
        x_sl = np.zeros_like(x)
        if fric.any():
            if rigid:
                x_sl[fric] = np.column_stack([xi_sl[fric], np.full(fric.sum(), self.master.y0)])
            else:
                x_sl[fric] = self.master.evaluate(xm, xi_sl[fric], 0)[2][:, 0]
            trial = self.eps_T * (pr.x_bar - x_sl)
            t_fr, sl = friction_return_map(trial[fric], tN[fric], self.mu)
            tT[fric] = t_fr
            slip[fric] = sl
        t = tN[:, None] * pr.n_bar - tT
        wJ = w_q[sel] * J
        act = np.flatnonzero(active)
        f_s = np.zeros((ns_tot, 2))
        np.add.at(f_s, cs[act], -Ns_[act, :, None] * (t[act] * wJ[act, None])[:, None, :])
        f_m = np.zeros((nm_tot, 2))
        cm = R = dR = None
        if not rigid and act.size:
            cm, Rm, _ = self.master.evaluate(xm, pr.xi_bar[act], 1)
            R, dR = Rm[:, 0], Rm[:, 1]
            np.add.at(f_m, cm, R[:, :, None] * (t[act] * wJ[act, None])[:, None, :])
        points = PointData(x, self.slave.curve.evaluate(xi_q[sel], 0)[:, 0], pr.gN, tN, tT,
                           active, slip, pr.xi_bar, wJ)
        res = ContactResult(f_s, f_m, None, None, None, points)
        if tangent:
            res.rows, res.cols, res.vals = self._tangent(
                act, pr, t, tN, tT, slip[act], fric[act], xs, xm, x_sl, xi_sl,
                cs, Ns_, dNs_, a_s, J, w_q[sel], cm, R, dR, rigid)
        return res

    def _tangent(self, act, pr, t, tN, tT, slip, fric, xs, xm, x_sl, xi_sl, cs, Ns, dNs, a_s,
                 J, w, cm, R, dR, rigid):
        if act.size == 0:
            e = np.zeros(0, int)
            return e, e, np.zeros(0)
        epsN, epsT, mu = self.eps_N, self.eps_T, self.mu
        n, tau = pr.n_bar[act], pr.tau1[act]
        gN, m11, kap, c11 = pr.gN[act], pr.m11[act], pr.kappa[act], pr.c11[act]
        t, J, w = t[act], J[act], w[act]
        a_s, cs, Ns, dNs = a_s[act], cs[act], Ns[act], dNs[act]
        P = act.size
        nn = np.einsum("pi,pj->pij", n, n)
        tt = np.einsum("pi,pj->pij", tau, tau)
        tn = np.einsum("pi,pj->pij", tau, n)
        # normal traction derivatives (coefficients of N_s dx_s, R dx_m, R' dx_m)
        A = -epsN * (nn - (gN * kap * c11 / m11)[:, None, None] * tt)
        M0 = -A.copy()
        M1 = (epsN * gN * c11)[:, None, None] * tn
        Msl = np.zeros((P, 2, 2))
        if fric.any():
            # derivatives of the trial vector eps_T (x_bar - x_m(xi_sl))
            At = epsT * c11[:, None, None] * tt
            M0t = epsT * (_I2 - c11[:, None, None] * tt)
            M1t = (epsT * c11 * gN)[:, None, None] * tn
            Mslt = np.broadcast_to(epsT * _I2, (P, 2, 2)).copy()
            tr = epsT * (pr.x_bar[act] - x_sl[act])
            ntr = np.linalg.norm(tr, axis=1)
            nT = tr / np.where(ntr > 0, ntr, 1.0)[:, None]
            beta = np.where(slip, mu * tN[act] / np.where(ntr > 0, ntr, 1.0), 1.0)
            Pj = np.where(slip[:, None, None], _I2 - np.einsum("pi,pj->pij", nT, nT), _I2)
            bP = beta[:, None, None] * Pj
            ntn = np.where(slip[:, None, None], mu * epsN * np.einsum("pi,pj->pij", nT, n), 0.0)
            dA = -ntn + bP @ At
            dM0 = ntn + bP @ M0t
            dM1 = bP @ M1t
            dMsl = bP @ Mslt
            f = fric[:, None, None]
            # t = t_N n - t_T
            A = A - np.where(f, dA, 0.0)
            M0 = M0 - np.where(f, dM0, 0.0)
            M1 = M1 - np.where(f, dM1, 0.0)
            # t_T carries -x_m(xi_sl), so t gains +dMsl R(xi_sl) dx
            Msl = np.where(f, dMsl, 0.0)
        rows, cols, vals = [], [], []

        def add(ra, ca, blk):
            # ra (P, a), ca (P, b), blk (P, a, 2, b, 2)
            r = (2 * ra[:, :, None, None, None] + np.arange(2)[None, None, :, None, None])
            c = (2 * ca[:, None, None, :, None] + np.arange(2)[None, None, None, None, :])
            r, c = np.broadcast_arrays(r, c)
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.broadcast_to(blk, r.shape).ravel())

        # derivative of (t J) w.r.t. slave dofs: J A Ns_c + t (a_s/J) dNs_c
        ja = a_s / J[:, None]
        dtJ_s = (J[:, None, None, None] * A[:, :, None, :] * Ns[:, None, :, None]
                 + t[:, :, None, None] * ja[:, None, None, :] * dNs[:, None, :, None])  # (P, i, c, j)
        Kss = -(w[:, None, None, None, None] * Ns[:, :, None, None, None] * dtJ_s[:, None])
        add(cs, cs, Kss)
        if rigid:
            return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        off = self.n_s
        cmo = cm + off
        # master blocks via xi_bar dependence
        dtJ_m = J[:, None, None, None] * (np.einsum("pij,pb->pbij", M0, R)
                                          + np.einsum("pij,pb->pbij", M1, dR))  # (P, b, i, j)
        Ksm = -(w[:, None, None, None, None] * Ns[:, :, None, None, None]
                * dtJ_m.transpose(0, 2, 1, 3)[:, None])
        add(cs, cmo, Ksm)
        # master forces: R_b(xi_bar) t J w
        dxi_s = c11[:, None] * tau  # d xi_bar / d x_s (times Ns_c)
        q0 = -c11[:, None] * tau
        q1 = (c11 * gN)[:, None] * n
        Kms = (w[:, None, None, None, None]
               * (dR[:, :, None, None, None] * (J[:, None, None] * np.einsum("pi,pj->pij", t, dxi_s))
                  [:, None, :, None, :] * Ns[:, None, None, :, None]
                  + R[:, :, None, None, None] * dtJ_s[:, None]))
        add(cmo, cs, Kms)
        dxi_m = np.einsum("pj,pd->pdj", q0, R) + np.einsum("pj,pd->pdj", q1, dR)  # (P, d, j)
        Kmm = (w[:, None, None, None, None]
               * (J[:, None, None, None, None] * dR[:, :, None, None, None]
                  * np.einsum("pi,pdj->pidj", t, dxi_m)[:, None]
                  + R[:, :, None, None, None] * dtJ_m.transpose(0, 2, 1, 3)[:, None]))
        add(cmo, cmo, Kmm)
        if np.any(Msl != 0):
            f = np.flatnonzero(fric)
            csl, Rsl, _ = self.master.evaluate(xm, xi_sl[act][f], 0)
            Rsl = Rsl[:, 0]
            blk = (J[f, None, None, None] * np.einsum("pij,pd->pidj", Msl[f], Rsl))  # d(tJ)/dx_sl
            add(cs[f], csl + off, -(w[f, None, None, None, None] * Ns[f][:, :, None, None, None]
                                     * blk[:, None]))
            add(cmo[f], csl + off, (w[f, None, None, None, None] * R[f][:, :, None, None, None]
                                     * blk[:, None]))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    # ------------------------------------------------------------------
    def commit(self, res: ContactResult, xm: np.ndarray | None = None):
        """Update slip anchors after a converged step."""
        if not self.frictional:
            return
        pd = res.points
        new = np.full_like(self.xi_sl, np.nan)
        act = pd.active
        first = act & np.isnan(self.xi_sl)
        new[first] = pd.xi_bar[first]
        stick = act & ~first & ~pd.slip
        new[stick] = self.xi_sl[stick]
        sl = act & ~first & pd.slip
        if sl.any():
            new[sl] = self._slip_anchor(self.xi_sl[sl], pd.xi_bar[sl], pd.tN[sl], xm)
        self.xi_sl = new

    def _points_on_master(self, xi, xm, nd: int = 0):
        """Master positions (``nd = 0``) or positions and tangents ``(m, 2, 2)``."""
        if isinstance(self.master, RigidLine):
            x = np.column_stack([xi, np.full(len(xi), self.master.y0)])
            return x if nd == 0 else np.stack([x, np.tile([1.0, 0.0], (len(xi), 1))], axis=1)
        D = self.master.evaluate(xm, xi, nd)[2]
        return D[:, 0] if nd == 0 else D

    def _slip_anchor(self, xi_old, xi_bar, tN, xm):
        """Anchors at master distance ``mu tN / eps_T`` from ``x(xi_bar)``, towards the old ones.

        Newton on the distance, safeguarded by the bracket ``[xi_bar, xi_old]``.
        """
        target = self.mu * tN / self.eps_T
        xb = self._points_on_master(xi_bar, xm)
        lo, hi = xi_bar.copy(), xi_old.copy()  # distance grows from 0 at lo to > target at hi
        xi = 0.5 * (lo + hi)
        for _ in range(60):
            D = self._points_on_master(xi, xm, 1)
            d = D[:, 0] - xb
            dist = np.linalg.norm(d, axis=1)
            f = dist - target
            near = f < 0
            lo = np.where(near, xi, lo)
            hi = np.where(near, hi, xi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = xi - f * dist / np.einsum("mj,mj->m", d, D[:, 1])
            inside = np.isfinite(step) & (step >= np.minimum(lo, hi)) & (step <= np.maximum(lo, hi))
            new = np.where(inside, step, 0.5 * (lo + hi))
            done = (np.abs(new - xi) <= 1e-15 * (1.0 + np.abs(xi))) | (np.abs(f) <= 1e-15 * target)
            xi = new
            if done.all():
                break
        return xi

    def state(self) -> dict:
        return {"xi_sl": self.xi_sl.copy()}

    def restore(self, st: dict):
        self.xi_sl = st["xi_sl"].copy()


def contact_element_forces(pair: ContactPair, element: int, xs, xm=None):
    r = pair.evaluate(xs, xm, tangent=False, elements=[element])
    return r.f_s, r.f_m


def contact_element_tangents(pair: ContactPair, element: int, xs, xm=None):
    """Dense ``(k_ss, k_sm, k_ms, k_mm)`` of one slave element over the full layers."""
    r = pair.evaluate(xs, xm, tangent=True, elements=[element])
    K = r.dense_tangent()
    s = 2 * pair.n_s
    return K[:s, :s], K[:s, s:], K[s:, :s], K[s:, s:]


def outward_sign(vp) -> float:
    """Normal orientation of the eta=0 layer of a VO patch (pointing out of the body)."""
    a, b = 0, 0
    x0, x1, y0, y1 = vp.element_box(a, b)
    xi = np.array([0.5 * (x0 + x1)])
    _, dX = vp.evaluate(a, b, xi, np.array([y0]))
    t, e = dX[0, 0], dX[0, 1]
    n = np.array([t[1], -t[0]])
    return 1.0 if n @ e < 0 else -1.0
