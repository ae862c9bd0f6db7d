"""Global assembly, displacement-driven load stepping and Newton iteration."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import ContactPair, ContactResult, PointData, RigidLine
from .mechanics import Material, NonPositiveJacobian, body_force_stiffness
from .mesh import DofMap, build_elements, integration_groups
from .refine import VoPatch

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


@dataclass(eq=False)
class Body:
    patch: VoPatch
    material: Material
    name: str = ""


@dataclass(eq=False)
class DirichletBC:
    """Prescribed displacement component on body control points.

    ``history[k]`` is the total value at the end of load step ``k + 1``.
    """

    body: int
    cps: np.ndarray
    comp: int
    history: np.ndarray

    def value(self, step: float) -> float:
        """Value at (possibly fractional) step ``step`` with 0 at step 0."""
        h = np.concatenate([[0.0], np.asarray(self.history, float)])
        return float(np.interp(step, np.arange(len(h)), h))


@dataclass
class SolveSettings:
    newton_tol: float = 1e-8
    newton_max_iter: int = 25
    max_cutbacks: int = 4
    floor: float = 1e-12
    steps: int | None = None  # stop after this many load steps

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")


@dataclass
class StepRecord:
    step: int
    t: float
    forces: dict  # surface name -> (P_x, P_y)
    iterations: int
    contact: list  # PointData per pair


@dataclass
class SolveResult:
    records: list
    u: np.ndarray
    completed: bool
    failed_step: int | None = None
    message: str = ""
    wall_time: float = 0.0
    n_dof: int = 0


class Model:
    """Bodies, boundary conditions and contact pairs of one problem."""

    def __init__(self, bodies: list[Body], bcs: list[DirichletBC], pairs: list[ContactPair],
                 n_steps: int, load_surfaces: dict | None = None, char_length: float = 1.0):
        self.bodies = bodies
        self.bcs = bcs
        self.pairs = pairs
        self.n_steps = n_steps
        self.dofmap = DofMap([b.patch.n_cp for b in bodies])
        self.load_surfaces = load_surfaces or {}
        self.X = [b.patch.control_points() for b in bodies]
        self._groups = []
        for k, b in enumerate(bodies):
            els, _ = build_elements(b.patch)
            gs = integration_groups(b.patch, els)
            pats = []
            for g in gs:
                d = self.dofmap.dofs(k, g.conn)  # (E, 2 ne)
                n = d.shape[1]
                pats.append((g, d, np.repeat(d, n, axis=1).ravel(), np.tile(d, (1, n)).ravel()))
            self._groups.append(pats)
        dd = {}
        for bc in bcs:
            for i in self.dofmap.dofs(bc.body, np.asarray(bc.cps), bc.comp):
                dd[int(i)] = bc
        self.dirichlet = dd
        self.fixed = np.array(sorted(dd), dtype=int)
        self.free = self.dofmap.free(dd.keys())
        self.force_floor = 1e-12 * max(b.material.E for b in bodies) * char_length
        self._pair_dofs = []
        for p in pairs:
            s = self.dofmap.dofs(p.slave.body, np.arange(p.n_s)).ravel()
            m = (np.zeros(0, int) if isinstance(p.master, RigidLine)
                 else self.dofmap.dofs(p.master.body, np.arange(p.n_m)).ravel())
            self._pair_dofs.append(np.concatenate([s, m]))

    @property
    def n_dof(self) -> int:
        return self.dofmap.n_dof

    def prescribed(self, step: float) -> np.ndarray:
        return np.array([self.dirichlet[i].value(step) for i in self.fixed])

    def layer_points(self, u: np.ndarray, body: int, n: int) -> np.ndarray:
        U = u[self.dofmap.dofs(body, np.arange(n)).ravel()].reshape(-1, 2)
        return self.X[body][:n] + U

    def assemble(self, u: np.ndarray, tangent: bool = True):
        """Residual ``f_int + f_c`` (all DOFs), tangent (CSR) and force parts."""
        n = self.n_dof
        f_int = np.zeros(n)
        rows, cols, vals = [], [], []
        for k, b in enumerate(self.bodies):
            for g, d, r, c in self._groups[k]:
                ue = u[d].reshape(d.shape[0], -1, 2)
                f, K = body_force_stiffness(b.material, g.dNdX, g.wdV, ue, tangent)
                np.add.at(f_int, d, f.reshape(d.shape))
                if tangent:
                    rows.append(r)
                    cols.append(c)
                    vals.append(K.reshape(-1))
        f_c = np.zeros(n)
        cres = []
        for p, pd in zip(self.pairs, self._pair_dofs):
            xs = self.layer_points(u, p.slave.body, p.n_s)
            xm = None if isinstance(p.master, RigidLine) else self.layer_points(u, p.master.body, p.n_m)
            res = p.evaluate(xs, xm, tangent)
            np.add.at(f_c, pd, res.force_vector())
            if tangent and res.rows.size:
                rows.append(pd[res.rows])
                cols.append(pd[res.cols])
                vals.append(res.vals)
            cres.append(res)
        K = None
        if tangent:
            K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n, n)).tocsr()
        return f_int + f_c, K, f_int, f_c, cres

    def reactions(self, r: np.ndarray) -> dict:
        """Net force exerted by each loaded surface on its support: ``-sum r``."""
        out = {}
        for name, (body, cps) in self.load_surfaces.items():
            dx = self.dofmap.dofs(body, np.asarray(cps), 0)
            dy = self.dofmap.dofs(body, np.asarray(cps), 1)
            out[name] = (-float(r[dx].sum()), -float(r[dy].sum()))
        return out

    def history_state(self):
        return [p.state() for p in self.pairs]

    def restore_history(self, st):
        for p, s in zip(self.pairs, st):
            p.restore(s)


def linear_solve(A, b) -> np.ndarray:
    """Direct sparse LU solve; dense inputs are accepted."""
    if not sp.issparse(A):
        A = sp.csc_matrix(np.asarray(A, float))
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as e:  # exactly singular
        raise ConvergenceError(str(e)) from e
    x = lu.solve(np.asarray(b, float))
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("non-finite linear solution")
    return x


def newton(model: Model, u0: np.ndarray, step_from: float, step_to: float,
           settings: SolveSettings, trace: list | None = None):
    """Newton iteration from the converged ``u0`` at ``step_from`` to ``step_to``.

    Returns ``(u, residual, contact results, iterations)``; raises
    :class:`ConvergenceError` on failure. Residual norms are appended to
    ``trace`` when given.
    """
    fr, fx = model.free, model.fixed
    u = u0.copy()
    du_D = model.prescribed(step_to) - u[fx]
    try:
        r, K, f_int, f_c, cres = model.assemble(u)
        Kff = K[fr][:, fr]
        rhs = -(r[fr] + (K[fr][:, fx] @ du_D if fx.size else 0.0))
        u[fr] += linear_solve(Kff, rhs)
        u[fx] += du_D
        for it in range(1, settings.newton_max_iter + 1):
            r, K, f_int, f_c, cres = model.assemble(u)
            ref = max(np.linalg.norm(f_int), np.linalg.norm(f_c), model.force_floor, settings.floor)
            res = np.linalg.norm(r[fr])
            log.debug("step %.4g it %d |r| %.3e ref %.3e", step_to, it, res, ref)
            if trace is not None:
                trace.append(res / ref)
            if not np.isfinite(res):
                raise ConvergenceError("non-finite residual")
            if res <= settings.newton_tol * ref:
                return u, r, cres, it
            u[fr] += linear_solve(K[fr][:, fr], -r[fr])
    except NonPositiveJacobian as e:
        raise ConvergenceError(f"non-positive Jacobian: {e}") from e
    raise ConvergenceError(f"no convergence in {settings.newton_max_iter} iterations")


def solve(model: Model, settings: SolveSettings | None = None, callback=None) -> SolveResult:
    """Run all load steps with cutback on failure."""
    settings = settings or SolveSettings()
    t0 = time.perf_counter()
    u = np.zeros(model.n_dof)
    records = []
    n_steps = model.n_steps if settings.steps is None else min(settings.steps, model.n_steps)
    for step in range(1, n_steps + 1):
        done = float(step - 1)
        inc = 1.0
        cuts = 0
        its = 0
        while done < step - 1e-12:
            target = min(done + inc, float(step))
            hist = model.history_state()
            try:
                u_new, r, cres, it = newton(model, u, done, target, settings)
            except ConvergenceError as e:
                model.restore_history(hist)
                cuts += 1
                if cuts > settings.max_cutbacks:
                    msg = f"step {step} failed after {settings.max_cutbacks} cutbacks: {e}"
                    log.warning(msg)
                    return SolveResult(records, u, False, step, msg, time.perf_counter() - t0,
                                       model.n_dof)
                inc *= 0.5
                continue
            for p, res in zip(model.pairs, cres):
                xm = (None if isinstance(p.master, RigidLine)
                      else model.layer_points(u_new, p.master.body, p.n_m))
                p.commit(res, xm)
            u = u_new
            its += it
            done = target
        rec = StepRecord(step, step / model.n_steps, model.reactions(r), its,
                         [c.points for c in cres])
        records.append(rec)
        if callback is not None:
            callback(rec, u)
    return SolveResult(records, u, True, None, "", time.perf_counter() - t0, model.n_dof)
