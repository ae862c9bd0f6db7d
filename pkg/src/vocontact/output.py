"""Run a configured problem and write its outputs (CSV, JSON summary, legacy VTK)."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .metrics import PressureProfile, compute_metrics, force_history
from .problems import Problem, ProblemConfig, generate
from .solver import SolveResult, SolveSettings, solve

log = logging.getLogger(__name__)

FLOAT = "%.17g"
FORCES_HEADER = ("step", "t", "P_x", "P_y")
PRESSURE_HEADER = ("X_bar", "pN_bar", "pT_bar", "slip", "x", "p_N", "p_T")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT % float(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path) -> dict:
    """Columns of a CSV written by :func:`write_csv` as float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, data = rows[0], np.array(rows[1:], float).reshape(-1, len(rows[0]))
    return {h: data[:, k] for k, h in enumerate(head)}


def read_profile(path) -> PressureProfile:
    c = read_csv(path)
    return PressureProfile(c["x"], c["p_N"], c["p_T"], c["slip"].astype(bool))


def pressure_profile(problem: Problem, result: SolveResult) -> PressureProfile | None:
    if not result.records:
        return None
    coord, origin = problem.profile_axis
    return PressureProfile.from_points(result.records[-1].contact[0], coord, origin)


def write_vtk(path: Path, problem: Problem, u: np.ndarray, n_sub: int = 4):
    """Legacy ASCII VTK: every element sampled on an ``n_sub`` x ``n_sub`` grid of quads."""
    model = problem.model
    pts, disp, cells = [], [], []
    n_pts = 0
    t = np.linspace(0.0, 1.0, n_sub + 1)
    for k, body in enumerate(model.bodies):
        vp = body.patch
        U = u[model.dofmap.dofs(k, np.arange(vp.n_cp)).ravel()].reshape(-1, 2)
        for b in range(vp.n_elements[1]):
            for a in range(vp.n_elements[0]):
                x0, x1, y0, y1 = vp.element_box(a, b)
                XI, ETA = np.meshgrid(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, indexing="ij")
                R, _ = vp.element_basis(a, b, XI.ravel(), ETA.ravel())
                conn = vp.element_connectivity(a, b)
                pts.append(R @ vp.control_points()[conn])
                disp.append(R @ U[conn])
                idx = n_pts + np.arange((n_sub + 1) ** 2).reshape(n_sub + 1, n_sub + 1)
                n_pts += (n_sub + 1) ** 2
                for i in range(n_sub):
                    for j in range(n_sub):
                        cells.append((idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    P, D = np.vstack(pts), np.vstack(disp)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nvocontact displacement\nASCII\n"
                 "DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(P)} double\n")
        for p in P:
            fh.write(f"{FLOAT % p[0]} {FLOAT % p[1]} 0\n")
        fh.write(f"CELLS {len(cells)} {5 * len(cells)}\n")
        for c in cells:
            fh.write("4 %d %d %d %d\n" % c)
        fh.write(f"CELL_TYPES {len(cells)}\n" + "9\n" * len(cells))
        fh.write(f"POINT_DATA {len(P)}\nVECTORS displacement double\n")
        for d in D:
            fh.write(f"{FLOAT % d[0]} {FLOAT % d[1]} 0\n")


def run(config: ProblemConfig, settings: SolveSettings | None = None) -> dict:
    """Solve one configured problem and write all outputs into ``config.out``."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = generate(config)
    settings = settings or SolveSettings(steps=config.steps)
    vtk = {int(s) for s in config.vtk_steps}

    def callback(rec, u):
        if rec.step in vtk:
            write_vtk(out / f"displacement_{rec.step:04d}.vtk", problem, u)

    result = solve(problem.model, settings, callback)
    hist = force_history(result.records, problem.surface)
    write_csv(out / "forces.csv", FORCES_HEADER,
              [(int(r.step), r.t, *r.forces[problem.surface]) for r in result.records])

    prof = pressure_profile(problem, result)
    ref = None
    if config.reference:
        rp = Path(config.reference) / "pressure.csv"
        if rp.exists():
            ref = read_profile(rp)
        else:
            log.warning("reference %s has no pressure.csv", config.reference)
    window = problem.window
    metrics = compute_metrics(hist, window, prof, ref, normalize=problem.normalize_pressure,
                              wall_time=result.wall_time)
    if prof is not None:
        norm = ref if ref is not None else prof
        a = norm.contact_extent() or 1.0
        p0 = float(norm.p_n.max()) or 1.0
        write_csv(out / "pressure.csv", PRESSURE_HEADER,
                  zip(prof.x / a, prof.p_n / p0, prof.p_t / p0, prof.slip, prof.x, prof.p_n, prof.p_t))

    summary = {
        "config": config.to_dict(),
        "completed": result.completed,
        "failed_step": result.failed_step,
        "message": result.message,
        "steps_run": len(result.records),
        "wall_time": result.wall_time,
        "dof": problem.dof_table(),
        "total_dof": problem.total_dof,
        "force_surface": problem.surface,
        "window": list(window) if window else None,
        "delta_Px": metrics.delta_px,
        "delta_Py": metrics.delta_py,
        "L2_pressure_error": metrics.l2_pressure_error,
        "L2_tangential_error": metrics.l2_tangential_error,
        "normalization": metrics.extra or None,
        "reference": config.reference,
    }
    with open(out / "metrics.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
    return summary
