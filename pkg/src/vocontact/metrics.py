"""Run metrics: reaction oscillation amplitude, pressure errors and relative time."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

log = logging.getLogger(__name__)


def oscillation_amplitude(values) -> float:
    """max - min of a force history (0 for empty input)."""
    v = np.asarray(values, float)
    return float(v.max() - v.min()) if v.size else 0.0


def force_history(records, surface: str) -> np.ndarray:
    """``(steps, 3)`` array of step, P_x, P_y."""
    return np.array([[r.step, *r.forces[surface]] for r in records], float).reshape(-1, 3)


def delta_p(history: np.ndarray, window: tuple[int, int] | None = None) -> tuple[float, float]:
    """Oscillation amplitudes (ΔP_x, ΔP_y) over the inclusive step window.

    Returns ``(nan, nan)`` when no recorded step falls inside the window.
    """
    h = np.asarray(history, float).reshape(-1, 3)
    if window is not None:
        h = h[(h[:, 0] >= window[0]) & (h[:, 0] <= window[1])]
    if not len(h):
        return float("nan"), float("nan")
    return oscillation_amplitude(h[:, 1]), oscillation_amplitude(h[:, 2])


@dataclass
class PressureProfile:
    """Contact tractions at slave quadrature points, sorted by coordinate ``x``."""

    x: np.ndarray
    p_n: np.ndarray
    p_t: np.ndarray
    slip: np.ndarray

    @classmethod
    def from_points(cls, pts, coord: int = 0, origin: float = 0.0) -> "PressureProfile":
        x = np.abs(pts.x[:, coord] - origin)
        tau = np.linalg.norm(pts.tT, axis=1)
        o = np.argsort(x, kind="stable")
        return cls(x[o], pts.tN[o], tau[o], pts.slip[o])

    def contact_extent(self) -> float:
        act = self.p_n > 0
        return float(self.x[act].max()) if act.any() else 0.0

    def normalized(self, a_ref: float, p_ref: float) -> "PressureProfile":
        return PressureProfile(self.x / a_ref, self.p_n / p_ref, self.p_t / p_ref, self.slip)


def l2_error(x, p, x_ref, p_ref, x_max: float | None = None) -> float:
    """sqrt of the trapezoidal integral of ``(p_ref - p)^2`` over the run samples ``x``.

    The reference is linearly interpolated onto ``x``. Below its first sample
    (the profile origin, a symmetry line) it is held constant; beyond its last
    sample it is zero.
    """
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    o = np.argsort(x, kind="stable")
    x, p = x[o], p[o]
    if x_max is not None:
        keep = x <= x_max
        x, p = x[keep], p[keep]
    xr = np.asarray(x_ref, float)
    orr = np.argsort(xr, kind="stable")
    pr_sorted = np.asarray(p_ref, float)[orr]
    pr = np.interp(x, xr[orr], pr_sorted, left=pr_sorted[0] if pr_sorted.size else 0.0, right=0.0)
    return float(np.sqrt(trapezoid((pr - p) ** 2, x))) if x.size > 1 else 0.0


def time_percentage(t: float, t_max: float) -> float:
    """Analysis time as a percentage of the largest time in a comparison set."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    return 100.0 * t / t_max


@dataclass
class RunMetrics:
    delta_px: float | None = None
    delta_py: float | None = None
    l2_pressure_error: float | None = None
    l2_tangential_error: float | None = None
    wall_time: float = 0.0
    time_percentage: float | None = None
    window: tuple | None = None
    extra: dict = field(default_factory=dict)


def compute_metrics(history=None, window=None, profile: PressureProfile | None = None,
                    reference: PressureProfile | None = None, normalize: bool = True,
                    x_max: float | None = None, wall_time: float = 0.0) -> RunMetrics:
    """Metrics of one run.

    ``history`` is a force history (see :func:`force_history`); ``profile``
    and ``reference`` the pressure samples of the run and of the reference
    run. With ``normalize`` the pressures are scaled by the reference peak
    and coordinates by the reference contact extent.
    """
    m = RunMetrics(wall_time=wall_time, window=window)
    if history is not None and len(history):
        dx, dy = delta_p(history, window)
        if np.isfinite(dx):
            m.delta_px, m.delta_py = dx, dy
        else:
            log.warning("no recorded step inside the window %s; ΔP omitted", window)
    if profile is not None:
        if reference is None:
            log.warning("no reference pressure profile given; L2 error omitted")
        else:
            run, ref = profile, reference
            if normalize:
                a, p0 = ref.contact_extent(), float(ref.p_n.max())
                run, ref = run.normalized(a, p0), ref.normalized(a, p0)
                m.extra.update(a_ref=a, p_ref=p0)
            m.l2_pressure_error = l2_error(run.x, run.p_n, ref.x, ref.p_n, x_max)
            m.l2_tangential_error = l2_error(run.x, run.p_t, ref.x, ref.p_t, x_max)
    return m
