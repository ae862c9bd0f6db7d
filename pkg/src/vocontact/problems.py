"""Benchmark problem generators: ironing, Hertzian cylinder and two rings."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import brentq

from .contact import ContactPair, ContactSurface, RigidLine, outward_sign
from .mechanics import Material
from .nurbs import KnotVector, NurbsPatch
from .refine import ConfigurationError, RefinementPlan, VoPatch, build_vo_patch, parse_plan
from .solver import Body, DirichletBC, Model

PROBLEMS = ("ironing", "ironing-large", "hertz", "two-rings", "custom")
BODY_NAMES = {"ironing": ("die", "slab"), "ironing-large": ("die", "slab"),
              "hertz": ("cylinder",), "two-rings": ("upper", "lower"), "custom": ("upper", "lower")}
MESH_LEVELS = {"ironing": 4, "ironing-large": 4, "hertz": 6, "two-rings": 3, "custom": 6}

# two-block problem: rectangles (x0, x1, y0, y1), upper block driven at its top edge
CUSTOM = dict(upper=(0.0, 1.0, 0.0, 0.5), lower=(-1.0, 2.0, -1.0, 0.0), upper_elements=(4, 2),
              lower_elements=(6, 2), E_upper=1.0, E_lower=1.0, nu=0.3, u_x=0.0, u_y=-0.05,
              n_steps=10, eps_n=100.0, eps_t=100.0, mu=0.0)

_S2 = np.sqrt(0.5)


# --------------------------------------------------------------------------
# geometry

def arc_patch(center, r_out: float, r_in: float, start_deg: float, n_quarters: int) -> NurbsPatch:
    """Annular sector made of quarter arcs, counter-clockwise from ``start_deg``.

    u follows the arc (C0 knots between quarters), v runs from the outer
    radius (v=0) to the inner one, orders (2, 1).
    """
    c = np.asarray(center, float)
    ang = np.radians(start_deg + 90.0 * np.arange(n_quarters + 1))
    unit = np.column_stack([np.cos(ang), np.sin(ang)])
    dirs, w = [unit[0]], [1.0]
    for q in range(n_quarters):
        dirs += [unit[q] + unit[q + 1], unit[q + 1]]
        w += [_S2, 1.0]
    dirs = np.array(dirs)
    P = np.stack([c + r_out * dirs, c + r_in * dirs], axis=1)
    W = np.column_stack([w, w])
    inner = np.repeat(np.arange(1, n_quarters) / n_quarters, 2)
    ku = KnotVector(np.concatenate([[0, 0, 0], inner, [1, 1, 1]]), 2)
    return NurbsPatch(ku, KnotVector([0, 0, 1, 1], 1), P, W)


def rectangle_patch(x0, x1, y0, y1) -> NurbsPatch:
    P = np.array([[[x0, y0], [x0, y1]], [[x1, y0], [x1, y1]]], float)
    k = KnotVector([0, 0, 1, 1], 1)
    return NurbsPatch(k, k, P, np.ones((2, 2)))


def quarter_arc_parameter(angle_fraction) -> np.ndarray:
    """Parameter of the standard rational quarter arc at a fraction of its sweep."""
    # x(t)/w(t) for weights (1, s, 1) gives tan(theta/2) relation: invert numerically
    def theta(t):
        w = (1 - t) ** 2 + 2 * _S2 * t * (1 - t) + t ** 2
        x = ((1 - t) ** 2 + 2 * _S2 * t * (1 - t)) / w
        y = (2 * _S2 * t * (1 - t) + t ** 2) / w
        return np.arctan2(y, x) / (np.pi / 2)

    f = np.atleast_1d(np.asarray(angle_fraction, float))
    return np.array([v if v in (0.0, 1.0) else brentq(lambda t: theta(t) - v, 0.0, 1.0, xtol=1e-15)
                     for v in f])


def graded_breaks(n: int, fraction_elems: float = 0.8, fraction_length: float = 0.1) -> np.ndarray:
    """Element boundaries in [0, 1]: ``round(0.8 n)`` uniform elements in [0, 0.1], rest beyond."""
    n_in = int(round(fraction_elems * n))
    n_in = min(max(n_in, 1), n - 1)
    a = np.linspace(0.0, fraction_length, n_in + 1)
    b = np.linspace(fraction_length, 1.0, n - n_in + 1)[1:]
    return np.concatenate([a, b])


def geometric_breaks(n: int, fraction_elems: float = 0.8, fraction_length: float = 0.1) -> np.ndarray:
    """Element boundaries in [0, 1] growing geometrically from 0.

    The first element matches the one of :func:`graded_breaks`, the growth
    ratio is chosen so the ``n`` elements fill the unit interval.
    """
    h0 = fraction_length / max(int(round(fraction_elems * n)), 1)
    if n * h0 >= 1.0:
        return np.linspace(0.0, 1.0, n + 1)
    q = brentq(lambda q: h0 * (q ** n - 1) / (q - 1) - 1.0, 1.0 + 1e-12, 2.0)
    b = np.concatenate([[0.0], np.cumsum(h0 * q ** np.arange(n))])
    b[-1] = 1.0
    return b


def _quarter_split(parts: int) -> list[float]:
    return list(np.arange(1, parts) / parts)


# --------------------------------------------------------------------------
# problem container

@dataclass
class ProblemConfig:
    problem: str = "ironing"
    mesh: str = "m1"
    plan: dict = field(default_factory=dict)  # body name -> plan string
    eps_n: float | None = None
    eps_t: float | None = None
    mu: float | None = None
    quadrature: str | None = None
    steps: int | None = None
    load_steps: int | None = None  # Hertz only: number of load steps
    v_bar: float | None = None  # Hertz only: prescribed top displacement
    out: str = "out"
    reference: str | None = None
    vtk_steps: list = field(default_factory=list)
    custom: dict = field(default_factory=dict)  # "custom" problem only: overrides of CUSTOM

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        lv = mesh_level(self.mesh)
        if not 1 <= lv <= MESH_LEVELS[self.problem]:
            raise ConfigurationError(f"mesh {self.mesh!r} invalid for {self.problem}")
        if isinstance(self.plan, str):
            self.plan = {b: self.plan for b in BODY_NAMES[self.problem]}
        for b, p in self.plan.items():
            if b not in BODY_NAMES[self.problem]:
                raise ConfigurationError(f"unknown body {b!r} for {self.problem}")
            parse_plan(p)
        if self.custom:
            if self.problem != "custom":
                raise ConfigurationError("[custom] settings need problem = \"custom\"")
            self.custom = _check_custom(self.custom)

    def plans(self) -> dict:
        return {b: self.plan.get(b, "N2") for b in BODY_NAMES[self.problem]}

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise ConfigurationError(f"unknown config keys: {sorted(bad)}")
        return cls(**d)


def _check_custom(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k not in CUSTOM:
            raise ConfigurationError(f"[custom] unknown field {k!r}; expected one of {sorted(CUSTOM)}")
        ref = CUSTOM[k]
        if isinstance(ref, tuple):
            ok = (isinstance(v, (list, tuple)) and len(v) == len(ref)
                  and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v))
            if not ok:
                raise ConfigurationError(f"[custom] {k} must be {len(ref)} numbers, got {v!r}")
            v = [type(r)(x) for r, x in zip(ref, v)]
        else:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigurationError(f"[custom] {k} must be a number, got {v!r}")
            v = type(ref)(v)
        out[k] = v
    g = {**CUSTOM, **out}
    for name in ("upper", "lower"):
        x0, x1, y0, y1 = g[name]
        if not (x0 < x1 and y0 < y1):
            raise ConfigurationError(f"[custom] {name} needs x0 < x1 and y0 < y1")
    if g["upper"][2] < g["lower"][3]:
        raise ConfigurationError("[custom] upper block must start above the lower block")
    if min(*g["upper_elements"], *g["lower_elements"], g["n_steps"]) < 1:
        raise ConfigurationError("[custom] element and step counts must be positive")
    if g["E_upper"] <= 0 or g["E_lower"] <= 0 or not 0 <= g["nu"] < 0.5:
        raise ConfigurationError("[custom] needs E > 0 and 0 <= nu < 0.5")
    return out


def mesh_level(name: str) -> int:
    s = str(name).strip().lower()
    if not (s.startswith("m") and s[1:].isdigit()):
        raise ConfigurationError(f"invalid mesh level {name!r}")
    return int(s[1:])


@dataclass(eq=False)
class Problem:
    config: ProblemConfig
    model: Model
    patches: dict  # body name -> VoPatch
    window: tuple[int, int] | None = None  # ΔP step window (inclusive)
    normalize_pressure: bool = True  # L2 error in reference-normalised X_bar, p_bar
    surface: str = ""  # load surface reported in forces.csv
    profile_axis: tuple[int, float] = (0, 0.0)  # (coordinate, origin) of pressure samples

    def dof_table(self) -> dict:
        return {n: dict(zip(("interface", "bulk", "total"), vp.dof_counts()))
                for n, vp in self.patches.items()}

    @property
    def total_dof(self) -> int:
        return sum(vp.dof_counts()[2] for vp in self.patches.values())


def _plan(text: str, **kw) -> RefinementPlan:
    return parse_plan(text, **kw)


def _pair(slave_vp, slave_body, master, eps_n, eps_t, mu, policy):
    s = ContactSurface(slave_vp.layer, slave_body, outward_sign(slave_vp))
    if isinstance(master, RigidLine):
        m = master
    else:
        m = ContactSurface(master[0].layer, master[1], outward_sign(master[0]))
    return ContactPair(s, m, eps_n, eps_t, mu, policy)


# --------------------------------------------------------------------------
# ironing

IRONING = dict(die_center=(1.25, 1.0), die_r_out=1.0, die_r_in=0.5, slab=(0.0, 4.0, -1.0, 0.0),
               E_die=1000.0, E_slab=1.0, nu=0.3, U_y=-0.23, U_x=1.5, n_down=46, n_slide=250,
               eps=100.0, mu=0.2, die_elements=(6, 2), slab_elements=(8, 3))
IRONING_LARGE = dict(IRONING, E_die=1e4, U_y=-0.5, mu=0.1)


def ironing_patches(level: int, plans: dict):
    r = 2 ** (level - 1)
    g = IRONING
    die = arc_patch(g["die_center"], g["die_r_out"], g["die_r_in"], 180.0, 2)
    (du, dv), (su, sv) = g["die_elements"], g["slab_elements"]
    half = _quarter_split(du // 2 * r)
    ku = sorted([0.5 * k for k in half] + [0.5 + 0.5 * k for k in half])
    die_vp = build_vo_patch(die, _plan(plans["die"], insert_u=tuple(ku),
                                       insert_v=tuple(_quarter_split(dv * r))))
    slab = rectangle_patch(*g["slab"])
    slab_vp = build_vo_patch(slab, _plan(plans["slab"], insert_u=tuple(_quarter_split(su * r)),
                                         insert_v=tuple(_quarter_split(sv * r)), contact_side="eta1"))
    return die_vp, slab_vp


def generate_ironing(level="m1", plan="N2", variant: str = "standard",
                     config: ProblemConfig | None = None) -> Problem:
    name = "ironing-large" if variant == "large" else "ironing"
    if config is None:
        config = ProblemConfig(problem=name, mesh=level if isinstance(level, str) else f"m{level}",
                               plan=plan)
    lv = mesh_level(config.mesh)
    g = IRONING_LARGE if config.problem == "ironing-large" else IRONING
    plans = config.plans()
    die_vp, slab_vp = ironing_patches(lv, plans)
    bodies = [Body(die_vp, Material(g["E_die"], g["nu"]), "die"),
              Body(slab_vp, Material(g["E_slab"], g["nu"]), "slab")]
    nd, ns = g["n_down"], g["n_slide"]
    k = np.arange(1, nd + ns + 1)
    hy = np.where(k <= nd, g["U_y"] * k / nd, g["U_y"])
    hx = np.where(k <= nd, 0.0, g["U_x"] * (k - nd) / ns)
    top = np.unique(np.concatenate([die_vp.edge_indices("xi0"), die_vp.edge_indices("xi1")]))
    bottom = slab_vp.edge_indices("eta1")
    bcs = [DirichletBC(0, top, 0, hx), DirichletBC(0, top, 1, hy),
           DirichletBC(1, bottom, 0, np.zeros(len(k))), DirichletBC(1, bottom, 1, np.zeros(len(k)))]
    pair = _pair(die_vp, 0, (slab_vp, 1), config.eps_n or g["eps"], config.eps_t or g["eps"],
                 g["mu"] if config.mu is None else config.mu, config.quadrature or "ironing-3x")
    model = Model(bodies, bcs, [pair], nd + ns, {"die_top": (0, top), "slab_bottom": (1, bottom)})
    return Problem(config, model, {"die": die_vp, "slab": slab_vp}, window=(nd + 1 + 10, nd + ns),
                   surface="die_top", profile_axis=(0, g["die_center"][0] + g["U_x"]))


# --------------------------------------------------------------------------
# Hertz

HERTZ = dict(r_out=1.0, r_in=0.1, E=1.0, nu=0.3, eps=2000.0, v_bar=0.0115, n_steps=10, y_rigid=-1.0)


def hertz_patch(level: int, plan: str, grading: str = "bands") -> VoPatch:
    """Quarter annulus; ``grading`` is "bands" (two uniform bands) or "geometric"."""
    n = 2 ** (level - 1)
    g = HERTZ
    base = arc_patch((0.0, 0.0), g["r_out"], g["r_in"], -90.0, 1)
    breaks = {"bands": graded_breaks, "geometric": geometric_breaks}[grading]
    ku = quarter_arc_parameter(breaks(9 * n))[1:-1]
    # radial: 80% of the 48 elements inside the outer 10% of the wall
    kv = breaks(48)[1:-1]
    return build_vo_patch(base, _plan(plan, insert_u=tuple(ku), insert_v=tuple(kv)))


def generate_hertz(level="m1", plan="N2", config: ProblemConfig | None = None,
                   grading: str = "bands") -> Problem:
    if config is None:
        config = ProblemConfig(problem="hertz", mesh=level if isinstance(level, str) else f"m{level}",
                               plan=plan)
    g = HERTZ
    lv = mesh_level(config.mesh)
    vp = hertz_patch(lv, config.plans()["cylinder"], grading)
    n_steps = config.load_steps or g["n_steps"]
    v = g["v_bar"] if config.v_bar is None else config.v_bar
    k = np.arange(1, n_steps + 1)
    top = vp.edge_indices("xi1")  # angle 0: the horizontal cut
    sym = vp.edge_indices("xi0")  # angle -90: the vertical symmetry line
    bcs = [DirichletBC(0, top, 1, -v * k / n_steps), DirichletBC(0, sym, 0, np.zeros(n_steps))]
    pair = _pair(vp, 0, RigidLine(g["y_rigid"], 1.0), config.eps_n or g["eps"], 0.0, 0.0,
                 config.quadrature or "default")
    model = Model([Body(vp, Material(g["E"], g["nu"]), "cylinder")], bcs, [pair], n_steps,
                  {"top": (0, top)})
    return Problem(config, model, {"cylinder": vp}, surface="top")


# --------------------------------------------------------------------------
# two rings

RINGS = dict(upper=((0.0, 22.0), 10.0, 8.0), lower=((0.0, 0.0), 12.0, 10.0), E_upper=100.0,
             E_lower=300.0, nu=0.3, u_y=-4.0, n_steps=40, eps_n=100.0, eps_t=10.0, mu=0.1)
RING_LEVELS = {1: (12, 20), 2: (24, 40), 3: (48, 80)}


def rings_patches(level: int, plans: dict):
    nu_, nl_ = RING_LEVELS[level]
    out = []
    for name, ne in (("upper", nu_), ("lower", nl_)):
        c, ro, ri = RINGS[name]
        base = arc_patch(c, ro, ri, -90.0, 2)
        half = ne // 2
        ku = [0.5 * k for k in _quarter_split(half)] + [0.5 + 0.5 * k for k in _quarter_split(half)]
        plan = _plan(plans[name], insert_u=tuple(sorted(ku)), insert_v=(1 / 3, 2 / 3))
        out.append(build_vo_patch(base, plan))
    return out


def generate_two_rings(level="m1", plan="N2", config: ProblemConfig | None = None) -> Problem:
    if config is None:
        config = ProblemConfig(problem="two-rings",
                               mesh=level if isinstance(level, str) else f"m{level}", plan=plan)
    g = RINGS
    lv = mesh_level(config.mesh)
    up, lo = rings_patches(lv, config.plans())
    n = g["n_steps"]
    k = np.arange(1, n + 1)
    z = np.zeros(n)
    up_top, up_bot = up.edge_indices("xi1"), up.edge_indices("xi0")
    lo_top, lo_bot = lo.edge_indices("xi1"), lo.edge_indices("xi0")
    bcs = [DirichletBC(0, up_top, 1, g["u_y"] * k / n), DirichletBC(0, up_top, 0, z),
           DirichletBC(0, up_bot, 0, z), DirichletBC(1, lo_top, 0, z),
           DirichletBC(1, lo_bot, 0, z), DirichletBC(1, lo_bot, 1, z)]
    pair = _pair(up, 0, (lo, 1), config.eps_n or g["eps_n"], config.eps_t or g["eps_t"],
                 g["mu"] if config.mu is None else config.mu, config.quadrature or "default")
    model = Model([Body(up, Material(g["E_upper"], g["nu"]), "upper"),
                   Body(lo, Material(g["E_lower"], g["nu"]), "lower")], bcs, [pair], n,
                  {"upper_top": (0, up_top), "lower_bottom": (1, lo_bot)}, char_length=10.0)
    return Problem(config, model, {"upper": up, "lower": lo}, surface="upper_top",
                   normalize_pressure=False)


# --------------------------------------------------------------------------
# custom two-block problem

def generate_custom(config: ProblemConfig) -> Problem:
    """Upper block pressed (and optionally dragged) onto a fixed lower block."""
    g = {**CUSTOM, **config.custom}
    r = 2 ** (mesh_level(config.mesh) - 1)
    plans = config.plans()
    vps = []
    for name, side in (("upper", "eta0"), ("lower", "eta1")):
        nu, nv = g[f"{name}_elements"]
        vps.append(build_vo_patch(rectangle_patch(*g[name]), _plan(
            plans[name], insert_u=tuple(_quarter_split(nu * r)), insert_v=tuple(_quarter_split(nv * r)),
            contact_side=side)))
    up, lo = vps
    n = config.load_steps or g["n_steps"]
    k = np.arange(1, n + 1)
    z = np.zeros(n)
    top, bottom = up.edge_indices("eta1"), lo.edge_indices("eta1")
    bcs = [DirichletBC(0, top, 0, g["u_x"] * k / n), DirichletBC(0, top, 1, g["u_y"] * k / n),
           DirichletBC(1, bottom, 0, z), DirichletBC(1, bottom, 1, z)]
    pair = _pair(up, 0, (lo, 1), config.eps_n or g["eps_n"], config.eps_t or g["eps_t"],
                 g["mu"] if config.mu is None else config.mu, config.quadrature or "default")
    model = Model([Body(up, Material(g["E_upper"], g["nu"]), "upper"),
                   Body(lo, Material(g["E_lower"], g["nu"]), "lower")], bcs, [pair], n,
                  {"upper_top": (0, top), "lower_bottom": (1, bottom)},
                  char_length=g["upper"][1] - g["upper"][0])
    return Problem(config, model, {"upper": up, "lower": lo}, surface="upper_top",
                   profile_axis=(0, 0.5 * (g["upper"][0] + g["upper"][1]) + g["u_x"]))


def generate(config: ProblemConfig) -> Problem:
    if config.problem in ("ironing", "ironing-large"):
        return generate_ironing(config=config)
    if config.problem == "hertz":
        return generate_hertz(config=config)
    if config.problem == "custom":
        return generate_custom(config)
    return generate_two_rings(config=config)
