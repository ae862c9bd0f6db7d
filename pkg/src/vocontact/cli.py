"""Command line interface: ``vocontact run`` and ``vocontact sweep``.

Configuration files are TOML. Top-level keys are the fields of
:class:`~vocontact.problems.ProblemConfig` except ``plan``; each body gets
its own table holding its discretisation plan::

    problem = "ironing"
    mesh = "m1"
    out = "runs/ironing-vo"

    [die]
    plan = "N2-N2.2"

    [slab]
    plan = "N2-N2.2"

A sweep file holds ``jobs = <n>`` and an array of ``[[run]]`` tables of the
same form. Values in a configuration file override command line flags.

``problem = "custom"`` is a two-block press (bodies ``upper`` and
``lower``) whose geometry, materials and loading come from a ``[custom]``
table; see :data:`~vocontact.problems.CUSTOM` for its fields and defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .output import run
from .problems import BODY_NAMES, PROBLEMS, ProblemConfig
from .refine import ConfigurationError

log = logging.getLogger("vocontact")

_SCALARS = {"problem": str, "mesh": str, "eps_n": float, "eps_t": float, "mu": float,
            "quadrature": str, "steps": int, "load_steps": int, "v_bar": float, "out": str,
            "reference": str, "vtk_steps": list}


def parse_plans(text: str | None) -> dict | str:
    """``"N2"`` (all bodies) or ``"die=N2-N4,slab=N2"``."""
    if not text:
        return {}
    if "=" not in text:
        return text.strip()
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ConfigurationError(f"--plan entry {item!r} is not body=plan")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def config_from_mapping(d: dict, where: str = "config") -> dict:
    """Validate a TOML mapping into keyword arguments of ProblemConfig."""
    kw, plans = {}, {}
    problem = d.get("problem")
    bodies = set(BODY_NAMES.get(problem, ())) if problem else set().union(*BODY_NAMES.values())
    for key, val in d.items():
        if key == "custom":
            if not isinstance(val, dict):
                raise ConfigurationError(f"{where}: [custom] must be a table")
            kw["custom"] = dict(val)
            continue
        if isinstance(val, dict):
            if key not in bodies:
                raise ConfigurationError(f"{where}: unknown body table [{key}]")
            extra = set(val) - {"plan"}
            if extra:
                raise ConfigurationError(f"{where}: [{key}] has unknown fields {sorted(extra)}")
            if "plan" in val:
                plans[key] = str(val["plan"])
            continue
        if key == "plan":
            plans = val if isinstance(val, dict) else str(val)
            continue
        if key not in _SCALARS:
            raise ConfigurationError(f"{where}: unknown field {key!r}")
        typ = _SCALARS[key]
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, typ) or isinstance(val, bool):
            raise ConfigurationError(f"{where}: field {key!r} must be {typ.__name__}, got {val!r}")
        kw[key] = val
    if plans:
        kw["plan"] = plans
    return kw


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"{path}: {e}") from e


def config_to_toml(config: ProblemConfig) -> str:
    d = config.to_dict()
    plans = d.pop("plan", {})
    for key in ("vtk_steps", "custom"):
        if not d.get(key):
            d.pop(key, None)
    for body, plan in plans.items():
        d[body] = {"plan": plan}
    return tomli_w.dumps(d)


def config_from_toml_text(text: str) -> ProblemConfig:
    return ProblemConfig(**config_from_mapping(tomllib.loads(text)))


def _flags(args) -> dict:
    kw = {}
    for k in ("problem", "mesh", "steps", "out", "reference", "quadrature"):
        v = getattr(args, k, None)
        if v is not None:
            kw[k] = v
    if args.plan:
        kw["plan"] = parse_plans(args.plan)
    if args.vtk_steps:
        kw["vtk_steps"] = [int(s) for s in args.vtk_steps.split(",")]
    return kw


def resolve(args) -> ProblemConfig:
    kw = _flags(args)
    if args.config:
        kw.update(config_from_mapping(load_toml(args.config), str(args.config)))
    return ProblemConfig(**kw)


def _run_one(config: ProblemConfig) -> dict:
    Path(config.out).mkdir(parents=True, exist_ok=True)
    (Path(config.out) / "config.toml").write_text(config_to_toml(config))
    return run(config)


def cmd_run(args) -> int:
    config = resolve(args)
    summary = _run_one(config)
    print(json.dumps({k: summary[k] for k in ("completed", "failed_step", "steps_run", "total_dof",
                                              "delta_Px", "delta_Py", "L2_pressure_error",
                                              "wall_time")}, default=float))
    return 0 if summary["completed"] else 2


def cmd_sweep(args) -> int:
    doc = load_toml(args.config)
    runs = doc.get("run", [])
    if not runs:
        raise ConfigurationError(f"{args.config}: no [[run]] tables")
    unknown = set(doc) - {"run", "jobs"}
    if unknown:
        raise ConfigurationError(f"{args.config}: unknown fields {sorted(unknown)}")
    configs = [ProblemConfig(**config_from_mapping(r, f"{args.config} run {i + 1}"))
               for i, r in enumerate(runs)]
    outs = [c.out for c in configs]
    if len(set(outs)) != len(outs):
        raise ConfigurationError(f"{args.config}: every run needs its own output directory")
    jobs = args.jobs or int(doc.get("jobs", 1))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            summaries = list(ex.map(_run_one, configs))
    else:
        summaries = [_run_one(c) for c in configs]
    for c, s in zip(configs, summaries):
        print(f"{c.out}: completed={s['completed']} dPx={s['delta_Px']} dPy={s['delta_Py']} "
              f"L2={s['L2_pressure_error']} time={s['wall_time']:.2f}s")
    return 0 if all(s["completed"] for s in summaries) else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vocontact", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve one problem")
    r.add_argument("--config", type=Path, help="TOML file (overrides flags)")
    r.add_argument("--problem", choices=PROBLEMS)
    r.add_argument("--mesh", help="mesh level, e.g. m1")
    r.add_argument("--plan", help="plan for all bodies or body=plan,... (e.g. die=N2-N4,slab=N2)")
    r.add_argument("--steps", type=int, help="stop after this many load steps")
    r.add_argument("--out", help="output directory")
    r.add_argument("--reference", help="directory of a reference run (pressure.csv)")
    r.add_argument("--quadrature", choices=("default", "ironing-3x"))
    r.add_argument("--vtk-steps", help="comma-separated steps written as legacy VTK")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run the [[run]] tables of a TOML file")
    s.add_argument("config", type=Path)
    s.add_argument("--jobs", type=int, help="concurrent processes (default: file value or 1)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
