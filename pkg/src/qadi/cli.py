"""Command-line front end: config parsing, subcommands, file emission."""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

from . import __version__
from .errors import MonotonicityViolation, QadiError
from .experiments import (
    PerturbSpec,
    critical_area_search,
    degeneracy_study,
    monte_carlo,
)
from .geometry import (
    EllipseSpec,
    bounds_table,
    derive_map,
    ellipse_from_area,
    to_cartesian,
)
from .solver import RunConfig, RunRecord, build_problem, run
from .stepper import StepConfig
from .verify import verify_scheme

# Every recognized config-file key, with its target field.
_RUN_KEYS = {
    "major_axis": float,
    "minor_axis": float,
    "n_mu": int,
    "n_theta": int,
    "grid_kind": str,
    "degeneracy_kind": str,
    "theta_star": float,
    "gamma": float,
    "eps_q": float,
    "eps_s": float,
    "steady_persistence": int,
    "t_max": float,
    "max_steps": int,
    "seed": int,
}
_STEP_KEYS = {
    "tau0": float,
    "tau_min": float,
    "safety_factor": float,
    "adaptation_on_after": float,
}
_PERTURB_KEYS = {
    "order": int,
    "mode": str,
    "threshold": float,
    "probability": float,
    "replicates": int,
}
_SEARCH_KEYS = {
    "ratio": float,
    "rect_critical_area": float,
    "tol_frac": float,
}


class ConfigError(Exception):
    pass


def _read_config(path: str) -> dict:
    """Parse a sectioned key=value file into {section: {key: value}}."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {
        "run": _RUN_KEYS,
        "step": _STEP_KEYS,
        "perturb": _PERTURB_KEYS,
        "search": _SEARCH_KEYS,
    }
    out: dict = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
            try:
                out[section][key] = known[section][key](raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: bad value for '{key}' in [{section}]: {exc}"
                ) from exc
    return out


def _build_run_config(args, file_cfg: dict) -> RunConfig:
    """Defaults (the 6x4 reference problem) <- config file <- flags."""
    run_kv = dict(file_cfg.get("run", {}))
    step_kv = dict(file_cfg.get("step", {}))

    def pick(name, section, default):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        return section.get(name, default)

    major = pick("major_axis", run_kv, 6.0)
    minor = pick("minor_axis", run_kv, 4.0)
    ellipse = EllipseSpec(float(major), float(minor))
    area_scale = getattr(args, "area_scale", None)
    if area_scale is not None:
        ellipse = ellipse_from_area(ellipse.ratio, ellipse.area * area_scale)
    step = StepConfig(
        tau0=float(pick("tau0", step_kv, 0.9e-4)),
        tau_min=float(pick("tau_min", step_kv, 1e-8)),
        safety_factor=float(pick("safety_factor", step_kv, 0.9)),
        adaptation_on_after=float(pick("adaptation_on_after", step_kv, 10.0)),
    )
    theta_star = pick("theta_star", run_kv, None)
    gamma = pick("gamma", run_kv, None)
    return RunConfig(
        ellipse=ellipse,
        n_mu=int(pick("n_mu", run_kv, 100)),
        n_theta=int(pick("n_theta", run_kv, 101)),
        grid_kind=str(pick("grid_kind", run_kv, "uniform")),
        degeneracy_kind=str(pick("degeneracy_kind", run_kv, "unit")),
        theta_star=None if theta_star is None else float(theta_star),
        gamma=None if gamma is None else float(gamma),
        step=step,
        eps_q=float(pick("eps_q", run_kv, 1e-3)),
        eps_s=float(pick("eps_s", run_kv, 1e-8)),
        steady_persistence=int(pick("steady_persistence", run_kv, 50)),
        t_max=float(pick("t_max", run_kv, 500.0)),
        max_steps=int(pick("max_steps", run_kv, 20_000_000)),
        seed=int(pick("seed", run_kv, 0)),
    )


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("schema", "qadi/1")
    payload["version"] = __version__
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _emit_run(record: RunRecord, config: RunConfig, out: Path) -> None:
    _write_json(out / "run.json", record.to_json_dict())
    ser = record.series
    _write_csv(
        out / "series.csv",
        ["k", "t", "tau", "max_v", "max_dvdt"],
        zip(
            ser["k"].tolist(),
            (repr(float(x)) for x in ser["t"]),
            (repr(float(x)) for x in ser["tau"]),
            (repr(float(x)) for x in ser["max_v"]),
            (repr(float(x)) for x in ser["max_dvdt"]),
        ),
    )
    emap, grid, opset = build_problem(config)
    v = record.final_state.v
    d = record.final_state.deriv
    rows = []
    for j in range(grid.n_theta + 1):
        for i0 in range(grid.n_mu):
            i = i0 + 1
            mu = float(grid.mu.nodes[i])
            theta = float(grid.theta.nodes[j])
            x, y = to_cartesian(emap, mu, theta)
            rows.append(
                (i, j, repr(mu), repr(theta), repr(float(x)), repr(float(y)),
                 repr(float(v[j, i0])), repr(float(d[j, i0])))
            )
    _write_csv(
        out / "final-snapshot.csv",
        ["i", "j", "mu", "theta", "x", "y", "u", "dudt"],
        rows,
    )


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("QADI_JOBS")
    return int(env) if env else 1


def cmd_solve(args) -> int:
    file_cfg = _read_config(args.config) if args.config else {}
    config = _build_run_config(args, file_cfg)
    record = run(config)
    out = _out_dir(args)
    _emit_run(record, config, out)
    loc = "" if not record.quenched else (
        f" at ({record.quench_xy[0]:.3f}, {record.quench_xy[1]:.3f})"
        f", T = {record.quench_time:.6f}"
    )
    print(f"outcome: {record.outcome}{loc} after {record.steps} steps")
    for note in record.warnings:
        print(f"note: {note}")
    if record.outcome == "budget":
        return 3
    return 0


def cmd_verify(args) -> int:
    reports = verify_scheme(
        n_mu=args.n, n_theta=args.m, tau=args.tau,
        degeneracy_kind=args.degeneracy,
    )
    for rep in reports:
        print(rep)
    out = _out_dir(args)
    _write_json(out / "verify.json", {
        "reports": [
            {"name": r.name, "passed": r.passed, "details": r.details}
            for r in reports
        ],
    })
    return 0 if all(r.passed for r in reports) else 1


def cmd_bounds(args) -> int:
    table = bounds_table()
    rows = []
    print(f"{'B/A':>6} {'rect area':>10} {'lower':>9} {'upper':>9}")
    for b in table:
        print(f"{b.ratio:>6.3f} {b.rect_critical_area:>10.4f} "
              f"{b.lower:>9.4f} {b.upper:>9.4f}")
        rows.append((b.ratio, b.rect_critical_area,
                     round(b.lower, 4), round(b.upper, 4)))
    out = _out_dir(args)
    _write_csv(out / "bounds.csv", ["ratio", "rect_area", "lower", "upper"], rows)
    _write_json(out / "bounds.json", {
        "rows": [
            {"ratio": r, "rect_area": a, "lower": lo, "upper": hi}
            for r, a, lo, hi in rows
        ],
    })
    return 0


def cmd_critical(args) -> int:
    file_cfg = _read_config(args.config) if args.config else {}
    search_kv = file_cfg.get("search", {})
    ratio = args.ratio if args.ratio is not None else search_kv.get("ratio")
    if ratio is None:
        raise ConfigError("critical: --ratio is required")
    template = None
    if file_cfg.get("run") or file_cfg.get("step") or args.n_mu or args.n_theta:
        template = _build_run_config(args, file_cfg)
        if args.exponential:
            template = dc_replace(template, grid_kind="exponential", grid=None)
    elif args.exponential:
        template = RunConfig(
            ellipse=EllipseSpec(6.0, 4.0), n_mu=60, n_theta=61,
            grid_kind="exponential",
        )
    result = critical_area_search(
        float(ratio),
        template=template,
        rect_critical_area=args.rect_area
        if args.rect_area is not None
        else search_kv.get("rect_critical_area"),
        tol_frac=args.tol if args.tol is not None else search_kv.get("tol_frac", 0.01),
        jobs=_jobs(args),
    )
    print(
        f"ratio {result.ratio:.3f}: critical area {result.critical_area:.4f} "
        f"in [{result.bracket[0]:.4f}, {result.bracket[1]:.4f}], "
        f"quench time {result.quench_time:.4f}"
    )
    if result.indeterminate_probes:
        print(f"note: {result.indeterminate_probes} probe(s) hit the budget")
    out = _out_dir(args)
    _write_json(out / "critical.json", result.to_json_dict())
    _write_csv(
        out / "critical.csv",
        ["ratio", "critical_area", "quench_time", "bracket_lower", "bracket_upper"],
        [(result.ratio, result.critical_area, result.quench_time,
          result.bracket[0], result.bracket[1])],
    )
    return 0


def cmd_montecarlo(args) -> int:
    file_cfg = _read_config(args.config) if args.config else {}
    config = _build_run_config(args, file_cfg)
    perturb_kv = file_cfg.get("perturb", {})

    def pick(name, default):
        flag = getattr(args, name, None)
        return flag if flag is not None else perturb_kv.get(name, default)

    spec = PerturbSpec(
        order=int(pick("order", 5)),
        mode=str(pick("mode", "once_at")),
        threshold=float(pick("threshold", 0.9)),
        probability=float(pick("probability", 0.01)),
        replicates=int(pick("replicates", 20)),
        seed=config.seed,
    )
    stats = monte_carlo(config, spec, jobs=_jobs(args))
    print(
        f"order {stats.order} ({stats.mode}, {stats.replicates} replicates): "
        f"location {stats.modal_location}, mean T {stats.mean_time:.6f}, "
        f"mean |v_f - v~_f| {stats.mean_field_diff:.3e}, "
        f"mean rel dT {stats.mean_rel_time_diff:.3e}"
    )
    out = _out_dir(args)
    _write_json(out / "montecarlo.json", stats.to_json_dict())
    _write_csv(
        out / "montecarlo.csv",
        ["replicate", "x", "y", "quench_time", "field_diff", "rel_time_diff"],
        [
            (row["replicate"], repr(row["x"]), repr(row["y"]),
             repr(row["quench_time"]), repr(row["field_diff"]),
             repr(row["rel_time_diff"]))
            for row in stats.rows
        ],
    )
    return 0


def cmd_degeneracy(args) -> int:
    file_cfg = _read_config(args.config) if args.config else {}
    template = _build_run_config(args, file_cfg)
    thetas = None
    if args.theta_stars:
        thetas = [float(t) for t in args.theta_stars.split(",")]
    result = degeneracy_study(
        template.ellipse.major_axis,
        template.ellipse.minor_axis,
        args.kind,
        theta_stars=thetas,
        gamma=args.gamma if args.gamma is not None else 1.0,
        template=template,
        jobs=_jobs(args),
    )
    print(
        f"{result.kind}: mean inward distance {result.mean_distance:.4f} "
        f"(std {result.std_distance:.4f}) over {len(result.theta_stars)} angles"
    )
    out = _out_dir(args)
    _write_json(out / "degeneracy.json", result.to_json_dict())
    _write_csv(
        out / "degeneracy.csv",
        ["theta_star", "x", "y", "distance", "quench_time",
         "predicted_x", "predicted_y", "deviation"],
        [
            (repr(ts), repr(x), repr(y), repr(d), repr(t), repr(px), repr(py), repr(dev))
            for ts, (x, y), d, t, (px, py), dev in zip(
                result.theta_stars, result.locations, result.distances,
                result.quench_times, result.predicted_locations,
                result.prediction_deviation,
            )
        ],
    )
    return 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="sectioned key=value config file")
    p.add_argument("--major-axis", dest="major_axis", type=float)
    p.add_argument("--minor-axis", dest="minor_axis", type=float)
    p.add_argument("--n-mu", dest="n_mu", type=int)
    p.add_argument("--n-theta", dest="n_theta", type=int)
    p.add_argument("--tau0", type=float)
    p.add_argument("--tau-min", dest="tau_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--degeneracy-kind", dest="degeneracy_kind")
    p.add_argument("--theta-star", dest="theta_star", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", help="output directory (default: cwd)")
    p.add_argument("--jobs", type=int, help="max concurrent runs (env QADI_JOBS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qadi",
        description="Quenching solver on elliptical domains (ADI splitting).",
    )
    parser.add_argument("--version", action="version", version=f"qadi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="integrate one problem to quench or steady state")
    _add_run_flags(p)
    p.add_argument("--area-scale", dest="area_scale", type=float,
                   help="scale the ellipse area at fixed aspect ratio")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="structural checks on the split operators")
    p.add_argument("--n", type=int, default=6, help="interior mu count")
    p.add_argument("--m", type=int, default=7, help="theta line count minus one")
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--degeneracy", default="unit")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="critical-area bounds table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("critical", help="bisect for the smallest quenching area")
    _add_run_flags(p)
    p.add_argument("--ratio", type=float)
    p.add_argument("--rect-area", dest="rect_area", type=float,
                   help="rectangular critical area for non-tabulated ratios")
    p.add_argument("--tol", type=float, help="bracket tolerance fraction")
    p.add_argument("--exponential", action="store_true",
                   help="probe on a boundary-layer-fitted grid")
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("montecarlo", help="perturbation sensitivity study")
    _add_run_flags(p)
    p.add_argument("--order", type=int)
    p.add_argument("--mode", choices=["once_at", "continuous"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--probability", type=float)
    p.add_argument("--replicates", type=int)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("degeneracy", help="quench location vs boundary degeneracy")
    _add_run_flags(p)
    p.add_argument("--kind", choices=["plane", "inverse_plane", "unit"],
                   default="plane")
    p.add_argument("--theta-stars", dest="theta_stars",
                   help="comma-separated boundary angles (default n*pi/4)")
    p.set_defaults(func=cmd_degeneracy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MonotonicityViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QadiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
