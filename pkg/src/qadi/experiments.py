"""Study drivers: perturbation sensitivity, critical-area search, degeneracy.

Each driver wraps solver.run with bookkeeping; replicates and search probes
are independent runs and can execute concurrently (threaded; the line-solve
kernels dominate and run in compiled code).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import (
    EllipseSpec,
    derive_map,
    ellipse_from_area,
    quench_area_bounds,
)
from .grid import TensorGrid, exponential_grid, uniform_grid
from .solver import RunConfig, RunRecord, run
from .stepper import StepState


@dataclass(frozen=True)
class PerturbSpec:
    order: int = 5  # perturbation magnitude 10**-order
    mode: str = "once_at"  # or "continuous"
    threshold: float = 0.9  # once_at trigger on max v
    probability: float = 0.01  # continuous per-step injection rate
    replicates: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("perturbation order must be >= 1")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.mode not in ("once_at", "continuous"):
            raise ValueError(f"unknown perturbation mode {self.mode!r}")


@dataclass
class PerturbStats:
    order: int
    mode: str
    replicates: int
    baseline_time: float
    modal_location: tuple[float, float]
    mean_time: float
    min_time: float
    max_time: float
    mean_field_diff: float
    mean_rel_time_diff: float
    rows: list = field(default_factory=list, repr=False)  # per-replicate records

    def to_json_dict(self) -> dict:
        return {
            "schema": "qadi/1",
            "order": self.order,
            "mode": self.mode,
            "replicates": self.replicates,
            "baseline_time": self.baseline_time,
            "modal_location": list(self.modal_location),
            "mean_time": self.mean_time,
            "min_time": self.min_time,
            "max_time": self.max_time,
            "mean_field_diff": self.mean_field_diff,
            "mean_rel_time_diff": self.mean_rel_time_diff,
            "rows": self.rows,
        }


def monte_carlo(config: RunConfig, spec: PerturbSpec, jobs: int = 1) -> PerturbStats:
    """Perturbation sensitivity of the quench time and location.

    Runs an unperturbed baseline, then `replicates` perturbed runs whose
    solution vector receives additive noise 10**-order * z with z uniform
    on [-1, 1] per component.  "once_at" injects exactly once, at the first
    step where max v crosses the threshold; "continuous" injects after each
    accepted step with the given probability.  Each replicate's final field
    is compared against the baseline re-integrated to that replicate's own
    quench time.
    """
    eps = 10.0 ** (-spec.order)
    baseline = run(config, capture_at=spec.threshold)
    if not baseline.quenched:
        raise ValueError(f"baseline did not quench (outcome {baseline.outcome})")
    captured = baseline.captured_state
    t_base = baseline.quench_time

    def replicate(r: int) -> dict:
        rng = np.random.Generator(np.random.Philox(spec.seed ^ r))
        if spec.mode == "once_at":
            st = captured.copy()
            st.v = st.v + eps * rng.uniform(-1.0, 1.0, size=st.v.shape)
            rec = run(config, init=st)
        else:
            def hook(state: StepState) -> bool:
                if rng.uniform() < spec.probability:
                    state.v += eps * rng.uniform(-1.0, 1.0, size=state.v.shape)
                    return True
                return False

            rec = run(config, step_hook=hook)
        if not rec.quenched:
            raise ValueError(f"replicate {r} did not quench ({rec.outcome})")
        # Baseline field at the perturbed quench time.
        if spec.mode == "once_at" and rec.quench_time >= captured.t:
            base_rec = run(config, init=captured.copy(), t_stop=rec.quench_time)
        else:
            base_rec = run(config, t_stop=rec.quench_time)
        diff = float(np.max(np.abs(base_rec.final_state.v - rec.final_state.v)))
        return {
            "replicate": r,
            "quench_time": rec.quench_time,
            "x": rec.quench_xy[0],
            "y": rec.quench_xy[1],
            "field_diff": diff,
            "rel_time_diff": abs(t_base - rec.quench_time) / abs(t_base),
        }

    indices = list(range(1, spec.replicates + 1))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(replicate, indices))
    else:
        rows = [replicate(r) for r in indices]
    rows.sort(key=lambda row: row["replicate"])

    times = np.array([row["quench_time"] for row in rows])
    locs = [(round(row["x"], 3), round(row["y"], 3)) for row in rows]
    modal = max(set(locs), key=locs.count)
    return PerturbStats(
        order=spec.order,
        mode=spec.mode,
        replicates=spec.replicates,
        baseline_time=t_base,
        modal_location=modal,
        mean_time=float(np.mean(times)),
        min_time=float(np.min(times)),
        max_time=float(np.max(times)),
        mean_field_diff=float(np.mean([row["field_diff"] for row in rows])),
        mean_rel_time_diff=float(np.mean([row["rel_time_diff"] for row in rows])),
        rows=rows,
    )


@dataclass
class CriticalAreaResult:
    ratio: float
    bracket: tuple[float, float]  # theoretical (lower, upper)
    bracket_history: list
    critical_area: float
    quench_time: float
    indeterminate_probes: int
    config_echo: dict = field(default_factory=dict, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "schema": "qadi/1",
            "ratio": self.ratio,
            "bracket": list(self.bracket),
            "bracket_history": [list(b) for b in self.bracket_history],
            "critical_area": self.critical_area,
            "quench_time": self.quench_time,
            "indeterminate_probes": self.indeterminate_probes,
            "config": self.config_echo,
        }


def critical_area_search(
    ratio: float,
    template: RunConfig | None = None,
    rect_critical_area: float | None = None,
    tol_frac: float = 0.01,
    jobs: int = 1,
) -> CriticalAreaResult:
    """Smallest quenching area for a given aspect ratio, by bisection.

    The bracket starts at the theoretical bounds; any probe at or below the
    lower bound is classified non-quenching without running.  A probe whose
    budget runs out counts as non-quenching (conservative) and is flagged.
    The search grid is fitted once from a reference run at the upper-bound
    area and reused: in the mapped coordinates the grid depends only on the
    aspect ratio, not on the absolute size.
    """
    bounds = quench_area_bounds(ratio, rect_critical_area)
    lo, hi = bounds.lower, bounds.upper
    if template is None:
        template = RunConfig(ellipse=ellipse_from_area(ratio, hi), n_mu=60, n_theta=61)

    def probe_config(area: float, grid: TensorGrid | None) -> RunConfig:
        return dc_replace(
            template,
            ellipse=ellipse_from_area(ratio, area),
            grid=grid,
            grid_kind=template.grid_kind if grid is None else "exponential",
        )

    # Reference run on a uniform grid at the guaranteed-quenching area,
    # to seed the boundary-layer-fitted grid for all probes.
    search_grid: TensorGrid | None = None
    ref_cfg = dc_replace(
        template, ellipse=ellipse_from_area(ratio, hi), grid=None, grid_kind="uniform",
    )
    ref_rec = run(ref_cfg)
    if template.grid_kind == "exponential" or template.grid is not None:
        if not ref_rec.quenched:
            raise ValueError(
                f"reference run at the upper-bound area ended {ref_rec.outcome}; "
                "cannot fit the search grid"
            )
        emap = derive_map(ref_cfg.ellipse)
        ref_grid = uniform_grid(ref_cfg.n_mu, ref_cfg.n_theta, emap)
        dudt = ref_rec.final_state.deriv
        search_grid = exponential_grid(
            ref_grid, dudt, template.n_mu, template.n_theta, emap,
        )

    indeterminate = 0
    history: list[tuple[float, float]] = [(lo, hi)]

    def quenches(area: float) -> tuple[bool, RunRecord | None]:
        nonlocal indeterminate
        if area <= bounds.lower:
            return False, None
        rec = run(probe_config(area, search_grid))
        if rec.outcome == "budget":
            indeterminate += 1
            return False, rec
        return rec.quenched, rec

    # The upper bound itself is the first quenching witness.
    ok, hi_rec = quenches(hi)
    if not ok:
        raise ValueError(
            f"upper-bound area {hi:.4f} did not quench within budget; "
            "raise t_max or refine the grid"
        )
    tol = tol_frac * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, rec = quenches(mid)
        if ok:
            hi, hi_rec = mid, rec
        else:
            lo = mid
        history.append((lo, hi))

    return CriticalAreaResult(
        ratio=ratio,
        bracket=(bounds.lower, bounds.upper),
        bracket_history=history,
        critical_area=hi,
        quench_time=hi_rec.quench_time,
        indeterminate_probes=indeterminate,
        config_echo=template.echo(),
    )


@dataclass
class DegeneracyStudyResult:
    kind: str
    gamma: float
    theta_stars: list
    locations: list  # per theta*: (x, y)
    distances: list  # per theta*: inward-normal distance to the boundary
    quench_times: list
    mean_distance: float
    std_distance: float
    predicted_locations: list  # from the mean distance, per theta*
    prediction_deviation: list  # |observed - predicted| per theta*
    config_echo: dict = field(default_factory=dict, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "schema": "qadi/1",
            "kind": self.kind,
            "gamma": self.gamma,
            "theta_stars": list(self.theta_stars),
            "locations": [list(p) for p in self.locations],
            "distances": list(self.distances),
            "quench_times": list(self.quench_times),
            "mean_distance": self.mean_distance,
            "std_distance": self.std_distance,
            "predicted_locations": [list(p) for p in self.predicted_locations],
            "prediction_deviation": list(self.prediction_deviation),
            "config": self.config_echo,
        }


def boundary_distance(x: float, y: float, a_axis: float, b_axis: float) -> float:
    """Euclidean distance from an interior point to the ellipse boundary."""

    def dist2(t: float) -> float:
        return (a_axis * math.cos(t) - x) ** 2 + (b_axis * math.sin(t) - y) ** 2

    t0 = math.atan2(y / b_axis if b_axis else y, x / a_axis if a_axis else x)
    ts = np.linspace(0.0, 2.0 * math.pi, 721)
    t_coarse = float(ts[np.argmin([dist2(t) for t in ts])])
    best = math.inf
    for guess in (t0, t_coarse):
        # A bounded search needs no downhill bracket, which fails when the
        # guess sits at a local maximum of the distance (e.g. the center).
        res = minimize_scalar(
            dist2, bounds=(guess - 0.05, guess + 0.05), method="bounded",
            options={"xatol": 1e-12},
        )
        best = min(best, float(res.fun))
    return math.sqrt(best)


def predicted_location(
    theta_star: float, d: float, a_axis: float, b_axis: float,
) -> tuple[float, float]:
    """Boundary degeneracy point moved distance d along the inward normal."""
    x_star = a_axis * math.cos(theta_star)
    y_star = b_axis * math.sin(theta_star)
    norm = math.sqrt(b_axis**4 * x_star**2 + a_axis**4 * y_star**2)
    return (
        x_star * (1.0 - d * b_axis**2 / norm),
        y_star * (1.0 - d * a_axis**2 / norm),
    )


def degeneracy_study(
    a_axis: float,
    b_axis: float,
    kind: str,
    theta_stars: Sequence[float] | None = None,
    gamma: float = 1.0,
    template: RunConfig | None = None,
    jobs: int = 1,
) -> DegeneracyStudyResult:
    """Quench location versus the position of a boundary degeneracy.

    For each boundary angle the degeneracy field is rebuilt and the problem
    run to quench; the study reports each quench location, its inward-normal
    distance to the boundary, and how well a single shared distance (the
    annulus picture) predicts the locations.
    """
    if theta_stars is None:
        theta_stars = [n * math.pi / 4.0 for n in range(8)]
    if template is None:
        template = RunConfig(ellipse=EllipseSpec(a_axis, b_axis), n_mu=60, n_theta=61)
    else:
        template = dc_replace(template, ellipse=EllipseSpec(a_axis, b_axis))

    def study_one(theta_star: float) -> RunRecord:
        cfg = dc_replace(
            template, degeneracy_kind=kind, theta_star=theta_star, gamma=gamma,
        )
        rec = run(cfg)
        if not rec.quenched:
            raise ValueError(
                f"run at theta*={theta_star:.4f} ended {rec.outcome}; "
                "enlarge the domain or the budget"
            )
        return rec

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(study_one, theta_stars))
    else:
        records = [study_one(ts) for ts in theta_stars]

    # The boundary curve has semi-axes a cosh(M), a sinh(M) = (A, B).
    locations = [rec.quench_xy for rec in records]
    distances = [boundary_distance(x, y, a_axis, b_axis) for x, y in locations]
    times = [rec.quench_time for rec in records]
    mean_d = float(np.mean(distances))
    std_d = float(np.std(distances))
    predicted = [predicted_location(ts, mean_d, a_axis, b_axis) for ts in theta_stars]
    deviation = [
        math.hypot(px - x, py - y)
        for (px, py), (x, y) in zip(predicted, locations)
    ]
    return DegeneracyStudyResult(
        kind=kind,
        gamma=gamma,
        theta_stars=list(theta_stars),
        locations=list(locations),
        distances=distances,
        quench_times=times,
        mean_distance=mean_d,
        std_distance=std_d,
        predicted_locations=predicted,
        prediction_deviation=deviation,
        config_echo=template.echo(),
    )
