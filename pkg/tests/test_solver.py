"""End-to-end run loop: outcomes, determinism, symmetry, checkpoints."""

import numpy as np
import pytest

from qadi.errors import CheckpointError, MonotonicityViolation
from qadi.geometry import EllipseSpec, ellipse_from_area, to_cartesian
from qadi.solver import (
    RunConfig,
    build_problem,
    checkpoint_load,
    checkpoint_save,
    run,
)
from qadi.stepper import StepConfig, initial_state

# Quench time for this supercritical ratio-2/3 ellipse on the 24x25 grid,
# frozen from an independent stiff integration (BDF, rtol 1e-8) of the same
# semidiscrete system with the identical quench threshold max v = 1 - 1e-3.
ORACLE_ELLIPSE = EllipseSpec(2.0, 2.0 / 3.0 * 2.0)
ORACLE_T = 0.6484

QUENCH_CFG = RunConfig(
    ellipse=ORACLE_ELLIPSE,
    n_mu=24,
    n_theta=25,
    step=StepConfig(tau0=1e-4, tau_min=1e-5),
    mono_tol=-1e-2,
    t_max=5.0,
)


@pytest.fixture(scope="module")
def quench_record():
    return run(QUENCH_CFG)


def test_quench_outcome_and_time(quench_record):
    rec = quench_record
    assert rec.outcome == "quenched" and rec.quenched
    assert rec.quench_time == pytest.approx(ORACLE_T, abs=0.02)
    assert rec.t_final == rec.quench_time


def test_quench_location_is_origin(quench_record):
    x, y = quench_record.quench_xy
    # nearest node to the origin; node spacing bounds the offset
    assert abs(x) < 0.3 and abs(y) < 0.3
    i, j = quench_record.quench_indices
    emap, grid, _ = build_problem(QUENCH_CFG)
    xx, yy = to_cartesian(emap, grid.mu.nodes[i], grid.theta.nodes[j])
    assert (xx, yy) == (pytest.approx(x), pytest.approx(y))


def test_quench_derivative_scale(quench_record):
    # At threshold 1 - eps_q the source is eps_q^{-1} = 1e3; with s = 1 the
    # recorded max v' sits just under that.
    assert 100.0 < quench_record.max_dudt < 2000.0


def test_series_and_echo(quench_record):
    rec = quench_record
    s = rec.series
    assert set(s) >= {"k", "t", "tau", "max_v", "max_dvdt"}
    assert len(s["t"]) == len(s["tau"]) == len(s["max_v"]) > 10
    assert all(a <= b for a, b in zip(s["t"], s["t"][1:]))
    assert rec.config_echo["n_mu"] == 24
    d = rec.to_json_dict()
    assert d["schema"] == "qadi/1"
    assert d["outcome"] == "quenched"


def test_runs_are_deterministic():
    cfg = RunConfig(
        ellipse=ORACLE_ELLIPSE, n_mu=8, n_theta=9,
        step=StepConfig(tau0=1e-4, tau_min=1e-4), mono_tol=-1e-2, t_max=0.02,
    )
    a = run(cfg, t_stop=0.02)
    b = run(cfg, t_stop=0.02)
    assert np.array_equal(a.final_state.v, b.final_state.v)


def test_solution_inherits_theta_symmetry():
    # s = 1 and v0 = 0 are symmetric under theta -> 2*pi - theta, so the
    # discrete solution must stay symmetric: u_{i,j} = u_{i,M+1-j}.
    cfg = RunConfig(
        ellipse=ORACLE_ELLIPSE, n_mu=8, n_theta=9,
        step=StepConfig(tau0=5e-5, tau_min=5e-5), mono_tol=-1e-2, t_max=0.05,
    )
    rec = run(cfg, t_stop=0.05)
    v = rec.final_state.v
    m1 = v.shape[0]
    pair = (-np.arange(m1)) % m1
    assert np.allclose(v, v[pair, :], atol=1e-12)


def test_steady_outcome_below_critical_area():
    # Area below the ratio-0.5 bracket lower endpoint cannot quench.
    cfg = RunConfig(
        ellipse=ellipse_from_area(0.5, 1.0), n_mu=4, n_theta=5,
        step=StepConfig(tau0=2e-5, tau_min=2e-5),
        eps_s=1e-8, t_max=20.0,
    )
    rec = run(cfg)
    assert rec.outcome == "steady"
    assert rec.quench_time is None
    assert np.max(rec.final_state.v) < 1.0 - cfg.eps_q


def test_budget_outcome():
    cfg = RunConfig(ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7, max_steps=3)
    rec = run(cfg)
    assert rec.outcome == "budget"
    assert rec.steps == 3


def test_t_stop_lands_exactly():
    cfg = RunConfig(
        ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7,
        step=StepConfig(tau0=1e-4, tau_min=1e-4), mono_tol=-1e-2,
    )
    rec = run(cfg, t_stop=0.0123)
    assert rec.outcome == "stopped"
    assert rec.t_final == pytest.approx(0.0123, abs=1e-12)


def test_capture_at_snapshots_crossing():
    rec = run(QUENCH_CFG, capture_at=0.5)
    snap = rec.captured_state
    assert snap is not None
    assert np.max(snap.v) >= 0.5
    # captured at the first crossing, so one step earlier was below
    assert np.max(snap.v) < 0.6


def test_step_hook_can_mutate_state():
    bumped = []

    def hook(st):
        if st.k == 5 and not bumped:
            st.v += 1e-6
            bumped.append(st.k)
            return True
        return False

    cfg = RunConfig(
        ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7,
        step=StepConfig(tau0=1e-4, tau_min=1e-4), mono_tol=-1e-2,
    )
    rec = run(cfg, t_stop=0.002, step_hook=hook)
    base = run(cfg, t_stop=0.002)
    assert bumped == [5]
    assert not np.array_equal(rec.final_state.v, base.final_state.v)


def test_monotonicity_violation_raised_when_strict():
    # An initial step far above the positivity bound produces transient
    # focal-node decreases; with the strict default tolerance the run aborts.
    cfg = RunConfig(
        ellipse=EllipseSpec(3.0, 2.0), n_mu=24, n_theta=25,
        step=StepConfig(tau0=2e-4, tau_min=2e-4), t_max=1.0,
    )
    with pytest.raises(MonotonicityViolation):
        run(cfg)


def test_min_increment_tracked(quench_record):
    assert quench_record.min_increment is not None
    assert quench_record.min_increment >= QUENCH_CFG.mono_tol


def test_checkpoint_round_trip():
    emap, grid, ops = build_problem(RunConfig(ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7))
    from qadi.operators import default_source

    st = initial_state(ops, default_source(), StepConfig())
    st.v += 0.01
    rng = np.random.default_rng(42)
    rng.standard_normal(5)
    blob = checkpoint_save(st, rng)
    st2, rng2 = checkpoint_load(blob)
    assert np.array_equal(st.v, st2.v)
    assert (st2.t, st2.tau, st2.k) == (st.t, st.tau, st.k)
    assert np.array_equal(st.deriv, st2.deriv)
    assert rng2.standard_normal(3) == pytest.approx(rng.standard_normal(3))
    # without an RNG
    st3, rng3 = checkpoint_load(checkpoint_save(st))
    assert rng3 is None and np.array_equal(st3.v, st.v)


def test_checkpoint_rejects_garbage():
    with pytest.raises(CheckpointError):
        checkpoint_load(b"not a checkpoint")
    emap, grid, ops = build_problem(RunConfig(ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7))
    from qadi.operators import default_source

    blob = checkpoint_save(initial_state(ops, default_source(), StepConfig()))
    with pytest.raises(CheckpointError):
        checkpoint_load(blob[:10])
    bad_version = blob[:5] + bytes([99]) + blob[6:]
    with pytest.raises(CheckpointError):
        checkpoint_load(bad_version)


def test_resume_from_checkpoint_matches_uninterrupted():
    cfg = RunConfig(
        ellipse=ORACLE_ELLIPSE, n_mu=6, n_theta=7,
        step=StepConfig(tau0=1e-4, tau_min=1e-4), mono_tol=-1e-2,
    )
    first = run(cfg, t_stop=0.005)
    blob = checkpoint_save(first.final_state)
    resumed_state, _ = checkpoint_load(blob)
    resumed = run(cfg, init=resumed_state, t_stop=0.01)
    straight = run(cfg, t_stop=0.01)
    assert np.allclose(resumed.final_state.v, straight.final_state.v, atol=1e-13)
