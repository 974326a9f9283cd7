"""Time stepping: splitting operator oracle, order, and step control."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from qadi.errors import SourceOverflow
from qadi.geometry import EllipseSpec, derive_map
from qadi.grid import uniform_grid
from qadi.operators import (
    assemble,
    capped_source,
    constant_source,
    default_source,
    dense_C,
    dense_P,
    dense_R,
    eval_degeneracy,
    tau_max_bound,
)
from qadi.stepper import (
    StepConfig,
    advance,
    apply_S,
    initial_state,
    pr_step,
    solve_half_P,
    solve_half_R,
    update_tau,
)

EMAP = derive_map(EllipseSpec(6.0, 4.0))


def make_ops(n_mu=5, n_theta=6, kind="unit", **kw):
    grid = uniform_grid(n_mu, n_theta, EMAP)
    return assemble(grid, EMAP, eval_degeneracy(kind, EMAP, grid, **kw))


def dense_S(ops, tau):
    P, R = dense_P(ops), dense_R(ops)
    eye = np.eye(ops.n_unknowns)
    return (
        np.linalg.solve(eye - tau / 2 * R, np.linalg.solve(eye - tau / 2 * P, eye))
        @ (eye + tau / 2 * P)
        @ (eye + tau / 2 * R)
    )


@pytest.mark.parametrize("kind,kw", [("unit", {}), ("plane", {"theta_star": 0.4, "gamma": 2.0})])
@pytest.mark.parametrize("scale", [0.5, 1.0, 50.0])
def test_apply_S_matches_dense(kind, kw, scale):
    # scale = 50 exercises the stiff regime well above the positivity bound.
    ops = make_ops(5, 6, kind, **kw)
    tau = scale * tau_max_bound(ops)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(ops.n_unknowns)
    got = apply_S(ops, tau, v)
    want = dense_S(ops, tau) @ v
    assert np.allclose(got, want, rtol=1e-11, atol=1e-11)


def test_half_solves_invert_their_factors():
    ops = make_ops(4, 7)
    tau = 3.0 * tau_max_bound(ops)
    rng = np.random.default_rng(2)
    rhs = rng.standard_normal((ops.n_theta + 1, ops.n_mu))
    eye = np.eye(ops.n_unknowns)
    xp = solve_half_P(ops, tau / 2, rhs.copy())
    assert np.allclose((eye - tau / 2 * dense_P(ops)) @ xp.ravel(), rhs.ravel(), atol=1e-11)
    xr = solve_half_R(ops, tau / 2, rhs.copy())
    assert np.allclose((eye - tau / 2 * dense_R(ops)) @ xr.ravel(), rhs.ravel(), atol=1e-11)


def test_constant_source_step_matches_exponential_oracle():
    # With f = const the semidiscrete system is linear: v(t) solves
    # v' = C v + g with exact solution via the matrix exponential.
    ops = make_ops(4, 5)
    model = constant_source(2.0)
    cfg = StepConfig(tau0=1e-3)
    st = initial_state(ops, model, cfg)
    tau = 1e-3
    n_steps = 40
    for _ in range(n_steps):
        st = pr_step(st, ops, model, tau)
    C = dense_C(ops)
    g = 2.0 * ops.inv_s.ravel()
    t = n_steps * tau
    exact = np.linalg.solve(C, (expm(C * t) - np.eye(ops.n_unknowns)) @ g)
    assert np.allclose(st.v.ravel(), exact, atol=5e-8)
    assert st.t == pytest.approx(t)
    assert st.k == n_steps


def test_step_self_convergence_is_second_order():
    ops = make_ops(6, 7)
    model = capped_source(0.5)
    t_end = 0.02

    def integrate(tau, predictor="midpoint"):
        st = initial_state(ops, model, StepConfig(tau0=tau))
        while st.t < t_end - 1e-12:
            st = pr_step(st, ops, model, min(tau, t_end - st.t), predictor=predictor)
        return st.v.ravel()

    ref = integrate(1.25e-4 / 8)
    errs = [np.max(np.abs(integrate(tau) - ref)) for tau in (5e-4, 2.5e-4, 1.25e-4)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.5 < r < 4.5 for r in ratios)
    # Freezing the source correction drops to first order.
    errs1 = [np.max(np.abs(integrate(tau, "euler") - ref)) for tau in (5e-4, 2.5e-4)]
    assert errs1[0] / errs1[1] < 2.6


def test_pr_step_rejects_unknown_predictor():
    ops = make_ops(3, 4)
    st = initial_state(ops, default_source(), StepConfig())
    with pytest.raises(ValueError):
        pr_step(st, ops, default_source(), 1e-4, predictor="rk4")


def test_pr_step_near_unity_overflows():
    ops = make_ops(3, 4)
    model = default_source()
    st = initial_state(ops, model, StepConfig())
    st.v[:] = 0.9995
    with pytest.raises(SourceOverflow):
        pr_step(st, ops, model, 1e-4)


def test_update_tau_monotone_and_floored():
    n = 8
    rng = np.random.default_rng(3)
    older, old = rng.standard_normal(n), rng.standard_normal(n)
    # future change equal to past change: tau unchanged
    same = update_tau(1e-3, older, old, 2 * old - older, 1e-8)
    assert same == pytest.approx(1e-3)
    # smaller future change would allow growth, but the controller clamps
    grown = update_tau(1e-3, older, old, old + 0.5 * (old - older), 1e-8)
    assert grown == pytest.approx(1e-3)
    # larger future change shrinks tau
    shrunk = update_tau(1e-3, older, old, old + 4 * (old - older), 1e-8)
    assert shrunk < 1e-3
    # negative radicand collapses to the floor
    big = old + 100.0 * np.abs(old - older) + 1.0
    assert update_tau(1e-3, older, old, big, 1e-8) == 1e-8
    # explicit ceiling wins over everything
    assert update_tau(1e-3, older, old, 2 * old - older, 1e-8, ceiling=5e-4) == 5e-4


def test_update_tau_componentwise_minimum():
    # The most restrictive component governs, not the norm of the change.
    older = np.zeros(3)
    old = np.zeros(3)
    new = np.array([0.0, 0.0, 1e-2])  # one component moved a lot
    tau = update_tau(1e-3, older, old, new, 1e-8)
    assert tau == pytest.approx(math.sqrt(1e-6 - 1e-4)) if 1e-6 > 1e-4 else tau == 1e-8


def test_advance_constant_step_before_activation():
    ops = make_ops(4, 5)
    model = capped_source(0.5)  # derivative stays small: no adaptation
    cfg = StepConfig(tau0=1e-4, tau_min=1e-8)
    st = initial_state(ops, model, cfg)
    for _ in range(5):
        st = advance(st, ops, model, cfg)
        assert st.tau == pytest.approx(1e-4)
    assert st.t == pytest.approx(5e-4)


def test_advance_tau_cap_limits_the_step():
    ops = make_ops(4, 5)
    model = capped_source(0.5)
    cfg = StepConfig(tau0=1e-4)
    st = initial_state(ops, model, cfg)
    st = advance(st, ops, model, cfg, tau_cap=3e-5)
    assert st.t == pytest.approx(3e-5)


def test_advance_adapts_once_derivative_is_large():
    # Constant forcing far above the activation threshold with an
    # inhomogeneous degeneracy: derivative changes drive the controller.
    ops = make_ops(4, 5, "plane", theta_star=1.0, gamma=0.2)
    model = default_source()
    cfg = StepConfig(tau0=1e-4, tau_min=1e-9, adaptation_on_after=0.5)
    st = initial_state(ops, model, cfg)
    taus = []
    for _ in range(40):
        st = advance(st, ops, model, cfg)
        taus.append(st.tau)
    assert all(b <= a + 1e-18 for a, b in zip(taus, taus[1:]))  # monotone
    assert st.k >= 40  # every accepted step counted


def test_initial_state_zero_field_has_positive_derivative():
    ops = make_ops(4, 5)
    st = initial_state(ops, default_source(), StepConfig())
    assert np.all(st.v == 0.0)
    assert np.all(st.deriv > 0.0)  # C*0 + f(0)/s = 1/s > 0
