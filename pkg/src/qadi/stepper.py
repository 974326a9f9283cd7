"""One Peaceman-Rachford split step and the adaptive temporal controller.

The update for v' = (P + R) v + g(v) over a step tau is

    q   = [I + tau/2 (C + J)] (C v + g(v)),
    v+  = S(tau) (v + tau/2 g(v)) + tau/2 (g(v) + tau J q),

with S(tau) = (I - tau/2 R)^-1 (I - tau/2 P)^-1 (I + tau/2 P)(I + tau/2 R)
and J the diagonal Jacobian of g.  The midpoint-style correction keeps the
one-step method second order; replacing it with an explicit Euler predictor
(``predictor="euler"``) drops the order to one and exists as an ablation.

The controller equidistributes the arc length of each component of the
temporal derivative: no characteristic's derivative may traverse more arc
length over the new step than over the previous one, which yields

    tau_k^2 = tau_{k-1}^2 + min_j [ (v'_k - v'_{k-1})^2 - (v'_{k+1} - v'_k)^2 ]_j

with componentwise squares.  The implicit dependence on v'_{k+1} is resolved
with a single tentative step; a negative radicand collapses to the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import SolveFailure, SourceOverflow
from .operators import (
    OperatorSet,
    SourceModel,
    apply_C,
    apply_P,
    apply_R,
)

# Guard for derivative evaluation on a freshly accepted (possibly quenched)
# state; anything this close to u = 1 is an overshoot, not quenching.
_HARD_EPS = 1e-12


@dataclass
class StepState:
    """Solver state: solution field, time, step, and derivative history."""

    v: np.ndarray  # (M+1, N) interior field
    t: float
    tau: float
    deriv_prev: np.ndarray  # v' at step k-1
    deriv: np.ndarray  # v' at step k
    k: int = 0

    def copy(self) -> "StepState":
        return StepState(
            v=self.v.copy(),
            t=self.t,
            tau=self.tau,
            deriv_prev=self.deriv_prev.copy(),
            deriv=self.deriv.copy(),
            k=self.k,
        )


@dataclass(frozen=True)
class StepConfig:
    tau0: float = 0.9e-4
    tau_min: float = 1e-8
    safety_factor: float = 0.9
    adaptation_on_after: float = 10.0
    accept_rel: float = 0.1  # tentative-step acceptance window for tau


def initial_state(opset: OperatorSet, model: SourceModel, cfg: StepConfig,
                  v0: np.ndarray | None = None, eps_q: float = 1e-3) -> StepState:
    """State at t = 0; v0 defaults to zero (the monotonicity hypothesis)."""
    if v0 is None:
        v0 = np.zeros_like(opset.psi)
    else:
        v0 = np.array(v0, dtype=float)
    d0 = apply_C(opset, v0) + _g(opset, model, v0, eps_q)
    return StepState(v=v0, t=0.0, tau=cfg.tau0, deriv_prev=d0.copy(), deriv=d0, k=0)


def apply_S(opset: OperatorSet, tau: float, v: np.ndarray) -> np.ndarray:
    """The splitting operator S(tau) applied matrix-free.

    (I + tau/2 R) and (I + tau/2 P) are stencil applications; the two
    implicit factors are structured line solves.  Accepts a flat vector or
    an (M+1, N) field.
    """
    flat = v.ndim == 1
    u = opset.as_field(v) if flat else v
    h = 0.5 * tau
    y = u + h * apply_R(opset, u)
    y += h * apply_P(opset, y)
    out = solve_half_P(opset, h, y)
    out = solve_half_R(opset, h, out)
    return opset.as_vector(out) if flat else out


def solve_half_P(opset: OperatorSet, h: float, rhs: np.ndarray) -> np.ndarray:
    out = np.empty_like(rhs)
    st = _kernels.p_solve(
        h, opset.psi, opset.cl, opset.cc, opset.cr, opset.kappa3, opset.pair,
        np.ascontiguousarray(rhs), out,
    )
    if st != 0:
        raise SolveFailure("vanishing pivot in paired tridiagonal solve")
    return out


def solve_half_R(opset: OperatorSet, h: float, rhs: np.ndarray) -> np.ndarray:
    out = np.empty_like(rhs)
    st = _kernels.r_solve(
        h, opset.psi, opset.tl, opset.tc, opset.tr, np.ascontiguousarray(rhs), out,
    )
    if st != 0:
        raise SolveFailure("vanishing pivot in cyclic tridiagonal solve")
    return out


def pr_step(
    state: StepState,
    opset: OperatorSet,
    model: SourceModel,
    tau: float,
    eps_q: float = 1e-3,
    predictor: str = "midpoint",
) -> StepState:
    """Advance one step of size tau; raises SourceOverflow near u = 1."""
    v = state.v
    g_k = _g(opset, model, v, eps_q)
    d_k = state.deriv

    if predictor == "midpoint":
        j_k = model.fprime(v) * opset.inv_s
        q = d_k + 0.5 * tau * (apply_C(opset, d_k) + j_k * d_k)
        correction = g_k + tau * j_k * q
    elif predictor == "euler":
        # Ablation: the correction slot approximates the source at t_{k+1};
        # freezing it at t_k (no midpoint term) drops the method to first
        # order.
        correction = g_k
    else:
        raise ValueError(f"unknown predictor {predictor!r}")

    v_new = apply_S(opset, tau, v + 0.5 * tau * g_k) + 0.5 * tau * correction
    d_new = apply_C(opset, v_new) + _g(opset, model, v_new, _HARD_EPS)
    return StepState(
        v=v_new,
        t=state.t + tau,
        tau=tau,
        deriv_prev=d_k,
        deriv=d_new,
        k=state.k + 1,
    )


def update_tau(
    tau_prev: float,
    deriv_older: np.ndarray,
    deriv_old: np.ndarray,
    deriv_new: np.ndarray,
    tau_min: float,
    ceiling: float = math.inf,
) -> float:
    """Equidistribution update for the next step size.

    The radicand adds the most restrictive componentwise arc-length excess to
    tau_prev^2; a nonpositive radicand collapses to the floor.  The result
    never exceeds tau_prev (monotone controller) nor the theorem ceiling.
    """
    past = deriv_old - deriv_older
    future = deriv_new - deriv_old
    excess = float(np.min(past * past - future * future))
    rad = tau_prev * tau_prev + excess
    tau = math.sqrt(rad) if rad > 0.0 else tau_min
    return min(max(tau, tau_min), tau_prev, ceiling)


def advance(
    state: StepState,
    opset: OperatorSet,
    model: SourceModel,
    cfg: StepConfig,
    eps_q: float = 1e-3,
    ceiling: float = math.inf,
    tau_cap: float = math.inf,
) -> StepState:
    """Take one accepted step, adapting tau once the derivative is large.

    Before max |v'| crosses ``adaptation_on_after`` the step is constant.
    After, the step is taken tentatively at the previous tau; the controller
    then proposes tau_k from the observed v'_{k+1}, and the step is redone
    once at tau_k only when the proposal moved by more than the acceptance
    window.  ``tau_cap`` additionally limits the step (used to land exactly
    on a requested stop time).
    """
    tau = min(state.tau, tau_cap)
    adapting = float(np.max(state.deriv)) > cfg.adaptation_on_after and state.k >= 2
    if not adapting:
        return pr_step(state, opset, model, tau, eps_q)

    tentative = pr_step(state, opset, model, tau, eps_q)
    tau_new = update_tau(
        tau, state.deriv_prev, state.deriv, tentative.deriv, cfg.tau_min, ceiling
    )
    if abs(tau_new - tau) / tau < cfg.accept_rel:
        tentative.tau = tau_new  # accepted step kept; tau_new governs the next
        return tentative
    redone = pr_step(state, opset, model, min(tau_new, tau_cap), eps_q)
    redone.tau = tau_new
    return redone


def _g(opset: OperatorSet, model: SourceModel, v: np.ndarray, eps_q: float) -> np.ndarray:
    if np.max(v) >= 1.0 - eps_q:
        raise SourceOverflow("state within eps_q of u = 1")
    return model.f(v) * opset.inv_s
