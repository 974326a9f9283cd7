"""Structural checks on the split operators and a convergence-order study.

Everything here works on small dense materializations of the implicit
factors, so grid sizes are capped; the point is to confirm the algebraic
properties the scheme's stability argument rests on, not to scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import EllipseSpec, derive_map
from .grid import uniform_grid
from .operators import (
    OperatorSet,
    SourceModel,
    assemble,
    capped_source,
    dense_C,
    dense_P,
    dense_R,
    eval_degeneracy,
    tau_max_bound,
)
from .stepper import StepConfig, initial_state, pr_step

_TOL = 1e-12


@dataclass
class PropertyReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extras = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.name}" + (f" ({extras})" if extras else "")


def _is_m_matrix(a: np.ndarray, tol: float = _TOL) -> dict:
    """Diagnostics for the M-matrix structure of a dense matrix."""
    d = np.diag(a)
    off = a - np.diag(d)
    diag_positive = bool(np.all(d > 0))
    off_nonpositive = bool(np.max(off) <= tol)
    row_excess = d - np.sum(np.abs(off), axis=1)
    dominant = bool(np.min(row_excess) >= -tol)
    inv_min = float("nan")
    invertible = True
    try:
        inv = np.linalg.inv(a)
        inv_min = float(np.min(inv))
    except np.linalg.LinAlgError:
        invertible = False
    inverse_nonneg = invertible and inv_min >= -tol
    return {
        "diag_positive": diag_positive,
        "off_nonpositive": off_nonpositive,
        "diagonally_dominant": dominant,
        "invertible": invertible,
        "inverse_min": inv_min,
        "inverse_nonnegative": inverse_nonneg,
        "ok": diag_positive and off_nonpositive and dominant and inverse_nonneg,
    }


def check_m_matrix(opset: OperatorSet, tau: float) -> list[PropertyReport]:
    """(I - tau/2 P) and (I - tau/2 R) are M-matrices for any tau > 0."""
    n = opset.n_unknowns
    eye = np.eye(n)
    reports = []
    for name, dense in (("P", dense_P(opset)), ("R", dense_R(opset))):
        diag = _is_m_matrix(eye - 0.5 * tau * dense)
        ok = diag.pop("ok")
        reports.append(PropertyReport(f"I - tau/2 {name} is an M-matrix", ok, diag))
    return reports


def check_nonnegativity(opset: OperatorSet) -> list[PropertyReport]:
    """Entrywise nonnegativity of the explicit factors under the step bound.

    (I + tau/2 P) and (I + tau/2 R) stay nonnegative for tau up to the
    per-node bound; (I + tau C) needs a quarter of it.  Both limits are
    sharp: doubling the step produces a negative entry.
    """
    n = opset.n_unknowns
    eye = np.eye(n)
    bound = tau_max_bound(opset, factor=1.0)
    bound_c = tau_max_bound(opset, factor=0.25)
    reports = []
    sharp = math.inf
    for name, dense in (("P", dense_P(opset)), ("R", dense_R(opset))):
        at = float(np.min(eye + 0.5 * bound * dense))
        twice = float(np.min(eye + 0.5 * (2.0 * bound) * dense))
        # When the binding node sits on a self-paired theta block, the
        # symmetry coupling lands on the diagonal and the offending entry
        # reaches exactly zero at twice the bound; probe just beyond it.
        beyond = float(np.min(eye + 0.5 * (2.02 * bound) * dense))
        sharp = min(sharp, beyond)
        reports.append(PropertyReport(
            f"I + tau/2 {name} nonnegative up to the step bound",
            at >= -_TOL,
            {"min_at_bound": at, "min_at_twice": twice},
        ))
    reports.append(PropertyReport(
        "a negative entry appears just past twice the step bound",
        sharp < -_TOL,
        {"min_beyond_twice": sharp},
    ))
    c = dense_C(opset)
    at = float(np.min(eye + bound_c * c))
    reports.append(PropertyReport(
        "I + tau C nonnegative up to a quarter of the step bound",
        at >= -_TOL,
        {"min_at_bound": at},
    ))
    return reports


def check_norm_lemmas(opset: OperatorSet, tau: float | None = None) -> list[PropertyReport]:
    """Infinity-norm identities behind unconditional stability.

    With zero row sums for P and R, each Crank-Nicolson style factor pair
    has product infinity-norm exactly one, and the full splitting operator
    S(tau) is an infinity-norm contraction.
    """
    if tau is None:
        tau = tau_max_bound(opset, factor=1.0)
    n = opset.n_unknowns
    eye = np.eye(n)
    reports = []
    for name, dense in (("P", dense_P(opset)), ("R", dense_R(opset))):
        # Interior rows sum to zero; rows touching the Dirichlet edge sum
        # negative, so the signed maximum is what stability needs.
        rowsum = float(np.max(dense @ np.ones(n)))
        minus = eye - 0.5 * tau * dense
        plus = eye + 0.5 * tau * dense
        inv = np.linalg.inv(minus)
        prod_norm = float(np.linalg.norm(inv @ plus, np.inf))
        inv_norm = float(np.linalg.norm(inv, np.inf))
        reports.append(PropertyReport(
            f"{name} row sums are nonpositive and its factor pair is norm-bounded",
            rowsum <= 1e-10 and prod_norm <= 1.0 + 1e-10 and inv_norm <= 1.0 + _TOL,
            {"max_abs_rowsum": rowsum, "pair_norm": prod_norm, "inverse_norm": inv_norm},
        ))
    inv_r = np.linalg.inv(eye - 0.5 * tau * dense_R(opset))
    inv_p = np.linalg.inv(eye - 0.5 * tau * dense_P(opset))
    s_full = inv_r @ inv_p @ (eye + 0.5 * tau * dense_P(opset)) @ (eye + 0.5 * tau * dense_R(opset))
    s_norm = float(np.linalg.norm(s_full, np.inf))
    reports.append(PropertyReport(
        "S(tau) is an infinity-norm contraction",
        s_norm <= 1.0 + 1e-10,
        {"s_norm": s_norm},
    ))
    return reports


def verify_scheme(
    ellipse: EllipseSpec | None = None,
    n_mu: int = 6,
    n_theta: int = 7,
    tau: float = 1e-3,
    degeneracy_kind: str = "unit",
    theta_star: float = 0.0,
    gamma: float = 1.0,
) -> list[PropertyReport]:
    """Run every structural check on one small problem."""
    if ellipse is None:
        ellipse = EllipseSpec(6.0, 4.0)
    emap = derive_map(ellipse)
    grid = uniform_grid(n_mu, n_theta, emap)
    if degeneracy_kind == "unit":
        s = eval_degeneracy(degeneracy_kind, emap, grid)
    else:
        s = eval_degeneracy(degeneracy_kind, emap, grid,
                            theta_star=theta_star, gamma=gamma)
    opset = assemble(grid, emap, s)
    reports = check_m_matrix(opset, tau)
    reports += check_nonnegativity(opset)
    reports += check_norm_lemmas(opset)
    return reports


def convergence_order(
    n_mu: int = 8,
    n_theta: int = 9,
    t_end: float = 0.05,
    taus: tuple[float, ...] = (2.0e-3, 1.0e-3, 5.0e-4),
    predictor: str = "midpoint",
    source: SourceModel | None = None,
) -> dict:
    """Observed temporal order against a fine-step reference solution.

    Integrates a smooth (capped-source) problem to a fixed time at several
    constant step sizes and a reference step 64 times finer than the finest,
    then fits the error-vs-step slope in log space.
    """
    if source is None:
        source = capped_source()
    ellipse = EllipseSpec(6.0, 4.0)
    emap = derive_map(ellipse)
    grid = uniform_grid(n_mu, n_theta, emap)
    s = eval_degeneracy("unit", emap, grid)
    opset = assemble(grid, emap, s)
    cfg = StepConfig(tau0=min(taus))

    def integrate(tau: float) -> np.ndarray:
        steps = int(round(t_end / tau))
        state = initial_state(opset, source, cfg)
        h = t_end / steps
        for _ in range(steps):
            state = pr_step(state, opset, source, h, predictor=predictor)
        return state.v

    ref = integrate(min(taus) / 64.0)
    errors = []
    for tau in taus:
        err = float(np.max(np.abs(integrate(tau) - ref)))
        errors.append(err)
    logs_t = np.log(np.array(taus))
    logs_e = np.log(np.array(errors))
    slope = float(np.polyfit(logs_t, logs_e, 1)[0])
    return {
        "taus": list(taus),
        "errors": errors,
        "order": slope,
        "predictor": predictor,
    }
