"""Structural verification suite: M-matrix, positivity, norm identities."""

import numpy as np
import pytest

from qadi.geometry import EllipseSpec, derive_map
from qadi.grid import uniform_grid
from qadi.operators import assemble, eval_degeneracy, tau_max_bound
from qadi.verify import (
    PropertyReport,
    check_m_matrix,
    check_nonnegativity,
    check_norm_lemmas,
    convergence_order,
    verify_scheme,
)

EMAP = derive_map(EllipseSpec(6.0, 4.0))


def make_ops(n_mu, n_theta, kind="unit", **kw):
    grid = uniform_grid(n_mu, n_theta, EMAP)
    if kind == "plane" and not kw:
        kw = {"theta_star": 1.0, "gamma": 1.0}
    return assemble(grid, EMAP, eval_degeneracy(kind, EMAP, grid, **kw))


SUITE = [
    (n, m, kind)
    for n in (3, 6)
    for m in (3, 7)
    for kind in ("unit", "plane")
]


@pytest.mark.parametrize("n,m,kind", SUITE)
@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
def test_m_matrix_structure(n, m, kind, frac):
    ops = make_ops(n, m, kind)
    tau = frac * tau_max_bound(ops)
    for rep in check_m_matrix(ops, tau):
        assert rep.passed, str(rep)
        assert rep.details["inverse_min"] >= -1e-12


@pytest.mark.parametrize("n,m,kind", SUITE)
def test_nonnegativity_below_bound_and_violation_past_double(n, m, kind):
    ops = make_ops(n, m, kind)
    reports = {r.name: r for r in check_nonnegativity(ops)}
    for rep in reports.values():
        assert rep.passed, str(rep)
    sharp = next(r for r in reports.values() if "just past twice" in r.name)
    # The binding node sits on a self-paired theta block whose fold softens
    # the diagonal by exactly 2x, so the first strictly negative entry
    # appears just beyond twice the bound, not at it.
    assert sharp.details["min_beyond_twice"] < 0.0


@pytest.mark.parametrize("n,m,kind", SUITE)
def test_norm_identities(n, m, kind):
    ops = make_ops(n, m, kind)
    for rep in check_norm_lemmas(ops):
        assert rep.passed, str(rep)


def test_contraction_lost_above_the_bound():
    # Far above the positivity bound the explicit factors pick up negative
    # entries and the pair norm exceeds one, while the implicit inverses
    # stay contractive: the reports flag it without raising.
    ops = make_ops(4, 5)
    reports = check_norm_lemmas(ops, tau=50 * tau_max_bound(ops))
    pair_reports = [r for r in reports if "row sums" in r.name]
    assert any(not r.passed for r in pair_reports)
    for r in pair_reports:
        assert r.details["inverse_norm"] <= 1.0 + 1e-12


def test_verify_scheme_all_pass_and_printable():
    reports = verify_scheme(n_mu=4, n_theta=5)
    assert reports and all(r.passed for r in reports)
    for r in reports:
        assert str(r).startswith("[pass]")


def test_property_report_str_failure():
    r = PropertyReport("thing", False, {"worst": 1.0})
    assert str(r) == "[FAIL] thing (worst=1.0)"


@pytest.mark.slow
def test_convergence_order_second_order_and_ablation():
    res = convergence_order()
    assert 1.8 < res["order"] < 2.2
    abl = convergence_order(predictor="euler", taus=(2.0e-3, 1.0e-3))
    assert abl["order"] < 1.5
