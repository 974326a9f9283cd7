"""Uniform and exponentially fitted grid construction tests."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qadi.geometry import EllipseSpec, derive_map
from qadi.grid import (
    AxisGrid,
    TensorGrid,
    exponential_grid,
    load_grid,
    mapping_smoothness,
    save_grid,
    uniform_grid,
)

EMAP = derive_map(EllipseSpec(6.0, 4.0))


def test_axis_grid_validation():
    with pytest.raises(ValueError):
        AxisGrid(np.array([0.0]))
    with pytest.raises(ValueError):
        AxisGrid(np.array([0.0, 1.0, 1.0]))
    g = AxisGrid(np.array([0.0, 0.5, 2.0]))
    assert np.allclose(g.spacings, [0.5, 1.5])


@given(st.integers(2, 30), st.integers(3, 30))
def test_uniform_grid_staggering(n_mu, n_theta):
    g = uniform_grid(n_mu, n_theta, EMAP)
    mu, th = g.mu.nodes, g.theta.nodes
    assert g.n_mu == n_mu and g.n_theta == n_theta
    assert g.n_unknowns == n_mu * (n_theta + 1)
    # mu_0 = -dmu/2, mu_{N+1} = MU, constant spacing MU/(N+1/2)
    dmu = EMAP.mu_boundary / (n_mu + 0.5)
    assert mu[0] == pytest.approx(-dmu / 2)
    assert mu[0] == pytest.approx(-mu[1])
    assert mu[-1] == EMAP.mu_boundary
    assert np.allclose(np.diff(mu), dmu)
    # theta spans [0, 2*pi] with spacing 2*pi/(M+1)
    assert th[0] == 0.0 and th[-1] == pytest.approx(2 * np.pi)
    assert np.allclose(np.diff(th), 2 * np.pi / (n_theta + 1))


def test_uniform_grid_no_node_on_focal_line():
    g = uniform_grid(10, 11, EMAP)
    assert np.all(np.abs(g.mu.nodes) > 1e-12)


def test_interior_views():
    g = uniform_grid(4, 5, EMAP)
    assert g.interior_mu().size == 4
    assert np.all(g.interior_mu() > 0)
    th = g.interior_theta()
    assert th.size == 6 and th[0] == 0.0 and th[-1] < 2 * np.pi


def _reference_run_field(n_mu=10, n_theta=11, beta_mu=3.0, beta_th=2.0):
    """Synthetic derivative field with a known exponential profile."""
    g = uniform_grid(n_mu, n_theta, EMAP)
    mu = g.interior_mu()
    th = g.interior_theta()
    peak = th[np.argmin(np.abs(th - np.pi / 2))]
    field = np.exp(beta_mu * mu)[None, :] * np.exp(-beta_th * np.abs(th - peak))[:, None]
    return g, field


def test_exponential_grid_concentrates_where_fitted():
    ref_grid, field = _reference_run_field()
    g = exponential_grid(ref_grid, field, 16, 17, EMAP)
    assert not g.fit_fallback
    dmu = g.mu.spacings[1:]  # skip the ghost half-cell
    # Growing exp(beta*mu) profile -> spacing shrinks toward mu = MU.
    assert dmu[-1] < dmu[0]
    assert np.all(np.diff(g.mu.nodes) > 0)
    assert g.mu.nodes[-1] == EMAP.mu_boundary
    assert g.mu.nodes[0] == pytest.approx(-g.mu.nodes[1])
    # theta spacings mirror about pi: dtheta_j = dtheta_{M-j}
    dth = g.theta.spacings
    assert np.allclose(dth, dth[::-1], rtol=1e-10)


def test_exponential_grid_arc_length_equidistribution():
    # With the fitted curve known analytically, the arc length of
    # alpha*exp(beta*mu) between consecutive interior nodes must be constant.
    ref_grid, field = _reference_run_field(beta_mu=4.0)
    g = exponential_grid(ref_grid, field, 20, 11, EMAP)
    beta = 4.0

    def arc(lo, hi):
        x = np.linspace(lo, hi, 2000)
        return np.trapezoid(np.sqrt(1 + (beta * np.exp(beta * x)) ** 2), x)

    nodes = g.mu.nodes
    segs = [arc(nodes[k], nodes[k + 1]) for k in range(1, nodes.size - 1)]
    assert np.std(segs) / np.mean(segs) < 0.02


def test_exponential_grid_requires_odd_m():
    ref_grid, field = _reference_run_field()
    with pytest.raises(ValueError):
        exponential_grid(ref_grid, field, 10, 12, EMAP)


def test_exponential_grid_shape_mismatch():
    ref_grid, field = _reference_run_field()
    with pytest.raises(ValueError):
        exponential_grid(ref_grid, field[:, :-1], 10, 11, EMAP)


def test_mapping_smoothness_uniform_is_flat():
    rep = mapping_smoothness(uniform_grid(12, 13, EMAP))
    assert rep.max_first_derivative == pytest.approx(1.0, rel=1e-10)
    assert rep.max_second_difference == pytest.approx(0.0, abs=1e-10)


def test_mapping_smoothness_second_difference_decays():
    ref_grid, field = _reference_run_field()
    seconds = []
    for n in (10, 20, 40):
        g = exponential_grid(ref_grid, field, n, 11, EMAP)
        seconds.append(mapping_smoothness(g).mu_second)
    assert seconds[2] < seconds[0]


def test_grid_round_trip(tmp_path):
    ref_grid, field = _reference_run_field()
    g = exponential_grid(ref_grid, field, 8, 9, EMAP)
    save_grid(g, tmp_path / "mu.csv", tmp_path / "theta.csv")
    g2 = load_grid(tmp_path / "mu.csv", tmp_path / "theta.csv")
    assert np.array_equal(g.mu.nodes, g2.mu.nodes)
    assert np.array_equal(g.theta.nodes, g2.theta.nodes)


def test_tensor_grid_validation():
    good = uniform_grid(3, 4, EMAP)
    with pytest.raises(ValueError):
        TensorGrid(mu=AxisGrid(np.array([0.1, 0.2, 0.3, 0.4])), theta=good.theta)
    with pytest.raises(ValueError):
        TensorGrid(mu=good.mu, theta=AxisGrid(np.array([0.1, 1.0, 2.0, 3.0, 2 * np.pi])))
