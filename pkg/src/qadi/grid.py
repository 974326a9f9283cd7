"""Tensor grids in (mu, theta): uniform and exponentially fitted nonuniform.

Index conventions (used everywhere downstream):

* mu nodes mu_0 < mu_1 < ... < mu_{N+1} with mu_{N+1} = MU and
  mu_0 = -dmu_0/2, so mu_1 = +dmu_0/2 > 0 and no node sits on mu = 0.
* theta nodes theta_0 = 0 < ... < theta_{M+1} = 2*pi.
* Interior unknowns are (i, j) for i = 1..N, j = 0..M, stored
  theta-block-major: v = (u_{1,0}, ..., u_{N,0}, u_{1,1}, ..., u_{N,M}).

The staggering of the mu axis around zero realizes the symmetry condition
u(mu, theta) = u(-mu, 2*pi - theta) without an auxiliary equation at mu = 0,
and keeps every node away from the focal points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit
from .geometry import EllipticalMap

_LOG_FLOOR = 1e-14
_OVERSAMPLE = 10


@dataclass(frozen=True)
class AxisGrid:
    """Strictly increasing 1-D node set."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("axis needs at least two nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("axis nodes must be strictly increasing")

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)


@dataclass(frozen=True)
class TensorGrid:
    """Nonuniform (mu, theta) tensor grid with the boundary staggering above."""

    mu: AxisGrid
    theta: AxisGrid
    fit_fallback: bool = field(default=False)

    def __post_init__(self):
        mu, th = self.mu.nodes, self.theta.nodes
        if mu.size < 4:
            raise ValueError("mu axis needs N >= 2 interior lines")
        if th.size < 5:
            raise ValueError("theta axis needs M >= 3 interior lines")
        if abs(mu[0] + mu[1]) > 1e-12 * abs(mu[-1]):
            raise ValueError("mu_0 must equal -dmu_0/2 (mu_0 = -mu_1)")
        if th[0] != 0.0 or abs(th[-1] - 2.0 * np.pi) > 1e-12:
            raise ValueError("theta axis must span [0, 2*pi]")

    @property
    def n_mu(self) -> int:
        """Number of interior mu lines (the paper's N)."""
        return self.mu.nodes.size - 2

    @property
    def n_theta(self) -> int:
        """Index bound of interior theta lines (the paper's M; j = 0..M)."""
        return self.theta.nodes.size - 2

    @property
    def n_unknowns(self) -> int:
        return self.n_mu * (self.n_theta + 1)

    @property
    def mu_boundary(self) -> float:
        return float(self.mu.nodes[-1])

    def interior_mu(self) -> np.ndarray:
        return self.mu.nodes[1:-1]

    def interior_theta(self) -> np.ndarray:
        return self.theta.nodes[:-1]


@dataclass(frozen=True)
class MappingReport:
    """Divided-difference diagnostics of the logical -> physical axis maps."""

    mu_first: float
    mu_second: float
    theta_first: float
    theta_second: float

    @property
    def max_first_derivative(self) -> float:
        return max(self.mu_first, self.theta_first)

    @property
    def max_second_difference(self) -> float:
        return max(self.mu_second, self.theta_second)


def uniform_grid(n_mu: int, n_theta: int, emap: EllipticalMap) -> TensorGrid:
    """Uniform grid with N interior mu lines and theta lines j = 0..M.

    dmu = MU / (N + 1/2), the unique constant spacing compatible with
    mu_0 = -dmu/2 and mu_{N+1} = MU; dtheta = 2*pi / (M + 1).
    """
    _check_counts(n_mu, n_theta)
    mu_top = emap.mu_boundary
    dmu = mu_top / (n_mu + 0.5)
    mu = (np.arange(n_mu + 2) - 0.5) * dmu
    mu[-1] = mu_top
    theta = np.arange(n_theta + 2) * (2.0 * np.pi / (n_theta + 1))
    theta[-1] = 2.0 * np.pi
    return TensorGrid(mu=AxisGrid(mu), theta=AxisGrid(theta))


def exponential_grid(
    reference_grid: TensorGrid,
    reference_dudt: np.ndarray,
    n_mu: int,
    n_theta: int,
    emap: EllipticalMap,
) -> TensorGrid:
    """Exponentially fitted grid from a prior run's temporal derivative.

    A one-sided exponential alpha*exp(beta*mu) is least-squares fitted to
    |u_t| sampled along the theta line closest to pi/2; its arc length is
    equidistributed to place the mu nodes.  A two-sided exponential
    alpha*exp(-beta*|theta - theta_peak|) is fitted along the innermost mu
    line for theta in [0, pi] and equidistributed for the theta nodes of the
    first two quadrants; the remaining spacings mirror them about theta = pi,
    so dtheta_j = dtheta_{M-j}.

    ``reference_dudt`` has shape (M_ref+1, N_ref) (theta-major interior
    field).  A non-finite fit falls back to the uniform grid with
    ``fit_fallback`` set.
    """
    _check_counts(n_mu, n_theta)
    if n_theta % 2 == 0:
        raise ValueError("exponential grids need an odd M (even theta-line count)")
    ref = np.abs(np.asarray(reference_dudt, dtype=float))
    if ref.shape != (reference_grid.n_theta + 1, reference_grid.n_mu):
        raise ValueError("reference field shape does not match its grid")
    if not np.any(ref > 0.0):
        raise DegenerateFit("reference derivative field vanishes identically")

    mu_top = emap.mu_boundary

    # One-sided fit in mu along theta ~ pi/2.
    j_mid = int(np.argmin(np.abs(reference_grid.interior_theta() - np.pi / 2)))
    mu_samples = reference_grid.interior_mu()
    d_mu = np.maximum(ref[j_mid, :], _LOG_FLOOR)
    beta_mu, log_alpha_mu = np.polyfit(mu_samples, np.log(d_mu), 1)
    alpha_mu = np.exp(log_alpha_mu)

    # Two-sided fit in theta along the innermost mu line, theta in [0, pi].
    theta_int = reference_grid.interior_theta()
    half = theta_int <= np.pi + 1e-12
    th_samples = theta_int[half]
    d_th = np.maximum(ref[half, 0], _LOG_FLOOR)
    theta_peak = float(th_samples[np.argmax(d_th)])
    slope, log_alpha_th = np.polyfit(np.abs(th_samples - theta_peak), np.log(d_th), 1)
    beta_th, alpha_th = -slope, np.exp(log_alpha_th)

    if not all(map(np.isfinite, (alpha_mu, beta_mu, alpha_th, beta_th))):
        grid = uniform_grid(n_mu, n_theta, emap)
        return TensorGrid(mu=grid.mu, theta=grid.theta, fit_fallback=True)

    mu_nodes = _equidistribute_mu(alpha_mu, beta_mu, mu_top, n_mu)
    theta_nodes = _equidistribute_theta(alpha_th, beta_th, theta_peak, n_theta)
    return TensorGrid(mu=AxisGrid(mu_nodes), theta=AxisGrid(theta_nodes))


def mapping_smoothness(grid: TensorGrid) -> MappingReport:
    """Normalized first- and second-difference extrema of the axis maps.

    The logical coordinate is the uniform index scaled by 1/(N + 1/2) in mu
    and 1/(M + 1) in theta; the physical coordinate is normalized by the
    axis length.  A uniform grid reports first derivative 1 and second
    difference 0; for a fixed smooth map family the second difference decays
    like 1/N.
    """
    mu, th = grid.mu.nodes, grid.theta.nodes

    def axis_stats(nodes: np.ndarray, length: float, h_logical: float):
        d = np.diff(nodes) / (length * h_logical)
        first = float(np.max(np.abs(d)))
        second = float(np.max(np.abs(np.diff(d)))) if d.size > 1 else 0.0
        return first, second

    mu_first, mu_second = axis_stats(mu, grid.mu_boundary, 1.0 / (grid.n_mu + 0.5))
    th_first, th_second = axis_stats(th, 2.0 * np.pi, 1.0 / (grid.n_theta + 1))
    return MappingReport(
        mu_first=mu_first, mu_second=mu_second, theta_first=th_first, theta_second=th_second
    )


def save_grid(grid: TensorGrid, mu_path, theta_path) -> None:
    """Persist the two node lists as single-column CSV files."""
    np.savetxt(mu_path, grid.mu.nodes, header="mu", comments="", fmt="%.17g")
    np.savetxt(theta_path, grid.theta.nodes, header="theta", comments="", fmt="%.17g")


def load_grid(mu_path, theta_path) -> TensorGrid:
    mu = np.loadtxt(mu_path, skiprows=1)
    theta = np.loadtxt(theta_path, skiprows=1)
    return TensorGrid(mu=AxisGrid(mu), theta=AxisGrid(theta))


def _check_counts(n_mu: int, n_theta: int) -> None:
    if n_mu < 2:
        raise ValueError(f"need N >= 2 interior mu lines, got {n_mu}")
    if n_theta < 3:
        raise ValueError(f"need M >= 3, got {n_theta}")


def _arc_length_table(deriv, lo: float, hi: float, n_cells: int):
    """Cumulative trapezoid arc length of a curve with derivative ``deriv``."""
    x = np.linspace(lo, hi, _OVERSAMPLE * n_cells + 1)
    integrand = np.sqrt(1.0 + deriv(x) ** 2)
    s = np.concatenate(([0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(x))))
    return x, s


def _equidistribute_mu(alpha: float, beta: float, mu_top: float, n_mu: int) -> np.ndarray:
    x, s = _arc_length_table(lambda m: alpha * beta * np.exp(beta * m), 0.0, mu_top, n_mu + 1)
    # Half-cell staggering: node k sits at arc fraction (k - 1/2)/(N + 1/2).
    targets = s[-1] * (np.arange(1, n_mu + 2) - 0.5) / (n_mu + 0.5)
    nodes = np.interp(targets, s, x)
    nodes[-1] = mu_top
    return np.concatenate(([-nodes[0]], nodes))


def _equidistribute_theta(alpha: float, beta: float, peak: float, n_theta: int) -> np.ndarray:
    half = (n_theta + 1) // 2

    def deriv(t):
        return -alpha * beta * np.sign(t - peak) * np.exp(-beta * np.abs(t - peak))

    x, s = _arc_length_table(deriv, 0.0, np.pi, half)
    targets = s[-1] * np.arange(half + 1) / half
    first_half = np.interp(targets, s, x)
    first_half[0], first_half[-1] = 0.0, np.pi
    mirrored = 2.0 * np.pi - first_half[-2::-1]
    return np.concatenate((first_half, mirrored))
