"""Semidiscrete spatial operators on the (mu, theta) tensor grid.

The interior field u_{i,j} (i = 1..N, j = 0..M) obeys

    s_{i,j} du/dt = phi_{i,j} (d2_mu + d2_theta) u + f(u),

discretized with nonuniform centered differences and closed by

    u_{N+1,j} = 0                 (Dirichlet at the outer boundary),
    u_{0,j}   = u_{1, M+1-j}      (mu = 0 symmetry wall; M+1 wraps to 0),
    u_{i,-1}  = u_{i,M},  u_{i,M+1} = u_{i,0}   (periodic theta).

Unknowns are stored theta-block-major; fields carry shape (M+1, N) with the
theta index first, and ``v = field.ravel()`` matches the vector ordering.

Writing psi = phi/s, the two directional operators scaled by psi are the
matrices P (mu direction, including the kappa_3 symmetry coupling between
theta blocks j and M+1-j) and R (theta direction, cyclic with corner
couplings kappa_1, kappa_2).  ``dense_P``/``dense_R`` materialize them from
the Kronecker-product form for verification on small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonpositiveDegeneracy, SourceOverflow
from .geometry import EllipticalMap, jacobian_phi, to_cartesian
from .grid import TensorGrid

DENSE_CAP = 400


@dataclass(frozen=True)
class DegeneracyField:
    """Coefficient s of du/dt at interior nodes; strictly positive inside."""

    kind: str
    values: np.ndarray  # shape (M+1, N)
    theta_star: float | None = None
    gamma: float | None = None


@dataclass(frozen=True)
class SourceModel:
    """Reactive source f(u) on [0, 1) and its derivative."""

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    name: str = "1/(1-u)"


def default_source() -> SourceModel:
    return SourceModel(
        f=lambda u: 1.0 / (1.0 - u),
        fprime=lambda u: 1.0 / (1.0 - u) ** 2,
    )


def capped_source(cap: float = 0.5) -> SourceModel:
    """Source frozen above ``cap``; smooth surrogate for convergence studies."""

    def f(u):
        return 1.0 / (1.0 - np.minimum(u, cap))

    def fprime(u):
        return np.where(u < cap, 1.0 / (1.0 - np.minimum(u, cap)) ** 2, 0.0)

    return SourceModel(f=f, fprime=fprime, name=f"1/(1-min(u,{cap}))")


def constant_source(value: float = 1.0) -> SourceModel:
    """Constant forcing; reduces the scheme to linear ADI (oracle runs)."""
    return SourceModel(
        f=lambda u: np.full_like(u, value),
        fprime=lambda u: np.zeros_like(u),
        name=f"const({value})",
    )


@dataclass(frozen=True)
class OperatorSet:
    """Structured stencil representation of P, R and the source scalings."""

    grid: TensorGrid
    emap: EllipticalMap
    psi: np.ndarray  # (M+1, N), phi/s
    inv_s: np.ndarray  # (M+1, N), the Q diagonal
    cl: np.ndarray  # mu stencil, left coefficient, index k <-> i = k+1
    cc: np.ndarray
    cr: np.ndarray
    tl: np.ndarray  # theta stencil with periodic wrap, index j = 0..M
    tc: np.ndarray
    tr: np.ndarray
    kappa1: float
    kappa2: float
    kappa3: float
    pair: np.ndarray  # theta-block pairing j <-> M+1-j (0 self-paired)
    degeneracy: DegeneracyField = field(repr=False, default=None)

    @property
    def n_mu(self) -> int:
        return self.grid.n_mu

    @property
    def n_theta(self) -> int:
        return self.grid.n_theta

    @property
    def n_unknowns(self) -> int:
        return self.psi.size

    def as_field(self, v: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(v).reshape(self.psi.shape)

    def as_vector(self, f: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(f).ravel()


def eval_degeneracy(
    kind: str,
    emap: EllipticalMap,
    grid: TensorGrid,
    theta_star: float | None = None,
    gamma: float | None = None,
) -> DegeneracyField:
    """Degeneracy field s at interior nodes.

    ``plane`` evaluates the linear ramp vanishing at the boundary point with
    angular coordinate theta_star, rescaled so its interior maximum equals
    gamma; ``inverse_plane`` is its reciprocal (singular toward the boundary
    point, finite at every interior node).
    """
    shape = (grid.n_theta + 1, grid.n_mu)
    if kind == "unit":
        return DegeneracyField(kind=kind, values=np.ones(shape))
    if kind not in ("plane", "inverse_plane"):
        raise ValueError(f"unknown degeneracy kind {kind!r}")
    if theta_star is None or gamma is None:
        raise ValueError("plane degeneracies need theta_star and gamma")
    if gamma <= 0.0:
        raise NonpositiveDegeneracy("gamma must be positive")

    a, zeta = emap.focal_distance, emap.mu_boundary
    x_star = a * math.cosh(zeta) * math.cos(theta_star)
    y_star = a * math.sinh(zeta) * math.sin(theta_star)
    mu = grid.interior_mu()[None, :]
    theta = grid.interior_theta()[:, None]
    x, y = to_cartesian(emap, mu, theta)
    q = 0.5 * (
        x_star / (a * math.cosh(zeta)) ** 2 * (x_star - x)
        + y_star / (a * math.sinh(zeta)) ** 2 * (y_star - y)
    )
    q *= gamma / np.max(q)
    if np.any(q <= 0.0):
        raise NonpositiveDegeneracy("degeneracy ramp is nonpositive at an interior node")
    values = 1.0 / q if kind == "inverse_plane" else q
    return DegeneracyField(kind=kind, values=values, theta_star=theta_star, gamma=gamma)


def assemble(grid: TensorGrid, emap: EllipticalMap, s: DegeneracyField) -> OperatorSet:
    n, m1 = grid.n_mu, grid.n_theta + 1
    if s.values.shape != (m1, n):
        raise ValueError("degeneracy field does not match the grid")

    dm = grid.mu.spacings  # dmu_0 .. dmu_N
    dt = grid.theta.spacings  # dtheta_0 .. dtheta_M
    cl = 2.0 / (dm[:-1] * (dm[1:] + dm[:-1]))
    cc = -2.0 / (dm[1:] * dm[:-1])
    cr = 2.0 / (dm[1:] * (dm[1:] + dm[:-1]))
    dt_prev = np.roll(dt, 1)  # dtheta_{j-1} with the periodic wrap
    tl = 2.0 / (dt_prev * (dt + dt_prev))
    tc = -2.0 / (dt * dt_prev)
    tr = 2.0 / (dt * (dt + dt_prev))

    phi = jacobian_phi(
        emap, grid.interior_mu()[None, :], grid.interior_theta()[:, None]
    )
    psi = phi / s.values
    pair = (-np.arange(m1)) % m1  # j -> M+1-j, with 0 self-paired

    return OperatorSet(
        grid=grid,
        emap=emap,
        psi=np.ascontiguousarray(psi),
        inv_s=np.ascontiguousarray(1.0 / s.values),
        cl=cl,
        cc=cc,
        cr=cr,
        tl=tl,
        tc=tc,
        tr=tr,
        kappa1=float(tl[0]),
        kappa2=float(tr[-1]),
        kappa3=float(cl[0]),
        pair=pair,
        degeneracy=s,
    )


def apply_delta_mu(grid: TensorGrid, u: np.ndarray, pair: np.ndarray | None = None) -> np.ndarray:
    """Nonuniform second difference in mu with the symmetry/Dirichlet closure."""
    dm = grid.mu.spacings
    cl = 2.0 / (dm[:-1] * (dm[1:] + dm[:-1]))
    cc = -2.0 / (dm[1:] * dm[:-1])
    cr = 2.0 / (dm[1:] * (dm[1:] + dm[:-1]))
    if pair is None:
        m1 = grid.n_theta + 1
        pair = (-np.arange(m1)) % m1
    out = cc * u
    out[:, 1:] += cl[1:] * u[:, :-1]
    out[:, 0] += cl[0] * u[pair, 0]
    out[:, :-1] += cr[:-1] * u[:, 1:]  # u_{N+1,j} = 0 drops the last column
    return out


def apply_delta_theta(grid: TensorGrid, u: np.ndarray) -> np.ndarray:
    """Nonuniform second difference in theta with the periodic closure."""
    dt = grid.theta.spacings
    dt_prev = np.roll(dt, 1)
    tl = 2.0 / (dt_prev * (dt + dt_prev))
    tc = -2.0 / (dt * dt_prev)
    tr = 2.0 / (dt * (dt + dt_prev))
    return (
        tl[:, None] * np.roll(u, 1, axis=0)
        + tc[:, None] * u
        + tr[:, None] * np.roll(u, -1, axis=0)
    )


def apply_P(opset: OperatorSet, u: np.ndarray) -> np.ndarray:
    out = opset.cc * u
    out[:, 1:] += opset.cl[1:] * u[:, :-1]
    out[:, 0] += opset.kappa3 * u[opset.pair, 0]
    out[:, :-1] += opset.cr[:-1] * u[:, 1:]
    out *= opset.psi
    return out


def apply_R(opset: OperatorSet, u: np.ndarray) -> np.ndarray:
    out = (
        opset.tl[:, None] * np.roll(u, 1, axis=0)
        + opset.tc[:, None] * u
        + opset.tr[:, None] * np.roll(u, -1, axis=0)
    )
    out *= opset.psi
    return out


def apply_C(opset: OperatorSet, v: np.ndarray) -> np.ndarray:
    """(P + R) v, matrix-free.  Accepts a flat vector or an (M+1, N) field."""
    flat = v.ndim == 1
    u = opset.as_field(v) if flat else v
    out = apply_P(opset, u) + apply_R(opset, u)
    return opset.as_vector(out) if flat else out


def source_g(
    opset: OperatorSet, model: SourceModel, v: np.ndarray, eps_q: float = 1e-3
) -> np.ndarray:
    """g(v) = f(v)/s componentwise; refuses evaluation within eps_q of u = 1."""
    if np.max(v) >= 1.0 - eps_q:
        raise SourceOverflow(f"source evaluated at u >= 1 - {eps_q}")
    inv_s = opset.inv_s if v.ndim == 2 else opset.inv_s.ravel()
    return model.f(v) * inv_s


def source_jacobian(
    opset: OperatorSet, model: SourceModel, v: np.ndarray, eps_q: float = 1e-3
) -> np.ndarray:
    """Diagonal of the Jacobian of g: f'(v)/s componentwise."""
    if np.max(v) >= 1.0 - eps_q:
        raise SourceOverflow(f"source Jacobian evaluated at u >= 1 - {eps_q}")
    inv_s = opset.inv_s if v.ndim == 2 else opset.inv_s.ravel()
    return model.fprime(v) * inv_s


def tau_max_bound(opset: OperatorSet, factor: float = 1.0) -> float:
    """Largest step admitted by the nonnegativity theorem, scaled by ``factor``.

    factor = 1 makes (I + tau/2 P) and (I + tau/2 R) nonnegative;
    factor = 1/4 additionally makes (I + tau C) nonnegative.
    """
    dm = opset.grid.mu.spacings
    dt = opset.grid.theta.spacings
    prod_mu = dm[1:] * dm[:-1]
    prod_th = dt * np.roll(dt, 1)
    limit = np.minimum(prod_mu[None, :], prod_th[:, None]) / opset.psi
    return factor * float(np.min(limit))


def dense_T_mu(opset: OperatorSet) -> np.ndarray:
    n = opset.n_mu
    t = np.zeros((n, n))
    t[np.arange(n), np.arange(n)] = opset.cc
    t[np.arange(1, n), np.arange(n - 1)] = opset.cl[1:]
    t[np.arange(n - 1), np.arange(1, n)] = opset.cr[:-1]
    return t


def dense_T_theta(opset: OperatorSet) -> np.ndarray:
    m1 = opset.n_theta + 1
    t = np.zeros((m1, m1))
    t[np.arange(m1), np.arange(m1)] = opset.tc
    t[np.arange(1, m1), np.arange(m1 - 1)] = opset.tl[1:]
    t[np.arange(m1 - 1), np.arange(1, m1)] = opset.tr[:-1]
    return t


def dense_P(opset: OperatorSet) -> np.ndarray:
    """B (I_{M+1} x T_mu + C_mu x I_hat_N), materialized.  Small grids only."""
    _check_dense(opset)
    n, m1 = opset.n_mu, opset.n_theta + 1
    c_mu = np.zeros((m1, m1))
    c_mu[np.arange(m1), opset.pair] = 1.0
    i_hat = np.zeros((n, n))
    i_hat[0, 0] = opset.kappa3
    core = np.kron(np.eye(m1), dense_T_mu(opset)) + np.kron(c_mu, i_hat)
    return opset.psi.ravel()[:, None] * core


def dense_R(opset: OperatorSet) -> np.ndarray:
    """B (T_theta x I_N + C_theta x I_N), materialized.  Small grids only."""
    _check_dense(opset)
    n, m1 = opset.n_mu, opset.n_theta + 1
    c_th = np.zeros((m1, m1))
    c_th[0, m1 - 1] = opset.kappa1
    c_th[m1 - 1, 0] = opset.kappa2
    core = np.kron(dense_T_theta(opset) + c_th, np.eye(n))
    return opset.psi.ravel()[:, None] * core


def dense_C(opset: OperatorSet) -> np.ndarray:
    return dense_P(opset) + dense_R(opset)


def _check_dense(opset: OperatorSet) -> None:
    if opset.n_unknowns > DENSE_CAP:
        raise ValueError(
            f"dense materialization capped at {DENSE_CAP} unknowns, "
            f"got {opset.n_unknowns}"
        )
