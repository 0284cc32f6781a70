"""Wall solve: channel flux integral -> wall concentrations and temperature.

Each species obeys

    du_i/dt - theta_i d2u_i/dz2 = -Gamma_i G_i + delta_i r_i(u),

with homogeneous Neumann ends whenever theta_i > 0.  Diffusion is
Crank-Nicolson, the reaction is advanced with Heun's trapezoidal
predictor-corrector and G is averaged over each step.  Rows with
theta_i = 0 are plain ODEs and skip the linear solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .eigenbasis import EigenBasis
from .kinetics import ReactionModel, evaluate
from .spaces import (BoundaryField, CylinderField, Discretization, as_array,
                     dz_derivative, norm_Wz_T)
from .cylinder import flux_integral


class StepSizeError(ValueError):
    """Explicit reaction update would violate k * dt <= 1."""

    def __init__(self, dt, required):
        super().__init__(f"time step {dt:.3e} too large for the reaction; need dt <= {required:.3e}")
        self.dt = dt
        self.required = required


@dataclass(frozen=True)
class WallParams:
    theta: np.ndarray              # (N,) nonnegative, theta[-1] > 0
    gamma_over_beta: np.ndarray    # (N,) positive
    model: ReactionModel
    u_s0: np.ndarray               # (N, n_z)

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        gb = np.asarray(self.gamma_over_beta, dtype=float)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "gamma_over_beta", gb)
        object.__setattr__(self, "u_s0", np.asarray(self.u_s0, dtype=float))
        if np.any(th < 0):
            raise ValueError("wall diffusivities must be nonnegative")
        if not th[-1] > 0:
            raise ValueError("the temperature row must keep a positive diffusivity")
        if np.any(gb <= 0):
            raise ValueError("gamma/beta ratios must be positive")
        if len(th) != self.model.n_species or len(gb) != len(th):
            raise ValueError("parameter lengths must match the number of species")

    @property
    def signs(self) -> np.ndarray:
        return np.asarray(self.model.signs, dtype=float)


def neumann_laplacian_banded(n_z: int, dz: float) -> np.ndarray:
    """(3, n_z) banded storage of the ghost-node Neumann Laplacian."""
    ab = np.zeros((3, n_z))
    inv = 1.0 / (dz * dz)
    ab[0, 1:] = inv
    ab[1, :] = -2.0 * inv
    ab[2, :-1] = inv
    ab[0, 1] = 2.0 * inv     # row 0: (2 u1 - 2 u0) / h^2
    ab[2, -2] = 2.0 * inv    # last row: (2 u_{n-2} - 2 u_{n-1}) / h^2
    return ab


def _banded_matvec(ab, u):
    out = ab[1] * u
    out[:-1] += ab[0, 1:] * u[1:]
    out[1:] += ab[2, :-1] * u[:-1]
    return out


def solve_boundary(G, params: WallParams, disc: Discretization) -> BoundaryField:
    """Advance the wall system over the time grid of ``disc``."""
    G = as_array(G)
    n = params.model.n_species
    if G.shape != (n, disc.n_z, disc.n_t):
        raise ValueError(f"flux source shape {G.shape} does not match ({n}, {disc.n_z}, {disc.n_t})")
    if params.u_s0.shape != (n, disc.n_z):
        raise ValueError(f"initial wall data shape {params.u_s0.shape} != ({n}, {disc.n_z})")
    if not np.all(np.isfinite(params.u_s0)):
        raise ValueError("initial wall data must be finite")
    dt = disc.dt
    k = params.model.lipschitz_k
    if k * dt > 1.0:
        raise StepSizeError(dt, 1.0 / k)

    theta = params.theta
    gam = params.gamma_over_beta[:, None]
    sgn = params.signs[:, None]
    lap = neumann_laplacian_banded(disc.n_z, disc.dz)
    diffusive = [i for i in range(n) if theta[i] > 0]
    lhs = {}
    for i in diffusive:
        ab = -0.5 * dt * theta[i] * lap
        ab[1] += 1.0
        lhs[i] = ab

    u = np.empty((n, disc.n_z, disc.n_t))
    u[:, :, 0] = params.u_s0
    max_res = 0.0
    wz = disc.quad_w_z
    for m in range(disc.n_t - 1):
        un = u[:, :, m]
        force = -gam * 0.5 * (G[:, :, m] + G[:, :, m + 1])
        r0 = sgn * evaluate(params.model, un)
        explicit = un.copy()
        diff_n = np.zeros_like(un)
        for i in diffusive:
            diff_n[i] = theta[i] * _banded_matvec(lap, un[i])
            explicit[i] += 0.5 * dt * diff_n[i]

        def implicit(rhs):
            out = rhs.copy()
            for i in diffusive:
                out[i] = scipy.linalg.solve_banded((1, 1), lhs[i], rhs[i])
            return out

        pred = implicit(explicit + dt * (force + r0))
        r1 = sgn * evaluate(params.model, pred)
        react = 0.5 * (r0 + r1)
        new = implicit(explicit + dt * (force + react))
        u[:, :, m + 1] = new

        # weak residual of the step, tested against every axial hat function
        diff_new = np.zeros_like(new)
        for i in diffusive:
            diff_new[i] = theta[i] * _banded_matvec(lap, new[i])
        res = (new - un) / dt - 0.5 * (diff_n + diff_new) - force - react
        scale = max(1.0, float(np.max(np.abs(new - un))) / dt)
        max_res = max(max_res, float(np.max(np.abs(res * wz))) / scale)

    if not np.all(np.isfinite(u)):
        raise FloatingPointError("wall time stepping produced non-finite values")
    out = BoundaryField(u)
    out.diagnostics = {"max_weak_residual": max_res}
    return out


@dataclass
class PhiProbe:
    horizons: list
    q: list
    a: float
    b: float
    a_stderr: float
    b_stderr: float
    monotone: bool
    vanishing: bool
    nonnegative: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.vanishing and self.nonnegative

    def as_dict(self):
        return dict(horizons=self.horizons, q=self.q, a=self.a, b=self.b,
                    a_stderr=self.a_stderr, b_stderr=self.b_stderr,
                    monotone=self.monotone, vanishing=self.vanishing,
                    nonnegative=self.nonnegative, passed=self.passed)


def fit_horizon_law(T, q):
    """Relative least squares fit of q ~ T (a T + b); returns a, b and standard errors."""
    T = np.asarray(T, dtype=float)
    q = np.asarray(q, dtype=float)
    X = np.column_stack([T * T, T]) / q[:, None]
    y = np.ones_like(q)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(q) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[0]), float(coef[1]), float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))


def contraction_probe_phi(u_f1: Callable, u_f2: Callable, params: WallParams,
                          disc: Discretization, basis: EigenBasis,
                          T_list: Sequence[float]) -> PhiProbe:
    """Measure q(T) = ||Phi(u1) - Phi(u2)||^2 / int int ||d(u1 - u2)/dz||^2_{W_r0'}.

    ``u_f1`` and ``u_f2`` are factories ``disc_T -> CylinderField`` so the
    same pair of channel fields can be sampled on every horizon.
    """
    T_list = sorted(float(T) for T in T_list)
    if len(T_list) < 2:
        raise ValueError("need at least two horizons")
    q = []
    for T in T_list:
        dT = disc.with_horizon(T)
        f1, f2 = u_f1(dT), u_f2(dT)
        v1, v2 = as_array(f1), as_array(f2)
        dv = np.moveaxis(dz_derivative(v1 - v2, dT, axis=2), 1, -1)   # (N, z, t, r)
        dual2 = np.sum(basis.project(dv) ** 2 / basis.eigenvalues, axis=-1)
        den = float(np.sum(dual2 * np.outer(dT.quad_w_z, dT.quad_w_t)))
        if den == 0.0:
            raise ValueError("probe inputs must differ")
        s1 = solve_boundary(flux_integral(f1, dT), params, dT)
        s2 = solve_boundary(flux_integral(f2, dT), params, dT)
        q.append(norm_Wz_T(s1.values - s2.values, dT) ** 2 / den)
    a, b, sa, sb = fit_horizon_law(T_list, q)
    qa = np.asarray(q)
    return PhiProbe(
        horizons=T_list, q=[float(x) for x in q], a=a, b=b, a_stderr=sa, b_stderr=sb,
        monotone=bool(np.all(np.diff(qa) > 0)),
        vanishing=bool(qa[0] < qa[-1] * (T_list[0] / T_list[-1])),
        nonnegative=bool(a >= -2 * sa and b >= -2 * sb),
    )
