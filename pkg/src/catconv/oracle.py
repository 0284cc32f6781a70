"""Brute-force references that share no numerics with the main pipeline.

* ``solve_monolithic`` discretizes the channel equation in strong form with
  finite differences, marches it with Crank-Nicolson in z and couples the
  wall through the raw one-sided trace derivative -gamma dC_f/dr(1), not
  the flux integral.  Each wall time step is iterated to self-consistency.
* ``eigen_oracle`` finds radial eigenvalues by shooting from a series
  expansion at r = 0 with a second-order integrator and Richardson
  extrapolation.
"""
from __future__ import annotations

import numpy as np
import scipy.optimize

from .kinetics import evaluate
from .problem import ProblemSpec
from .spaces import BoundaryField, CylinderField, build_discretization

MAX_NODES = 10_000_000


class OracleError(RuntimeError):
    pass


def _strong_operator(r: np.ndarray) -> np.ndarray:
    """(1 / (r (1 - r^2))) d/dr (r d/dr) on a uniform grid, rows 0..n-2."""
    n = len(r)
    h = r[1] - r[0]
    D = np.zeros((n, n))
    D[0, 0], D[0, 1] = -4.0 / h ** 2, 4.0 / h ** 2
    for i in range(1, n - 1):
        rp, rm = r[i] + 0.5 * h, r[i] - 0.5 * h
        c = 1.0 / (h * h * r[i] * (1.0 - r[i] ** 2))
        D[i, i - 1] = c * rm
        D[i, i] = -c * (rm + rp)
        D[i, i + 1] = c * rp
    return D


class _ChannelMarcher:
    """Crank-Nicolson z-march for one species with Dirichlet data at r = 1."""

    def __init__(self, r, z, beta, substeps=4):
        self.z = z
        D = beta * _strong_operator(r)
        n = len(r)
        I = np.eye(n - 1)
        Dii, Dib = D[:-1, :-1], D[:-1, -1]
        dz = z[1] - z[0]
        a = 0.5 * dz
        A = np.linalg.inv(I - a * Dii)
        self.P = A @ (I + a * Dii)
        self.q = a * (A @ Dib)
        # backward-Euler start-up steps damp the inlet/wall corner mismatch
        self.substeps = substeps
        b = dz / substeps
        Ab = np.linalg.inv(I - b * Dii)
        self.Pb = Ab
        self.qb = b * (Ab @ Dib)

    def march(self, inlet, wall):
        """inlet (n_r,), wall (n_z,) -> field (n_r, n_z)."""
        nz = len(self.z)
        out = np.empty((len(inlet), nz))
        out[:, 0] = inlet
        x = inlet[:-1].copy()
        for s in range(1, self.substeps + 1):
            bw = wall[0] + (wall[1] - wall[0]) * s / self.substeps
            x = self.Pb @ x + self.qb * bw
        out[:-1, 1] = x
        out[-1, 1] = wall[1]
        for k in range(1, nz - 1):
            x = self.P @ x + self.q * (wall[k] + wall[k + 1])
            out[:-1, k + 1] = x
            out[-1, k + 1] = wall[k + 1]
        return out


def _neumann_matrix(nz, dz):
    L = np.zeros((nz, nz))
    i = np.arange(nz)
    L[i, i] = -2.0
    L[i[:-1], i[:-1] + 1] = 1.0
    L[i[1:], i[1:] - 1] = 1.0
    L[0, 1] = 2.0
    L[-1, -2] = 2.0
    return L / dz ** 2


def solve_monolithic(spec: ProblemSpec, inner_tol: float = 1e-10, max_inner: int = 200):
    """Reference solve of the regularized system; returns (CylinderField, BoundaryField)."""
    if spec.n_r * spec.n_z * spec.n_t > MAX_NODES:
        raise OracleError(f"instance too large for the oracle "
                          f"({spec.n_r * spec.n_z * spec.n_t} > {MAX_NODES} nodes)")
    disc = build_discretization(spec.n_r, spec.n_z, spec.n_t, spec.T)
    r, z, t = disc.radial_nodes, disc.axial_nodes, disc.time_nodes
    n = spec.n_species
    h = r[1] - r[0]
    dt = t[1] - t[0]
    inlet = spec.inlet_values(disc)
    wall0 = spec.wall_values(disc)
    gamma = np.asarray(spec.gamma_s)
    theta = spec.theta
    sgn = np.asarray(spec.signs, dtype=float)[:, None]
    marchers = [_ChannelMarcher(r, z, b) for b in spec.beta_f]

    L = _neumann_matrix(len(z), z[1] - z[0])
    I = np.eye(len(z))
    lhs_inv = [np.linalg.inv(I - 0.5 * dt * th * L) for th in theta]
    rhs_op = [I + 0.5 * dt * th * L for th in theta]

    def channel(ws):
        return np.stack([marchers[i].march(inlet[i], ws[i]) for i in range(n)])

    def source(cf, ws):
        dr = (3.0 * cf[:, -1, :] - 4.0 * cf[:, -2, :] + cf[:, -3, :]) / (2.0 * h)
        return -gamma[:, None] * dr + sgn * evaluate(spec.model, ws)

    cs = np.empty((n, len(z), len(t)))
    cf = np.empty((n, len(r), len(z), len(t)))
    cs[:, :, 0] = wall0
    cf[:, :, :, 0] = channel(wall0)
    s_old = source(cf[:, :, :, 0], wall0)
    for m in range(len(t) - 1):
        ws = cs[:, :, m].copy()
        base = np.stack([rhs_op[i] @ cs[i, :, m] for i in range(n)]) + 0.5 * dt * s_old
        for it in range(max_inner):
            f_new = channel(ws)
            s_new = source(f_new, ws)
            nxt = np.stack([lhs_inv[i] @ (base[i] + 0.5 * dt * s_new[i]) for i in range(n)])
            change = float(np.max(np.abs(nxt - ws)))
            ws = nxt
            if change <= inner_tol:
                break
        else:
            raise OracleError(f"inner iteration stalled at step {m} (change {change:.2e})")
        cs[:, :, m + 1] = ws
        cf[:, :, :, m + 1] = channel(ws)
        s_old = source(cf[:, :, :, m + 1], ws)
    return CylinderField(cf), BoundaryField(cs)


def _series_start(mu, r0, terms=24):
    """u(r0) and r0 u'(r0) from the Frobenius series at the axis (u(0) = 1)."""
    mu = np.asarray(mu, dtype=float)
    a = [np.ones_like(mu), np.zeros_like(mu)]
    for k in range(2, terms):
        prev4 = a[k - 4] if k >= 4 else 0.0
        a.append(-mu * (a[k - 2] - prev4) / (k * k))
    u = sum(a[k] * r0 ** k for k in range(terms))
    p = sum(k * a[k] * r0 ** k for k in range(1, terms))
    return u, p


def _shoot(mu, n_steps):
    """u(1) for each scaled eigenvalue candidate, explicit midpoint rule."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    h = 1.0 / n_steps
    r = h
    u, p = _series_start(mu, r)
    for _ in range(n_steps - 1):
        # y = (u, p), u' = p / r, p' = -mu r (1 - r^2) u
        ku, kp = p / r, -mu * r * (1 - r * r) * u
        rm = r + 0.5 * h
        um, pm = u + 0.5 * h * ku, p + 0.5 * h * kp
        u = u + h * pm / rm
        p = p - h * mu * rm * (1 - rm * rm) * um
        r += h
    return u


def _roots(n_steps, j_max):
    hi = 30.0 * (j_max + 1) ** 2
    grid = np.linspace(0.5, hi, 40 * (j_max + 1))
    vals = _shoot(grid, n_steps)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            roots.append(scipy.optimize.brentq(lambda x: _shoot(x, n_steps)[0], a, b,
                                               xtol=1e-14, rtol=1e-14))
            if len(roots) == j_max:
                break
    if len(roots) < j_max:
        raise OracleError(f"shooting bracket failure: found {len(roots)} of {j_max} roots")
    return np.array(roots)


def eigen_oracle(n_fine: int = 2048, beta: float = 1.0, j_max: int = 3) -> np.ndarray:
    """First ``j_max`` eigenvalues of -(beta) (r u')' = lambda r (1 - r^2) u, u(1) = 0."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    coarse = _roots(n_fine, j_max)
    fine = _roots(2 * n_fine, j_max)
    return beta * (4.0 * fine - coarse) / 3.0
