"""Channel solve: wall data u_s -> channel field u_f.

The shifted unknown ``w_f = u_f - u_s`` vanishes at r = 1, so it expands in
the Dirichlet eigenbasis.  Each mode obeys a scalar linear ODE in z,

    dw_j/dz = -beta_i lambda_j w_j - <1, omega_j> du_s/dz,

which is integrated exactly for a source that is piecewise linear in z
(first-order exponential time differencing with a linear source).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .eigenbasis import EigenBasis
from .spaces import (BoundaryField, CylinderField, Discretization, as_array,
                     dz_derivative, norm_Wr_T, norm_Wz_T, radial_energy)

log = logging.getLogger(__name__)


def _phi1(x):
    """(e^x - 1) / x, stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    out = np.expm1(xs) / xs
    series = 1.0 + x / 2 + x * x / 6 + x ** 3 / 24 + x ** 4 / 120
    return np.where(small, series, out)


def _phi2(x):
    """(e^x - 1 - x) / x^2, stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    out = (np.expm1(xs) - xs) / (xs * xs)
    series = 0.5 + x / 6 + x * x / 24 + x ** 3 / 120 + x ** 4 / 720
    return np.where(small, series, out)


def mode_rates(basis: EigenBasis, beta_f) -> np.ndarray:
    """Decay rates beta_i * lambda_j as an (N, m) array."""
    beta_f = np.asarray(beta_f, dtype=float)
    return beta_f[:, None] * (basis.eigenvalues / basis.beta)[None, :]


def solve_cylinder(u_s, u_f0, disc: Discretization, basis: EigenBasis, beta_f) -> CylinderField:
    """Solve the channel problem for given wall data and inlet profiles.

    Parameters
    ----------
    u_s : BoundaryField or array (N, n_z, n_t)
    u_f0 : array (N, n_r)
        Inlet profiles.  The inlet value of ``w_f`` is ``u_f0(r) - u_s(0, t)``.
    beta_f : sequence of N positive reals
    """
    us = as_array(u_s)
    u_f0 = np.asarray(u_f0, dtype=float)
    n = us.shape[0]
    if us.shape[1:] != (disc.n_z, disc.n_t):
        raise ValueError(f"wall field shape {us.shape} does not match grid "
                         f"({disc.n_z}, {disc.n_t})")
    if u_f0.shape != (n, disc.n_r):
        raise ValueError(f"inlet shape {u_f0.shape} does not match ({n}, {disc.n_r})")
    if not np.all(np.isfinite(u_f0)):
        raise ValueError("inlet data must be finite")
    beta_f = np.asarray(beta_f, dtype=float)
    if beta_f.shape != (n,) or np.any(beta_f <= 0):
        raise ValueError("beta_f must hold N positive values")

    mu = mode_rates(basis, beta_f)                      # (N, m)
    c = basis.moments()                                 # (m,)
    dus = dz_derivative(us, disc, axis=1)               # (N, z, t)
    src = -c[None, :, None, None] * dus[:, None, :, :]  # (N, m, z, t)

    w0 = u_f0[:, None, :] - us[:, 0, :, None]           # (N, t, r)
    a = np.empty((n, basis.mode_count, disc.n_z, disc.n_t))
    a[:, :, 0, :] = np.moveaxis(basis.project(w0), -1, 1)

    z = disc.axial_nodes
    for k in range(disc.n_z - 1):
        h = z[k + 1] - z[k]
        x = -mu * h
        e = np.exp(x)[:, :, None]
        p1 = (h * _phi1(x))[:, :, None]
        p2 = (h * _phi2(x))[:, :, None]
        s0, s1 = src[:, :, k, :], src[:, :, k + 1, :]
        a[:, :, k + 1, :] = e * a[:, :, k, :] + p1 * s0 + p2 * (s1 - s0)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("modal z-march produced non-finite values")

    a_dz = -mu[:, :, None, None] * a + src
    return CylinderField(modal=a, modal_dz=a_dz, wall=us, basis=basis)


def flux_integral(u_f, disc: Discretization) -> BoundaryField:
    """G_i(z, t) = int_0^1 du_f/dz r(1 - r^2) dr for every species."""
    if isinstance(u_f, CylinderField) and u_f.has_modal:
        c = u_f.basis.moments()
        dus = dz_derivative(u_f.wall, disc, axis=1)
        G = np.einsum("imzt,m->izt", u_f.modal_dz, c) + 0.25 * dus
        return BoundaryField(G)
    v = as_array(u_f)
    if v.shape[2] < 2:
        raise ValueError("need at least two axial nodes")
    dv = dz_derivative(v, disc, axis=2)
    return BoundaryField(np.einsum("irzt,r->izt", dv, disc.quad_w_rw))


@dataclass
class PsiProbe:
    full_ratio: float
    gradient_ratio: float
    gradient_bound: float
    passed: bool

    def as_dict(self):
        return dict(full_ratio=self.full_ratio, gradient_ratio=self.gradient_ratio,
                    gradient_bound=self.gradient_bound, passed=self.passed)


def lipschitz_probe_psi(u_s1, u_s2, u_f0, disc: Discretization, basis: EigenBasis,
                        beta_f) -> PsiProbe:
    """Measure how far the channel map stretches a difference of wall data.

    The gradient part is compared with e / (8 inf_i beta_i), with 5 % slack
    for discretization.
    """
    a1, a2 = as_array(u_s1), as_array(u_s2)
    du = a1 - a2
    den_full = norm_Wz_T(du, disc)
    dz = dz_derivative(du, disc, axis=1)
    den_grad = float(np.sum(dz * dz * np.outer(disc.quad_w_z, disc.quad_w_t)))
    if den_full == 0.0 or den_grad == 0.0:
        raise ValueError("probe inputs must differ (zero denominator)")
    f1 = solve_cylinder(a1, u_f0, disc, basis, beta_f)
    f2 = solve_cylinder(a2, u_f0, disc, basis, beta_f)
    diff = f1.values - f2.values
    num_full = norm_Wr_T(diff, disc)
    num_grad = norm_Wr_T(diff, disc, gradient_only=True) ** 2
    bound = np.e / (8.0 * float(np.min(beta_f)))
    ratio = num_grad / den_grad
    return PsiProbe(num_full / den_full, ratio, bound, ratio <= bound * 1.05)


def energy_bounds(u_s, u_f0, disc: Discretization, beta_f):
    """m-independent a-priori bounds for the shifted channel field.

    Returns (L2 bound per (z, t), gradient bound per t) as arrays of shape
    (N, n_z, n_t) and (N, n_t): ``||w(z,t)|| <= ||w0(t)|| + 1/2 int_0^z |du_s/dz|``
    and ``beta int_0^1 ||dw/dr||^2 dz <= 1/2 ||w0||^2 + 1/2 int_0^1 |du_s/dz| ||w|| dz``.
    """
    us = as_array(u_s)
    w0 = np.asarray(u_f0)[:, None, :] - us[:, 0, :, None]        # (N, t, r)
    w0n = np.sqrt(np.sum(w0 * w0 * disc.quad_w_rw, axis=-1))      # (N, t)
    g = np.abs(dz_derivative(us, disc, axis=1))                   # (N, z, t)
    z = disc.axial_nodes
    cum = np.concatenate([np.zeros_like(g[:, :1]),
                          np.cumsum(0.5 * (g[:, 1:] + g[:, :-1]) * np.diff(z)[None, :, None],
                                    axis=1)], axis=1)
    l2 = w0n[:, None, :] + 0.5 * cum
    grad = (0.5 * w0n ** 2 + 0.5 * np.einsum("izt,z->it", g * l2, disc.quad_w_z))
    grad = grad / np.asarray(beta_f, dtype=float)[:, None]
    return l2, grad


def shifted_norms(field: CylinderField, disc: Discretization):
    """Per-(z, t) L2_{r(1-r^2)} norm of w_f and per-t radial energy integrated in z."""
    w = field.values - field.wall[:, None]
    wm = np.moveaxis(w, 1, -1)
    l2 = np.sqrt(np.sum(wm * wm * disc.quad_w_rw, axis=-1))
    grad = np.einsum("izt,z->it", radial_energy(wm, disc.radial_nodes), disc.quad_w_z)
    return l2, grad
