"""Fixed-point coupling of the channel and wall solves, and the audits around it.

``picard_solve`` iterates ``u_s <- Phi(Psi(u_s))``; ``theta_continuation``
walks the wall regularization down to zero; ``energy_audit`` and
``stability_experiment`` check the a-priori bounds the construction relies
on against the computed trajectories.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .boundary import WallParams, solve_boundary
from .cylinder import flux_integral, solve_cylinder
from .eigenbasis import EigenBasis
from .problem import ProblemSpec
from .spaces import (BoundaryField, CylinderField, Discretization, as_array,
                     dz_derivative, norm_Wz_T)

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class PicardReport:
    iterates: list
    contraction_ratio: float
    converged: bool
    iterations: int
    fit_r2: float = float("nan")

    def as_dict(self):
        return asdict(self)


@dataclass
class AuditReport:
    energy_lhs: float
    energy_c_T: float
    a_T: float
    b_T: float
    d: float
    passed: bool
    psi_ratios: dict = field(default_factory=dict)
    phi_ratios: dict = field(default_factory=dict)
    stability_growth: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


class Setup:
    """Grids, eigenbasis and wall parameters derived once from a ProblemSpec."""

    def __init__(self, spec: ProblemSpec, disc: Discretization | None = None,
                 basis: EigenBasis | None = None):
        self.spec = spec
        self.disc = disc or spec.discretization()
        self.basis = basis or spec.basis(self.disc)
        self.inlet = spec.inlet_values(self.disc)
        self.wall0 = spec.wall_values(self.disc)
        self.params = WallParams(spec.theta, spec.gamma_over_beta, spec.model, self.wall0)

    def psi(self, u_s) -> CylinderField:
        return solve_cylinder(u_s, self.inlet, self.disc, self.basis, self.spec.beta_f)

    def phi(self, u_f) -> BoundaryField:
        return solve_boundary(flux_integral(u_f, self.disc), self.params, self.disc)

    def seed(self) -> np.ndarray:
        return np.repeat(self.wall0[:, :, None], self.disc.n_t, axis=2)


def _geometric_fit(increments):
    inc = np.asarray([x for x in increments if x > 0])
    if len(inc) < 2:
        return 0.0, 1.0
    k = np.arange(len(inc))
    y = np.log(inc)
    slope, icpt = np.polyfit(k, y, 1)
    pred = slope * k + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), r2


def picard_solve(spec: ProblemSpec, tol: float = 1e-9, max_iter: int = 100,
                 initial=None, setup: Setup | None = None, raise_on_failure: bool = True):
    """Fixed-point iteration of the wall -> channel -> wall map.

    Returns ``(u_s, u_f, report)``.  The default seed is the wall initial
    data held constant in time; ``initial`` overrides it with an
    (N, n_z, n_t) array.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    st = setup or Setup(spec)
    u = st.seed() if initial is None else np.array(as_array(initial), dtype=float)
    increments = []
    converged = False
    for it in range(1, max_iter + 1):
        new = st.phi(st.psi(u)).values
        inc = norm_Wz_T(new - u, st.disc)
        increments.append(inc)
        u = new
        log.debug("picard %d: increment %.3e", it, inc)
        if not np.isfinite(inc):
            break
        if inc <= tol:
            converged = True
            break
    ratio, r2 = _geometric_fit(increments)
    report = PicardReport([float(x) for x in increments], ratio, converged,
                          len(increments), r2)
    if not converged and raise_on_failure:
        raise ConvergenceError(
            f"Picard iteration did not reach tol={tol:g} in {max_iter} iterations "
            f"(last increment {increments[-1]:.3e}, empirical ratio {ratio:.3f})", report)
    u_s = BoundaryField(u)
    return u_s, st.psi(u_s), report


def fixed_point_residual(u_s, setup: Setup) -> float:
    u = as_array(u_s)
    return norm_Wz_T(setup.phi(setup.psi(u)).values - u, setup.disc)


def wtilde_distance(u1, u2, disc: Discretization) -> float:
    """Distance in the norm that keeps z-derivatives of the temperature row only."""
    d = as_array(u1) - as_array(u2)
    mask = np.zeros(d.shape[0], dtype=bool)
    mask[-1] = True
    return norm_Wz_T(d, disc, derivative_mask=mask)


def energy_audit(u_s, spec: ProblemSpec, disc: Discretization | None = None) -> AuditReport:
    """Compare the wall energy at T with the explicit Gronwall bound c(T) = b(T) e^{dT}."""
    disc = disc or spec.discretization()
    u = as_array(u_s)
    T = disc.T
    inlet = spec.inlet_values(disc)
    wall0 = spec.wall_values(disc)
    ratio = 1.0 / spec.gamma_over_beta          # beta_i / gamma_i
    k = spec.model.lipschitz_k
    n = spec.n_species

    a_T = (0.5 * T * float(np.sum(inlet ** 2 * disc.quad_w_rw))
           + 0.5 * float(np.sum(ratio * np.sum(wall0 ** 2 * disc.quad_w_z, axis=1))))
    b_T = 2.0 * a_T / ratio.min()
    d = 2.0 * ratio.max() * k * n / ratio.min()
    c_T = b_T * np.exp(d * T)

    final = float(np.sum(u[:, :, -1] ** 2 * disc.quad_w_z))
    du = dz_derivative(u, disc, axis=1)
    grad = np.einsum("izt,z,t->i", du * du, disc.quad_w_z, disc.quad_w_t)
    lhs = final + float(np.sum(spec.theta * grad))
    return AuditReport(lhs, float(c_T), float(a_T), float(b_T), float(d),
                       bool(lhs <= c_T))


@dataclass
class ContinuationReport:
    thetas: list
    distances: list
    monotone: bool
    final_gap: float
    converged: bool
    zero_theta_distance: float
    energy_passed: list
    picard_iterations: list

    def as_dict(self):
        return asdict(self)


def theta_continuation(spec: ProblemSpec, theta_sequence: Sequence[float] | None = None,
                       tol: float = 1e-3, picard_tol: float = 1e-10, max_iter: int = 200,
                       setup_cache: dict | None = None):
    """Solve the regularized system for decreasing wall diffusivities.

    Returns ``(solutions, report)`` where ``solutions`` maps each theta (and
    0.0 for the unregularized direct solve) to ``(u_s, u_f)``.
    """
    if theta_sequence is None:
        theta_sequence = [2.0 ** -k for k in range(2, 9)]
    thetas = [float(x) for x in theta_sequence]
    if any(x <= 0 for x in thetas) or any(b >= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError("theta sequence must be positive and strictly decreasing")
    n = spec.n_species
    disc = spec.discretization()
    basis = spec.basis(disc)
    solutions = {}
    prev = None
    distances, energy, iters = [], [], []
    for th in thetas + [0.0]:
        sp = spec.replace(theta_reg=(th,) * (n - 1))
        st = Setup(sp, disc, basis)
        u_s, u_f, rep = picard_solve(sp, picard_tol, max_iter, initial=prev, setup=st)
        solutions[th] = (u_s, u_f)
        iters.append(rep.iterations)
        if th > 0:
            energy.append(energy_audit(u_s, sp, disc).passed)
            if prev is not None:
                distances.append(wtilde_distance(u_s, prev, disc))
        prev = u_s.values
    final_gap = distances[-1] if distances else 0.0
    monotone = all(b <= a for a, b in zip(distances, distances[1:]))
    zero_gap = wtilde_distance(solutions[thetas[-1]][0], solutions[0.0][0], disc)
    report = ContinuationReport(
        thetas=thetas, distances=[float(x) for x in distances], monotone=bool(monotone),
        final_gap=float(final_gap), converged=bool(monotone and final_gap <= tol),
        zero_theta_distance=float(zero_gap), energy_passed=energy, picard_iterations=iters)
    return solutions, report


def default_bump(z):
    return np.sin(np.pi * np.asarray(z)) ** 2


@dataclass
class StabilityReport:
    epsilon: float
    growth: float
    bound: float
    passed: bool
    growth_curve: list

    def as_dict(self):
        return asdict(self)


def stability_experiment(spec: ProblemSpec, eps: float, bump=default_bump,
                         tol: float = 1e-11, max_iter: int = 200,
                         base=None) -> StabilityReport:
    """Perturb the wall initial data by eps * bump and track the energy of the difference.

    The tracked energy is sum_i (beta_i/gamma_i) int W_i^2 dz, which the
    Gronwall argument controls by exp(2 k N (sup/inf of the ratios) t); for
    equal ratios this is the plain L2 energy and the factor exp(2 k N t).
    """
    if not eps > 0:
        raise ValueError("perturbation size must be positive")
    disc = spec.discretization()
    basis = spec.basis(disc)
    if base is None:
        base, _, _ = picard_solve(spec, tol, max_iter, setup=Setup(spec, disc, basis))
    wall0 = spec.wall0

    def perturbed(z):
        return np.asarray(wall0(z)) + eps * np.asarray(bump(z))[None, :]

    sp2 = spec.replace(wall0=perturbed)
    pert, _, _ = picard_solve(sp2, tol, max_iter, setup=Setup(sp2, disc, basis))
    w = pert.values - as_array(base)
    ratio = 1.0 / spec.gamma_over_beta
    energy = np.einsum("izt,i,z->t", w * w, ratio, disc.quad_w_z)
    growth_curve = energy / energy[0]
    growth = float(growth_curve.max())
    n = spec.n_species
    bound = float(np.exp(2.0 * spec.model.lipschitz_k * n * ratio.max() / ratio.min() * disc.T))
    return StabilityReport(float(eps), growth, bound, bool(growth <= bound * 1.1),
                           [float(x) for x in growth_curve])
