"""Coupled channel/wall catalytic converter model: solvers and audits."""
from .boundary import StepSizeError, WallParams, contraction_probe_phi, solve_boundary
from .coupling import (AuditReport, ConvergenceError, PicardReport, energy_audit,
                       picard_solve, stability_experiment, theta_continuation)
from .cylinder import flux_integral, lipschitz_probe_psi, solve_cylinder
from .eigenbasis import EigenBasis, apply_T, eigenpairs, poincare_sup
from .kinetics import (ReactionModel, clipped_mass_action, evaluate, linear_chain,
                       make_model, verify_hypotheses, zero_model)
from .oracle import eigen_oracle, solve_monolithic
from .problem import (CompatibilityWarning, CosineProfile, PolynomialProfile, ProblemSpec,
                      reference_problem)
from .spaces import (BoundaryField, CylinderField, Discretization, build_discretization,
                     inner_weighted, norm_Wr0, norm_Wz_T)

__version__ = "0.1.0"
