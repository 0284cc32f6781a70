"""Problem definition: model constants, initial data and grid sizes."""
from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .eigenbasis import EigenBasis, eigenpairs
from .kinetics import ReactionModel, clipped_mass_action
from .spaces import Discretization, build_discretization

log = logging.getLogger(__name__)


class CompatibilityWarning(UserWarning):
    """Inlet value at r = 1 disagrees with the wall initial value at z = 0."""


@dataclass(frozen=True)
class PolynomialProfile:
    """Per-species polynomial in r: coeffs[i][k] multiplies r**k."""
    coeffs: tuple

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.array([np.polynomial.polynomial.polyval(r, c) for c in self.coeffs])


@dataclass(frozen=True)
class CosineProfile:
    """Per-species cosine series in z: coeffs[i][k] multiplies cos(k pi z)."""
    coeffs: tuple

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.array([sum(a * np.cos(k * np.pi * z) for k, a in enumerate(c))
                         for c in self.coeffs])


@dataclass(frozen=True)
class ProblemSpec:
    beta_f: tuple
    gamma_s: tuple
    theta_Ns: float
    theta_reg: tuple
    model: ReactionModel
    inlet: Callable          # r -> (N, len(r))
    wall0: Callable          # z -> (N, len(z))
    T: float
    n_r: int = 128
    n_z: int = 64
    n_t: int = 64
    m: int | None = None
    radial_kind: str = "uniform"

    def __post_init__(self):
        n = self.n_species
        for name in ("beta_f", "gamma_s"):
            v = getattr(self, name)
            object.__setattr__(self, name, tuple(float(x) for x in v))
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} needs {n} entries")
            if any(x <= 0 for x in getattr(self, name)):
                raise ValueError(f"{name} entries must be positive")
        object.__setattr__(self, "theta_reg", tuple(float(x) for x in self.theta_reg))
        if len(self.theta_reg) != n - 1:
            raise ValueError(f"theta_reg needs {n - 1} entries")
        if any(x < 0 for x in self.theta_reg):
            raise ValueError("theta_reg entries must be nonnegative")
        if not self.theta_Ns > 0:
            raise ValueError("theta_Ns must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    @property
    def n_species(self) -> int:
        return self.model.n_species

    @property
    def signs(self):
        return self.model.signs

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.theta_reg + (self.theta_Ns,))

    @property
    def gamma_over_beta(self) -> np.ndarray:
        return np.array(self.gamma_s) / np.array(self.beta_f)

    @property
    def mode_count(self) -> int:
        return self.m if self.m is not None else max(1, self.n_r // 4)

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)

    def discretization(self) -> Discretization:
        return build_discretization(self.n_r, self.n_z, self.n_t, self.T, self.radial_kind)

    def basis(self, disc: Discretization | None = None) -> EigenBasis:
        disc = disc or self.discretization()
        return eigenpairs(disc, 1.0, self.mode_count)

    def inlet_values(self, disc: Discretization) -> np.ndarray:
        return np.asarray(self.inlet(disc.radial_nodes), dtype=float).reshape(
            self.n_species, disc.n_r)

    def wall_values(self, disc: Discretization) -> np.ndarray:
        """Wall initial data on the axial grid, forced to match the inlet at z = 0."""
        w = np.array(self.wall0(disc.axial_nodes), dtype=float).reshape(self.n_species, disc.n_z)
        at_wall = np.asarray(self.inlet(np.array([1.0])), dtype=float).reshape(self.n_species)
        gap = np.abs(w[:, 0] - at_wall)
        if np.any(gap > 1e-12 * max(1.0, float(np.max(np.abs(at_wall))))):
            warnings.warn(
                f"inlet value at r=1 {at_wall} differs from wall initial value at z=0 "
                f"{w[:, 0]}; using the inlet value", CompatibilityWarning, stacklevel=2)
            w[:, 0] = at_wall
        return w


def reference_problem(**overrides) -> ProblemSpec:
    """Smooth two-species instance (one reactant, temperature) used by the test suite."""
    model = clipped_mass_action([1.0, 1.0], [-1, 1])
    base = dict(
        beta_f=(1.0, 1.0),
        gamma_s=(1.0, 1.0),
        theta_Ns=1.0,
        theta_reg=(0.1,),
        model=model,
        inlet=PolynomialProfile(((0.6, 0.0, -0.1), (0.45, 0.0, -0.05))),
        wall0=CosineProfile(((0.55, -0.05), (0.45, -0.05))),
        T=0.05,
        n_r=128, n_z=64, n_t=64,
    )
    base.update(overrides)
    return ProblemSpec(**base)


def zero_problem(**overrides) -> ProblemSpec:
    from .kinetics import zero_model
    base = dict(
        beta_f=(1.0, 1.0), gamma_s=(1.0, 1.0), theta_Ns=1.0, theta_reg=(0.1,),
        model=zero_model(2, (-1, 1)),
        inlet=PolynomialProfile(((0.0,), (0.0,))),
        wall0=CosineProfile(((0.0,), (0.0,))),
        T=0.05, n_r=32, n_z=16, n_t=16,
    )
    base.update(overrides)
    return ProblemSpec(**base)
