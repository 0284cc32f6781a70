"""Weighted radial operator, its inverse and the Galerkin eigenbasis.

The operator is discretized in weak form only: stiffness
``int beta u' v' r dr`` with piecewise-linear elements, and the mass
``int u v r(1-r^2) dr`` lumped onto the radial quadrature weights so that
discrete orthonormality is measured with the same inner product the rest
of the package uses.  The Dirichlet node at r = 1 is removed; r = 0 keeps
the natural condition.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .spaces import Discretization, MEASURE_RW


class EigenSolverError(RuntimeError):
    pass


def assemble_operators(disc: Discretization, beta: float = 1.0):
    """Return the full (n_r x n_r) stiffness and mass matrices."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    r = disc.radial_nodes
    h = np.diff(r)
    if np.any(h <= 0):
        raise ValueError("degenerate radial grid")
    # element integral of r over [r_i, r_{i+1}] divided by h^2
    k = beta * 0.5 * (r[1:] ** 2 - r[:-1] ** 2) / (h * h)
    n = disc.n_r
    S = np.zeros((n, n))
    idx = np.arange(n - 1)
    S[idx, idx] += k
    S[idx + 1, idx + 1] += k
    S[idx, idx + 1] -= k
    S[idx + 1, idx] -= k
    M = np.diag(np.array(disc.quad_w_rw, dtype=float))
    return S, M


@dataclass(frozen=True)
class EigenBasis:
    eigenvalues: np.ndarray       # (m,)
    eigenfunctions: np.ndarray    # (m, n_r), last column exactly 0
    beta: float
    weights: np.ndarray           # r(1-r^2) quadrature weights

    @property
    def mode_count(self) -> int:
        return len(self.eigenvalues)

    def project(self, f):
        """Coefficients <f, w_j>_{r(1-r^2)} of radial functions along the last axis."""
        f = np.asarray(f, dtype=float)
        return (f * self.weights) @ self.eigenfunctions.T

    def synthesize(self, coeffs):
        """Inverse of :meth:`project` on the span: coefficients on the last axis."""
        return np.asarray(coeffs) @ self.eigenfunctions

    def moments(self) -> np.ndarray:
        """<1, w_j>_{r(1-r^2)} for every mode."""
        return self.eigenfunctions @ self.weights

    def scaled(self, beta: float) -> "EigenBasis":
        return EigenBasis(self.eigenvalues * (beta / self.beta), self.eigenfunctions,
                          float(beta), self.weights)

    def truncated(self, m: int) -> "EigenBasis":
        return EigenBasis(self.eigenvalues[:m], self.eigenfunctions[:m], self.beta,
                          self.weights)

    def to_csv(self, path, radial_nodes) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "lambda"] + [f"r={x:.17g}" for x in radial_nodes])
            for j, (lam, vec) in enumerate(zip(self.eigenvalues, self.eigenfunctions), 1):
                w.writerow([j, f"{lam:.17g}"] + [f"{v:.17g}" for v in vec])


def eigenpairs(disc: Discretization, beta: float = 1.0, m: int | None = None) -> EigenBasis:
    """First ``m`` generalized eigenpairs, normalized in the r(1-r^2) product."""
    n = disc.n_r
    if m is None:
        m = max(1, n // 4)
    if not 1 <= m < n - 2:
        raise ValueError(f"mode count must satisfy 1 <= m < n_r - 2 = {n - 2}, got {m}")
    S, M = assemble_operators(disc, beta)
    Si, Mi = S[:-1, :-1], M[:-1, :-1]
    try:
        lam, vec = scipy.linalg.eigh(Si, Mi, subset_by_index=[0, m - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(
            f"generalized eigensolve failed for n_r={n}, m={m}, beta={beta}: {exc}") from exc
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise EigenSolverError(f"spectrum not strictly positive/increasing: {lam[:5]}")
    funcs = np.zeros((m, n))
    funcs[:, :-1] = vec.T
    # deterministic sign: positive at the axis
    sign = np.where(funcs[:, 0] < 0, -1.0, 1.0)
    funcs *= sign[:, None]
    # re-normalize with the public inner product to squeeze out eigh rounding
    norms = np.sqrt(np.sum(funcs * funcs * disc.quad_w_rw, axis=1))
    funcs /= norms[:, None]
    funcs.setflags(write=False)
    lam.setflags(write=False)
    return EigenBasis(lam, funcs, float(beta), disc.quad_w_rw)


def apply_T(g, disc: Discretization, beta: float = 1.0) -> np.ndarray:
    """Weak solve of L(T g) = g r(1-r^2) with T g (1) = 0.

    ``g`` may carry leading batch axes; radial values sit on the last axis.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("g must be finite")
    S, _ = assemble_operators(disc, beta)
    rhs = (g * disc.quad_w_rw)[..., :-1]
    try:
        cho = scipy.linalg.cho_factor(S[:-1, :-1])
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"singular stiffness matrix: {exc}") from exc
    out = np.zeros(g.shape)
    sol = scipy.linalg.cho_solve(cho, rhs.reshape(-1, disc.n_r - 1).T).T
    out[..., :-1] = sol.reshape(rhs.shape)
    return out


def poincare_sup(disc: Discretization) -> float:
    """Best constant C in <u,u>_{r(1-r^2)} <= C ||u||_{W_r0}^2 on the grid."""
    return float(1.0 / eigenpairs(disc, 1.0, 1).eigenvalues[0])


def weak_residual(basis: EigenBasis, disc: Discretization) -> float:
    """max_j of the weak eigen-identity residual, tested against every grid hat function."""
    S, M = assemble_operators(disc, basis.beta)
    Si, Mi = S[:-1, :-1], M[:-1, :-1]
    res = 0.0
    for lam, w in zip(basis.eigenvalues, basis.eigenfunctions):
        v = w[:-1]
        r = Si @ v - lam * (Mi @ v)
        res = max(res, float(np.max(np.abs(r)) / max(lam * np.max(np.abs(Mi @ v)), 1e-300)))
    return res


__all__ = ["EigenBasis", "EigenSolverError", "assemble_operators", "eigenpairs",
           "apply_T", "poincare_sup", "weak_residual", "MEASURE_RW"]
