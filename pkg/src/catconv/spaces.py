"""Grids, quadrature and the weighted norms used throughout the solver.

Radial integrals are taken against two measures, ``r dr`` and
``r (1 - r^2) dr``.  Both rules are product rules: on each panel of two
(or, once, three) grid intervals the Lagrange basis is integrated exactly
against the measure, so polynomial integrands of low degree are
reproduced to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MEASURE_R = "r"
MEASURE_RW = "r(1-r^2)"

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)

# relative tolerance for membership in W_r0 (u(1) = 0)
WR0_TOL = 1e-10


def _rho_r(r):
    return r


def _rho_rw(r):
    return r * (1.0 - r * r)


def _panel_weights(nodes: np.ndarray, rho) -> np.ndarray:
    """Integrate each Lagrange basis polynomial of ``nodes`` against ``rho``."""
    a, b = nodes[0], nodes[-1]
    x = 0.5 * (b - a) * _GAUSS_X + 0.5 * (a + b)
    gw = 0.5 * (b - a) * _GAUSS_W * rho(x)
    out = np.empty(len(nodes))
    for k in range(len(nodes)):
        lk = np.ones_like(x)
        for j in range(len(nodes)):
            if j != k:
                lk *= (x - nodes[j]) / (nodes[k] - nodes[j])
        out[k] = np.dot(gw, lk)
    return out


def product_weights(nodes: np.ndarray, rho) -> np.ndarray:
    """Composite product-rule weights on an arbitrary increasing grid.

    Panels are quadratic; when the number of intervals is odd the first
    panel is cubic.  Exact for piecewise cubics times ``rho`` whenever
    ``rho`` is a polynomial of degree <= 3.
    """
    n = len(nodes)
    if n < 3:
        raise ValueError("need at least 3 nodes")
    w = np.zeros(n)
    start = 0
    if (n - 1) % 2 == 1:
        w[0:4] += _panel_weights(nodes[0:4], rho)
        start = 3
    for p in range(start, n - 1, 2):
        w[p:p + 3] += _panel_weights(nodes[p:p + 3], rho)
    # weights that vanish analytically (r = 0 under r dr) come out as +-1e-19
    w[np.abs(w) < 1e-13 * np.max(np.abs(w))] = 0.0
    return w


def radial_grid(n_r: int, kind: str = "uniform") -> np.ndarray:
    if kind == "uniform":
        return np.linspace(0.0, 1.0, n_r)
    if kind != "clustered":
        raise ValueError(f"unknown radial grid kind {kind!r}")
    # Panel end points follow a smooth map whose spacing at r = 1 is 1/4 of
    # the spacing at r = 0; nodes inside a panel are equally spaced, which
    # keeps every product weight nonnegative.
    intervals = n_r - 1
    sizes = [3] + [2] * ((intervals - 3) // 2) if intervals % 2 else [2] * (intervals // 2)
    edges = np.concatenate([[0], np.cumsum(sizes)]) / intervals
    edges = edges + 0.6 * edges * (1.0 - edges)
    r = [0.0]
    for a, b, k in zip(edges[:-1], edges[1:], sizes):
        r.extend(a + (b - a) * np.arange(1, k + 1) / k)
    r = np.array(r)
    r[-1] = 1.0
    return r


@dataclass(frozen=True)
class Discretization:
    radial_nodes: np.ndarray
    axial_nodes: np.ndarray
    time_nodes: np.ndarray
    quad_w_r: np.ndarray
    quad_w_rw: np.ndarray
    quad_w_z: np.ndarray = field(repr=False)
    quad_w_t: np.ndarray = field(repr=False)

    @property
    def n_r(self) -> int:
        return len(self.radial_nodes)

    @property
    def n_z(self) -> int:
        return len(self.axial_nodes)

    @property
    def n_t(self) -> int:
        return len(self.time_nodes)

    @property
    def T(self) -> float:
        return float(self.time_nodes[-1])

    @property
    def dz(self) -> float:
        return float(self.axial_nodes[1] - self.axial_nodes[0])

    @property
    def dt(self) -> float:
        return float(self.time_nodes[1] - self.time_nodes[0])

    def weights(self, measure: str) -> np.ndarray:
        if measure == MEASURE_R:
            return self.quad_w_r
        if measure == MEASURE_RW:
            return self.quad_w_rw
        raise ValueError(f"unknown measure {measure!r}")

    def with_horizon(self, T: float, n_t: int | None = None) -> "Discretization":
        """Same spatial grids, new time grid on [0, T]."""
        return build_discretization(
            self.n_r, self.n_z, self.n_t if n_t is None else n_t, T,
            radial_nodes=self.radial_nodes,
        )


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros(len(x))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def build_discretization(n_r: int, n_z: int, n_t: int, T: float,
                         radial_kind: str = "uniform",
                         radial_nodes: np.ndarray | None = None) -> Discretization:
    """Build the (r, z, t) tensor grid with its quadrature rules."""
    for name, n in (("n_r", n_r), ("n_z", n_z), ("n_t", n_t)):
        if int(n) != n or n < 3:
            raise ValueError(f"{name} must be an integer >= 3, got {n}")
    if not (T > 0 and np.isfinite(T)):
        raise ValueError(f"horizon T must be positive, got {T}")
    if radial_nodes is None:
        r = radial_grid(int(n_r), radial_kind)
    else:
        r = np.asarray(radial_nodes, dtype=float)
        if len(r) != n_r:
            raise ValueError("radial_nodes length does not match n_r")
    if np.any(np.diff(r) <= 0) or r[0] != 0.0 or r[-1] != 1.0:
        raise ValueError("radial nodes must increase strictly from 0 to 1")
    z = np.linspace(0.0, 1.0, int(n_z))
    t = np.linspace(0.0, float(T), int(n_t))
    for a in (r, z, t):
        a.setflags(write=False)
    w_r = product_weights(r, _rho_r)
    w_rw = product_weights(r, _rho_rw)
    w_z = _trapezoid_weights(z)
    w_t = _trapezoid_weights(t)
    for a in (w_r, w_rw, w_z, w_t):
        a.setflags(write=False)
    return Discretization(r, z, t, w_r, w_rw, w_z, w_t)


def inner_weighted(u, v, measure: str, disc: Discretization) -> float:
    """Discrete inner product sum_i w_i u(r_i) v(r_i) for the chosen measure."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = disc.weights(measure)
    if u.shape[-1] != len(w) or v.shape[-1] != len(w):
        raise ValueError(
            f"grid function size mismatch: {u.shape[-1]}, {v.shape[-1]} vs n_r={len(w)}")
    return np.sum(u * v * w, axis=-1)


def norm_weighted(u, measure: str, disc: Discretization):
    return np.sqrt(inner_weighted(u, u, measure, disc))


def radial_energy(u, radial_nodes: np.ndarray):
    """Exact integral of (du/dr)^2 r dr for the piecewise-linear interpolant.

    Works on the last axis; leading axes are batched.
    """
    r = radial_nodes
    du = np.diff(np.asarray(u, dtype=float), axis=-1)
    h = np.diff(r)
    ring = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
    return np.sum(du * du * (ring / (h * h)), axis=-1)


def norm_Wr0(u, disc: Discretization) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != disc.n_r:
        raise ValueError("grid function size mismatch")
    scale = max(np.max(np.abs(u)), 1.0e-300)
    if abs(u[-1]) > WR0_TOL * scale:
        raise ValueError(f"u(1) = {u[-1]:.3e} is not zero: function is not in W_r0")
    return float(np.sqrt(radial_energy(u, disc.radial_nodes)))


def dual_norm(f, basis) -> float:
    """Discrete W_r0' norm: sqrt(sum_j <f, w_j>^2 / lambda_j) over the basis."""
    if basis.mode_count == 0:
        raise ValueError("empty eigenbasis")
    coeffs = basis.project(f)
    return np.sqrt(np.sum(coeffs * coeffs / basis.eigenvalues, axis=-1))


def dz_derivative(u, disc: Discretization, axis: int = -2):
    """Second-order axial derivative (centered inside, one-sided at the ends)."""
    return np.gradient(u, disc.axial_nodes, axis=axis, edge_order=2)


def norm_Wz_T(u, disc: Discretization, derivative_mask=None) -> float:
    """W_z(T) norm of an (N, n_z, n_t) wall field.

    ``derivative_mask`` selects the species whose z-derivative enters the
    norm (all species by default); passing only the temperature row gives
    the norm of the unregularized space.
    """
    u = np.asarray(u, dtype=float)
    wzt = np.outer(disc.quad_w_z, disc.quad_w_t)
    val = np.sum(u * u * wzt)
    du = dz_derivative(u, disc, axis=1)
    if derivative_mask is not None:
        du = du[np.asarray(derivative_mask, dtype=bool)]
    val += np.sum(du * du * wzt)
    return float(np.sqrt(val))


def norm_Wr_T(u, disc: Discretization, gradient_only: bool = False) -> float:
    """W_r(T) norm of an (N, n_r, n_z, n_t) cylinder field."""
    u = np.asarray(u, dtype=float)
    wzt = np.outer(disc.quad_w_z, disc.quad_w_t)
    um = np.moveaxis(u, 1, -1)  # (N, n_z, n_t, n_r)
    grad = np.sum(radial_energy(um, disc.radial_nodes) * wzt)
    if gradient_only:
        return float(np.sqrt(grad))
    mass = np.sum(np.sum(um * um * disc.quad_w_rw, axis=-1) * wzt)
    return float(np.sqrt(mass + grad))


class BoundaryField:
    """Wall field u_s: array (N, n_z, n_t)."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"wall field must be (N, n_z, n_t), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("wall field has non-finite entries")
        self.values = values

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"BoundaryField(shape={self.values.shape})"


class CylinderField:
    """Channel field u_f on (N, n_r, n_z, n_t).

    Fields built by the modal solver keep ``u_f = sum_j w_j(z,t) omega_j(r) +
    u_s(z,t)`` in modal form; nodal values are synthesized on first access.
    """

    def __init__(self, values=None, *, modal=None, modal_dz=None, wall=None,
                 basis=None):
        if values is None and modal is None:
            raise ValueError("need nodal values or a modal form")
        self._values = None if values is None else np.asarray(values, dtype=float)
        self.modal = modal          # (N, m, n_z, n_t)
        self.modal_dz = modal_dz    # d/dz of the modal coefficients
        self.wall = wall            # (N, n_z, n_t)
        self.basis = basis

    @property
    def has_modal(self) -> bool:
        return self.modal is not None

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            # (N, m, z, t) x (m, r) -> (N, r, z, t)
            v = np.einsum("imzt,mr->irzt", self.modal, self.basis.eigenfunctions)
            self._values = v + self.wall[:, None, :, :]
        return self._values

    @property
    def shape(self):
        if self._values is not None:
            return self._values.shape
        n, _, nz, nt = self.modal.shape
        return (n, self.basis.eigenfunctions.shape[1], nz, nt)

    def __repr__(self):
        return f"CylinderField(shape={self.shape}, modal={self.has_modal})"


def as_array(field_or_array) -> np.ndarray:
    return np.asarray(getattr(field_or_array, "values", field_or_array), dtype=float)
