import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catconv.eigenbasis import eigenpairs
from catconv.spaces import (MEASURE_R, MEASURE_RW, BoundaryField, CylinderField,
                            build_discretization, dual_norm, inner_weighted, norm_weighted,
                            norm_Wr0, norm_Wz_T, product_weights, radial_grid)


def disc_of(n_r, kind="uniform"):
    return build_discretization(n_r, 5, 5, 1.0, radial_kind=kind)


@pytest.mark.parametrize("n_r", [3, 4, 5, 6, 7, 16, 17, 64, 65, 128, 513])
@pytest.mark.parametrize("kind", ["uniform", "clustered"])
def test_measure_totals(n_r, kind):
    d = disc_of(n_r, kind)
    assert abs(d.quad_w_rw.sum() - 0.25) <= 1e-12
    assert abs(d.quad_w_r.sum() - 0.5) <= 1e-12
    assert np.all(d.quad_w_r >= 0) and np.all(d.quad_w_rw >= 0)
    assert np.all(np.diff(d.radial_nodes) > 0)


@pytest.mark.parametrize("n_r", [3, 8, 33, 100])
def test_low_moments_exact(n_r):
    d = disc_of(n_r)
    r = d.radial_nodes
    for k in range(3):
        exact = 1.0 / (k + 2) - 1.0 / (k + 4)      # int r^k (1 - r^2) r dr
        assert abs(np.sum(d.quad_w_rw * r ** k) - exact) <= 1e-12


def test_minimal_grid_endpoints():
    d = build_discretization(3, 3, 3, 0.1)
    assert d.radial_nodes[0] == 0.0 and d.radial_nodes[-1] == 1.0
    assert d.T == pytest.approx(0.1)


@pytest.mark.parametrize("args", [(2, 5, 5, 1.0), (5, 2, 5, 1.0), (5, 5, 2, 1.0),
                                  (5, 5, 5, 0.0), (5, 5, 5, -1.0)])
def test_build_rejects_bad_input(args):
    with pytest.raises(ValueError):
        build_discretization(*args)


def test_product_weights_reject_tiny_grid():
    with pytest.raises(ValueError):
        product_weights(np.array([0.0, 1.0]), lambda r: r)


def test_unknown_radial_kind():
    with pytest.raises(ValueError):
        radial_grid(10, "chebyshev")


def test_inner_product_examples():
    d = disc_of(64)
    one = np.ones(64)
    r = d.radial_nodes
    assert inner_weighted(one, one, MEASURE_RW, d) == pytest.approx(0.25, abs=1e-12)
    assert inner_weighted(one, np.zeros(64), MEASURE_RW, d) == 0.0
    assert inner_weighted(r, r, MEASURE_R, d) == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ValueError):
        inner_weighted(one, np.ones(10), MEASURE_R, d)
    with pytest.raises(ValueError):
        inner_weighted(one, one, "dr", d)


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([MEASURE_R, MEASURE_RW]))
def test_cauchy_schwarz_and_bilinearity(seed, measure):
    d = disc_of(40)
    g = np.random.default_rng(seed)
    u, v, w = g.normal(size=(3, 40))
    a = g.normal()
    ip = lambda x, y: inner_weighted(x, y, measure, d)
    assert abs(ip(u, v)) <= norm_weighted(u, measure, d) * norm_weighted(v, measure, d) * (1 + 1e-12)
    assert ip(u, v) == pytest.approx(ip(v, u), abs=1e-14)
    assert ip(a * u + w, v) == pytest.approx(a * ip(u, v) + ip(w, v), abs=1e-12)


def test_norm_Wr0_examples():
    d = disc_of(257)
    r = d.radial_nodes
    assert norm_Wr0(np.zeros(257), d) == 0.0
    # (1 - r^2)' = -2r, int 4 r^3 dr = 1; P1 interpolation error is O(h^2)
    assert norm_Wr0(1 - r * r, d) == pytest.approx(1.0, abs=2e-5)
    with pytest.raises(ValueError):
        norm_Wr0(np.ones(257), d)


def test_norm_Wr0_matches_trapezoid_oracle(rng):
    # independent evaluation: the interpolant's derivative is constant on each
    # cell, so int u'^2 r dr on a cell is exact under the trapezoid rule in r
    n = 512
    d = disc_of(n)
    r = d.radial_nodes
    u = rng.normal(size=n).cumsum() * 0.01
    u -= u[-1]
    slopes = np.diff(u) / np.diff(r)
    oracle = 0.0
    for s, a, b in zip(slopes, r[:-1], r[1:]):
        oracle += s * s * 0.5 * (a + b) * (b - a)
    assert norm_Wr0(u, d) == pytest.approx(np.sqrt(oracle), rel=1e-8)


@pytest.mark.parametrize("n_r", [128, 256])
def test_discrete_poincare(n_r, rng):
    d = disc_of(n_r)
    r = d.radial_nodes
    for _ in range(20):
        c = rng.normal(size=6)
        u = np.polynomial.polynomial.polyval(r, c) * (1 - r)
        u += 0.01 * rng.normal(size=n_r)
        u[-1] = 0.0
        lhs = inner_weighted(u, u, MEASURE_RW, d)
        assert lhs <= 0.1875 * norm_Wr0(u, d) ** 2 * 1.05


def test_dual_norm_examples():
    d = disc_of(128)
    b = eigenpairs(d, 1.0, 16)
    assert dual_norm(np.zeros(128), b) == 0.0
    w1 = b.eigenfunctions[0]
    assert dual_norm(w1, b) == pytest.approx(1 / np.sqrt(b.eigenvalues[0]), rel=1e-12)
    f = np.cos(3 * d.radial_nodes)
    assert dual_norm(-2.5 * f, b) == pytest.approx(2.5 * dual_norm(f, b), rel=1e-12)


def test_dual_norm_monotone_in_m():
    d = disc_of(128)
    b = eigenpairs(d, 1.0, 60)
    f = np.exp(d.radial_nodes)
    vals = [dual_norm(f, b.truncated(m)) for m in (1, 2, 4, 8, 16, 32, 60)]
    assert np.all(np.diff(vals) >= 0)
    # Cauchy in m: increments shrink
    inc = np.diff(vals)
    assert inc[-1] < inc[0]


def test_norm_Wz_T_constant_field():
    d = build_discretization(5, 17, 9, 2.0)
    u = np.full((2, 17, 9), 3.0)
    # int_0^1 int_0^2 9 = 18 per species, no derivative
    assert norm_Wz_T(u, d) == pytest.approx(np.sqrt(36.0), rel=1e-12)
    z = d.axial_nodes
    v = np.broadcast_to(z[None, :, None], (1, 17, 9))
    masked = norm_Wz_T(v, d, derivative_mask=[False])
    assert norm_Wz_T(v, d) > masked


def test_fields_validate_shape_and_values():
    with pytest.raises(ValueError):
        BoundaryField(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        BoundaryField(np.array([[[np.nan]]]))
    with pytest.raises(ValueError):
        CylinderField()
