import warnings

import numpy as np
import pytest

from catconv.coupling import (ConvergenceError, Setup, energy_audit, fixed_point_residual,
                              picard_solve, stability_experiment, theta_continuation,
                              wtilde_distance)
from catconv.kinetics import clipped_mass_action, zero_model
from catconv.problem import (CompatibilityWarning, CosineProfile, PolynomialProfile,
                             reference_problem, zero_problem)
from catconv.spaces import build_discretization, norm_Wz_T


def test_zero_data_fixed_point():
    u_s, u_f, rep = picard_solve(zero_problem(), 1e-12, 10)
    assert rep.iterations == 1 and rep.converged
    assert np.all(u_s.values == 0.0) and np.all(u_f.values == 0.0)


def test_reference_converges_geometrically(ref_solution):
    u_s, u_f, rep = ref_solution
    assert rep.converged and rep.iterates[-1] <= 1e-10
    assert rep.contraction_ratio < 1 and rep.fit_r2 >= 0.95
    assert np.max(np.abs(u_f.values[:, -1] - u_s.values)) <= 1e-10


def test_fixed_point_residual(ref_solution, ref_setup):
    u_s, _, _ = ref_solution
    assert fixed_point_residual(u_s, ref_setup) <= 10 * 1e-10


def test_seeds_reach_same_fixed_point(ref_spec, ref_setup, ref_solution):
    tol = 1e-10
    shape = ref_solution[0].values.shape
    a, _, _ = picard_solve(ref_spec, tol, 100, initial=np.zeros(shape), setup=ref_setup)
    b, _, _ = picard_solve(ref_spec, tol, 100, initial=np.ones(shape), setup=ref_setup)
    assert norm_Wz_T(a.values - b.values, ref_setup.disc) <= 10 * tol


def test_ratio_decreases_with_horizon(ref_spec):
    ratios = []
    for T in (0.025, 0.05, 0.1):
        _, _, rep = picard_solve(ref_spec.replace(T=T, n_r=64, n_z=32, n_t=32), 1e-11, 100)
        ratios.append(rep.contraction_ratio)
    assert ratios[0] < ratios[1] < ratios[2] < 1


def test_non_convergence_reports(ref_spec):
    sp = ref_spec.replace(n_r=32, n_z=16, n_t=16)
    with pytest.raises(ConvergenceError) as exc:
        picard_solve(sp, 1e-14, 2)
    assert exc.value.report.iterations == 2 and not exc.value.report.converged
    _, _, rep = picard_solve(sp, 1e-14, 2, raise_on_failure=False)
    assert not rep.converged
    with pytest.raises(ValueError):
        picard_solve(sp, 0.0, 2)


def test_energy_audit_zero_data():
    sp = zero_problem()
    u_s, _, _ = picard_solve(sp, 1e-12, 5)
    rep = energy_audit(u_s, sp)
    assert rep.a_T == 0 and rep.b_T == 0 and rep.energy_lhs == 0 and rep.passed


def test_energy_audit_hand_constants():
    T = 0.1
    sp = reference_problem(inlet=PolynomialProfile(((1.0,), (1.0,))),
                           wall0=CosineProfile(((1.0,), (1.0,))), T=T,
                           n_r=33, n_z=17, n_t=17)
    d = sp.discretization()
    u = np.ones((2, d.n_z, d.n_t))
    rep = energy_audit(u, sp, d)
    # (T/2) * 2 species * 1/4 + (1/2) * 2 species * 1 = T/4 + 1
    assert rep.a_T == pytest.approx(T / 4 + 1, rel=1e-12)
    assert rep.b_T == pytest.approx(2 * (T / 4 + 1), rel=1e-12)
    assert rep.d == pytest.approx(2 * 1 * 2, rel=1e-12)
    assert rep.energy_c_T == pytest.approx(rep.b_T * np.exp(4 * T), rel=1e-12)
    assert rep.energy_lhs == pytest.approx(2.0, rel=1e-12)
    sp2 = sp.replace(model=clipped_mass_action([2.0, 2.0], (-1, 1)))
    assert energy_audit(u, sp2, d).d == 2 * rep.d


def test_energy_audit_unequal_ratios(ref_solution, ref_spec):
    sp = ref_spec.replace(beta_f=(1.0, 2.0), gamma_s=(1.0, 0.5))
    rep = energy_audit(ref_solution[0], sp)
    # beta/gamma = (1, 4): b uses 1/inf = 1, d picks up sup/inf = 4
    assert rep.d == pytest.approx(2 * 4 * 1 * 2)


def test_reference_energy_bound(ref_solution, ref_spec):
    assert energy_audit(ref_solution[0], ref_spec).passed


def test_wtilde_ignores_concentration_gradients():
    d = build_discretization(3, 17, 5, 0.1)
    z = d.axial_nodes
    a = np.zeros((2, 17, 5))
    b = a.copy()
    b[0] += np.cos(4 * np.pi * z)[:, None]
    c = a.copy()
    c[1] += np.cos(4 * np.pi * z)[:, None]
    assert wtilde_distance(a, b, d) < wtilde_distance(a, c, d)


def test_continuation_zero_data():
    sols, rep = theta_continuation(zero_problem(), [0.25, 0.125, 0.0625])
    assert rep.distances == [0.0, 0.0] and rep.zero_theta_distance == 0.0
    assert all(np.all(s.values == 0) for s, _ in sols.values())
    assert set(sols) == {0.25, 0.125, 0.0625, 0.0}


def test_continuation_rejects_bad_sequence():
    with pytest.raises(ValueError):
        theta_continuation(zero_problem(), [0.1, 0.2])
    with pytest.raises(ValueError):
        theta_continuation(zero_problem(), [0.1, 0.0])


def test_continuation_first_order(ref_spec):
    sp = ref_spec.replace(n_r=64, n_z=32, n_t=32)
    _, rep = theta_continuation(sp, [2.0 ** -k for k in range(2, 7)])
    ratios = np.array(rep.distances[:-1]) / np.array(rep.distances[1:])
    # halving theta roughly halves the gap
    assert np.all((ratios > 1.5) & (ratios < 2.5))
    assert all(rep.energy_passed)


def test_stability_zero_kinetics():
    sp = reference_problem(model=zero_model(2, (-1, 1)), n_r=64, n_z=32, n_t=32)
    rep = stability_experiment(sp, 1e-3)
    assert rep.bound == 1.0 and rep.growth <= 1.1 and rep.passed


def test_stability_continuous_in_eps(ref_spec):
    sp = ref_spec.replace(n_r=64, n_z=32, n_t=32, T=0.1)
    base, _, _ = picard_solve(sp, 1e-12, 100)
    g1 = stability_experiment(sp, 1e-3, base=base).growth
    g2 = stability_experiment(sp, 5e-4, base=base).growth
    assert abs(g1 - g2) / g1 < 0.05
    with pytest.raises(ValueError):
        stability_experiment(sp, 0.0)


def test_compatibility_override():
    sp = reference_problem(wall0=CosineProfile(((0.9,), (0.45,))), n_r=17, n_z=9, n_t=9)
    d = sp.discretization()
    with pytest.warns(CompatibilityWarning):
        w = sp.wall_values(d)
    assert w[0, 0] == pytest.approx(0.5)          # inlet 0.6 - 0.1 at r = 1
    assert w[0, 1] == pytest.approx(0.9)


def test_problem_validation():
    with pytest.raises(ValueError):
        reference_problem(beta_f=(1.0,))
    with pytest.raises(ValueError):
        reference_problem(gamma_s=(1.0, -1.0))
    with pytest.raises(ValueError):
        reference_problem(theta_Ns=0.0)
    with pytest.raises(ValueError):
        reference_problem(theta_reg=(0.1, 0.1))
    with pytest.raises(ValueError):
        reference_problem(T=0.0)


def test_setup_seed_is_constant_in_time(ref_setup):
    s = ref_setup.seed()
    assert np.all(s == s[:, :, :1])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Setup(reference_problem(n_r=17, n_z=9, n_t=9))
