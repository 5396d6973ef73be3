"""Tests for the open isotropic chain with generic boundary fields."""

from __future__ import annotations

import numpy as np
import pytest

from odba import open_chain as oc
from odba import solver
from odba.errors import DegenerateParameterError, PoleError
from odba.tensor_core import (
    basis_state_all_up,
    common_eigenvectors,
    overlap,
    projective_overlap,
)
from odba.vertex_models import RMatrix, reflection_residual


def _params(n, seed=5):
    return oc.OpenParams(n, oc.DEFAULT_ETA, oc.generic_theta(n, oc.DEFAULT_ETA, seed))


def _rng(salt=0):
    return np.random.default_rng([5000, salt])


def _point(rng):
    return complex(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5))


def _random_roots(rng, n):
    return oc.OpenRootSet(rng.uniform(-1, 1, n) + 1j * rng.uniform(-0.8, 0.8, n))


# ---------------------------------------------------------------------------
# parameters


def test_params_validation():
    with pytest.raises(DegenerateParameterError):
        oc.OpenParams(2, 0.0, (0.1, 0.2))
    with pytest.raises(DegenerateParameterError):
        oc.OpenParams(2, 1.0, (0.1, 0.2), xi=0.0)
    with pytest.raises(ValueError):
        oc.OpenParams(2, 1.0, (0.1,))
    with pytest.raises(DegenerateParameterError):
        oc.OpenParams(2, 1.0, (0.3, 0.3))
    params = oc.homogeneous_params(3)
    assert params.theta == (0.0, 0.0, 0.0)
    assert (params.p, params.q_b, params.xi) == (0.8, 1.2, 0.7)


def test_generic_theta_reproducible():
    t1 = oc.generic_theta(3, 1.0, 4)
    assert np.array_equal(t1, oc.generic_theta(3, 1.0, 4))
    assert oc.genericity_margin(t1, 1.0) >= oc.GENERIC_MARGIN


# ---------------------------------------------------------------------------
# monodromies and the double row


def test_single_row_vacuum_action():
    params = _params(3)
    vac = basis_state_all_up(3)
    for u in (0.3 - 0.2j, -0.6 + 0.4j):
        t = oc.monodromy(params, u)
        assert np.allclose(t[0, 0] @ vac, oc.vacuum_a(params, u) * vac)
        assert np.allclose(t[1, 1] @ vac, oc.vacuum_d(params, u) * vac)
        assert np.allclose(t[1, 0] @ vac, 0.0)


def test_monodromy_hat_crossing_identity():
    # the crossing rearrangement equals the defining reversed product
    rng = _rng(1)
    for n in (2, 3):
        params = _params(n)
        for _ in range(3):
            u = _point(rng)
            lhs = oc.monodromy_hat(params, u)
            rhs = oc.monodromy_hat_direct(params, u)
            assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)) < 1e-12


def test_monodromy_derivatives_match_finite_difference():
    params = _params(2)
    u = 0.31 - 0.17j
    h = 1e-6
    for fn, fn_d in (
        (oc.monodromy, oc.monodromy_with_derivative),
        (oc.monodromy_hat, oc.monodromy_hat_with_derivative),
        (oc.double_row, oc.double_row_with_derivative),
    ):
        val, der = fn_d(params, u)
        assert np.allclose(val, fn(params, u))
        fd = (fn(params, u + h) - fn(params, u - h)) / (2 * h)
        assert np.max(np.abs(der - fd)) < 1e-6


def test_double_row_satisfies_reflection_relation():
    rng = _rng(2)
    params = _params(2)
    r = RMatrix("rational", params.eta)
    for _ in range(3):
        u, v = _point(rng), _point(rng)
        du = oc.double_row(params, u)
        dv = oc.double_row(params, v)
        assert reflection_residual(r, du, dv, u, v) < 1e-12


def test_transfer_trace_forms_agree():
    # transfer() itself cross-checks the ungauged trace against the gauged
    # two-term form and raises on mismatch; exercise it and pin the values
    params = _params(3)
    u = 0.27 + 0.19j
    t = oc.transfer(params, u)
    dr = oc.double_row(params, u)
    kp = params.boundary.k_plus(u)
    manual = (
        kp[0, 0] * dr[0, 0] + kp[0, 1] * dr[1, 0] + kp[1, 0] * dr[0, 1] + kp[1, 1] * dr[1, 1]
    )
    assert np.max(np.abs(t - manual)) / np.max(np.abs(manual)) < 1e-11


def test_transfer_crossing_symmetry():
    params = _params(2)
    rng = _rng(3)
    for _ in range(3):
        u = _point(rng)
        t1 = oc.transfer(params, u)
        t2 = oc.transfer(params, -u - params.eta)
        assert np.max(np.abs(t1 - t2)) / np.max(np.abs(t1)) < 1e-11


def test_transfer_family_commutes():
    params = _params(3)
    rng = _rng(4)
    mats = [oc.transfer(params, _point(rng)) for _ in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            num = np.linalg.norm(mats[i] @ mats[j] - mats[j] @ mats[i])
            den = np.linalg.norm(mats[i]) * np.linalg.norm(mats[j])
            assert num / den < 1e-12


def test_transfer_derivative_matches_finite_difference():
    params = _params(2)
    u = 0.23 - 0.29j
    t, dt = oc.transfer_with_derivative(params, u)
    h = 1e-6
    fd = (oc.transfer(params, u + h) - oc.transfer(params, u - h)) / (2 * h)
    assert np.max(np.abs(dt - fd)) < 1e-6


def test_hamiltonian_matches_transfer_derivative():
    for n in (2, 3):
        h_direct = oc.hamiltonian(n)
        h_transfer = oc.hamiltonian_from_transfer(n)
        assert np.linalg.norm(h_direct - h_transfer) / np.linalg.norm(h_direct) < 1e-10
    with pytest.raises(ValueError):
        oc.hamiltonian(1)
    with pytest.raises(DegenerateParameterError):
        oc.hamiltonian(2, p=0.0)


# ---------------------------------------------------------------------------
# gauged states and the separated basis


def test_local_states_biorthogonal():
    params = _params(2)
    for a in (1, 2):
        for b in (1, 2):
            val = oc.dual_local_state(params, a) @ oc.local_state(params, b)
            assert val == pytest.approx(1.0 if a == b else 0.0, abs=1e-14)
    with pytest.raises(ValueError):
        oc.local_state(params, 3)


def test_vacuum_product_overlap():
    params = _params(3)
    direct = overlap(basis_state_all_up(3), oc.product_state(params))
    assert direct == pytest.approx(oc.vacuum_product_overlap(params))


def test_sov_states_diagonalize_gauged_c():
    params = _params(2)
    basis = oc.sov_basis(params)
    u = 0.33 - 0.27j
    cbar = oc.double_row(params, u, gauged=True)[1, 0]
    for subset, vec in basis.right.items():
        lam = oc.h_eigenvalue(params, u, subset)
        assert np.linalg.norm(cbar @ vec - lam * vec) / np.linalg.norm(vec) < 1e-10
    for subset, vec in basis.left.items():
        lam = oc.h_prime_eigenvalue(params, u, subset)
        assert np.linalg.norm(vec @ cbar - lam * vec) / np.linalg.norm(vec) < 1e-10


def test_sov_pairing_pattern_and_gram():
    params = _params(3)
    basis = oc.sov_basis(params)
    everyone = tuple(range(1, 4))
    for sl in basis.left:
        for sr in basis.right:
            val = overlap(basis.left[sl], basis.right[sr])
            comp = tuple(j for j in everyone if j not in sr)
            if sl == comp:
                ref = basis.gram[sr]
                assert abs(val - ref) / abs(ref) < 1e-9
            else:
                scale = np.linalg.norm(basis.left[sl]) * np.linalg.norm(basis.right[sr])
                assert abs(val) / scale < 1e-10


# ---------------------------------------------------------------------------
# T-Q expression and Bethe equations


def test_q_function_form():
    lam = 0.4 - 0.2j
    eta = 1.0
    assert oc.q_function((), 0.3, eta) == 1.0
    assert oc.q_function((lam,), 0.5, eta) == pytest.approx(
        (0.5 - lam) * (0.5 + lam + eta)
    )
    # invariance of Q under lam -> -lam - eta
    assert oc.q_function((-lam - eta,), 0.5, eta) == pytest.approx(
        oc.q_function((lam,), 0.5, eta)
    )


def test_tq_crossing_symmetric_off_shell():
    rng = _rng(5)
    for n in (2, 3):
        params = _params(n)
        roots = _random_roots(rng, n)
        for _ in range(3):
            u = _point(rng)
            v1 = oc.tq_eigenvalue(params, roots, u)
            v2 = oc.tq_eigenvalue(params, roots, -u - params.eta)
            assert abs(v1 - v2) / max(abs(v1), 1e-30) < 1e-10


def test_tq_pole_guards():
    params = _params(2)
    roots = oc.OpenRootSet([0.4 + 0.2j, -0.7 - 0.1j])
    with pytest.raises(PoleError):
        oc.tq_eigenvalue(params, roots, -params.eta / 2)
    with pytest.raises(PoleError):
        oc.tq_eigenvalue(params, roots, 0.4 + 0.2j)
    with pytest.raises(ValueError):
        oc.tq_eigenvalue(params, oc.OpenRootSet([0.1]), 0.5)


def test_tq_with_derivative_matches_finite_difference():
    rng = _rng(6)
    params = _params(3)
    roots = _random_roots(rng, 3)
    for _ in range(4):
        u = _point(rng)
        val, der = oc.tq_with_derivative(params, roots, u)
        assert val == pytest.approx(oc.tq_eigenvalue(params, roots, u))
        h = 1e-6
        fd = (
            oc.tq_eigenvalue(params, roots, u + h) - oc.tq_eigenvalue(params, roots, u - h)
        ) / (2 * h)
        assert abs(der - fd) / max(abs(der), 1.0) < 1e-6


def test_energy_from_roots_formula():
    rng = _rng(7)
    params = _params(2)
    roots = _random_roots(rng, 2)
    val, der = oc.tq_with_derivative(params, roots, 0.0)
    assert oc.energy_from_roots(params, roots) == pytest.approx(
        params.eta * der / val - 2.0
    )


def test_bae_residual_normalization():
    rng = _rng(8)
    params = _params(2)
    roots = _random_roots(rng, 2)
    res = oc.bae_residuals(params, roots)
    for k, terms in enumerate(oc.bae_terms(params, roots)):
        assert res[k] == pytest.approx(abs(sum(terms)) / max(abs(t) for t in terms))


def test_degeneracy_measure_strata():
    params = _params(2)
    rng = _rng(9)
    assert oc.degeneracy_measure(params, _random_roots(rng, 2)) > 1e-3
    eta = params.eta
    # the reflection fixed point makes its own equation vacuous
    fixed = oc.OpenRootSet([-eta / 2, 0.4 + 0.3j])
    assert oc.degeneracy_measure(params, fixed) < 1e-12
    # mirrored pairs repeat an equation up to sign
    mirror = oc.OpenRootSet([0.3 + 0.2j, -0.3 - 0.2j - eta])
    assert oc.degeneracy_measure(params, mirror) < 1e-12
    # coincident roots
    twin = oc.OpenRootSet([0.3 + 0.2j, 0.3 + 0.2j])
    assert oc.degeneracy_measure(params, twin) < 1e-12
    # roots on a vacuum-scalar zero
    at_theta = oc.OpenRootSet([params.theta[0], 0.5 - 0.4j])
    assert oc.degeneracy_measure(params, at_theta) < 1e-12


# ---------------------------------------------------------------------------
# operator-identity suites at random spectral points


def test_exchange_relations():
    rng = _rng(10)
    for n in (2, 3):
        params = _params(n)
        residuals = oc.exchange_relation_residuals(params, _point(rng), _point(rng))
        assert set(residuals) == {"ca", "dc", "aa", "dd", "da"}
        assert max(residuals.values()) < 1e-12


def test_gauged_combinations():
    rng = _rng(11)
    params = _params(2)
    residuals = oc.gauged_combination_residuals(params, _point(rng))
    assert set(residuals) == {"a", "c", "d"}
    assert max(residuals.values()) < 1e-12


def test_vacuum_actions():
    rng = _rng(12)
    for n in (2, 3):
        params = _params(n)
        residuals = oc.vacuum_action_residuals(params, _point(rng))
        assert set(residuals) == {"a", "d", "b", "c"}
        assert max(residuals.values()) < 1e-12


def test_c_action_and_reduction_validation():
    params = _params(2)
    basis = oc.sov_basis(params)
    with pytest.raises(ValueError):
        oc.c_action_pair(params, basis, (1,), 1)
    with pytest.raises(ValueError):
        oc.stepwise_reduction_triple(params, basis, (1, 2), 2)


def test_appendix_b_suite_passes():
    params = _params(2)
    records = oc.appendix_b_actions_check(params, 0.41 - 0.23j)
    assert all(rec["pass"] for rec in records)
    names = [rec["name"] for rec in records]
    assert "exchange-ca" in names and "c-action" in names
    assert "reduction-intermediate" in names and "reduction-closed" in names


# ---------------------------------------------------------------------------
# retrieval round trip at N = 2


@pytest.fixture(scope="module")
def solved_open():
    params = _params(2, seed=21)
    handle = solver.open_handle(params)
    mats = [oc.transfer(params, t) for t in params.theta]
    right = common_eigenvectors(mats)
    left = common_eigenvectors([m.T for m in mats])
    outcomes = []
    for k, (vec, values) in enumerate(right):
        out = solver.solve_spectrum_first(
            handle, values, solver.SolverConfig(seed=300 + k, restarts=500)
        )
        assert out.converged
        outcomes.append((vec, left[k][0], values, out.roots))
    return params, outcomes


def test_solved_roots_satisfy_bae(solved_open):
    params, outcomes = solved_open
    for _vec, _lvec, _values, roots in outcomes:
        assert np.max(oc.bae_residuals(params, roots)) < 1e-9
        assert oc.degeneracy_measure(params, roots) > 1e-6


def test_bethe_states_match_eigenvectors(solved_open):
    params, outcomes = solved_open
    u = 0.29 - 0.31j
    t = oc.transfer(params, u)
    for vec, lvec, _values, roots in outcomes:
        lam = oc.tq_eigenvalue(params, roots, u)
        psi = oc.bethe_state_right(params, roots)
        assert np.linalg.norm(t @ psi - lam * psi) / np.linalg.norm(psi) < 1e-8
        assert projective_overlap(psi, vec) > 1 - 1e-8
        phi = oc.bethe_state_left(params, roots)
        assert np.linalg.norm(phi @ t - lam * phi) / np.linalg.norm(phi) < 1e-8
        assert projective_overlap(phi, lvec) > 1 - 1e-8


def test_component_structure(solved_open):
    params, outcomes = solved_open
    basis = oc.sov_basis(params)
    for _vec, lvec, _values, roots in outcomes:
        lam_at_theta = [oc.tq_eigenvalue(params, roots, t) for t in params.theta]
        records = oc.open_components_check(params, roots, (lvec, lam_at_theta), basis)
        assert [rec["name"] for rec in records] == [
            "vacuum-projection",
            "component-recursion",
            "component-closed-form",
        ]
        assert all(rec["pass"] for rec in records)


def test_recursion_factor_pole_guard():
    params = oc.OpenParams(2, 1.0, (-0.5, 0.4), generic=False)
    with pytest.raises(PoleError):
        oc.recursion_factor(params, 1)
