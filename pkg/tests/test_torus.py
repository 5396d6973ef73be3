"""Tests for the twisted (anti-periodic) XXZ chain module."""

from __future__ import annotations

import numpy as np
import pytest

from odba import solver, torus
from odba.errors import DegenerateParameterError, PoleError
from odba.tensor_core import basis_state_all_up, common_eigenvectors, overlap

ETA = torus.DEFAULT_ETA


def _params(n, seed=5):
    return torus.TorusParams(n, ETA, torus.generic_theta(n, ETA, seed))


def _rng(salt=0):
    return np.random.default_rng([4000, salt])


def _m0_roots(rng, n):
    lam = rng.uniform(-1, 1, n) + 1j * rng.uniform(-0.8, 0.8, n)
    return torus.TorusRootSet(torus.VARIANT_M0, lam=lam)


def _split_roots(rng, n):
    m = n // 2
    mu = rng.uniform(-1, 1, m) + 1j * rng.uniform(-0.8, 0.8, m)
    nu = rng.uniform(-1, 1, m) + 1j * rng.uniform(-0.8, 0.8, m)
    return torus.TorusRootSet(torus.VARIANT_SPLIT, mu=mu, nu=nu)


# ---------------------------------------------------------------------------
# parameters and sampling


def test_params_validation():
    with pytest.raises(ValueError):
        torus.TorusParams(0, ETA, ())
    with pytest.raises(ValueError):
        torus.TorusParams(2, ETA, (0.1,))
    with pytest.raises(DegenerateParameterError):
        torus.TorusParams(2, 0.0, (0.1, 0.2))
    # coincident inhomogeneities are rejected when flagged generic
    with pytest.raises(DegenerateParameterError):
        torus.TorusParams(2, ETA, (0.3, 0.3))
    torus.TorusParams(2, ETA, (0.3, 0.3), generic=False)


def test_generic_theta_reproducible_and_generic():
    t1 = torus.generic_theta(4, ETA, 9)
    t2 = torus.generic_theta(4, ETA, 9)
    assert np.array_equal(t1, t2)
    assert torus.genericity_margin(t1, ETA) >= torus.GENERIC_MARGIN
    assert not np.array_equal(t1, torus.generic_theta(4, ETA, 10))


def test_homogeneous_params():
    params = torus.homogeneous_params(3, ETA)
    assert params.theta == (0.0, 0.0, 0.0)
    assert params.dim == 8


# ---------------------------------------------------------------------------
# operators


def test_transfer_is_twisted_trace():
    params = _params(2)
    u = 0.37 - 0.21j
    t = torus.monodromy(params, u)
    assert np.allclose(torus.transfer(params, u), t[0, 1] + t[1, 0])


def test_monodromy_vacuum_action():
    params = _params(3)
    vac = basis_state_all_up(3)
    for u in (0.3 - 0.2j, -0.8 + 0.4j):
        t = torus.monodromy(params, u)
        assert np.allclose(t[0, 0] @ vac, torus.vacuum_a(params, u) * vac)
        assert np.allclose(t[1, 1] @ vac, torus.vacuum_d(params, u) * vac)
        assert np.allclose(t[1, 0] @ vac, 0.0)


def test_transfer_family_commutes():
    params = _params(3)
    rng = _rng(1)
    mats = [
        torus.transfer(params, complex(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)))
        for _ in range(3)
    ]
    for i in range(3):
        for j in range(i + 1, 3):
            num = np.linalg.norm(mats[i] @ mats[j] - mats[j] @ mats[i])
            den = np.linalg.norm(mats[i]) * np.linalg.norm(mats[j])
            assert num / den < 1e-13


def test_transfer_derivative_matches_finite_difference():
    params = _params(2)
    u = 0.21 + 0.17j
    t, dt = torus.transfer_with_derivative(params, u)
    assert np.allclose(t, torus.transfer(params, u))
    h = 1e-6
    fd = (torus.transfer(params, u + h) - torus.transfer(params, u - h)) / (2 * h)
    assert np.max(np.abs(dt - fd)) < 1e-7


def test_hamiltonian_matches_transfer_derivative():
    for n in (2, 3):
        h_direct = torus.hamiltonian(n, ETA)
        h_transfer = torus.hamiltonian_from_transfer(n, ETA)
        scale = np.linalg.norm(h_direct)
        assert np.linalg.norm(h_direct - h_transfer) / scale < 1e-10


def test_vacuum_scalars():
    params = _params(3)
    u = 0.4 - 0.3j
    sh = np.sinh(ETA)
    expect_a = np.prod([np.sinh(u - t + ETA) / sh for t in params.theta])
    assert torus.vacuum_a(params, u) == pytest.approx(expect_a)
    # vacuum_d vanishes at every inhomogeneity point
    for t in params.theta:
        assert abs(torus.vacuum_d(params, t)) < 1e-14
    assert torus.vacuum_d_reduced(params, u, 2) == pytest.approx(
        torus.vacuum_d(params, u) / (np.sinh(u - params.theta[1]) / sh)
    )
    with pytest.raises(IndexError):
        torus.vacuum_d_reduced(params, u, 4)


def test_q_function():
    assert torus.q_function((), 0.3, ETA) == 1.0
    lam = 0.2 - 0.4j
    assert torus.q_function((lam,), 0.5, ETA) == pytest.approx(
        np.sinh(0.5 - lam) / np.sinh(ETA)
    )


# ---------------------------------------------------------------------------
# root sets and the T-Q expression


def test_root_set_validation():
    with pytest.raises(ValueError):
        torus.TorusRootSet("M1", lam=np.zeros(2))
    with pytest.raises(ValueError):
        torus.TorusRootSet(torus.VARIANT_M0)
    with pytest.raises(ValueError):
        torus.TorusRootSet(torus.VARIANT_SPLIT, mu=np.zeros(2), nu=np.zeros(1))
    roots = torus.TorusRootSet(torus.VARIANT_SPLIT, mu=[0.1], nu=[0.2j])
    assert np.array_equal(roots.all_roots(), [0.1, 0.2j])
    moved = roots.replaced(np.array([1.0, 2.0j]))
    assert moved.mu[0] == 1.0 and moved.nu[0] == 2.0j


def test_tq_pole_guard():
    params = _params(2)
    roots = torus.TorusRootSet(torus.VARIANT_M0, lam=[0.3 + 0.1j, -0.5])
    with pytest.raises(PoleError):
        torus.tq_eigenvalue(params, roots, 0.3 + 0.1j)
    with pytest.raises(ValueError):
        torus.tq_eigenvalue(params, torus.TorusRootSet(torus.VARIANT_M0, lam=[0.1]), 0.5)


def test_tq_quasi_periodicity_off_shell():
    # Lambda(u + i pi) = (-1)^(N-1) Lambda(u) holds identically in the
    # root set for both variants, not just on Bethe solutions
    rng = _rng(2)
    for n in (2, 3):
        params = _params(n)
        for roots in (_m0_roots(rng, n), _split_roots(rng, n)):
            for _ in range(3):
                u = complex(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5))
                v1 = torus.tq_eigenvalue(params, roots, u + 1j * np.pi)
                v2 = (-1.0) ** (n - 1) * torus.tq_eigenvalue(params, roots, u)
                assert abs(v1 - v2) / max(abs(v2), 1e-30) < 1e-10


def test_tq_with_derivative_matches_finite_difference():
    rng = _rng(3)
    for n in (2, 3):
        params = _params(n)
        for roots in (_m0_roots(rng, n), _split_roots(rng, n)):
            for _ in range(3):
                u = complex(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5))
                val, der = torus.tq_with_derivative(params, roots, u)
                assert val == pytest.approx(torus.tq_eigenvalue(params, roots, u))
                h = 1e-6
                fd = (
                    torus.tq_eigenvalue(params, roots, u + h)
                    - torus.tq_eigenvalue(params, roots, u - h)
                ) / (2 * h)
                assert abs(der - fd) / max(abs(der), 1.0) < 1e-6


def test_energy_from_roots_formula():
    rng = _rng(4)
    params = _params(3)
    roots = _m0_roots(rng, 3)
    val, der = torus.tq_with_derivative(params, roots, 0.0)
    expect = -2 * np.sinh(ETA) * der / val + 3 * np.cosh(ETA)
    assert torus.energy_from_roots(params, roots) == pytest.approx(expect)


def test_bae_residuals_normalization():
    rng = _rng(5)
    params = _params(2)
    roots = _m0_roots(rng, 2)
    eqs = torus.bae_equations(params, roots)
    res = torus.bae_residuals(params, roots)
    assert eqs.shape == (2,) and res.shape == (2,)
    for k, terms in enumerate(torus.bae_terms(params, roots)):
        assert res[k] == pytest.approx(abs(sum(terms)) / max(abs(t) for t in terms))


def test_degeneracy_measure_strata():
    params = _params(2)
    rng = _rng(6)
    generic = _m0_roots(rng, 2)
    assert torus.degeneracy_measure(params, generic) > 1e-3
    # coincident roots repeat an equation
    twin = torus.TorusRootSet(torus.VARIANT_M0, lam=[0.4 + 0.2j, 0.4 + 0.2j])
    assert torus.degeneracy_measure(params, twin) < 1e-12
    # a root at an inhomogeneity point kills the d-factor of its equation
    at_theta = torus.TorusRootSet(
        torus.VARIANT_M0, lam=[params.theta[0], -0.7 + 0.3j]
    )
    assert torus.degeneracy_measure(params, at_theta) < 1e-12
    # SPLIT: mu and nu conspire when nu = mu + eta
    pair = torus.TorusRootSet(torus.VARIANT_SPLIT, mu=[0.2 + 0.1j], nu=[0.2 + 0.1j + ETA])
    assert torus.degeneracy_measure(params, pair) < 1e-12


# ---------------------------------------------------------------------------
# separated basis


def test_sov_basis_pattern_and_gram():
    params = _params(3)
    basis = torus.sov_basis(params)
    subsets = sorted(basis.right, key=lambda s: (len(s), s))
    assert len(subsets) == 8
    for sl in subsets:
        for sr in subsets:
            val = overlap(basis.left[sl], basis.right[sr])
            if sl == sr:
                ref = basis.gram[sl]
                assert abs(val - ref) / abs(ref) < 1e-10
            else:
                scale = np.linalg.norm(basis.left[sl]) * np.linalg.norm(basis.right[sr])
                assert abs(val) / scale < 1e-10


def test_sov_states_diagonalize_d():
    params = _params(3)
    basis = torus.sov_basis(params)
    u = 0.23 - 0.31j
    d_op = torus.monodromy(params, u)[1, 1]
    for subset, vec in basis.right.items():
        lam = torus.d_eigenvalue(params, u, subset)
        assert np.linalg.norm(d_op @ vec - lam * vec) / np.linalg.norm(vec) < 1e-9
    for subset, vec in basis.left.items():
        lam = torus.d_eigenvalue(params, u, subset)
        assert np.linalg.norm(vec @ d_op - lam * vec) / np.linalg.norm(vec) < 1e-9


# ---------------------------------------------------------------------------
# lowering operator, q-integers, reference state


def test_q_lowering_operator_nilpotent():
    params = _params(3)
    btilde = torus.q_lowering_operator(params)
    power = np.linalg.matrix_power(btilde, 4)
    assert np.max(np.abs(power)) < 1e-12
    assert np.max(np.abs(np.linalg.matrix_power(btilde, 3))) > 1e-12


def test_q_lowering_operator_is_leading_b_coefficient():
    # B(u) e^{-(N-1)u} converges to a multiple of the lowering operator
    params = _params(2)
    btilde = torus.q_lowering_operator(params)
    b_far = torus.monodromy(params, 18.0)[0, 1] * np.exp(-18.0)
    i, j = np.unravel_index(np.argmax(np.abs(btilde)), btilde.shape)
    ratio = b_far[i, j] / btilde[i, j]
    assert np.max(np.abs(b_far - ratio * btilde)) / np.max(np.abs(b_far)) < 1e-10


def test_q_integers():
    q = np.exp(ETA)
    assert torus.q_integer(0, q) == 0.0
    assert torus.q_integer(1, q) == pytest.approx(1.0)
    assert torus.q_integer(2, q) == pytest.approx(1.0 + q**2)
    assert torus.q_factorial(3, q) == pytest.approx(
        torus.q_integer(1, q) * torus.q_integer(2, q) * torus.q_integer(3, q)
    )
    with pytest.raises(DegenerateParameterError):
        torus.q_integer(2, 1.0)


def test_reference_state_pairing_conditions():
    # pairing with the left separated state over subset S factorizes into
    # prod_{l in S} a(theta_l) e^{theta_l}
    params = _params(3)
    basis = torus.sov_basis(params)
    ref = torus.reference_state(params, torus.VARIANT_M0)
    for subset, left in basis.left.items():
        want = np.prod(
            [torus.vacuum_a(params, params.theta[l - 1]) * np.exp(params.theta[l - 1])
             for l in subset]
        ) if subset else 1.0
        got = overlap(left, ref)
        assert abs(got - want) / max(abs(want), 1e-30) < 1e-10


def test_reference_state_split_needs_roots():
    params = _params(2)
    with pytest.raises(ValueError):
        torus.reference_state(params, torus.VARIANT_SPLIT)
    with pytest.raises(ValueError):
        torus.reference_state(params, "M2")


def test_vacuum_pairing_oracle():
    params = _params(3)
    for m in range(4):
        direct, closed = torus.vacuum_pairing_oracle(params, m)
        assert abs(direct - closed) / max(abs(closed), 1e-30) < 1e-10
    direct, closed = torus.vacuum_pairing_oracle(params, 2, subset=(1, 3))
    assert abs(direct - closed) / abs(closed) < 1e-10
    with pytest.raises(ValueError):
        torus.vacuum_pairing_oracle(params, 2, subset=(1,))


def test_q_integer_sum_identity():
    rng = _rng(7)
    theta = rng.uniform(-1, 1, 4) + 1j * rng.uniform(-0.5, 0.5, 4)
    for n in range(1, 5):
        lhs, rhs = torus.q_integer_sum_identity(theta, ETA, n)
        assert abs(lhs - rhs) / abs(rhs) < 1e-10


def test_exponential_fit_residual():
    # an exact combination of the admissible frequencies fits to machine
    def good(u):
        return 2.0 * np.exp(2 * u) - 0.3 + 1.0j * np.exp(-2 * u)

    assert torus.exponential_fit_residual(good, 3, seed=1) < 1e-10

    # a parity-violating frequency cannot be represented
    def bad(u):
        return np.exp(u)

    assert torus.exponential_fit_residual(bad, 3, seed=1) > 1e-3


# ---------------------------------------------------------------------------
# retrieval round trip at N = 2


@pytest.fixture(scope="module")
def solved_m0():
    params = _params(2, seed=13)
    handle = solver.torus_handle(params)
    family = common_eigenvectors([torus.transfer(params, t) for t in params.theta])
    outcomes = []
    for k, (vec, values) in enumerate(family):
        out = solver.solve_spectrum_first(
            handle, values, solver.SolverConfig(seed=100 + k)
        )
        assert out.converged
        outcomes.append((vec, values, out.roots))
    return params, outcomes


def test_solved_roots_satisfy_bae(solved_m0):
    params, outcomes = solved_m0
    for _vec, _values, roots in outcomes:
        assert np.max(torus.bae_residuals(params, roots)) < 1e-9
        assert torus.degeneracy_measure(params, roots) > 1e-6


def test_tq_matches_exact_eigenvalues(solved_m0):
    params, outcomes = solved_m0
    for _vec, values, roots in outcomes:
        for j, t in enumerate(params.theta):
            lam = torus.tq_eigenvalue(params, roots, t)
            assert abs(lam - values[j]) / max(abs(values[j]), 1.0) < 1e-8


def test_bethe_state_reproduces_eigenvector(solved_m0):
    params, outcomes = solved_m0
    from odba.tensor_core import projective_overlap

    for vec, _values, roots in outcomes:
        psi = torus.bethe_state(params, roots)
        u = 0.19 - 0.23j
        lam = torus.tq_eigenvalue(params, roots, u)
        t = torus.transfer(params, u)
        assert np.linalg.norm(t @ psi - lam * psi) / np.linalg.norm(psi) < 1e-8
        assert projective_overlap(psi, vec) > 1 - 1e-8


def test_product_identity_on_shell(solved_m0):
    # Lambda(theta_j) Lambda(theta_j - eta) = -a(theta_j) d(theta_j - eta)
    params, outcomes = solved_m0
    for _vec, _values, roots in outcomes:
        for j, t in enumerate(params.theta, start=1):
            lhs = torus.tq_eigenvalue(params, roots, t) * torus.tq_eigenvalue(
                params, roots, t - ETA
            )
            rhs = -torus.vacuum_a(params, t) * torus.vacuum_d(params, t - ETA)
            assert abs(lhs - rhs) / max(abs(rhs), 1e-30) < 1e-8
