"""Tests for the Bethe-equation solvers and deformation limits."""

from __future__ import annotations

import numpy as np
import pytest

from odba import open_chain, solver, torus
from odba.checks import TRACKER_PROBES
from odba.errors import SolverError
from odba.tensor_core import common_eigenvectors

ETA = torus.DEFAULT_ETA
CONFIG = solver.SolverConfig(seed=17)


def _torus_params(n, seed=13):
    return torus.TorusParams(n, ETA, torus.generic_theta(n, ETA, seed))


def _open_params(n, seed=21):
    return open_chain.OpenParams(n, 1.0, open_chain.generic_theta(n, 1.0, seed))


# ---------------------------------------------------------------------------
# newton iteration


def test_newton_solves_square_system():
    def f(z):
        return np.array([z[0] ** 2 - 4.0, z[0] * z[1] - 2.0j])

    x, res, its = solver.newton_complex(f, np.array([1.5 + 0.1j, 0.5j]), CONFIG)
    assert res < 1e-11
    assert its < 30
    assert x[0] == pytest.approx(2.0)
    assert x[1] == pytest.approx(1.0j)


def test_newton_never_raises_on_bad_systems():
    # singular Jacobian at the start: stops improving, returns best seen
    def flat(z):
        return np.array([z[0] ** 2])

    x, res, _ = solver.newton_complex(flat, np.array([0.0 + 0.0j]), CONFIG, max_iter=5)
    assert np.isfinite(res)

    # residual not finite: returns the best finite iterate
    def explodes(z):
        with np.errstate(over="ignore"):
            return np.array([np.exp(40 * z[0] ** 2)])

    x, res, _ = solver.newton_complex(explodes, np.array([9.0 + 0.0j]), CONFIG, max_iter=5)
    assert np.all(np.isfinite(x))


# ---------------------------------------------------------------------------
# canonicalization


def test_canonical_open_vector():
    eta = 1.0
    lam = np.array([0.4 + 0.2j, -1.3 - 0.7j])
    swapped = np.array([-lam[1] - eta, -lam[0] - eta])
    c1 = solver.canonical_open_vector(lam, eta)
    c2 = solver.canonical_open_vector(swapped, eta)
    assert np.allclose(c1, c2)
    # idempotent and sorted
    assert np.allclose(c1, solver.canonical_open_vector(c1, eta))
    keys = [(z.real, z.imag) for z in c1]
    assert keys == sorted(keys)
    # each entry is the lexicographically smaller member of its pair
    for z in c1:
        w = -z - eta
        assert (z.real, z.imag) <= (w.real, w.imag)


def test_canonical_torus_vector_periods():
    vec = np.array([0.3 + 0.2j, -0.5 - 0.1j])
    # the single-family expression quotients by i*pi
    shifted = vec + np.array([1j * np.pi, 0.0])
    assert np.allclose(
        solver.canonical_torus_vector(vec), solver.canonical_torus_vector(shifted)
    )
    # the two-family form only allows i*2pi, so an i*pi shift stays distinct
    assert not np.allclose(
        solver.canonical_torus_vector(vec, split_at=1, period=2 * np.pi),
        solver.canonical_torus_vector(shifted, split_at=1, period=2 * np.pi),
    )
    assert np.allclose(
        solver.canonical_torus_vector(vec, split_at=1, period=2 * np.pi),
        solver.canonical_torus_vector(vec + 2j * np.pi, split_at=1, period=2 * np.pi),
    )
    # SPLIT families sort independently, never across the split
    two = np.array([0.9, -0.9 + 0.0j])
    kept = solver.canonical_torus_vector(two, split_at=1, period=2 * np.pi)
    assert np.allclose(kept, two)


def test_tq_invariance_under_canonical_moves():
    # the claimed quotients leave the T-Q expression invariant
    rng = np.random.default_rng(42)
    params = _torus_params(2)
    u = 0.37 - 0.22j
    lam = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-0.8, 0.8, 2)
    m0 = torus.TorusRootSet(torus.VARIANT_M0, lam=lam)
    m0_shift = torus.TorusRootSet(torus.VARIANT_M0, lam=lam + np.array([1j * np.pi, 0]))
    v1 = torus.tq_eigenvalue(params, m0, u)
    v2 = torus.tq_eigenvalue(params, m0_shift, u)
    assert abs(v1 - v2) / abs(v1) < 1e-12

    sp = torus.TorusRootSet(torus.VARIANT_SPLIT, mu=[lam[0]], nu=[lam[1]])
    sp_pi = torus.TorusRootSet(
        torus.VARIANT_SPLIT, mu=[lam[0] + 1j * np.pi], nu=[lam[1]]
    )
    sp_2pi = torus.TorusRootSet(
        torus.VARIANT_SPLIT, mu=[lam[0] + 2j * np.pi], nu=[lam[1]]
    )
    w0 = torus.tq_eigenvalue(params, sp, u)
    # an i*pi shift of a single SPLIT root flips the eigenvalue sign
    assert abs(torus.tq_eigenvalue(params, sp_pi, u) + w0) / abs(w0) < 1e-12
    assert abs(torus.tq_eigenvalue(params, sp_2pi, u) - w0) / abs(w0) < 1e-12

    op = _open_params(2)
    roots = open_chain.OpenRootSet(lam)
    flipped = open_chain.OpenRootSet(np.array([-lam[0] - op.eta, lam[1]]))
    o1 = open_chain.tq_eigenvalue(op, roots, u)
    o2 = open_chain.tq_eigenvalue(op, flipped, u)
    assert abs(o1 - o2) / abs(o1) < 1e-12


# ---------------------------------------------------------------------------
# spectrum-first and direct solving


def _eigen_targets(params):
    mats = [torus.transfer(params, t) for t in params.theta]
    return common_eigenvectors(mats)


def test_solve_spectrum_first_deterministic():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    targets = _eigen_targets(params)[0][1]
    out1 = solver.solve_spectrum_first(handle, targets, CONFIG)
    out2 = solver.solve_spectrum_first(handle, targets, CONFIG)
    assert out1.converged and out2.converged
    assert np.array_equal(out1.roots.vector(), out2.roots.vector())
    assert out1.trials == out2.trials


def test_solve_spectrum_first_hits_target_eigenvalues():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    for _vec, values, in _eigen_targets(params):
        out = solver.solve_spectrum_first(handle, values, CONFIG)
        assert out.converged
        assert out.residual < 1e-9
        for t, want in zip(params.theta, values):
            got = torus.tq_eigenvalue(params, out.roots, t)
            assert abs(got - want) / max(abs(want), 1.0) < 1e-6


def test_solve_spectrum_first_reports_failure():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    targets = _eigen_targets(params)[0][1]
    out = solver.solve_spectrum_first(
        handle, targets, solver.SolverConfig(seed=17, restarts=0)
    )
    assert not out.converged
    assert out.roots is None


def test_direct_multistart_recovers_full_spectrum():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    found = solver.solve_direct_multistart(
        handle, solver.SolverConfig(seed=5, restarts=120)
    )
    assert len(found) >= 4
    # each ED eigenvalue tuple is reproduced by some found root set
    family = _eigen_targets(params)
    for _vec, values in family:
        best = min(
            max(
                abs(torus.tq_eigenvalue(params, roots, t) - v)
                for t, v in zip(params.theta, values)
            )
            for roots in found
        )
        assert best < 1e-6
    # root sets are distinct after canonicalization
    vecs = [r.vector() for r in found]
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            assert np.max(np.abs(vecs[i] - vecs[j])) > 1e-6


# ---------------------------------------------------------------------------
# continuation, tracking, extrapolation


def _scaled_torus_handle(params):
    def handle_at(s):
        scaled = torus.TorusParams(
            params.n_sites,
            params.eta,
            tuple(s * t for t in params.theta),
            generic=False,
        )
        return solver.torus_handle(scaled)

    return handle_at


def test_continue_roots_tracks_branch():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    out = solver.solve_spectrum_first(handle, _eigen_targets(params)[0][1], CONFIG)
    handle_at = _scaled_torus_handle(params)
    traj = solver.continue_roots(handle_at, out.roots.vector(), 1.0, 0.4, CONFIG)
    s_end, vec_end, res_end = traj[-1]
    assert s_end == pytest.approx(0.4)
    assert res_end < 1e-9
    assert np.max(np.abs(handle_at(0.4).bae_system(vec_end))) < 1e-9
    with pytest.raises(ValueError):
        solver.continue_roots(handle_at, out.roots.vector(), 0.4, 1.0, CONFIG)


def test_eigenvalue_tracker_pins_branch():
    params = _torus_params(2)
    handle = solver.torus_handle(params)
    family = _eigen_targets(params)
    outs = [solver.solve_spectrum_first(handle, values, CONFIG) for _v, values in family]
    handle_at = _scaled_torus_handle(params)

    lam0 = [torus.tq_eigenvalue(params, outs[0].roots, w) for w in TRACKER_PROBES]
    tracker = solver.EigenvalueTracker(handle_at, TRACKER_PROBES, lam0)
    # the matching root vector passes at s = 1, a different state's fails
    assert tracker(1.0, outs[0].roots.vector())
    assert not tracker(1.0, outs[1].roots.vector())
    with pytest.raises(ValueError):
        solver.EigenvalueTracker(handle_at, TRACKER_PROBES, lam0[:1])


def test_richardson_limit():
    def f(h):
        return 2.5 - 0.3j + 1.1 * h - 0.7 * h**2 + 0.2 * h**3

    samples = [f(0.4 / 2**k) for k in range(4)]
    assert solver.richardson_limit(samples) == pytest.approx(2.5 - 0.3j, abs=1e-12)
    # elementwise on arrays
    arr = solver.richardson_limit([np.array([f(0.4), 1.0]), np.array([f(0.2), 1.0])])
    assert arr.shape == (2,)
    assert arr[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        solver.richardson_limit([])


def test_deformation_limit_reaches_homogeneous_energy():
    params = _open_params(2)
    handle = solver.open_handle(params)
    mats = [open_chain.transfer(params, t) for t in params.theta]
    vec, values = common_eigenvectors(mats)[0]
    out = solver.solve_spectrum_first(handle, values, solver.SolverConfig(seed=9, restarts=500))
    assert out.converged

    def handle_at(s):
        scaled = open_chain.OpenParams(
            params.n_sites,
            params.eta,
            tuple(s * t for t in params.theta),
            params.p,
            params.q_b,
            params.xi,
            generic=False,
        )
        return solver.open_handle(scaled)

    lam0 = [open_chain.tq_eigenvalue(params, out.roots, w) for w in TRACKER_PROBES]
    tracker = solver.EigenvalueTracker(handle_at, TRACKER_PROBES, lam0)

    def energy(handle, vec):
        return open_chain.energy_from_roots(handle.params, handle.make_roots(vec))

    value, how = solver.deformation_limit(handle_at, out.roots.vector(), energy, CONFIG,
                                          tracker=tracker)
    spectrum = np.linalg.eigvals(open_chain.hamiltonian(2))
    assert min(abs(spectrum - value)) < 1e-8
    assert how in ("exact", "extrapolated")


def test_deformation_limit_needs_reachable_branch():
    # a root vector that does not solve the equations anywhere stalls out
    params = _torus_params(2)
    handle_at = _scaled_torus_handle(params)

    def energy(handle, vec):
        return torus.energy_from_roots(handle.params, handle.make_roots(vec))

    bogus = np.array([5.0 + 5.0j, -5.0 - 5.0j])
    with pytest.raises(SolverError):
        solver.deformation_limit(handle_at, bogus, energy, solver.SolverConfig(seed=3))
