"""Root solvers for the Bethe-equation systems of both lattice models.

Two complementary strategies are provided on top of a damped Newton
iteration with finite-difference Jacobians:

* spectrum-first retrieval: fit a root set to transfer-matrix eigenvalues
  sampled at the inhomogeneity points, where all but one line of the T-Q
  expression vanishes, so each sample pins one polynomial equation in the
  roots.  Converged fits are then polished directly on the (normalized)
  Bethe equations, whose residual is the quantity certified downstream.
* direct multistart: solve the Bethe equations from many random starts,
  canonicalize and deduplicate the converged sets.  This needs no spectral
  input and keeps working at the homogeneous point, where the sample
  points of the spectrum-first fit would coincide.

Degenerate "solutions" sitting on the strata where every additive
Bethe-equation term vanishes identically are rejected through the model
modules' degeneracy measures.  A geometric continuation tracker and a
Richardson table cover the deformation limits (e.g. the homogeneous
point) that some root sets only reach asymptotically.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import open_chain, torus
from .errors import PoleError, SolverError


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by all solves.

    `tol` is the Newton convergence target on the max-norm of the
    normalized equations; `accept_tol` is the acceptance threshold on the
    final Bethe-equation residual (after polishing, for spectrum-first
    solves).  `degeneracy_floor` rejects root sets too close to the
    spurious all-terms-vanish strata.  Everything is driven by `seed`, so
    repeated runs are bit-for-bit reproducible.
    """

    max_iter: int = 120
    tol: float = 1e-11
    polish_iter: int = 40
    restarts: int = 200
    seed: int = 0
    step_cap: float = 2.0
    fd_step: float = 1e-7
    degeneracy_floor: float = 1e-6
    accept_tol: float = 1e-9
    dedupe_tol: float = 1e-6
    divergence_cap: float = 1e6


@dataclass
class SolveOutcome:
    """Result of a spectrum-first solve.  `roots` is None when no
    acceptable root set was found within the restart budget; `residual`
    is then the best (lowest) Bethe residual among rejected candidates."""

    roots: object | None
    residual: float
    trials: int
    converged: bool


def newton_complex(
    func: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    config: SolverConfig,
    max_iter: int | None = None,
    tol: float | None = None,
) -> tuple[np.ndarray, float, int]:
    """Damped Newton iteration for a square analytic system.

    The Jacobian is built from central differences along the real axis,
    which equals the complex derivative for analytic equations.  Returns
    the best iterate seen, its max-norm residual, and the number of
    iterations performed; it never raises on singular Jacobians,
    divergence, or iterates escaping the equations' domain (overflow
    guards raising ValueError), it just stops improving.
    """
    max_iter = config.max_iter if max_iter is None else max_iter
    tol = config.tol if tol is None else tol

    def evaluate(z):
        try:
            return np.asarray(func(z), dtype=complex)
        except ValueError:
            return np.full(len(z), np.inf, dtype=complex)

    x = np.asarray(x0, dtype=complex).copy()
    n = len(x)
    best = x.copy()
    best_res = np.inf
    for it in range(max_iter):
        f = evaluate(x)
        res = float(np.max(np.abs(f)))
        if not np.isfinite(res):
            return best, best_res, it
        if res < best_res:
            best, best_res = x.copy(), res
        if res < tol:
            return best, best_res, it
        jac = np.empty((n, n), dtype=complex)
        for k in range(n):
            h = config.fd_step * max(1.0, abs(x[k]))
            xp = x.copy()
            xm = x.copy()
            xp[k] += h
            xm[k] -= h
            jac[:, k] = (evaluate(xp) - evaluate(xm)) / (2 * h)
        if not np.all(np.isfinite(jac)):
            return best, best_res, it
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            return best, best_res, it
        if not np.all(np.isfinite(step)):
            return best, best_res, it
        cap = float(np.max(np.abs(step)))
        if cap > config.step_cap:
            step *= config.step_cap / cap
        x = x - step
        if np.max(np.abs(x)) > config.divergence_cap:
            return best, best_res, it
    f = evaluate(x)
    res = float(np.max(np.abs(f)))
    if np.isfinite(res) and res < best_res:
        best, best_res = x, res
    return best, best_res, max_iter


# ---------------------------------------------------------------------------
# model handles: a uniform functional interface over the two lattice models


@dataclass(frozen=True)
class ModelHandle:
    """Bundle of closures exposing one model/variant to the solvers.

    `bae_system` maps a root vector to the normalized Bethe equations,
    `interpolation_system(targets)` builds the spectrum-first system from
    transfer eigenvalues sampled at the inhomogeneity points,
    `canonical` maps a root vector to its canonical representative,
    `start_box = (re, im)` bounds the random Newton starts, and
    `transfer(u)` returns the dense transfer matrix (the oracle side).
    """

    params: object
    n_unknowns: int
    start_box: tuple[float, float]
    make_roots: Callable
    bae_system: Callable
    interpolation_system: Callable
    degeneracy: Callable
    tq: Callable
    canonical: Callable
    transfer: Callable


def _normalized(terms) -> complex:
    scale = max(max(abs(t) for t in terms), 1e-300)
    return sum(terms) / scale


def canonical_open_vector(vec: np.ndarray, eta: complex) -> np.ndarray:
    """Canonical representative of an open-chain root vector: each root is
    replaced by the lexicographically smaller of {lam, -lam - eta} (the
    Q-function is blind to the swap), then the vector is sorted."""
    reps = []
    for x in np.asarray(vec, dtype=complex):
        y = -x - eta
        reps.append(x if (x.real, x.imag) <= (y.real, y.imag) else y)
    reps.sort(key=lambda z: (z.real, z.imag))
    return np.array(reps, dtype=complex)


def canonical_torus_vector(
    vec: np.ndarray, split_at: int | None = None, period: float = np.pi
) -> np.ndarray:
    """Canonical representative of a torus root vector: imaginary parts are
    reduced modulo i*period, then each family is sorted.  The single-family
    T-Q expression is invariant under root shifts by i*pi (the sign flips
    of the Q-factors and of the extra line's coefficient cancel), so its
    period is pi; in the two-family form an i*pi shift of a single root
    flips the sign of the eigenvalue while leaving the Bethe equations
    alone, so only i*2pi shifts may be quotiented there.  For SPLIT
    vectors pass `split_at` = len(mu) so the two families sort separately."""
    v = np.asarray(vec, dtype=complex)
    v = v - 1j * period * np.round(v.imag / period)
    def _sorted(block):
        return sorted(block, key=lambda z: (z.real, z.imag))
    if split_at is None:
        return np.array(_sorted(v), dtype=complex)
    return np.array(_sorted(v[:split_at]) + _sorted(v[split_at:]), dtype=complex)


def open_handle(params: open_chain.OpenParams) -> ModelHandle:
    """Solver-facing view of the open chain with the given parameters."""
    eta, p, q_b = params.eta, params.p, params.q_b
    s = params.sqrt_branch
    sign = (-1.0) ** params.n_sites

    def make_roots(vec):
        return open_chain.OpenRootSet(vec)

    def bae_system(vec):
        rs = open_chain.OpenRootSet(vec)
        return np.array(
            [_normalized(t) for t in open_chain.bae_terms(params, rs)], dtype=complex
        )

    def interpolation_system(targets):
        targets = np.asarray(targets, dtype=complex)
        if len(targets) != params.n_sites:
            raise ValueError("need one eigenvalue sample per inhomogeneity")
        front = [
            sign
            * (2 * t + 2 * eta)
            * (t + p)
            * (s * t + q_b)
            * open_chain.vacuum_a(params, t)
            * open_chain.vacuum_d(params, -t - eta)
            for t in params.theta
        ]

        def eqs(vec):
            out = np.empty(params.n_sites, dtype=complex)
            for j, t in enumerate(params.theta):
                t1 = front[j] * open_chain.q_function(vec, t - eta, eta)
                t2 = (2 * t + eta) * targets[j] * open_chain.q_function(vec, t, eta)
                out[j] = (t1 - t2) / max(abs(t1), abs(t2), 1e-300)
            return out

        return eqs

    def degeneracy(vec):
        return open_chain.degeneracy_measure(params, open_chain.OpenRootSet(vec))

    def tq(roots, u):
        return open_chain.tq_eigenvalue(params, roots, u)

    return ModelHandle(
        params=params,
        n_unknowns=params.n_sites,
        start_box=(3.0, 6.0),
        make_roots=make_roots,
        bae_system=bae_system,
        interpolation_system=interpolation_system,
        degeneracy=degeneracy,
        tq=tq,
        canonical=lambda vec: canonical_open_vector(vec, eta),
        transfer=lambda u: open_chain.transfer(params, u),
    )


def torus_handle(params: torus.TorusParams, variant: str = torus.VARIANT_M0) -> ModelHandle:
    """Solver-facing view of the twisted torus in the chosen T-Q variant."""
    eta = params.eta
    n = params.n_sites
    m = n // 2

    if variant == torus.VARIANT_M0:
        n_unknowns = n
        start_box = (2.0, 1.6)

        def make_roots(vec):
            return torus.TorusRootSet(torus.VARIANT_M0, lam=vec)

        canonical = lambda vec: canonical_torus_vector(vec)
    elif variant == torus.VARIANT_SPLIT:
        n_unknowns = 2 * m
        start_box = (2.0, 3.3)

        def make_roots(vec):
            return torus.TorusRootSet(torus.VARIANT_SPLIT, mu=vec[:m], nu=vec[m:])

        canonical = lambda vec: canonical_torus_vector(
            vec, split_at=m, period=2 * np.pi
        )
    else:
        raise ValueError(f"unknown variant {variant!r}")

    def bae_system(vec):
        rs = make_roots(vec)
        return np.array(
            [_normalized(t) for t in torus.bae_terms(params, rs)], dtype=complex
        )

    def interpolation_system(targets):
        targets = np.asarray(targets, dtype=complex)
        if len(targets) != n:
            raise ValueError("need one eigenvalue sample per inhomogeneity")
        if variant == torus.VARIANT_SPLIT and n_unknowns != n:
            raise ValueError(
                "SPLIT spectrum-first fit needs an even chain (square system)"
            )
        front = [
            np.exp(t) * torus.vacuum_a(params, t) for t in params.theta
        ]

        def eqs(vec):
            out = np.empty(n, dtype=complex)
            for j, t in enumerate(params.theta):
                if variant == torus.VARIANT_M0:
                    t1 = front[j] * torus.q_function(vec, t - eta, eta)
                    t2 = targets[j] * torus.q_function(vec, t, eta)
                else:
                    t1 = front[j] * torus.q_function(vec[:m], t - eta, eta)
                    t2 = targets[j] * torus.q_function(vec[m:], t, eta)
                out[j] = (t1 - t2) / max(abs(t1), abs(t2), 1e-300)
            return out

        return eqs

    def degeneracy(vec):
        return torus.degeneracy_measure(params, make_roots(vec))

    def tq(roots, u):
        return torus.tq_eigenvalue(params, roots, u)

    return ModelHandle(
        params=params,
        n_unknowns=n_unknowns,
        start_box=start_box,
        make_roots=make_roots,
        bae_system=bae_system,
        interpolation_system=interpolation_system,
        degeneracy=degeneracy,
        tq=tq,
        canonical=canonical,
        transfer=lambda u: torus.transfer(params, u),
    )


# ---------------------------------------------------------------------------
# the two solve strategies


def _random_start(rng, handle: ModelHandle) -> np.ndarray:
    box_re, box_im = handle.start_box
    return rng.uniform(-box_re, box_re, handle.n_unknowns) + 1j * rng.uniform(
        -box_im, box_im, handle.n_unknowns
    )


def _accepted_roots(handle: ModelHandle, vec: np.ndarray, config: SolverConfig):
    """Canonicalize, re-measure and gate a candidate root vector.  Returns
    (roots, residual) on acceptance, (None, residual) otherwise."""
    vec = handle.canonical(vec)
    residual = float(np.max(np.abs(handle.bae_system(vec))))
    if handle.degeneracy(vec) < config.degeneracy_floor:
        return None, residual
    if residual > config.accept_tol:
        return None, residual
    roots = handle.make_roots(vec)
    roots.residual = residual
    return roots, residual


def solve_spectrum_first(
    handle: ModelHandle, targets, config: SolverConfig = SolverConfig()
) -> SolveOutcome:
    """Retrieve the root set of one transfer eigenstate from its eigenvalues
    at the inhomogeneity points.

    Random Newton starts are fitted to the interpolation system; converged
    fits are polished on the Bethe equations themselves (the interpolation
    fit can sit orders of magnitude above the Bethe residual floor when
    the sampled eigenvalues span many scales) and accepted once the
    polished residual clears `accept_tol` away from the degenerate strata.
    Since polishing can slide onto a different eigenstate's root set (the
    Bethe equations know nothing of the targets), accepted sets must also
    still reproduce the target eigenvalues at the inhomogeneity points.
    """
    rng = np.random.default_rng(config.seed)
    targets = np.asarray(targets, dtype=complex)
    interp = handle.interpolation_system(targets)
    best_rejected = np.inf
    for trial in range(1, config.restarts + 1):
        x0 = _random_start(rng, handle)
        x, res, _ = newton_complex(interp, x0, config)
        if res >= config.tol:
            continue
        x, _, _ = newton_complex(
            handle.bae_system, x, config, max_iter=config.polish_iter,
            tol=min(config.tol, 1e-12),
        )
        roots, residual = _accepted_roots(handle, x, config)
        if roots is None:
            best_rejected = min(best_rejected, residual)
            continue
        if np.max(np.abs(interp(roots.vector()))) > 1e-6:
            continue
        return SolveOutcome(roots, residual, trial, True)
    return SolveOutcome(None, best_rejected, config.restarts, False)


def solve_direct_multistart(
    handle: ModelHandle,
    config: SolverConfig = SolverConfig(),
    max_sets: int | None = None,
) -> list:
    """Collect distinct Bethe root sets by Newton iteration from random
    starts, without spectral input.  Returns canonicalized root sets,
    deduplicated at `dedupe_tol` in the max-norm, in discovery order."""
    rng = np.random.default_rng(config.seed)
    found_vecs: list[np.ndarray] = []
    found_roots = []
    for _ in range(config.restarts):
        x0 = _random_start(rng, handle)
        x, res, _ = newton_complex(
            handle.bae_system, x0, config, tol=min(config.tol, 1e-12)
        )
        if res > config.accept_tol:
            continue
        roots, _ = _accepted_roots(handle, x, config)
        if roots is None:
            continue
        vec = roots.vector()
        if any(np.max(np.abs(vec - v)) < config.dedupe_tol for v in found_vecs):
            continue
        found_vecs.append(vec)
        found_roots.append(roots)
        if max_sets is not None and len(found_roots) >= max_sets:
            break
    return found_roots


# ---------------------------------------------------------------------------
# deformation limits


def continue_roots(
    handle_at: Callable[[float], ModelHandle],
    vec: np.ndarray,
    s_start: float,
    s_end: float,
    config: SolverConfig = SolverConfig(),
    drift_scale: float = 5.0,
    min_step: float = 1e-4,
    verify: Callable[[float, np.ndarray], bool] | None = None,
) -> list[tuple[float, np.ndarray, float]]:
    """Track a root vector along a one-parameter family of models from
    `s_start` down to `s_end`.

    Steps are geometric (at most 40% of the current s per step, so the
    approach to s = 0 refines itself), each Newton re-solve must converge,
    stay within `drift_scale * (step + 1e-3)` of the previous vector — a
    cheap guard against hopping to a different root branch — and stay off
    the degenerate strata, so a trajectory that runs into a spurious
    continuum (as singular deformation limits do) fails loudly instead of
    reporting a 0/0 residual.  The drift guard alone cannot see hops
    between branches that pass close to each other, so callers may supply
    `verify(s, vec) -> bool`, consulted before a step is accepted; an
    eigenvalue-tracking verifier pins the trajectory to one transfer
    eigenstate.  Failed steps are bisected; below `min_step` a SolverError
    is raised, which is how callers detect root sets that only reach the
    endpoint asymptotically.  Returns the trajectory
    [(s, vec, residual), ...].  Vectors are deliberately NOT
    canonicalized, so they stay continuous.
    """
    if s_end > s_start:
        raise ValueError("continuation runs downward in s")
    s = s_start
    x = np.asarray(vec, dtype=complex).copy()
    trajectory = [(s, x.copy(), float(np.max(np.abs(handle_at(s).bae_system(x)))))]
    while s > s_end:
        remaining = s - s_end
        # geometric refinement toward the endpoint, with a landing step once
        # the remaining distance is itself small
        step = remaining if remaining <= max(0.4 * s, 0.02) else 0.4 * s
        while True:
            s_next = s - step
            handle = handle_at(s_next)
            xn, res, _ = newton_complex(
                handle.bae_system, x, config, tol=min(config.tol, 1e-12)
            )
            drift = float(np.max(np.abs(xn - x)))
            if (
                res < config.accept_tol
                and drift < drift_scale * (step + 1e-3)
                and handle.degeneracy(xn) >= config.degeneracy_floor
                and (verify is None or verify(s_next, xn))
            ):
                break
            step /= 2
            if step < min_step:
                raise SolverError(
                    f"continuation stalled at s = {s:.6g} (residual {res:.2e}, "
                    f"drift {drift:.2e})"
                )
        s, x = s_next, xn
        trajectory.append((s, x.copy(), res))
    return trajectory


class EigenvalueTracker:
    """Step verifier for `continue_roots` that pins a trajectory to one
    transfer eigenstate.

    At every proposed step the continued root set's T-Q eigenvalue at each
    fixed probe point is compared against the dense transfer spectrum at
    the deformed parameters.  A probe is decisive when the spectral value
    nearest to the previously accepted one is unambiguous; the step must
    then reproduce that branch to `rel_tol`.  When a second, distinct
    spectral value is nearly as close — two eigenvalue curves crossing at
    that probe — the probe cannot resolve the branch, so it only leashes
    the step to the colliding cluster and resynchronizes afterwards.  A
    step is accepted only if every probe passes and at least one was
    decisive; otherwise the continuation bisects until the branches
    separate.  Without these tests a large step can hop branches silently:
    the eigenvalue curves move farther per step than their mutual spacing,
    so nearest-value matching and the Newton basin can jump together.
    Several probe points keep the trajectory pinned through parameter
    values where curves cross at any single probe.  Desk-scale only: each
    proposed step costs one dense eigenvalue computation per probe.
    """

    def __init__(self, handle_at, probe, lam0, rel_tol: float = 1e-6,
                 ambiguity: float = 4.0):
        self.handle_at = handle_at
        self.probes = tuple(complex(p) for p in np.atleast_1d(probe))
        self.last = tuple(complex(v) for v in np.atleast_1d(lam0))
        if len(self.last) != len(self.probes):
            raise ValueError("one reference eigenvalue per probe point")
        self.rel_tol = rel_tol
        self.ambiguity = ambiguity

    def __call__(self, s: float, vec: np.ndarray) -> bool:
        handle = self.handle_at(s)
        accepted = []
        decisive = 0
        for probe, last in zip(self.probes, self.last):
            try:
                lam = handle.tq(handle.make_roots(vec), probe)
            except PoleError:
                return False
            spectrum = np.linalg.eigvals(handle.transfer(probe))
            dist = np.abs(spectrum - last)
            order = np.argsort(dist)
            expected = spectrum[int(order[0])]
            scale = max(abs(expected), 1.0)
            ambiguous = False
            if len(spectrum) > 1:
                rival = spectrum[int(order[1])]
                ambiguous = (
                    abs(rival - expected) > self.rel_tol * scale
                    and dist[int(order[1])] < self.ambiguity * dist[int(order[0])]
                )
            if ambiguous:
                if abs(lam - expected) > dist[int(order[1])] + self.rel_tol * scale:
                    return False
            else:
                if abs(lam - expected) > self.rel_tol * scale:
                    return False
                decisive += 1
            accepted.append(complex(lam))
        if decisive == 0:
            return False
        # tuple state, so a shallow copy of the tracker (used for tentative
        # landing attempts) never shares mutable state with the original
        self.last = tuple(accepted)
        return True


def deformation_limit(
    handle_at: Callable[[float], ModelHandle],
    vec: np.ndarray,
    evaluate: Callable[[ModelHandle, np.ndarray], complex],
    config: SolverConfig = SolverConfig(),
    tracker: EigenvalueTracker | None = None,
    node_base: float = 0.08,
    node_count: int = 6,
) -> tuple[complex, str]:
    """Value of `evaluate(handle, root_vector)` in the s -> 0 limit of a
    deformation family, for the root branch through `vec` at s = 1.

    The branch is continued down to `node_base` and an exact landing at
    s = 0 is attempted (the tracker state is probed on a copy, so a failed
    landing leaves it consistent).  Root sets whose branch only reaches
    s = 0 asymptotically — continuation stalls on a degenerate stratum —
    are instead sampled at the geometric nodes node_base / 2^k and
    Richardson-extrapolated.  Returns (value, "exact" | "extrapolated").
    """
    traj = continue_roots(handle_at, vec, 1.0, node_base, config, verify=tracker)
    x = traj[-1][1]
    try:
        probe = None if tracker is None else copy.copy(tracker)
        traj0 = continue_roots(handle_at, x, node_base, 0.0, config, verify=probe)
        return evaluate(handle_at(0.0), traj0[-1][1]), "exact"
    except SolverError:
        pass
    samples = [evaluate(handle_at(node_base), x)]
    node = node_base
    for _ in range(node_count - 1):
        try:
            traj = continue_roots(handle_at, x, node, node / 2, config, verify=tracker)
        except SolverError:
            break
        node /= 2
        x = traj[-1][1]
        samples.append(evaluate(handle_at(node), x))
    if len(samples) < 3:
        raise SolverError(
            f"deformation limit: only {len(samples)} usable nodes below {node_base}"
        )
    return richardson_limit(samples), "extrapolated"


def richardson_limit(values, ratio: float = 2.0):
    """Extrapolate samples f(h), f(h/ratio), f(h/ratio^2), ... to h -> 0.

    Builds the standard extrapolation triangle assuming an error expansion
    in integer powers of h; with K nodes the leading surviving error is
    O(h^K).  Works elementwise, so `values` may hold scalars or arrays.
    """
    row = [np.asarray(v, dtype=complex) for v in values]
    if not row:
        raise ValueError("need at least one sample")
    order = 1
    while len(row) > 1:
        fac = ratio**order
        row = [(fac * row[i + 1] - row[i]) / (fac - 1) for i in range(len(row) - 1)]
        order += 1
    out = row[0]
    return complex(out) if out.ndim == 0 else out
