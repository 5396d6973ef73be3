"""Walkthrough: retrieving the eigenstates of the anti-periodic XXZ chain.

The twisted boundary breaks spin conservation, so there is no highest
weight to act on and the usual algebraic construction does not start.
This script shows what replaces it: the transfer spectrum is found by
exact diagonalization, a Bethe root set is fitted to each eigenvalue
through the T-Q relation at the inhomogeneity points, and the state is
rebuilt from the roots by acting with twisted-monodromy entries on a
retrieved (not assumed) reference state.  Every step is certified
against the dense spectrum.

Run:  python3 demos/demo_torus_retrieval.py [-N 3] [--seed 0]
"""

from __future__ import annotations

import argparse

import numpy as np

from odba import torus
from odba.solver import SolverConfig, solve_spectrum_first, torus_handle
from odba.tensor_core import common_eigenvectors, projective_overlap


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-N", type=int, default=3, help="number of sites (2..5)")
    ap.add_argument("--seed", type=int, default=0, help="inhomogeneity sample seed")
    args = ap.parse_args()
    n = args.N

    # Generic inhomogeneities keep the construction non-degenerate; the
    # sampler rejects draws that violate the separation conditions.
    eta = torus.DEFAULT_ETA
    params = torus.TorusParams(n, eta, torus.generic_theta(n, eta, args.seed))
    print(f"anti-periodic XXZ chain, N = {n}, eta = {eta}")
    print(f"theta = {np.round(np.asarray(params.theta), 4)}")

    # The transfer matrices at the inhomogeneity points commute, so they
    # share eigenvectors; their joint eigenvalue tuples are the targets.
    family = [torus.transfer(params, t) for t in params.theta]
    pairs = common_eigenvectors(family)
    print(f"\ntransfer family diagonalized: {len(pairs)} joint eigenstates")

    handle = torus_handle(params)
    config = SolverConfig(seed=args.seed)
    rng = np.random.default_rng(args.seed)
    sample_u = rng.uniform(-1, 1, 3) + 1j * rng.uniform(-0.5, 0.5, 3)

    print("\nstate   trials   bae residual   state residual   overlap with ED")
    for idx, (vec, values) in enumerate(pairs):
        # Fit roots so the T-Q expression reproduces the eigenvalue tuple,
        # then polish on the Bethe equations themselves.
        out = solve_spectrum_first(handle, values, config)
        if not out.converged:
            print(f"{idx:5d}   no root set within {config.restarts} restarts")
            continue

        # Rebuild the state from the roots and certify it two ways:
        # eigen-residual at random spectral points and projective overlap.
        psi = torus.bethe_state(params, out.roots)
        res = 0.0
        for u in sample_u:
            lam = torus.tq_eigenvalue(params, out.roots, u)
            t_u = torus.transfer(params, u)
            res = max(res, np.linalg.norm(t_u @ psi - lam * psi) / np.linalg.norm(psi))
        ol = projective_overlap(psi, vec)
        print(
            f"{idx:5d}   {out.trials:6d}   {out.residual:12.3e}   "
            f"{res:14.3e}   {1 - ol:.3e} below 1"
        )

    print("\nEvery eigenvalue admits N roots (no magnon-number sectors here):")
    print("the twist mixes all sectors, and the root count is uniform.")


if __name__ == "__main__":
    main()
