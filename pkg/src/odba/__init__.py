"""Numerical laboratory for off-diagonal Bethe ansatz eigenstate
retrieval on small spin-1/2 chains.

Two models are covered: the XXZ chain on a twisted (anti-periodic) torus
and the open isotropic chain with non-parallel boundary fields.  Both
break total-spin conservation, so their Bethe states are reconstructed
from inhomogeneous T-Q data and a separated (SoV) basis rather than from
a conserved-magnetization product state.  Every construction is certified
against dense exact diagonalization at desk scale (N <= 8).

Submodules:

- tensor_core: dense operator algebra and common-eigenbasis extraction
- vertex_models: R-matrices, boundary K-matrices, gauge, YBE residuals
- torus: the anti-periodic XXZ chain
- open_chain: the open XXX chain with generic boundary fields
- solver: Bethe-equation Newton solvers and deformation limits
- checks: named verification suites producing report records
- cli: command-line front end
"""

from __future__ import annotations

from .checks import CheckContext, available_checks, check_record, run_checks
from .errors import (
    ConsistencyError,
    DegenerateParameterError,
    PoleError,
    SingularNormalizationError,
    SolverError,
)
from .open_chain import OpenParams, OpenRootSet
from .solver import (
    EigenvalueTracker,
    ModelHandle,
    SolveOutcome,
    SolverConfig,
    continue_roots,
    deformation_limit,
    open_handle,
    richardson_limit,
    solve_direct_multistart,
    solve_spectrum_first,
    torus_handle,
)
from .torus import TorusParams, TorusRootSet

__all__ = [
    "CheckContext",
    "ConsistencyError",
    "DegenerateParameterError",
    "EigenvalueTracker",
    "ModelHandle",
    "OpenParams",
    "OpenRootSet",
    "PoleError",
    "SingularNormalizationError",
    "SolveOutcome",
    "SolverConfig",
    "SolverError",
    "TorusParams",
    "TorusRootSet",
    "available_checks",
    "check_record",
    "continue_roots",
    "deformation_limit",
    "open_handle",
    "richardson_limit",
    "run_checks",
    "solve_direct_multistart",
    "solve_spectrum_first",
    "torus_handle",
]

__version__ = "0.1.0"
