"""R-matrices, boundary K-matrices, and the algebra residuals they satisfy.

Two solvable six-vertex structures are provided:

* a trigonometric R-matrix (anisotropic chain), normalized so that the
  off-diagonal hopping entries are exactly 1;
* a rational R-matrix (isotropic chain), unnormalized, R(0) = eta * P.

Alongside them: the diagonal/non-diagonal boundary K-matrix pair for the
open chain, the 2x2 gauge transformation that diagonalizes the upper
K-matrix, and residual evaluators for the Yang-Baxter, RTT and
reflection equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParameterError

TRIG_RE_CAP = 40.0

# swap operator on C^2 (x) C^2
PERM4 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def _check_trig_arg(u: complex) -> None:
    if abs(np.real(u)) > TRIG_RE_CAP:
        raise ValueError(
            f"|Re u| = {abs(np.real(u)):.1f} exceeds the overflow guard {TRIG_RE_CAP}"
        )


def r_trig(u: complex, eta: complex) -> np.ndarray:
    """Trigonometric six-vertex R-matrix, normalized by 1/sinh(eta).

    Diagonal blocks carry sinh(u+eta) and sinh(u); the two hopping
    entries are sinh(eta)/sinh(eta) = 1.  r_trig(0, eta) is the swap.
    """
    sh = np.sinh(eta)
    if sh == 0:
        raise DegenerateParameterError("sinh(eta) = 0: trigonometric R-matrix undefined")
    _check_trig_arg(u)
    a = np.sinh(u + eta) / sh
    b = np.sinh(u) / sh
    return np.array(
        [
            [a, 0, 0, 0],
            [0, b, 1, 0],
            [0, 1, b, 0],
            [0, 0, 0, a],
        ],
        dtype=complex,
    )


def r_rat(u: complex, eta: complex) -> np.ndarray:
    """Rational six-vertex R-matrix u*I + eta*P (no normalization)."""
    r = u * np.eye(4, dtype=complex) + eta * PERM4
    return r


@dataclass(frozen=True)
class RMatrix:
    """An R-matrix family u -> R(u) of fixed kind and crossing parameter."""

    kind: str  # "trig" | "rational"
    eta: complex

    def __post_init__(self):
        if self.kind not in ("trig", "rational"):
            raise ValueError(f"unknown R-matrix kind {self.kind!r}")

    def __call__(self, u: complex) -> np.ndarray:
        if self.kind == "trig":
            return r_trig(u, self.eta)
        return r_rat(u, self.eta)


def r_blocks(r4: np.ndarray) -> np.ndarray:
    """Reshape a 4x4 two-space matrix into (2, 2, 2, 2) auxiliary blocks.

    Output axes are [aux_out, aux_in, q_out, q_in]: blocks[a, b] is the
    2x2 quantum-space operator sitting in auxiliary slot (a, b).
    """
    return np.asarray(r4, dtype=complex).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)


def ybe_residual(r: RMatrix, u: complex, v: complex) -> float:
    """Relative Frobenius residual of the Yang-Baxter equation at (u, v).

    Checks R12(u-v) R13(u) R23(v) = R23(v) R13(u) R12(u-v) on the
    8-dimensional triple tensor space, normalized by the left side.
    """
    i2 = np.eye(2, dtype=complex)
    swap23 = np.kron(i2, PERM4)
    r12 = np.kron(r(u - v), i2)
    r23 = np.kron(i2, r(v))
    r13 = swap23 @ np.kron(r(u), i2) @ swap23
    lhs = r12 @ r13 @ r23
    rhs = r23 @ r13 @ r12
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def _aux_to_full(tblocks: np.ndarray, slot: int) -> np.ndarray:
    """Lift (2,2,D,D) auxiliary blocks to a dense operator on
    aux1 (x) aux2 (x) quantum, acting in auxiliary slot 1 or 2."""
    t = np.asarray(tblocks, dtype=complex)
    dim = t.shape[-1]
    i2 = np.eye(2, dtype=complex)
    out = np.zeros((4 * dim, 4 * dim), dtype=complex)
    for a in range(2):
        for b in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[a, b] = 1.0
            factors = (e, i2) if slot == 1 else (i2, e)
            out += np.kron(np.kron(*factors), t[a, b])
    return out


def rtt_residual(r: RMatrix, tblocks_u, tblocks_v, u: complex, v: complex) -> float:
    """Relative residual of the RTT exchange relation
    R12(u-v) T1(u) T2(v) = T2(v) T1(u) R12(u-v)."""
    dim = np.asarray(tblocks_u).shape[-1]
    r12 = np.kron(r(u - v), np.eye(dim, dtype=complex))
    t1 = _aux_to_full(tblocks_u, 1)
    t2 = _aux_to_full(tblocks_v, 2)
    lhs = r12 @ t1 @ t2
    rhs = t2 @ t1 @ r12
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def reflection_residual(r: RMatrix, dblocks_u, dblocks_v, u: complex, v: complex) -> float:
    """Relative residual of the reflection (boundary exchange) relation
    R12(u-v) T1(u) R21(u+v) T2(v) = T2(v) R12(u+v) T1(u) R21(u-v)
    for a double-row monodromy given as (2,2,D,D) blocks."""
    dim = np.asarray(dblocks_u).shape[-1]
    ident = np.eye(dim, dtype=complex)

    def r12(w):
        return np.kron(r(w), ident)

    def r21(w):
        return np.kron(PERM4 @ r(w) @ PERM4, ident)

    t1 = _aux_to_full(dblocks_u, 1)
    t2 = _aux_to_full(dblocks_v, 2)
    lhs = r12(u - v) @ t1 @ r21(u + v) @ t2
    rhs = t2 @ r12(u + v) @ t1 @ r21(u - v)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


@dataclass(frozen=True)
class KPair:
    """Boundary reflection matrices for the open chain.

    The lower matrix K^-(u) is diagonal with boundary parameter p; the
    upper matrix K^+(u) mixes spin components with strength xi and
    carries the shifted argument u + eta.
    """

    p: complex
    q_b: complex
    xi: complex
    eta: complex

    def k_minus(self, u: complex) -> np.ndarray:
        return np.array([[self.p + u, 0.0], [0.0, self.p - u]], dtype=complex)

    def k_plus(self, u: complex) -> np.ndarray:
        w = u + self.eta
        return np.array(
            [
                [self.q_b + w, self.xi * w],
                [self.xi * w, self.q_b - w],
            ],
            dtype=complex,
        )


def build_k_pair(p: complex, q_b: complex, xi: complex, eta: complex) -> KPair:
    return KPair(complex(p), complex(q_b), complex(xi), complex(eta))


@dataclass(frozen=True)
class GaugePack:
    """Gauge transformation diagonalizing the upper boundary matrix.

    `sqrt_branch` is the principal branch of sqrt(1 + xi^2), recorded
    once so every downstream formula uses the same sign.  The same
    similarity u_mat . K . u_inv takes K^+ to the diagonal k_bar_plus
    and K^- to the full matrix k_bar_minus (whose lower-left entry is
    proportional to u and vanishes at u = 0).
    """

    p: complex
    q_b: complex
    xi: complex
    eta: complex
    sqrt_branch: complex = field(init=False)
    u_mat: np.ndarray = field(init=False, repr=False)
    u_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.xi == 0:
            raise DegenerateParameterError("xi = 0: gauge transformation is singular")
        s = np.sqrt(1.0 + self.xi**2)
        u = np.array(
            [
                [self.xi, s - 1.0],
                [self.xi, -s - 1.0],
            ],
            dtype=complex,
        )
        object.__setattr__(self, "sqrt_branch", complex(s))
        object.__setattr__(self, "u_mat", u)
        object.__setattr__(self, "u_inv", np.linalg.inv(u))

    def k_bar_plus(self, u: complex) -> np.ndarray:
        s = self.sqrt_branch
        w = u + self.eta
        return np.array(
            [[self.q_b + s * w, 0.0], [0.0, self.q_b - s * w]], dtype=complex
        )

    def k_bar_minus(self, u: complex) -> np.ndarray:
        s = self.sqrt_branch
        return np.array(
            [
                [self.p + u / s, (s - 1.0) * u / s],
                [(s + 1.0) * u / s, self.p - u / s],
            ],
            dtype=complex,
        )


def build_gauge(p: complex, q_b: complex, xi: complex, eta: complex) -> GaugePack:
    return GaugePack(complex(p), complex(q_b), complex(xi), complex(eta))
