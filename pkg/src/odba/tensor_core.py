"""Dense complex operator algebra for small spin-1/2 chains.

Operators on an N-site chain are plain (2^N, 2^N) complex numpy arrays,
states are length-2^N vectors, and auxiliary-space structure (monodromy
matrices) is carried as (2, 2, dim, dim) block arrays indexed by the two
auxiliary indices.  At the chain sizes targeted here (N <= 8, hard cap
2^12 for eigensolves) dense linear algebra is both fast enough and the
easiest thing to certify.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConsistencyError, SolverError

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |up><down|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |down><up|
ID2 = np.eye(2, dtype=complex)

MAX_EIG_DIM = 2**12


def kron_chain(factors) -> np.ndarray:
    """Kronecker product of a sequence of matrices, first factor leftmost."""
    out = np.array([[1.0 + 0.0j]])
    for f in factors:
        out = np.kron(out, f)
    return out


def embed_local(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-site operator at `site` (1-based, site 1 = leftmost
    Kronecker factor) into the full 2^N space."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 local operator, got shape {op.shape}")
    if not 1 <= site <= n_sites:
        raise IndexError(f"site {site} outside 1..{n_sites}")
    return kron_chain(op if k == site else ID2 for k in range(1, n_sites + 1))


def basis_state_all_up(n_sites: int) -> np.ndarray:
    """The reference product state |up...up> as a dense vector."""
    v = np.zeros(2**n_sites, dtype=complex)
    v[0] = 1.0
    return v


def aux_block_product(blocks) -> np.ndarray:
    """Multiply a sequence of (2, 2, dim, dim) auxiliary-space block matrices.

    Entries multiply as 2x2 matrices over the (non-commutative) ring of
    quantum-space operators; factors are applied left-to-right in the
    given order, i.e. the result is blocks[0] . blocks[1] . ... .
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block matrix")
    out = np.asarray(blocks[0], dtype=complex)
    for blk in blocks[1:]:
        out = np.einsum("ijab,jkbc->ikac", out, np.asarray(blk, dtype=complex))
    return out


def aux_block_product_with_derivative(blocks, dblocks) -> tuple[np.ndarray, np.ndarray]:
    """Product of block matrices together with its exact derivative.

    `dblocks[i]` is the derivative of `blocks[i]` with respect to the
    common spectral parameter; the product rule is applied via prefix and
    suffix partial products.
    """
    blocks = [np.asarray(b, dtype=complex) for b in blocks]
    dblocks = [np.asarray(b, dtype=complex) for b in dblocks]
    if len(blocks) != len(dblocks):
        raise ValueError("blocks and dblocks must have equal length")
    n = len(blocks)
    prefix = [blocks[0]]
    for b in blocks[1:]:
        prefix.append(np.einsum("ijab,jkbc->ikac", prefix[-1], b))
    suffix = [blocks[-1]]
    for b in reversed(blocks[:-1]):
        suffix.insert(0, np.einsum("ijab,jkbc->ikac", b, suffix[0]))
    total = prefix[-1]
    deriv = np.zeros_like(total)
    for i in range(n):
        term = dblocks[i]
        if i > 0:
            term = np.einsum("ijab,jkbc->ikac", prefix[i - 1], term)
        if i < n - 1:
            term = np.einsum("ijab,jkbc->ikac", term, suffix[i + 1])
        deriv = deriv + term
    return total, deriv


def overlap(left: np.ndarray, right: np.ndarray) -> complex:
    """Bilinear pairing sum_i left_i * right_i (no complex conjugation).

    This is the pairing under which left/right Bethe and SoV states are
    dual to each other; it is *not* the Hermitian inner product.
    """
    left = np.asarray(left).ravel()
    right = np.asarray(right).ravel()
    if left.shape != right.shape:
        raise ValueError(f"shape mismatch {left.shape} vs {right.shape}")
    return complex(left @ right)


def projective_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|<a, b>| / (||a|| ||b||) with the Hermitian inner product: 1 iff the
    vectors agree up to a complex scale."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("projective overlap undefined for a zero vector")
    return float(abs(np.vdot(a, b)) / (na * nb))


def rel_commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """||[A, B]||_F / (||A||_F ||B||_F)."""
    num = np.linalg.norm(a @ b - b @ a)
    den = np.linalg.norm(a) * np.linalg.norm(b)
    if den == 0.0:
        return 0.0
    return float(num / den)


@dataclass
class EigenPair:
    """A certified eigenpair: ||M v - value v|| <= 1e-10 ||M||_F ||v||."""

    value: complex
    vector: np.ndarray
    residual: float


def dense_eigensystem(matrix: np.ndarray) -> list[EigenPair]:
    """Full (possibly non-Hermitian) eigensystem of a dense matrix.

    Each returned pair is residual-certified; pairs are sorted by
    (Re value, Im value) so the output order is deterministic.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"dimension {m.shape[0]} exceeds dense cap {MAX_EIG_DIM}")
    try:
        values, vectors = sla.eig(m)
    except sla.LinAlgError as exc:  # pragma: no cover - zgeev essentially never fails
        raise SolverError(f"dense eigensolver failed: {exc}") from exc
    norm_m = np.linalg.norm(m)
    pairs = []
    resid = m @ vectors - vectors * values[None, :]
    for k in range(m.shape[0]):
        v = vectors[:, k]
        r = float(np.linalg.norm(resid[:, k]))
        bound = 1e-10 * norm_m * float(np.linalg.norm(v))
        if r > bound:
            raise ConsistencyError(
                f"eigenpair residual {r:.3e} exceeds certification bound {bound:.3e}"
            )
        pairs.append(EigenPair(complex(values[k]), v, r))
    pairs.sort(key=lambda p: (p.value.real, p.value.imag))
    return pairs


def common_eigenvectors(
    family,
    tol: float = 1e-10,
    seed: int = 7,
    max_tries: int = 5,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Joint eigenvectors of a commuting family of dense matrices.

    Verifies all pairwise commutators (relative Frobenius norm <= tol),
    then diagonalizes a random generic linear combination and reads off
    each member's eigenvalue as a Rayleigh quotient.  Returns a list of
    (vector, values) with values[k] the eigenvalue of family[k]; the list
    is sorted by the eigenvalue tuple so the output is deterministic.
    """
    mats = [np.asarray(m, dtype=complex) for m in family]
    if not mats:
        raise ValueError("empty family")
    dim = mats[0].shape[0]
    for m in mats:
        if m.shape != (dim, dim):
            raise ValueError("family members must share a common square shape")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            r = rel_commutator_norm(mats[i], mats[j])
            if r > tol:
                raise ConsistencyError(
                    f"family members {i},{j} fail to commute: residual {r:.3e} > {tol:.1e}"
                )
    rng = np.random.default_rng(seed)
    norms = [max(np.linalg.norm(m), 1e-300) for m in mats]
    for attempt in range(max_tries):
        coeffs = rng.standard_normal(len(mats)) + 1j * rng.standard_normal(len(mats))
        combo = sum(c / n * m for c, n, m in zip(coeffs, norms, mats))
        pairs = dense_eigensystem(combo)
        out = []
        ok = True
        for p in pairs:
            v = p.vector
            nv = float(np.linalg.norm(v)) ** 2
            values = np.array([np.vdot(v, m @ v) / nv for m in mats])
            worst = max(
                float(np.linalg.norm(m @ v - lam * v)) / (np.linalg.norm(m) * np.linalg.norm(v))
                for m, lam in zip(mats, values)
            )
            if worst > tol:
                ok = False
                break
            out.append((v, values))
        if ok:
            out.sort(key=lambda pair: tuple((z.real, z.imag) for z in pair[1]))
            return out
    raise ConsistencyError(
        f"no generic combination separated the family after {max_tries} tries"
    )
