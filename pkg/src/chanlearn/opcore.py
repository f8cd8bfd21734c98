"""Dense complex linear algebra and the Pauli/Bell toolkit.

Conventions used everywhere in this package (fixed here, nowhere else):

* Registers are labelled by qubit count ``n``; Hilbert space dimension is
  ``2**n``.  Qubit 1 is the most significant tensor factor, so the
  computational-basis index of ``|b_1 ... b_n>`` is the integer with binary
  digits ``b_1 ... b_n``.
* A Pauli string is indexed by a pair of bit tuples ``(z, x)`` and the flat
  integer index is lexicographic on the concatenated bits:
  ``flat = int(z bits) * 2**n + int(x bits)``.  This order is used for error
  rate vectors, Bell bases and all serialization.
* Bipartite operators live on registers ``A (first n qubits)`` and
  ``B (last n qubits)`` unless stated otherwise.

All functions are pure; arrays passed in are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

HERMITICITY_TOL = 1e-10        # per unit of dimension
PSD_TOL = 1e-8                 # minimum eigenvalue allowed below zero
TRACE_TOL = 1e-10
LOG_FLOOR = 1e-300             # eigenvalue floor for the clamped matrix log

_S0 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class PauliIndex:
    """Index ``(z, x)`` of an n-qubit Pauli string, bits as tuples."""

    z: tuple
    x: tuple

    def __post_init__(self):
        if len(self.z) != len(self.x):
            raise ValueError(f"z and x bitstrings differ in length: {len(self.z)} vs {len(self.x)}")
        if not all(b in (0, 1) for b in self.z + self.x):
            raise ValueError("bitstrings must contain only 0/1")

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def flat(self) -> int:
        n = self.n
        zi = int("".join(map(str, self.z)), 2) if n else 0
        xi = int("".join(map(str, self.x)), 2) if n else 0
        return (zi << n) | xi

    @classmethod
    def from_flat(cls, flat: int, n: int) -> "PauliIndex":
        zi, xi = flat >> n, flat & ((1 << n) - 1)
        bits = lambda v: tuple((v >> (n - 1 - k)) & 1 for k in range(n))
        return cls(bits(zi), bits(xi))


def all_pauli_indices(n: int):
    """All 4**n Pauli indices in flat (serialization) order."""
    return [PauliIndex.from_flat(f, n) for f in range(4**n)]


def kron_all(mats) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_operator(idx: PauliIndex) -> np.ndarray:
    """Pauli string ``(+i)^{z.x} Z^z X^x`` as a dense ``2**n`` unitary.

    The single-qubit factors are I, X, Z, and iZX = Y for
    (z,x) = (0,0), (0,1), (1,0), (1,1).
    """
    if idx.n < 1:
        raise ValueError("need at least one qubit")
    table = {(0, 0): _S0, (0, 1): _SX, (1, 0): _SZ, (1, 1): _SY}
    return kron_all(table[(z, x)] for z, x in zip(idx.z, idx.x))


@lru_cache(maxsize=8)
def pauli_stack(n: int) -> np.ndarray:
    """Array of shape (4**n, 2**n, 2**n): every Pauli string, flat order."""
    return np.stack([pauli_operator(i) for i in all_pauli_indices(n)])


def max_entangled_vector(n: int) -> np.ndarray:
    """Normalized |Phi> = 2^{-n/2} sum_x |x,x> on 2n qubits."""
    d = 2**n
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * d + np.arange(d)] = 1.0
    return v / np.sqrt(d)


def bell_vector(idx: PauliIndex) -> np.ndarray:
    """|Phi^{z,x}> = (1 x P^{z,x}) |Phi> on 2n qubits."""
    d = 2**idx.n
    phi = max_entangled_vector(idx.n).reshape(d, d)
    return (phi @ pauli_operator(idx).T).reshape(-1)


def bell_projector(idx: PauliIndex) -> np.ndarray:
    """Rank-1 Bell projector on 2n qubits."""
    v = bell_vector(idx)
    return np.outer(v, v.conj())


@lru_cache(maxsize=8)
def bell_basis(n: int) -> np.ndarray:
    """Unitary whose column ``flat`` is the Bell vector |Phi^{z,x}>."""
    return np.column_stack([bell_vector(i) for i in all_pauli_indices(n)])


def bell_diagonal_coefficients(op: np.ndarray, n: int) -> np.ndarray:
    """Vector of <Phi^{z,x}| op |Phi^{z,x}> over the 4**n Bell states."""
    b = bell_basis(n)
    return np.real(np.einsum("ij,ik,kj->j", b.conj(), op, b))


def bell_pinch(op: np.ndarray, n: int) -> np.ndarray:
    """Pinching in the Bell basis: sum_w Phi^w op Phi^w."""
    b = bell_basis(n)
    return (b * bell_diagonal_coefficients(op, n)) @ b.conj().T


def check_hermitian(m: np.ndarray, tol_per_dim: float = HERMITICITY_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    dev = np.linalg.norm(m - m.conj().T)
    if dev > tol_per_dim * m.shape[0]:
        raise ValueError(f"matrix is not Hermitian: ||M - M^dag||_F = {dev:.3e}")
    return m


def check_density(rho: np.ndarray, psd_tol: float = PSD_TOL, trace_tol: float = TRACE_TOL) -> np.ndarray:
    rho = check_hermitian(rho)
    ev = np.linalg.eigvalsh(rho)
    if ev.min() < -psd_tol:
        raise ValueError(f"density operator has eigenvalue {ev.min():.3e} < -{psd_tol}")
    tr = np.real(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density operator has trace {tr!r}")
    return rho


def partial_trace(op: np.ndarray, dims: tuple, keep: str) -> np.ndarray:
    """Trace out one factor of a bipartite operator on dims (dA, dB).

    ``keep`` is "A" or "B"; the traced operator on the kept factor is
    returned.  Trace is preserved: Tr[out] = Tr[op].
    """
    da, db = dims
    op = np.asarray(op)
    if op.shape != (da * db, da * db):
        raise ValueError(f"operator shape {op.shape} does not match dims {dims}")
    t = op.reshape(da, db, da, db)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError("keep must be 'A' or 'B'")


def herm_eig(op: np.ndarray):
    """Eigendecomposition of a Hermitian operator, ascending eigenvalues."""
    return np.linalg.eigh(check_hermitian(op))


def herm_fn(op: np.ndarray, fn: str) -> np.ndarray:
    """Apply exp, log or clamped-log to a Hermitian operator by spectrum.

    ``log`` raises for nonpositive eigenvalues; ``clamped-log`` floors the
    spectrum at LOG_FLOOR so numerically singular iterates stay usable.
    """
    w, v = herm_eig(op)
    if fn == "exp":
        fw = np.exp(w)
    elif fn == "log":
        if w.min() <= 0:
            raise ValueError(f"log of matrix with eigenvalue {w.min():.3e} <= 0")
        fw = np.log(w)
    elif fn == "clamped-log":
        fw = np.log(np.maximum(w, LOG_FLOOR))
    else:
        raise ValueError(f"unknown spectral function {fn!r}")
    return (v * fw) @ v.conj().T


def herm_exp_normalized(op: np.ndarray) -> np.ndarray:
    """exp(op)/Tr[exp(op)], computed with a spectral shift so large negative
    cumulative losses never overflow."""
    w, v = herm_eig(op)
    ew = np.exp(w - w.max())
    ew /= ew.sum()
    return (v * ew) @ v.conj().T


def trace_norm(op: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    return float(np.abs(np.linalg.eigvalsh(check_hermitian(op))).sum())


def von_neumann_entropy(rho: np.ndarray) -> float:
    """H(rho) = -Tr[rho log rho] in nats, zero eigenvalues contributing 0."""
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-18]
    return float(-(w * np.log(w)).sum())


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """D(rho || sigma) in nats; +inf if supp(rho) leaves supp(sigma)."""
    wr, vr = herm_eig(rho)
    ws, vs = herm_eig(sigma)
    if ws.min() <= 0:
        overlap = np.abs(vs[:, ws <= 0].conj().T @ vr[:, wr > 1e-14]) if np.any(wr > 1e-14) else np.zeros(0)
        if overlap.size and overlap.max() > 1e-7:
            return float("inf")
        ws = np.maximum(ws, LOG_FLOOR)
    log_sigma = (vs * np.log(ws)) @ vs.conj().T
    wr_pos = np.maximum(wr, LOG_FLOOR)
    term1 = float((wr * np.log(wr_pos))[wr > 1e-18].sum())
    term2 = float(np.real(np.trace(rho @ log_sigma)))
    return term1 - term2


def computational_basis_state(bits) -> np.ndarray:
    """|b_1 ... b_n> as a dense vector (qubit 1 most significant)."""
    idx = int("".join(str(b) for b in bits), 2)
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[idx] = 1.0
    return v


def dag(m: np.ndarray) -> np.ndarray:
    return m.conj().T
