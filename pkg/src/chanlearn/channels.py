"""Channel representations, Choi calculus, Pauli channels and channel tests.

A channel is held as a Kraus list and/or a Choi matrix.  The Choi matrix of
``N`` on n_in -> n_out qubits is ``C(N) = sum_ij |i><j| x N(|i><j|)``, an
operator on registers A (input copy) and B (output); it is PSD with
``Tr_B[C] = 1_A``.  A two-outcome channel test is a PSD operator E on (A, B)
dominated by ``sigma_A x 1_B`` for some state sigma; its Born value against a
channel is ``Tr[E C(N)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .opcore import (
    PSD_TOL,
    PauliIndex,
    all_pauli_indices,
    bell_basis,
    bell_diagonal_coefficients,
    bell_pinch,
    check_density,
    check_hermitian,
    dag,
    max_entangled_vector,
    partial_trace,
    pauli_operator,
    pauli_stack,
    trace_norm,
)

CHOI_TOL = 1e-9


def _vec_transpose_trick(k: np.ndarray) -> np.ndarray:
    # (1 x K)|Gamma> has component K[b, a] at basis index a*d_out + b
    return k.T.reshape(-1)


def choi_of_kraus(kraus, d_in: int, d_out: int) -> np.ndarray:
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        v = _vec_transpose_trick(np.asarray(k, dtype=complex))
        c += np.outer(v, v.conj())
    return c


@dataclass
class ChannelRep:
    """A quantum channel on n_in -> n_out qubits, as Kraus and/or Choi."""

    n_in: int
    n_out: int
    kraus: list | None = None
    choi: np.ndarray | None = None

    def __post_init__(self):
        if self.kraus is None and self.choi is None:
            raise ValueError("need a Kraus list or a Choi matrix")
        if self.kraus is not None:
            self.kraus = [np.asarray(k, dtype=complex) for k in self.kraus]
            for k in self.kraus:
                if k.shape != (self.d_out, self.d_in):
                    raise ValueError(f"Kraus shape {k.shape}, expected {(self.d_out, self.d_in)}")
            tp = sum(dag(k) @ k for k in self.kraus)
            if np.linalg.norm(tp - np.eye(self.d_in)) > CHOI_TOL * self.d_in:
                raise ValueError("Kraus set is not trace preserving")
        if self.choi is not None:
            self.choi = check_hermitian(self.choi)
            d = self.d_in * self.d_out
            if self.choi.shape != (d, d):
                raise ValueError(f"Choi shape {self.choi.shape}, expected {(d, d)}")
            if np.linalg.eigvalsh(self.choi).min() < -PSD_TOL:
                raise ValueError("Choi matrix is not PSD")
            mar = partial_trace(self.choi, (self.d_in, self.d_out), keep="A")
            if np.linalg.norm(mar - np.eye(self.d_in)) > CHOI_TOL * self.d_in:
                raise ValueError("Tr_B[Choi] != identity on the input register")
        if self.kraus is not None and self.choi is not None:
            if np.linalg.norm(choi_of_kraus(self.kraus, self.d_in, self.d_out) - self.choi) > CHOI_TOL * self.d_in:
                raise ValueError("Kraus and Choi representations disagree")

    @property
    def d_in(self) -> int:
        return 2**self.n_in

    @property
    def d_out(self) -> int:
        return 2**self.n_out

    def choi_matrix(self) -> np.ndarray:
        if self.choi is None:
            self.choi = choi_of_kraus(self.kraus, self.d_in, self.d_out)
        return self.choi

    def kraus_list(self) -> list:
        if self.kraus is None:
            self.kraus = kraus_from_choi(self.choi, self.d_in, self.d_out)
        return self.kraus


def choi_of(ch: ChannelRep) -> np.ndarray:
    """Choi matrix of a channel given by its Kraus list."""
    if ch.kraus is None:
        raise ValueError("choi_of expects a Kraus-represented channel")
    return choi_of_kraus(ch.kraus, ch.d_in, ch.d_out)


def kraus_from_choi(choi: np.ndarray, d_in: int, d_out: int) -> list:
    w, v = np.linalg.eigh(check_hermitian(choi))
    kraus = []
    for lam, vec in zip(w, v.T):
        if lam > 1e-12:
            kraus.append(np.sqrt(lam) * vec.reshape(d_in, d_out).T)
    return kraus


def apply_channel(ch: ChannelRep, rho: np.ndarray) -> np.ndarray:
    """Apply a channel to a state; Kraus path if available, else Choi path
    ``Tr_A[(rho^T x 1_B) C]``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.d_in, ch.d_in):
        raise ValueError(f"state shape {rho.shape} does not match channel input dim {ch.d_in}")
    if ch.kraus is not None:
        return sum(k @ rho @ dag(k) for k in ch.kraus)
    big = np.kron(rho.T, np.eye(ch.d_out)) @ ch.choi_matrix()
    return partial_trace(big, (ch.d_in, ch.d_out), keep="B")


def identity_channel(n: int) -> ChannelRep:
    return ChannelRep(n, n, kraus=[np.eye(2**n, dtype=complex)])


def unitary_channel(u: np.ndarray) -> ChannelRep:
    u = np.asarray(u, dtype=complex)
    n = int(round(np.log2(u.shape[0])))
    return ChannelRep(n, n, kraus=[u])


def depolarizing_channel(n: int, p: float = 1.0) -> ChannelRep:
    """With probability p replace the state by the maximally mixed one."""
    d = 2**n
    kraus = [np.sqrt(1 - p + p / d**2) * np.eye(d, dtype=complex)]
    for idx in all_pauli_indices(n)[1:]:
        kraus.append(np.sqrt(p) / d * pauli_operator(idx))
    return ChannelRep(n, n, kraus=kraus)


@dataclass
class ErrorRateVector:
    """Probability vector over the 4**n Pauli strings, flat (z,x) order."""

    n: int
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (4**self.n,):
            raise ValueError(f"expected length {4**self.n}, got {self.p.shape}")
        if self.p.min() < -1e-12 or self.p.max() > 1 + 1e-12:
            raise ValueError("entries must lie in [0, 1]")
        if abs(self.p.sum() - 1.0) > 1e-9:
            raise ValueError(f"entries sum to {self.p.sum()!r}, not 1")

    def point_mass(self) -> int | None:
        hot = np.flatnonzero(self.p > 1 - 1e-12)
        return int(hot[0]) if hot.size else None


def pauli_channel(rates: ErrorRateVector) -> ChannelRep:
    """Pauli channel with the given error rates; Kraus sqrt(p_w) P^w."""
    paulis = pauli_stack(rates.n)
    kraus = [np.sqrt(pw) * paulis[w] for w, pw in enumerate(rates.p) if pw > 0]
    gamma = gamma_stack(rates.n)
    choi = np.einsum("w,wij->ij", rates.p, gamma)
    return ChannelRep(rates.n, rates.n, kraus=kraus, choi=choi)


def gamma_stack(n: int) -> np.ndarray:
    """Unnormalized Bell projectors Gamma^w = 2**n Phi^w, flat order."""
    b = bell_basis(n)
    return 2**n * np.einsum("iw,jw->wij", b, b.conj())


def pauli_twirl(ch: ChannelRep) -> ErrorRateVector:
    """Error rates of the Pauli-twirled channel: p_w = Tr[Phi^w C] / 2**n."""
    if ch.n_in != ch.n_out:
        raise ValueError("Pauli twirl needs a square channel")
    p = bell_diagonal_coefficients(ch.choi_matrix(), ch.n_in) / 2**ch.n_in
    p = np.clip(p, 0.0, None)
    return ErrorRateVector(ch.n_in, p / p.sum())


def twirled_choi(ch: ChannelRep) -> np.ndarray:
    """Choi matrix of the Pauli-twirled channel (Bell-basis pinching)."""
    return bell_pinch(ch.choi_matrix(), ch.n_in)


def twirl_by_conjugation(ch: ChannelRep) -> ChannelRep:
    """Twirled channel built the operational way: average the 4**n Pauli
    conjugations P^dag N(P . P^dag) P.  Independent of the pinching route."""
    n = ch.n_in
    paulis = pauli_stack(n)
    kraus = []
    for p in paulis:
        for k in ch.kraus_list():
            kraus.append(dag(p) @ k @ p / 2**n)
    return ChannelRep(n, n, kraus=kraus)


@dataclass
class ChannelTestOperator:
    """PSD operator E on (A, B) with E <= sigma_A x 1_B for some state sigma.

    ``certificate`` is the dominating sigma_A when known; product tests built
    from (rho, M) carry sigma = rho^T.
    """

    n: int
    op: np.ndarray
    certificate: np.ndarray | None = None

    def __post_init__(self):
        self.op = check_hermitian(self.op)
        d = 2**self.n
        if self.op.shape != (d * d, d * d):
            raise ValueError(f"test operator shape {self.op.shape}, expected {(d * d, d * d)}")
        if np.linalg.eigvalsh(self.op).min() < -PSD_TOL:
            raise ValueError("test operator is not PSD")
        if self.certificate is not None:
            self.certificate = check_density(self.certificate)
            gap = np.kron(self.certificate, np.eye(d)) - self.op
            if np.linalg.eigvalsh(gap).min() < -PSD_TOL:
                raise ValueError("certificate does not dominate the test operator")


def product_test(rho: np.ndarray, effect: np.ndarray) -> ChannelTestOperator:
    """Memoryless test E = rho^T x M with certificate sigma = rho^T."""
    rho = check_density(rho)
    effect = check_hermitian(effect)
    ev = np.linalg.eigvalsh(effect)
    if ev.min() < -PSD_TOL or ev.max() > 1 + PSD_TOL:
        raise ValueError("effect must satisfy 0 <= M <= 1")
    n = int(round(np.log2(rho.shape[0])))
    return ChannelTestOperator(n, np.kron(rho.T, effect), certificate=rho.T.copy())


def born_value(test: ChannelTestOperator, ch: ChannelRep) -> float:
    """Generalized Born rule Tr[E C(N)]."""
    val = float(np.real(np.trace(test.op @ ch.choi_matrix())))
    if val < -1e-8 or val > 1 + 1e-8:
        raise ValueError(f"Born value {val} outside [0, 1]; invalid test operator?")
    return val


def challenge_vector(test: ChannelTestOperator) -> np.ndarray:
    """e_w = Tr[E Gamma^w]: the Bell coefficients that reduce Born values of
    Pauli channels to dot products e . p."""
    return np.clip(bell_diagonal_coefficients(test.op, test.n) * 2**test.n, 0.0, None)


def diamond_distance_pauli(p: ErrorRateVector, q: ErrorRateVector) -> float:
    """Diamond distance between two Pauli channels: the l1 distance of their
    error rates.  The maximally entangled probe achieves it because the Choi
    difference is Bell diagonal; tests cross-check both directions."""
    if p.n != q.n:
        raise ValueError("error-rate vectors have different register sizes")
    return float(np.abs(p.p - q.p).sum())


def diamond_upper_bound_choi(cha: ChannelRep, chb: ChannelRep) -> float:
    """Trace norm of the Choi difference; upper bounds the diamond distance."""
    return trace_norm(cha.choi_matrix() - chb.choi_matrix())


def diamond_lower_bound_probe(cha: ChannelRep, chb: ChannelRep, trials: int, rng) -> float:
    """Max over sampled pure bipartite probes of ||(id x (N_A - N_B))(psi)||_1.

    Always a lower bound on the diamond distance.  The maximally entangled
    probe is evaluated first, so for Bell-diagonal differences the bound is
    already tight at trials >= 1.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if (cha.n_in, cha.n_out) != (chb.n_in, chb.n_out):
        raise ValueError("channels must share dimensions")
    d = cha.d_in
    ka, kb = cha.kraus_list(), chb.kraus_list()

    def probe_value(vec):
        psi = np.outer(vec, vec.conj())
        out = np.zeros((d * chb.d_out,) * 2, dtype=complex)
        for k in ka:
            kk = np.kron(np.eye(d), k)
            out += kk @ psi @ dag(kk)
        for k in kb:
            kk = np.kron(np.eye(d), k)
            out -= kk @ psi @ dag(kk)
        return trace_norm(out)

    best = probe_value(max_entangled_vector(cha.n_in))
    for _ in range(trials - 1):
        v = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
        best = max(best, probe_value(v / np.linalg.norm(v)))
    return best


# ---------------------------------------------------------------------------
# random instances (Stinespring / Ginibre samplers, reproducible by stream)


def random_isometry(d_from: int, d_to: int, rng) -> np.ndarray:
    g = rng.standard_normal((d_to, d_from)) + 1j * rng.standard_normal((d_to, d_from))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.real(np.diag(r)) + 1e-300)


def random_channel(n: int, rng, env_qubits: int | None = None) -> ChannelRep:
    """Haar-random Stinespring dilation: QR of a Gaussian matrix gives the
    isometry, environment traced out."""
    d = 2**n
    d_env = 2 ** (n if env_qubits is None else env_qubits)
    v = random_isometry(d, d * d_env, rng)
    kraus = [v[e::d_env, :] for e in range(d_env)]
    return ChannelRep(n, n, kraus=kraus)


def random_pure_state(d: int, rng) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_density(d: int, rng) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ dag(g)
    return rho / np.real(np.trace(rho))


def random_effect(d: int, rng) -> np.ndarray:
    u = random_isometry(d, d, rng)
    return (u * rng.uniform(0.0, 1.0, size=d)) @ dag(u)


def random_product_test(n: int, rng, pure: bool = True) -> ChannelTestOperator:
    d = 2**n
    rho = random_pure_state(d, rng) if pure else random_density(d, rng)
    return product_test(rho, random_effect(d, rng))


def random_error_rates(n: int, rng) -> ErrorRateVector:
    p = rng.dirichlet(np.ones(4**n))
    return ErrorRateVector(n, p)


# ---------------------------------------------------------------------------
# serialization


def channel_to_obj(ch: ChannelRep) -> dict:
    obj = {"kind": "channel", "n_in": ch.n_in, "n_out": ch.n_out}
    if ch.kraus is not None:
        obj["kraus"] = [serialize.matrix_to_obj(k) for k in ch.kraus]
    if ch.choi is not None:
        obj["choi"] = serialize.matrix_to_obj(ch.choi)
    return obj


def channel_from_obj(obj: dict) -> ChannelRep:
    kraus = [serialize.matrix_from_obj(k) for k in obj["kraus"]] if "kraus" in obj else None
    choi = serialize.matrix_from_obj(obj["choi"]) if "choi" in obj else None
    return ChannelRep(obj["n_in"], obj["n_out"], kraus=kraus, choi=choi)


def testop_to_obj(test: ChannelTestOperator) -> dict:
    obj = {"kind": "channel-test", "n": test.n, "op": serialize.matrix_to_obj(test.op)}
    if test.certificate is not None:
        obj["certificate"] = serialize.matrix_to_obj(test.certificate)
    return obj


def testop_from_obj(obj: dict) -> ChannelTestOperator:
    cert = serialize.matrix_from_obj(obj["certificate"]) if "certificate" in obj else None
    return ChannelTestOperator(obj["n"], serialize.matrix_from_obj(obj["op"]), certificate=cert)
