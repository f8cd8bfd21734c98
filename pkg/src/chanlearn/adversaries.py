"""Challenge/feedback generators: realizable adversaries and the explicit
lower-bound constructions (function embeddings and the all-zeros
query-budget game)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .channels import (
    ChannelRep,
    ChannelTestOperator,
    ErrorRateVector,
    product_test,
    random_effect,
)
from .combs import CombOperator, TesterOperator, tester_product
from .learners import MixtureBasis
from .opcore import PauliIndex, computational_basis_state, kron_all, pauli_stack

_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
_MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2)


@dataclass
class RealizablePauliAdversary:
    """Random product tests against a hidden Pauli channel; feedback within
    epsilon/3 of the truth.

    Challenges are generated in fixed-size chunks keyed by (seed, chunk), so
    any round is randomly accessible (replay, audits, parallel splitting)
    while the per-round cost stays at a few vectorized operations: a chunk of
    pure probe states and random effects is drawn at once and the Bell
    coefficients e_w = <psi| P_w' M P_w |psi> come from one einsum.
    """

    rates: ErrorRateVector
    epsilon: float
    seed: int
    tag: str = "realizable-pauli"
    chunk: int = 512

    def __post_init__(self):
        self._paulis = pauli_stack(self.rates.n)
        self._cache_index = -1
        self._cache = None

    @property
    def n(self) -> int:
        return self.rates.n

    def _chunk_data(self, index: int):
        if index == self._cache_index:
            return self._cache
        rng = stream(self.seed, self.tag, index)
        d = 2**self.n
        c = self.chunk
        psi = rng.standard_normal((c, d)) + 1j * rng.standard_normal((c, d))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        g = rng.standard_normal((c, d, d)) + 1j * rng.standard_normal((c, d, d))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.real(np.einsum("cii->ci", r)) + 1e-300)[:, None, :]
        vals = rng.uniform(0.0, 1.0, size=(c, d))
        effects = np.einsum("cak,ck,cbk->cab", q, vals, q.conj())
        conj = np.einsum("wab,cb->cwa", self._paulis, psi)
        e = np.real(np.einsum("cwa,cab,cwb->cw", conj.conj(), effects, conj))
        e = np.clip(e, 0.0, 1.0)
        truth = e @ self.rates.p
        noise = rng.uniform(-self.epsilon / 3.0, self.epsilon / 3.0, size=c)
        b = np.clip(truth + noise, 0.0, 1.0)
        self._cache_index = index
        self._cache = (e, truth, b, psi, effects)
        return self._cache

    def challenge(self, t: int):
        """Return (e_vector, truth, feedback) for round t (1-based)."""
        e, truth, b, _, _ = self._chunk_data((t - 1) // self.chunk)
        i = (t - 1) % self.chunk
        return e[i], float(truth[i]), float(b[i])

    def rounds(self, total: int):
        for t in range(1, total + 1):
            e, truth, b = self.challenge(t)
            yield e, b, truth

    def test_operator(self, t: int) -> ChannelTestOperator:
        """Operator form of round t's challenge (for audits); its Bell
        coefficients match challenge(t) exactly."""
        _, _, _, psi, effects = self._chunk_data((t - 1) // self.chunk)
        i = (t - 1) % self.chunk
        return product_test(np.outer(psi[i], psi[i].conj()), effects[i])


@dataclass
class RealizableMixtureAdversary:
    """Random product tests/testers against a hidden mixture of known
    processes from a fixed basis."""

    basis: MixtureBasis
    weights: np.ndarray
    epsilon: float
    seed: int
    dims: tuple = None          # (in_dims, out_dims) per step; channels: ([d], [d])
    tag: str = "realizable-mixture"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.basis.k,) or abs(self.weights.sum() - 1) > 1e-9:
            raise ValueError("weights must be a distribution over the basis")
        if self.dims is None:
            d = int(round(np.sqrt(self.basis.stack.shape[1])))
            self.dims = ([d], [d])

    def sample_test(self, rng):
        in_dims, out_dims = self.dims
        states, effects = [], []
        for da, db in zip(in_dims, out_dims):
            v = rng.standard_normal(da) + 1j * rng.standard_normal(da)
            v /= np.linalg.norm(v)
            states.append(np.outer(v, v.conj()))
            effects.append(random_effect(db, rng))
        if len(in_dims) == 1:
            return product_test(states[0], effects[0])
        return tester_product(states, effects)

    def rounds(self, total: int):
        for t in range(1, total + 1):
            rng = stream(self.seed, self.tag, t)
            test = self.sample_test(rng)
            e = self.basis.challenge(test.op)
            truth = float(e @ self.weights)
            b = truth + rng.uniform(-self.epsilon / 3.0, self.epsilon / 3.0)
            yield e, float(np.clip(b, 0.0, 1.0)), truth


# ---------------------------------------------------------------------------
# embeddings of Boolean functions (mistake lower bounds)


def pauli_embedding_channel(f: np.ndarray) -> ChannelRep:
    """Unitary Pauli channel conjugating by (x)_i Z^{f(i)}."""
    f = np.asarray(f, dtype=int)
    z = np.diag([1.0, -1.0]).astype(complex)
    u = kron_all(z if fi else np.eye(2, dtype=complex) for fi in f)
    return ChannelRep(len(f), len(f), kraus=[u])


def pauli_lower_bound_challenges(n: int):
    """The n challenges E(t) = rho(t)^T x M(t) whose Born values against the
    hidden channel read out f(t) exactly: |+> probes qubit t, |-> detects the
    phase flip."""
    tests = []
    for t in range(1, n + 1):
        front = computational_basis_state([0] * (t - 1)) if t > 1 else np.array([1.0 + 0j])
        back = computational_basis_state([0] * (n - t)) if t < n else np.array([1.0 + 0j])
        probe = np.kron(np.kron(front, _PLUS), back)
        detect = np.kron(np.kron(front, _MINUS), back)
        tests.append(product_test(np.outer(probe, probe.conj()), np.outer(detect, detect.conj())))
    return tests


def function_embedding_adversary(kind: str, f: dict | np.ndarray):
    """Embed a Boolean function on q bits into a channel; returns
    (channel, [(x, ChannelTestOperator, value)]) with exact {0,1} values.

    kind "unitary": the (q+1)-qubit XOR oracle |x,b> -> |x, b + f(x)>, tests
    prepared at b = 0 and measured at b = 1.
    kind "channel": the q-qubit measure-and-prepare channel writing f(x) on
    the first output qubit.
    """
    if isinstance(f, dict):
        q = max(len(k) for k in f)
        fvec = np.array([f[tuple((x >> (q - 1 - i)) & 1 for i in range(q))] for x in range(2**q)], dtype=int)
    else:
        fvec = np.asarray(f, dtype=int)
        q = int(round(np.log2(fvec.size)))
    if q > 3:
        raise ValueError("desk scale keeps function embeddings at q <= 3")
    rows = []
    if kind == "unitary":
        d = 2 ** (q + 1)
        u = np.zeros((d, d), dtype=complex)
        for x in range(2**q):
            for b in (0, 1):
                u[(x << 1) | (b ^ int(fvec[x])), (x << 1) | b] = 1.0
        ch = ChannelRep(q + 1, q + 1, kraus=[u])
        for x in range(2**q):
            rho = np.zeros(d, dtype=complex)
            rho[x << 1] = 1.0
            meas = np.zeros(d, dtype=complex)
            meas[(x << 1) | 1] = 1.0
            rows.append((x, product_test(np.outer(rho, rho.conj()), np.outer(meas, meas.conj())), int(fvec[x])))
    elif kind == "channel":
        d = 2**q
        tail = np.zeros(max(d // 2, 1), dtype=complex)
        tail[0] = 1.0
        kraus = []
        for x in range(2**q):
            out = np.kron(np.array([1.0, 0.0], dtype=complex) if fvec[x] == 0 else np.array([0.0, 1.0], dtype=complex), tail)
            k = np.zeros((d, d), dtype=complex)
            k[:, x] = out
            kraus.append(k)
        ch = ChannelRep(q, q, kraus=kraus)
        one_tail = np.kron(np.array([0.0, 1.0], dtype=complex), tail)
        m_op = np.outer(one_tail, one_tail.conj())
        for x in range(2**q):
            basis = np.zeros(d, dtype=complex)
            basis[x] = 1.0
            rows.append((x, product_test(np.outer(basis, basis.conj()), m_op), int(fvec[x])))
    else:
        raise ValueError("kind must be 'unitary' or 'channel'")
    return ch, rows


# ---------------------------------------------------------------------------
# the all-zeros query-budget game


class BudgetExhausted(RuntimeError):
    pass


class MediatedChallenge:
    """Challenge vector behind a read-logged interface; the game charges the
    learner for every distinct coefficient it inspects."""

    def __init__(self, values: np.ndarray):
        self._values = values
        self.reads: set = set()

    @property
    def size(self) -> int:
        return self._values.size

    def read(self, index: int) -> float:
        if not 0 <= index < self._values.size:
            raise IndexError(index)
        self.reads.add(int(index))
        return float(self._values[index])


@dataclass
class UniformQueryLearner:
    """Budget-q learner over a 4**n-entry coefficient vector: reads q
    entries per round, predicts with uniform weights over what it saw, and
    rounds at 1/2."""

    n_entries: int
    queries_per_round: int
    seed: int
    _round: int = 0

    def predict(self, challenge: MediatedChallenge) -> int:
        self._round += 1
        rng = stream(self.seed, "query-learner", self._round)
        picks = rng.choice(challenge.size, size=self.queries_per_round, replace=False)
        total = sum(challenge.read(int(i)) for i in picks)
        value = total / self.n_entries
        return 1 if value >= 0.5 else 0

    def observe(self, feedback: float) -> None:
        pass


@dataclass
class ConsistencyCertificate:
    """Post-hoc consistency data for the all-zeros game: a distribution
    p_star and per-round 1-sparse (or zero) claimed challenge vectors that
    reproduce every contradictory feedback while vanishing on all logged
    reads."""

    n_entries: int
    hidden_index: int
    p_star: np.ndarray
    claims: list                    # per round: (feedback bit, logged read set)

    def claimed_vector(self, t: int) -> np.ndarray:
        bit, _ = self.claims[t]
        v = np.zeros(self.n_entries)
        if bit:
            v[self.hidden_index] = 1.0
        return v

    def verify(self) -> bool:
        if abs(self.p_star.sum() - 1.0) > 1e-15 or self.p_star.min() < 0:
            return False
        for t, (bit, reads) in enumerate(self.claims):
            v = self.claimed_vector(t)
            if any(v[i] != 0.0 for i in reads):
                return False
            if float(self.p_star @ v) != float(bit):
                return False
            if np.count_nonzero(v) > 1:
                return False
        return True


def all_zeros_game(n_register: int, learner, rounds: int):
    """Play the always-contradict adversary of the query-budget lower bound.

    Every round the challenge vector is all zeros (test operator E = 0); the
    adversary answers the negation of the learner's rounded prediction,
    forcing a mistake.  Afterwards it exhibits a point-mass p_star and
    1-sparse claimed challenges (realizable as E = Gamma^w / 4**n) supported
    on an index the learner never read.  Raises BudgetExhausted if the
    learner reads more than 4**n_register - 1 distinct coefficients.

    Returns (mistake_count, per_round_logs, certificate).
    """
    m = 4**n_register
    union: set = set()
    logs = []
    for _ in range(rounds):
        challenge = MediatedChallenge(np.zeros(m))
        pred = learner.predict(challenge)
        y = 1 if pred >= 0.5 else 0
        feedback = 1 - y
        learner.observe(feedback)
        union |= challenge.reads
        logs.append((feedback, frozenset(challenge.reads)))
        if len(union) > m - 1:
            raise BudgetExhausted(f"learner read {len(union)} distinct coefficients of {m}")
    hidden = next(i for i in range(m) if i not in union)
    p_star = np.zeros(m)
    p_star[hidden] = 1.0
    cert = ConsistencyCertificate(m, hidden, p_star, logs)
    return len(logs), logs, cert


def certificate_realization(cert: ConsistencyCertificate, n_register: int):
    """The test operator realizing a claimed 1-sparse challenge:
    E = Gamma^w / 4**n has e-vector exactly the indicator at w."""
    from .channels import gamma_stack

    return gamma_stack(n_register)[cert.hidden_index] / 4**n_register
