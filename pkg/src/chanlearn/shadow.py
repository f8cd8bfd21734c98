"""Bell-sampling shadow estimation for Pauli channels, the twirled extension
to arbitrary channels, and the time-local reduction for multi-time processes.

Bell sampling measures the Choi state in the maximally entangled basis; the
outcome distribution is exactly the error-rate vector of the Pauli-twirled
channel.  Query answering is then classical: every test operator E reduces to
the statistical query e . p with e_w = Tr[E Gamma^w].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChannelRep,
    ChannelTestOperator,
    challenge_vector,
    diamond_upper_bound_choi,
    pauli_twirl,
    twirled_choi,
)
from .combs import CombOperator, TesterOperator, time_local_twirl, twirled_comb
from .opcore import PauliIndex, bell_basis, trace_norm


@dataclass
class QueryBudget:
    """Sampling/answering budget: k Bell samples, M queries at accuracy
    epsilon and confidence delta; mechanism "naive" (raw empirical means,
    non-adaptive guarantee only), "split-noise" (fresh sample block per query
    plus Gaussian noise, for adaptive streams), or "exact" (population
    vector, k ignored)."""

    k: int
    epsilon: float
    delta: float
    M: int
    mechanism: str = "naive"

    def __post_init__(self):
        if self.mechanism not in ("naive", "split-noise", "exact"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.mechanism != "exact" and self.k < 1:
            raise ValueError("need at least one sample")
        if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
            raise ValueError("epsilon and delta must lie in (0, 1)")


def bell_sample(ch: ChannelRep, rng, k: int = 1) -> np.ndarray:
    """Draw k Bell-measurement outcomes from the channel's Choi state;
    returns flat (z, x) indices.  For a Pauli channel the distribution is its
    error-rate vector."""
    if ch.n_in != ch.n_out:
        raise ValueError("Bell sampling needs a square channel")
    q = pauli_twirl(ch).p
    return rng.choice(q.size, size=k, p=q)


def sample_indices(samples: np.ndarray, n: int):
    return [PauliIndex.from_flat(int(s), n) for s in samples]


@dataclass
class ShadowSession:
    """Answers statistical queries e . p from Bell samples.

    "naive" answers every query from the full empirical distribution.
    "split-noise" partitions the samples into floor(sqrt(k)) blocks, consumes
    one fresh block per query and adds N(0, (epsilon/6)^2) noise; it raises
    once the blocks run out.  "exact" uses the supplied population vector.
    """

    budget: QueryBudget
    empirical: np.ndarray = None
    blocks: list = None
    rng: object = None
    queries_answered: int = 0

    @classmethod
    def from_samples(cls, samples: np.ndarray, n_entries: int, budget: QueryBudget, rng=None):
        samples = np.asarray(samples, dtype=int)
        if budget.mechanism == "exact":
            raise ValueError("exact mechanism takes a population vector, not samples")
        counts = np.bincount(samples, minlength=n_entries).astype(float)
        empirical = counts / counts.sum()
        blocks = None
        if budget.mechanism == "split-noise":
            if rng is None:
                raise ValueError("split-noise needs an rng for the calibrated noise")
            nblocks = max(int(np.sqrt(samples.size)), 1)
            size = samples.size // nblocks
            blocks = [samples[i * size:(i + 1) * size] for i in range(nblocks)]
            blocks = [np.bincount(b, minlength=n_entries) / b.size for b in blocks]
        return cls(budget=budget, empirical=empirical, blocks=blocks, rng=rng)

    @classmethod
    def from_population(cls, p: np.ndarray, budget: QueryBudget):
        if budget.mechanism != "exact":
            raise ValueError("population sessions use the exact mechanism")
        return cls(budget=budget, empirical=np.asarray(p, dtype=float))

    def answer(self, e: np.ndarray) -> float:
        e = np.asarray(e, dtype=float)
        if e.min() < -1e-10 or e.max() > 1 + 1e-10:
            raise ValueError("query coefficients must lie in [0, 1]")
        if self.budget.mechanism in ("naive", "exact"):
            out = float(e @ self.empirical)
        else:
            if self.queries_answered >= len(self.blocks):
                raise RuntimeError(f"split-noise budget exhausted after {len(self.blocks)} queries")
            block = self.blocks[self.queries_answered]
            out = float(e @ block) + float(self.rng.normal(0.0, self.budget.epsilon / 6.0))
        self.queries_answered += 1
        return out


def _query_vector(query, n: int) -> np.ndarray:
    if isinstance(query, ChannelTestOperator):
        return challenge_vector(query)
    return np.asarray(query, dtype=float)


def shadow_answer(samples, queries, budget: QueryBudget, n: int, rng=None) -> list:
    """Answer a (possibly adaptive) stream of test-operator queries from Bell
    samples; ``samples`` may be an index array or, for the exact mechanism,
    the population distribution itself."""
    if budget.mechanism == "exact":
        sess = ShadowSession.from_population(np.asarray(samples, dtype=float), budget)
    else:
        sess = ShadowSession.from_samples(samples, 4**n, budget, rng)
    return [sess.answer(_query_vector(q, n)) for q in queries]


def twirled_shadow(ch: ChannelRep, queries, budget: QueryBudget, rng):
    """Shadow answers for an arbitrary channel via its Pauli twirl.

    The answers estimate Tr[E C(twirl)] to the budget accuracy; against the
    raw channel they are off by at most the twirling slack, reported as
    half the Choi-trace-norm upper bound on the diamond distance between the
    channel and its twirl.  Raises if the slack already exceeds epsilon.
    """
    slack = 0.5 * trace_norm(ch.choi_matrix() - twirled_choi(ch))
    if slack >= budget.epsilon:
        raise ValueError(f"twirling slack {slack:.4f} exceeds the accuracy budget {budget.epsilon}")
    p = pauli_twirl(ch).p
    if budget.mechanism == "exact":
        answers = shadow_answer(p, queries, budget, ch.n_in)
    else:
        samples = rng.choice(p.size, size=budget.k, p=p)
        answers = shadow_answer(samples, queries, budget, ch.n_in, rng)
    report = {
        "slack": float(slack),
        "epsilon_effective": float(budget.epsilon + slack),
        "mechanism": budget.mechanism,
        "k": budget.k,
    }
    return answers, report


def comb_shadow(comb: CombOperator, testers, budget: QueryBudget, rng):
    """Shadow answers for an r-step process from time-local Bell sampling.

    The joint outcome distribution is the error-rate vector of the twirled
    process, which is the Choi of an (n r)-qubit Pauli channel; answering a
    tester reduces to the statistical query against that distribution.  The
    slack is half the trace norm of (comb - twirled comb), an upper bound on
    half their strategy-norm distance.
    """
    q = time_local_twirl(comb)
    slack = 0.5 * trace_norm(comb.op - twirled_comb(comb).op)
    if slack >= budget.epsilon:
        raise ValueError(f"twirling slack {slack:.4f} exceeds the accuracy budget {budget.epsilon}")
    n_total = int(round(np.log2(np.prod(comb.in_dims))))
    evecs = []
    cols = None
    for d in comb.in_dims:
        b = bell_basis(int(round(np.log2(d))))
        cols = b if cols is None else np.kron(cols, b)
    scale = float(np.prod(comb.in_dims))
    for t in testers:
        op = t.op if isinstance(t, TesterOperator) else np.asarray(t)
        if op.ndim == 2:
            e = scale * np.real(np.einsum("ij,ik,kj->j", cols.conj(), op, cols))
            evecs.append(np.clip(e, 0.0, None))
        else:
            evecs.append(np.asarray(op, dtype=float))
    if budget.mechanism == "exact":
        answers = shadow_answer(q, evecs, budget, n_total)
    else:
        samples = rng.choice(q.size, size=budget.k, p=q)
        answers = shadow_answer(samples, evecs, budget, n_total, rng)
    report = {
        "slack": float(slack),
        "epsilon_effective": float(budget.epsilon + slack),
        "mechanism": budget.mechanism,
        "k": budget.k,
    }
    return answers, report
