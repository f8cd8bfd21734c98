"""Closed-form evaluators for the regret/mistake/sample-complexity formulas.

Where a guarantee is stated with an explicit constant chain, that chain is
the default and the bound is marked ``asserted`` (runs must satisfy it).
Where only a big-O is available, the evaluator exposes the pre-big-O
expression with the constant as a caller parameter defaulting to 1, marked
``asserted = False`` so nobody mistakes an invented constant for ground
truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LOG4 = math.log(4.0)


@dataclass
class BoundQuery:
    which: str
    params: dict = field(default_factory=dict)


def _binom_log(n: int, k: int) -> float:
    if n < k:
        raise ValueError(f"binomial ({n} choose {k}) needs n >= {k}")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def mwu_regret(T: int, d: int, eta: float) -> float:
    """eta T + log(d)/eta: cost-vs-fixed-distribution slack of the
    multiplicative weights update at learning rate eta."""
    _require(T=T, d=d, eta=eta)
    return eta * T + math.log(d) / eta


def mwu_regret_opt(T: int, d: int) -> float:
    """2 sqrt(T log d): the slack at the optimizing eta = sqrt(log d / T)."""
    _require(T=T, d=d)
    return 2.0 * math.sqrt(T * math.log(d))


def optimal_eta(T: int, d: int) -> float:
    """min(1/2, sqrt(log d / T)) for a known horizon."""
    _require(T=T, d=d)
    if d == 1:
        return 0.5
    return min(0.5, math.sqrt(math.log(d) / T))


def pauli_regret(T: int, n: int, L: float = 1.0) -> float:
    """2 L sqrt(T n log 4): error-rate learner regret at optimal eta."""
    _require(T=T, n=n, L=L)
    return 2.0 * L * math.sqrt(T * n * LOG4)


def mixture_regret(T: int, K: int, L: float = 1.0) -> float:
    """2 L sqrt(T log K): mixture-of-known-processes regret at optimal eta."""
    _require(T=T, K=K, L=L)
    return 2.0 * L * math.sqrt(T * math.log(K))


def mixture_mistake(K: int, eps: float, L: float = 1.0, C: float = 2.0) -> int:
    """ceil((3 C L sqrt(log K) / (2 eps))^2) epsilon-mistakes for the
    mistake-driven mixture learner under epsilon/3 feedback noise.  The
    default C = 2 is the explicit constant of the optimal-eta regret, giving
    ceil(9 L^2 log K / eps^2)."""
    _require(K=K, eps=eps, L=L, C=C)
    if K == 1:
        return 0
    return math.ceil((3.0 * C * L * math.sqrt(math.log(K)) / (2.0 * eps)) ** 2)


def pauli_mistake(n: int, eps: float, L: float = 1.0, C: float = 2.0) -> int:
    _require(n=n)
    return mixture_mistake(4**n, eps, L, C)


def covering_log(n: int, G: int, eps: float) -> float:
    """Log covering number of n-qubit G-gate channels in diamond norm:
    G log(n choose 2) + 512 G log(6 G / eps), evaluated in log space."""
    _require(n=n, G=G, eps=eps)
    return G * _binom_log(n, 2) + 512.0 * G * math.log(6.0 * G / eps)


def comb_covering_log(n: int, G: int, eps: float) -> float:
    """Multi-time analogue with 1024 in place of 512."""
    _require(n=n, G=G, eps=eps)
    return G * _binom_log(n, 2) + 1024.0 * G * math.log(6.0 * G / eps)


def _gate_chain(n: int, G: int, L: float) -> float:
    # explicit constant chain from the sequential-covering regret analysis
    return 24.0 * L * math.sqrt(512.0 * G) * (
        math.sqrt(math.log(6.0 * G)) + math.sqrt(math.pi) / 2.0 + math.sqrt(2.0 * math.log(n))
    )


def gate_regret(T: int, n: int, G: int, L: float = 1.0) -> float:
    """Regret of online learning G-gate channels: 24 L sqrt(512 T G)
    (sqrt(log 6G) + sqrt(pi)/2 + sqrt(2 log n)); explicit chain, no hidden
    constant."""
    _require(T=T, n=n, G=G, L=L)
    if n < 2:
        raise ValueError("gate-complexity bounds need n >= 2")
    return math.sqrt(T) * _gate_chain(n, G, L)


def gate_mistake(n: int, G: int, eps: float, L: float = 1.0, C: float | None = None) -> int:
    """Mistake cap for G-gate channels, (3 h / (2 eps))^2 with h the sqrt(T)
    coefficient of the regret: the explicit chain by default, or
    C L sqrt(G log(G n)) when a constant C is supplied."""
    _require(n=n, G=G, eps=eps, L=L)
    if n < 2:
        raise ValueError("gate-complexity bounds need n >= 2")
    h = _gate_chain(n, G, L) if C is None else C * L * math.sqrt(G * math.log(G * n))
    return math.ceil((3.0 * h / (2.0 * eps)) ** 2)


def shadow_samples(n: int, M: int, eps: float, delta: float, C: float = 1.0) -> float:
    """C sqrt(n) log(M) log^{3/2}(1/(eps delta)) / eps^3 channel uses for
    adaptive shadow estimation.  Not asserted: the adaptive-analysis constant
    is external, so C defaults to 1 as a placeholder."""
    _require(n=n, M=M, eps=eps, delta=delta, C=C)
    return C * math.sqrt(n) * math.log(M) * math.log(1.0 / (eps * delta)) ** 1.5 / eps**3


def comb_shadow_samples(n: int, r: int, M: int, eps: float, delta: float, C: float = 1.0) -> float:
    _require(n=n, r=r, M=M, eps=eps, delta=delta, C=C)
    return C * math.sqrt(n * r) * math.log(M) * math.log(1.0 / (eps * delta)) ** 1.5 / eps**3


def sfat_bound(n: int, eps: float, C: float = 1.0) -> float:
    """C n / eps^2 on the sequential fat-shattering dimension of Pauli
    channels.  Not asserted (big-O only)."""
    _require(n=n, eps=eps, C=C)
    return C * n / eps**2


_TABLE = {
    "mwu_regret": (mwu_regret, True),
    "mwu_regret_opt": (mwu_regret_opt, True),
    "optimal_eta": (optimal_eta, True),
    "pauli_regret": (pauli_regret, True),
    "mixture_regret": (mixture_regret, True),
    "mixture_mistake": (mixture_mistake, True),
    "pauli_mistake": (pauli_mistake, True),
    "covering_log": (covering_log, True),
    "comb_covering_log": (comb_covering_log, True),
    "gate_regret": (gate_regret, True),
    "gate_mistake": (gate_mistake, True),
    "shadow_samples": (shadow_samples, False),
    "comb_shadow_samples": (comb_shadow_samples, False),
    "sfat": (sfat_bound, False),
}


def eval_bound(query: BoundQuery | str, **params) -> float:
    """Evaluate one of the closed-form bounds by name."""
    if isinstance(query, BoundQuery):
        which, params = query.which, dict(query.params)
    else:
        which = query
    if which not in _TABLE:
        raise ValueError(f"unknown bound {which!r}; known: {sorted(_TABLE)}")
    fn, _ = _TABLE[which]
    try:
        return fn(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {which}: {exc}") from None


def bound_info(which: str) -> dict:
    fn, asserted = _TABLE[which]
    return {"which": which, "asserted": asserted, "doc": fn.__doc__}


def _require(**kw):
    for name, val in kw.items():
        if val is None:
            raise ValueError(f"missing parameter {name}")
        if name in ("eps", "delta", "eta", "L", "C") and not val > 0:
            raise ValueError(f"parameter {name} must be positive, got {val}")
        if name in ("T", "d", "n", "G", "K", "M", "r") and not (isinstance(val, (int,)) and val >= 1):
            raise ValueError(f"parameter {name} must be a positive integer, got {val!r}")
