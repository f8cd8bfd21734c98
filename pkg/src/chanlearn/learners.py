"""Online learners: multiplicative weights over error rates and mixture
weights, matrix multiplicative weights, projected MMW / mirror descent over
Choi states, the mistake-driven wrapper, and one-pass compression.

Every learner keeps the running sums needed to assert its regret inequality
on the actual run (not in expectation): the multiplicative-weights state
tracks sum_t m.p, sum_t m and sum_t |m|; the matrix states track the
analogous traces.  Wrappers turn these into PASS/FAIL summary entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelTestOperator, challenge_vector, gamma_stack
from .combs import TesterOperator
from .opcore import (
    check_density,
    herm_fn,
    herm_exp_normalized,
    partial_trace,
    von_neumann_entropy,
)
from .transcript import Transcript, challenge_digest

RENORM_PERIOD = 64      # weight rescaling period; predictions are scale free
M_RANGE_TOL = 1e-12


@dataclass
class LipschitzLoss:
    """Convex loss ell_t(y) = ell(y - b_t) with |ell'| <= L on [-1, 1]."""

    kind: str = "absolute"
    L: float = 1.0
    fn: object = None
    dfn: object = None

    def __post_init__(self):
        if self.kind == "absolute":
            self.fn = lambda u: abs(u)
            self.dfn = lambda u: float(np.sign(u))     # sign(0) = 0 subgradient
            self.L = 1.0
        elif self.kind == "squared":
            self.fn = lambda u: u * u
            self.dfn = lambda u: 2.0 * u
            self.L = 2.0
        elif self.kind == "custom":
            if self.fn is None or self.dfn is None:
                raise ValueError("custom loss needs fn and dfn")
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    def value(self, y: float, b: float) -> float:
        return float(self.fn(y - b))

    def deriv(self, y: float, b: float) -> float:
        d = float(self.dfn(y - b))
        if abs(d) > self.L * (1 + 1e-9):
            raise ValueError(f"loss derivative {d} exceeds the declared Lipschitz constant {self.L}")
        return d


# ---------------------------------------------------------------------------
# multiplicative weights over d decisions


@dataclass
class MwuState:
    """Weights over d decisions, linear update w(1 - eta m) or Hedge
    w exp(-eta m).  Running sums support the per-run regret assertions."""

    d: int
    eta: float
    rule: str = "linear"
    w: np.ndarray = None
    updates: int = 0
    cum_mp: float = 0.0
    cum_pm2: float = 0.0
    cum_m: np.ndarray = None
    cum_abs_m: np.ndarray = None

    def __post_init__(self):
        if self.rule == "linear" and not 0 < self.eta <= 0.5:
            raise ValueError("linear rule needs eta in (0, 1/2]")
        if self.rule == "hedge" and not 0 < self.eta <= 1.0:
            raise ValueError("hedge rule needs eta in (0, 1]")
        if self.rule not in ("linear", "hedge"):
            raise ValueError(f"unknown update rule {self.rule!r}")
        if self.w is None:
            self.w = np.ones(self.d)
        if self.cum_m is None:
            self.cum_m = np.zeros(self.d)
            self.cum_abs_m = np.zeros(self.d)

    def entropy(self) -> float:
        p = mwu_predict(self)
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())


def mwu_predict(state: MwuState) -> np.ndarray:
    return state.w / state.w.sum()


def mwu_update(state: MwuState, m: np.ndarray) -> MwuState:
    m = np.asarray(m, dtype=float)
    if m.shape != (state.d,):
        raise ValueError(f"cost vector shape {m.shape}, expected ({state.d},)")
    if np.abs(m).max() > 1 + M_RANGE_TOL:
        raise ValueError(f"cost entry {m[np.abs(m).argmax()]} outside [-1, 1]")
    p = mwu_predict(state)
    state.cum_mp += float(m @ p)
    state.cum_pm2 += float((m * m) @ p)
    state.cum_m += m
    state.cum_abs_m += np.abs(m)
    if state.rule == "linear":
        state.w = state.w * (1.0 - state.eta * m)
    else:
        state.w = state.w * np.exp(-state.eta * m)
    state.updates += 1
    if state.updates % RENORM_PERIOD == 0:
        state.w = state.w / state.w.sum()
    return state


def mwu_cost_bound(state: MwuState) -> float:
    """Right-hand side slack of the accumulated-cost inequality: for any
    fixed q, sum m.p <= sum m.q + eta T + log(d)/eta."""
    return state.eta * state.updates + math.log(state.d) / state.eta


def mwu_regret_vs(state: MwuState, q: np.ndarray) -> float:
    return state.cum_mp - float(state.cum_m @ np.asarray(q, dtype=float))


def mwu_worst_vertex_regret(state: MwuState) -> float:
    return state.cum_mp - float(state.cum_m.min())


def mwu_tight_slack_vs(state: MwuState, q: np.ndarray) -> float:
    """Slack of the tighter form sum m.p <= sum (m + eta|m|).q + log(d)/eta
    (recorded in transcripts, not asserted)."""
    q = np.asarray(q, dtype=float)
    rhs = float((state.cum_m + state.eta * state.cum_abs_m) @ q) + math.log(state.d) / state.eta
    return rhs - state.cum_mp


def hedge_entropic_slack(state: MwuState, q: np.ndarray) -> float:
    """Slack of sum p.m <= q.(sum m) + eta sum p.m^2 + (log d - H(q))/eta."""
    q = np.asarray(q, dtype=float)
    hq = float(-(q[q > 0] * np.log(q[q > 0])).sum())
    rhs = float(state.cum_m @ q) + state.eta * state.cum_pm2 + (math.log(state.d) - hq) / state.eta
    return rhs - state.cum_mp


def _as_challenge(x, builder) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x
    return builder(x)


def pauli_learner_round(state: MwuState, test, loss: LipschitzLoss, b: float):
    """One round of the error-rate learner: predict p.e with
    e_w = Tr[E Gamma^w], then feed m = (1/L) ell' e to the weights."""
    e = _as_challenge(test, challenge_vector)
    p = mwu_predict(state)
    pred = float(p @ e)
    m = (loss.deriv(pred, b) / loss.L) * e
    if np.abs(m).max() > 1 + M_RANGE_TOL:
        raise ValueError("challenge coefficients exceed 1; test operator certificate invalid")
    mwu_update(state, m)
    return pred, state


@dataclass
class MixtureBasis:
    """A fixed dictionary of K known channels or combs, stacked for fast
    challenge evaluation e_j = Tr[E C_j]."""

    stack: np.ndarray

    @classmethod
    def from_channels(cls, chans) -> "MixtureBasis":
        return cls(np.stack([c.choi_matrix() for c in chans]))

    @classmethod
    def from_combs(cls, combs) -> "MixtureBasis":
        return cls(np.stack([c.op for c in combs]))

    @classmethod
    def pauli(cls, n: int) -> "MixtureBasis":
        return cls(gamma_stack(n))

    @property
    def k(self) -> int:
        return self.stack.shape[0]

    def challenge(self, op: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("ab,jba->j", op, self.stack))

    def mix(self, p: np.ndarray) -> np.ndarray:
        return np.einsum("j,jab->ab", p, self.stack)


def mixture_learner_round(state: MwuState, basis: MixtureBasis, test, loss: LipschitzLoss, b: float):
    """Mixture-of-known-processes round; identical contract to the error-rate
    learner with decisions indexed by the basis."""
    op = test.op if isinstance(test, (ChannelTestOperator, TesterOperator)) else np.asarray(test)
    e = basis.challenge(op)
    p = mwu_predict(state)
    pred = float(p @ e)
    m = (loss.deriv(pred, b) / loss.L) * e
    if np.abs(m).max() > 1 + M_RANGE_TOL:
        raise ValueError("basis values exceed 1; test operator invalid for this basis")
    mwu_update(state, m)
    return pred, state


# ---------------------------------------------------------------------------
# matrix multiplicative weights


@dataclass
class MmwState:
    """MMW over density operators: iterate exp(-eta sum L)/Tr."""

    dim: int
    eta: float
    cum: np.ndarray = None
    updates: int = 0
    cum_cost: float = 0.0
    cum_sq: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.cum is None:
            self.cum = np.zeros((self.dim, self.dim), dtype=complex)

    @property
    def iterate(self) -> np.ndarray:
        return herm_exp_normalized(-self.eta * self.cum)

    def entropy(self) -> float:
        return von_neumann_entropy(self.iterate)


def _check_cost_matrix(l: np.ndarray, dim: int) -> np.ndarray:
    l = np.asarray(l, dtype=complex)
    if l.shape != (dim, dim):
        raise ValueError(f"cost matrix shape {l.shape}, expected {(dim, dim)}")
    sn = np.abs(np.linalg.eigvalsh(l)).max()
    if sn > 1 + 1e-10:
        raise ValueError(f"cost matrix spectral norm {sn} exceeds 1")
    return l


def mmw_round(state: MmwState, l: np.ndarray):
    """Consume one cost matrix; cost is charged against the pre-update
    iterate, as in the interaction protocol."""
    l = _check_cost_matrix(l, state.dim)
    om = state.iterate
    state.cum_cost += float(np.real(np.trace(l @ om)))
    state.cum_sq += float(np.real(np.trace(l @ l @ om)))
    state.cum += l
    state.updates += 1
    return state.iterate, state


def mmw_entropic_slack(state: MmwState, comparator: np.ndarray) -> float:
    """Slack of sum Tr[L w] <= Tr[rho sum L] + eta sum Tr[L^2 w]
    + (log d - H(rho))/eta for the given comparator rho."""
    rho = check_density(comparator)
    rhs = float(np.real(np.trace(rho @ state.cum))) + state.eta * state.cum_sq
    rhs += (math.log(state.dim) - von_neumann_entropy(rho)) / state.eta
    return rhs - state.cum_cost


# ---------------------------------------------------------------------------
# Bregman projection onto Choi states and projected MMW


def _herm_basis(d: int) -> np.ndarray:
    basis = []
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        basis.append(m)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1 / np.sqrt(2)
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = -1j / np.sqrt(2)
            m[j, i] = 1j / np.sqrt(2)
            basis.append(m)
    return np.stack(basis)


class ProjectionError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"Bregman projection did not reach tolerance: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


def bregman_project(omega: np.ndarray, dims: tuple, lam0: np.ndarray | None = None,
                    tol: float = 1e-9, max_iter: int = 500):
    """Relative-entropy projection onto {rho >= 0, Tr_B rho = 1_A/d_A}.

    Solves the convex dual over Hermitian Lambda_A: the projection has the
    form rho(Lambda) = exp(log omega - Lambda x 1 - c 1) and the dual gradient
    is 1_A/d_A - Tr_B[rho(Lambda)].  Damped Newton with Armijo backtracking;
    the exact Hessian comes from the divided-difference derivative of the
    matrix exponential, so a handful of iterations reaches 1e-9.  Returns
    (rho, lambda_coefficients, iterations).
    """
    da, db = dims
    h = herm_fn(omega, "clamped-log")
    basis = _herm_basis(da)
    basis_big = np.stack([np.kron(t, np.eye(db)) for t in basis])
    lam = np.zeros(da * da) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    target = np.eye(da) / da

    def eval_at(lv):
        lmat = np.einsum("a,aij->ij", lv, basis)
        w, v = np.linalg.eigh(h - np.kron(lmat, np.eye(db)))
        scale = math.exp(min(w.max(), 700.0))
        ew = np.exp(w - w.max())
        rho_un = (v * ew) @ v.conj().T
        gval = float(ew.sum()) * scale + float(np.real(np.trace(lmat))) / da
        return gval, rho_un * scale, w, v

    gval, rho_un, w, v = eval_at(lam)
    tr = float(np.real(np.trace(rho_un)))
    if not np.isfinite(tr) or tr <= 0 or abs(math.log(max(tr, 1e-300))) > 1e-13:
        lam[:da] += math.log(max(tr, 1e-300)) if np.isfinite(tr) and tr > 0 else 700.0
        gval, rho_un, w, v = eval_at(lam)

    iters = 0
    grad_norm = float("inf")
    for iters in range(1, max_iter + 1):
        grad_mat = target - partial_trace(rho_un, (da, db), keep="A")
        grad = np.real(np.einsum("aij,ji->a", basis, grad_mat))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            break
        dw = w[:, None] - w[None, :]
        ew = np.exp(w - w.max())
        phi = np.where(np.abs(dw) > 1e-12,
                       (ew[:, None] - ew[None, :]) / np.where(np.abs(dw) > 1e-12, dw, 1.0),
                       np.exp((w[:, None] + w[None, :]) / 2 - w.max()))
        phi = phi * math.exp(min(w.max(), 700.0))
        wmats = np.einsum("ki,akl,lj->aij", v.conj(), basis_big, v)
        hess = np.real(np.einsum("ij,aij,bij->ab", phi, wmats.conj(), wmats))
        try:
            step = np.linalg.solve(hess + 1e-12 * np.eye(grad.size), -grad)
        except np.linalg.LinAlgError:
            step = -grad
        if float(grad @ step) >= 0:
            step = -grad
        s = 1.0
        while True:
            g2, r2, w2, v2 = eval_at(lam + s * step)
            if g2 <= gval + 1e-4 * s * float(grad @ step) or s < 1e-14:
                break
            s *= 0.5
        lam = lam + s * step
        gval, rho_un, w, v = g2, r2, w2, v2
        tr = float(np.real(np.trace(rho_un)))
        if tr > 0 and abs(math.log(tr)) > 1e-13:
            lam[:da] += math.log(tr)
            gval, rho_un, w, v = eval_at(lam)
    rho = rho_un / np.real(np.trace(rho_un))
    residual = float(np.linalg.norm(target - partial_trace(rho, (da, db), keep="A")))
    if residual > 10 * tol:
        raise ProjectionError(residual, iters)
    return rho, lam, iters


@dataclass
class ProjectedMmwState:
    """MMW over Choi states with a relative-entropy projection each round.

    mode "lazy": weights from the cumulative cost; mode "agile": gradient
    step from the previous projected iterate (mirror descent).
    """

    d_a: int
    d_b: int
    eta: float
    mode: str = "agile"
    cum: np.ndarray = None
    rho: np.ndarray = None
    lam: np.ndarray = None
    updates: int = 0
    cum_cost: float = 0.0
    cum_sq_inf: float = 0.0
    cum_l: np.ndarray = None

    def __post_init__(self):
        if self.mode not in ("lazy", "agile"):
            raise ValueError("mode must be 'lazy' or 'agile'")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        d = self.d_a * self.d_b
        if self.cum is None:
            self.cum = np.zeros((d, d), dtype=complex)
            self.cum_l = np.zeros((d, d), dtype=complex)
        if self.rho is None:
            self.rho = np.eye(d, dtype=complex) / d

    @property
    def dim(self) -> int:
        return self.d_a * self.d_b

    def constraint_violation(self) -> float:
        return float(np.linalg.norm(partial_trace(self.rho, (self.d_a, self.d_b), keep="A") - np.eye(self.d_a) / self.d_a))

    def entropy(self) -> float:
        return von_neumann_entropy(self.rho)


def projected_mmw_round(state: ProjectedMmwState, l: np.ndarray):
    """Charge the cost against the current projected iterate, then update
    and re-project.  Returns (new iterate, state)."""
    l = _check_cost_matrix(l, state.dim)
    state.cum_cost += float(np.real(np.trace(l @ state.rho)))
    state.cum_sq_inf += float(np.abs(np.linalg.eigvalsh(l)).max() ** 2)
    state.cum_l += l
    if state.mode == "lazy":
        state.cum += l
        omega = herm_exp_normalized(-state.eta * state.cum)
    else:
        omega = herm_exp_normalized(herm_fn(state.rho, "clamped-log") - state.eta * l)
    state.rho, state.lam, _ = bregman_project(omega, (state.d_a, state.d_b), lam0=state.lam)
    state.updates += 1
    return state.rho, state


def projected_mmw_slack(state: ProjectedMmwState, comparator: np.ndarray) -> float:
    """Slack of the mirror-descent inequality for the given comparator Choi
    state: coefficient eta/2 on sum ||L||_inf^2 in agile mode, 2 eta in lazy
    mode."""
    sigma = check_density(comparator)
    coef = 0.5 if state.mode == "agile" else 2.0
    rhs = float(np.real(np.trace(sigma @ state.cum_l))) + coef * state.eta * state.cum_sq_inf
    rhs += (math.log(state.dim) - von_neumann_entropy(sigma)) / state.eta
    return rhs - state.cum_cost


# ---------------------------------------------------------------------------
# mistake-driven wrapper and compression


def mistake_budget(n_decisions: int, lipschitz: float, epsilon: float, noise_band: float | None = None) -> int:
    """Deterministic cap on epsilon-mistakes for the mistake-driven
    multiplicative-weights learner over n_decisions hypotheses, fed feedback
    within noise_band of a fixed mixture's values (default band epsilon/3).

    margin = epsilon - noise_band; the cap is ceil(4 L^2 log K / margin^2),
    which for the default band equals ceil(9 L^2 log K / epsilon^2).
    """
    if noise_band is None:
        noise_band = epsilon / 3.0
    margin = epsilon - noise_band
    if margin <= 0:
        raise ValueError("feedback noise band must be smaller than the mistake threshold")
    ln_k = math.log(n_decisions)
    if ln_k == 0:
        return 0
    return math.ceil(4.0 * lipschitz**2 * ln_k / margin**2)


def mistake_eta(n_decisions: int, lipschitz: float, epsilon: float, noise_band: float | None = None) -> float:
    budget = mistake_budget(n_decisions, lipschitz, epsilon, noise_band)
    if budget == 0:
        return 0.5
    return min(0.5, math.sqrt(math.log(n_decisions) / budget))


@dataclass
class MwuHypothesisLearner:
    """Adapter bundling a weight state, a challenge builder and a loss, so
    wrappers can treat error-rate and mixture learners uniformly."""

    state: MwuState
    loss: LipschitzLoss
    builder: object            # ChannelTestOperator/ndarray -> e vector

    @classmethod
    def pauli(cls, n: int, eta: float, loss: LipschitzLoss | None = None, rule: str = "linear"):
        return cls(MwuState(4**n, eta, rule), loss or LipschitzLoss(), challenge_vector)

    @classmethod
    def mixture(cls, basis: MixtureBasis, eta: float, loss: LipschitzLoss | None = None, rule: str = "linear"):
        builder = lambda t: basis.challenge(t.op if hasattr(t, "op") else np.asarray(t))
        return cls(MwuState(basis.k, eta, rule), loss or LipschitzLoss(), builder)

    @property
    def n_decisions(self) -> int:
        return self.state.d

    def challenge(self, x) -> np.ndarray:
        return _as_challenge(x, self.builder)

    def predict(self, e: np.ndarray) -> float:
        return float(mwu_predict(self.state) @ e)

    def update(self, e: np.ndarray, b: float) -> None:
        pred = self.predict(e)
        m = (self.loss.deriv(pred, b) / self.loss.L) * e
        mwu_update(self.state, m)

    def weights(self) -> np.ndarray:
        return mwu_predict(self.state)


def mistake_driven(learner: MwuHypothesisLearner, stream, epsilon: float,
                   noise_band: float | None = None, budget: int | None = None) -> Transcript:
    """Run a learner over a realizable stream, updating only on rounds whose
    loss exceeds epsilon, and assert the mistake budget on the actual run.

    ``stream`` yields (challenge, feedback) or (challenge, feedback, truth);
    truth enables the cumulative-regret column.  The budget defaults to the
    wrapper bound for this learner's decision count and loss.
    """
    if budget is None:
        budget = mistake_budget(learner.n_decisions, learner.loss.L, epsilon, noise_band)
    tr = Transcript()
    cum_regret = 0.0
    for t, item in enumerate(stream, start=1):
        x, b, truth = item if len(item) == 3 else (item[0], item[1], None)
        e = learner.challenge(x)
        pred = learner.predict(e)
        loss = learner.loss.value(pred, b)
        mistake = loss > epsilon
        if mistake:
            learner.update(e, b)
        if truth is not None:
            cum_regret += loss - learner.loss.value(truth, b)
        tr.add(t=t, challenge=challenge_digest(e), prediction=pred, feedback=float(b),
               loss=loss, mistake=mistake,
               cum_regret_vs_truth=None if truth is None else cum_regret,
               learner_entropy=learner.state.entropy())
    tr.record("epsilon", epsilon)
    tr.record("eta", learner.state.eta)
    tr.assert_bound("mistakes<=budget", tr.mistakes, budget)
    return tr


def _e_key(e: np.ndarray) -> tuple:
    return tuple(np.round(np.asarray(e, dtype=float), 12))


@dataclass
class CompressedSet:
    """Mistake subset kappa(S) of a dataset, in the total order used to
    produce it, plus the learner configuration needed for reconstruction."""

    n: int
    epsilon: float
    eta: float
    entries: list          # [(key, e_vector, label)] sorted by key

    @property
    def size(self) -> int:
        return len(self.entries)


def one_pass_compress(dataset, epsilon: float, n: int, lipschitz: float = 1.0) -> CompressedSet:
    """Compress (test, label) pairs realizable up to epsilon/3 label noise.

    The dataset is sorted by the total order on challenges (lexicographic on
    the Bell-coefficient vector rounded to 12 decimals) and replayed through
    a mistake-driven error-rate learner with threshold 2 epsilon / 3 against
    the noisy labels; the mistake rounds are stored verbatim.  The threshold
    leaves an epsilon/3 margin over the label noise, so reconstruction is
    within epsilon of the true values on every dataset point.
    """
    items = []
    for x, y in dataset:
        e = x if isinstance(x, np.ndarray) else challenge_vector(x)
        items.append((_e_key(e), e, float(y)))
    items.sort(key=lambda it: it[0])
    threshold = 2.0 * epsilon / 3.0
    eta = mistake_eta(4**n, lipschitz, threshold, noise_band=epsilon / 3.0)
    budget = mistake_budget(4**n, lipschitz, threshold, noise_band=epsilon / 3.0)
    learner = MwuHypothesisLearner.pauli(n, eta)
    kept = []
    seen = set()
    for key, e, y in items:
        if key in seen:
            continue
        seen.add(key)
        pred = learner.predict(e)
        if abs(pred - y) > threshold:
            learner.update(e, y)
            kept.append((key, e, y))
    if len(kept) > budget:
        raise RuntimeError(f"compression kept {len(kept)} points, above the budget {budget}")
    return CompressedSet(n=n, epsilon=epsilon, eta=eta, entries=kept)


def one_pass_reconstruct(compressed: CompressedSet, query) -> float:
    """Value at a query test: stored label if the query is in kappa(S),
    otherwise the prediction of a fresh learner replayed over the stored
    points that precede the query in the total order."""
    e = query if isinstance(query, np.ndarray) else challenge_vector(query)
    key = _e_key(e)
    threshold = 2.0 * compressed.epsilon / 3.0
    learner = MwuHypothesisLearner.pauli(compressed.n, compressed.eta)
    for k, ek, yk in compressed.entries:
        if k == key:
            return yk
        if k > key:
            break
        if abs(learner.predict(ek) - yk) > threshold:
            learner.update(ek, yk)
    return learner.predict(e)
