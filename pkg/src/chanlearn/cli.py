"""Experiment runner wiring adversaries to learners and shadow sessions.

Subcommands: learn, shadow, comb, adversary, bounds.  Configuration comes
from a TOML file (--config) with flags overriding; every run is keyed by a
mandatory seed and writes a per-round CSV plus a JSON summary whose asserted
inequalities determine the exit code (0 iff all PASS).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib

from . import bounds as bounds_mod
from ._rng import stream
from .adversaries import (
    RealizableMixtureAdversary,
    RealizablePauliAdversary,
    UniformQueryLearner,
    all_zeros_game,
    function_embedding_adversary,
    pauli_embedding_channel,
    pauli_lower_bound_challenges,
)
from .channels import (
    born_value,
    pauli_channel,
    random_channel,
    random_effect,
    random_error_rates,
    random_product_test,
)
from .combs import comb_from_channels, tester_product
from .learners import (
    LipschitzLoss,
    MixtureBasis,
    MwuHypothesisLearner,
    ProjectedMmwState,
    mistake_budget,
    mistake_driven,
    mistake_eta,
    mwu_tight_slack_vs,
    mwu_worst_vertex_regret,
    mwu_cost_bound,
    projected_mmw_round,
    projected_mmw_slack,
)
from .shadow import QueryBudget, twirled_shadow, comb_shadow
from .transcript import Transcript, challenge_digest


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config, "rb") as fh:
            cfg.update(tomllib.load(fh))
    for key, val in vars(args).items():
        if key in ("config", "func") or val is None:
            continue
        cfg[key.replace("_", "-")] = val
    if "seed" not in cfg:
        raise SystemExit("a seed is mandatory (use --seed or the config file)")
    return cfg


def _finish(tr: Transcript, cfg: dict) -> int:
    out = Path(cfg.get("out", "run"))
    out.parent.mkdir(parents=True, exist_ok=True)
    tr.record("config", {k: v for k, v in sorted(cfg.items())})
    tr.write_csv(out.with_suffix(".csv"))
    tr.write_summary(out.with_suffix(".json"))
    status = "PASS" if tr.all_bounds_pass else "FAIL"
    for b in tr.summary.get("bounds", []):
        print(f"[{'PASS' if b['pass'] else 'FAIL'}] {b['name']}: {b['value']:.6g} <= {b['bound']:.6g}")
    print(f"{status}: rows={len(tr.rows)} mistakes={tr.mistakes} -> {out.with_suffix('.csv')}")
    return 0 if tr.all_bounds_pass else 1


def cmd_learn(args) -> int:
    cfg = _load_config(args)
    scenario = cfg.get("scenario", "learn-pauli")
    n = int(cfg.get("n", 1))
    rounds = int(cfg.get("rounds", 200))
    eps = float(cfg.get("epsilon", 0.2))
    seed = int(cfg["seed"])
    loss = LipschitzLoss(cfg.get("loss", "absolute"))

    if scenario in ("learn-pauli", "learn-mixture"):
        if scenario == "learn-pauli":
            rates = random_error_rates(n, stream(seed, "hidden"))
            adv = RealizablePauliAdversary(rates, eps, seed)
            k_dec = 4**n
            truth_weights = rates.p
            learner = MwuHypothesisLearner.pauli(n, mistake_eta(k_dec, loss.L, eps), loss)
        else:
            k_dec = int(cfg.get("k-channels", 4))
            rng = stream(seed, "hidden")
            basis = MixtureBasis.from_channels([random_channel(n, rng) for _ in range(k_dec)])
            truth_weights = rng.dirichlet(np.ones(k_dec))
            adv = RealizableMixtureAdversary(basis, truth_weights, eps, seed)
            learner = MwuHypothesisLearner.mixture(basis, mistake_eta(k_dec, loss.L, eps), loss)
        tr = mistake_driven(learner, adv.rounds(rounds), eps)
        st = learner.state
        if st.updates:
            tr.assert_bound("mwu_vertex_regret", mwu_worst_vertex_regret(st), mwu_cost_bound(st))
            tr.record("tight_slack_vs_truth", mwu_tight_slack_vs(st, truth_weights))
        tr.record("scenario", scenario)
        tr.record("mistake_budget", mistake_budget(k_dec, loss.L, eps))
        return _finish(tr, cfg)

    if scenario == "learn-choi-mmw":
        mode = cfg.get("mode", "agile")
        hidden = random_channel(n, stream(seed, "hidden"))
        sigma = hidden.choi_matrix() / 2**n
        d = 2**n
        eta = float(cfg.get("eta", min(0.5, np.sqrt(np.log(d * d) / rounds))))
        state = ProjectedMmwState(d, d, eta, mode)
        tr = Transcript()
        worst_violation = 0.0
        for t in range(1, rounds + 1):
            rng = stream(seed, "choi-adversary", t)
            test = random_product_test(n, rng)
            truth = float(np.real(np.trace(test.op @ sigma)))
            pred = float(np.real(np.trace(test.op @ state.rho)))
            cost = loss.deriv(pred, truth) / loss.L * test.op
            projected_mmw_round(state, cost)
            worst_violation = max(worst_violation, state.constraint_violation())
            tr.add(t=t, challenge=challenge_digest(np.real(np.diag(test.op))), prediction=pred,
                   feedback=truth, loss=loss.value(pred, truth), mistake=loss.value(pred, truth) > eps,
                   cum_regret_vs_truth=None, learner_entropy=state.entropy())
        tr.assert_bound("choi_constraint_violation", worst_violation, 1e-8)
        tr.assert_bound(f"{mode}_mirror_descent_regret", -projected_mmw_slack(state, sigma), 0.0)
        tr.record("scenario", scenario)
        tr.record("eta", eta)
        return _finish(tr, cfg)

    raise SystemExit(f"unknown learn scenario {scenario!r}")


def cmd_shadow(args) -> int:
    cfg = _load_config(args)
    n = int(cfg.get("n", 2))
    seed = int(cfg["seed"])
    k = int(cfg.get("samples", 50000))
    m = int(cfg.get("queries", 100))
    eps = float(cfg.get("epsilon", 0.05))
    delta = float(cfg.get("delta", 0.01))
    mechanism = cfg.get("mechanism", "naive")
    hidden = pauli_channel(random_error_rates(n, stream(seed, "hidden")))
    budget = QueryBudget(k=k, epsilon=eps, delta=delta, M=m, mechanism=mechanism)
    qrng = stream(seed, "queries")
    queries = [random_product_test(n, qrng) for _ in range(m)]
    answers, report = twirled_shadow(hidden, queries, budget, stream(seed, "samples"))
    tr = Transcript()
    worst = 0.0
    for i, (q, a) in enumerate(zip(queries, answers), start=1):
        truth = born_value(q, hidden)
        err = abs(a - truth)
        worst = max(worst, err)
        tr.add(t=i, challenge=challenge_digest(np.real(np.diag(q.op))), prediction=a, feedback=truth,
               loss=err, mistake=err > eps + report["slack"], cum_regret_vs_truth=None, learner_entropy=0.0)
    tr.assert_bound("max_query_error", worst, eps + report["slack"])
    tr.record("scenario", "shadow")
    tr.record("report", report)
    return _finish(tr, cfg)


def cmd_comb(args) -> int:
    cfg = _load_config(args)
    n = int(cfg.get("n", 1))
    r = int(cfg.get("r", 2))
    seed = int(cfg["seed"])
    k = int(cfg.get("samples", 50000))
    m = int(cfg.get("queries", 50))
    eps = float(cfg.get("epsilon", 0.05))
    delta = float(cfg.get("delta", 0.01))
    mechanism = cfg.get("mechanism", "naive")
    hrng = stream(seed, "hidden")
    steps = [pauli_channel(random_error_rates(n, hrng)) for _ in range(r)]
    comb = comb_from_channels(steps).require_valid()
    budget = QueryBudget(k=k, epsilon=eps, delta=delta, M=m, mechanism=mechanism)
    qrng = stream(seed, "queries")
    testers = []
    for _ in range(m):
        states, effects = [], []
        for _ in range(r):
            v = qrng.standard_normal(2**n) + 1j * qrng.standard_normal(2**n)
            v /= np.linalg.norm(v)
            states.append(np.outer(v, v.conj()))
            effects.append(random_effect(2**n, qrng))
        testers.append(tester_product(states, effects))
    answers, report = comb_shadow(comb, testers, budget, stream(seed, "samples"))
    tr = Transcript()
    worst = 0.0
    for i, (t_op, a) in enumerate(zip(testers, answers), start=1):
        truth = float(np.real(np.trace(t_op.op @ comb.op)))
        err = abs(a - truth)
        worst = max(worst, err)
        tr.add(t=i, challenge=challenge_digest(np.real(np.diag(t_op.op))), prediction=a, feedback=truth,
               loss=err, mistake=err > eps + report["slack"], cum_regret_vs_truth=None, learner_entropy=0.0)
    tr.assert_bound("max_tester_error", worst, eps + report["slack"])
    tr.record("scenario", "comb-shadow")
    tr.record("report", report)
    tr.record("comb_validity", comb.validity())
    return _finish(tr, cfg)


def cmd_adversary(args) -> int:
    cfg = _load_config(args)
    kind = cfg.get("kind", "all-zeros")
    seed = int(cfg["seed"])
    tr = Transcript()
    if kind == "all-zeros":
        n_register = int(cfg.get("n", 2))
        reads = int(cfg.get("reads-per-round", 3))
        rounds = int(cfg.get("rounds", (4**n_register - 1) // reads))
        learner = UniformQueryLearner(4**n_register, reads, seed)
        mistakes, logs, cert = all_zeros_game(n_register, learner, rounds)
        for t, (fb, idxs) in enumerate(logs, start=1):
            tr.add(t=t, challenge=f"zeros-read{len(idxs)}", prediction=1 - fb, feedback=fb,
                   loss=1.0, mistake=True, cum_regret_vs_truth=None, learner_entropy=0.0)
        tr.assert_bound("forced_mistakes>=rounds", rounds, mistakes)
        tr.assert_bound("certificate_valid", 0.0 if cert.verify() else 1.0, 0.0)
        tr.record("scenario", "adversary-all-zeros")
        tr.record("hidden_index", cert.hidden_index)
    elif kind == "pauli-lower-bound":
        n = int(cfg.get("n", 3))
        rng = stream(seed, "hidden-f")
        f = rng.integers(0, 2, size=n)
        hidden = pauli_embedding_channel(f)
        worst = 0.0
        for t, test in enumerate(pauli_lower_bound_challenges(n), start=1):
            val = born_value(test, hidden)
            worst = max(worst, abs(val - f[t - 1]))
            tr.add(t=t, challenge=f"probe-qubit-{t}", prediction=val, feedback=float(f[t - 1]),
                   loss=abs(val - f[t - 1]), mistake=False, cum_regret_vs_truth=None, learner_entropy=0.0)
        tr.assert_bound("embedding_exactness", worst, 1e-12)
        tr.record("scenario", "adversary-pauli-lower-bound")
    elif kind in ("unitary", "channel"):
        q = int(cfg.get("q", 2))
        rng = stream(seed, "hidden-f")
        f = rng.integers(0, 2, size=2**q)
        hidden, rows = function_embedding_adversary(kind, f)
        worst = 0.0
        for t, (x, test, val) in enumerate(rows, start=1):
            got = born_value(test, hidden)
            worst = max(worst, abs(got - val))
            tr.add(t=t, challenge=f"x={x:0{q}b}", prediction=got, feedback=float(val),
                   loss=abs(got - val), mistake=False, cum_regret_vs_truth=None, learner_entropy=0.0)
        tr.assert_bound("embedding_exactness", worst, 1e-12)
        tr.record("scenario", f"adversary-{kind}-embedding")
    else:
        raise SystemExit(f"unknown adversary kind {kind!r}")
    return _finish(tr, cfg)


def cmd_bounds(args) -> int:
    cfg = _load_config(args) if (args.config or args.seed is not None) else {}
    which = args.which
    params = {}
    for item in args.param or []:
        key, _, raw = item.partition("=")
        try:
            params[key] = int(raw)
        except ValueError:
            params[key] = float(raw)
    value = bounds_mod.eval_bound(which, **params)
    info = bounds_mod.bound_info(which)
    print(json.dumps({"which": which, "params": params, "value": value,
                      "asserted": info["asserted"]}, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chanlearn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML config file; flags override")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output prefix for rows CSV and summary JSON")

    sp = sub.add_parser("learn", help="online-learning scenarios")
    common(sp)
    sp.add_argument("--scenario", choices=["learn-pauli", "learn-mixture", "learn-choi-mmw"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--loss", choices=["absolute", "squared"])
    sp.add_argument("--k-channels", type=int)
    sp.add_argument("--mode", choices=["lazy", "agile"])
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("shadow", help="Bell-sampling shadow estimation for channels")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--queries", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--mechanism", choices=["naive", "split-noise", "exact"])
    sp.set_defaults(func=cmd_shadow)

    sp = sub.add_parser("comb", help="shadow estimation for multi-time processes")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--r", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--queries", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--mechanism", choices=["naive", "split-noise", "exact"])
    sp.set_defaults(func=cmd_comb)

    sp = sub.add_parser("adversary", help="lower-bound adversary games")
    common(sp)
    sp.add_argument("--kind", choices=["all-zeros", "pauli-lower-bound", "unitary", "channel"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--reads-per-round", type=int)
    sp.add_argument("--rounds", type=int)
    sp.set_defaults(func=cmd_adversary)

    sp = sub.add_parser("bounds", help="evaluate a closed-form bound")
    sp.add_argument("which")
    sp.add_argument("--param", action="append", help="name=value, repeatable")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
