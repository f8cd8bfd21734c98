"""Per-round transcripts of learner/adversary interactions.

Rows carry what the summary needs to be recomputed from scratch: prediction,
feedback, loss, mistake flag, cumulative regret against the hidden target
(when the stream knows it), and the entropy of the learner state.  The
summary lists every asserted inequality with a PASS/FAIL flag.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np


def challenge_digest(e: np.ndarray) -> str:
    return hashlib.sha1(np.round(np.asarray(e, dtype=float), 12).tobytes()).hexdigest()[:12]


@dataclass
class Row:
    t: int
    challenge: str
    prediction: float
    feedback: float
    loss: float
    mistake: bool
    cum_regret_vs_truth: float | None
    learner_entropy: float


@dataclass
class Transcript:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, **kw) -> None:
        self.rows.append(Row(**kw))

    @property
    def mistakes(self) -> int:
        return sum(r.mistake for r in self.rows)

    def assert_bound(self, name: str, value: float, bound: float) -> bool:
        ok = bool(value <= bound)
        self.summary.setdefault("bounds", []).append(
            {"name": name, "value": float(value), "bound": float(bound), "pass": ok}
        )
        return ok

    def record(self, name: str, value) -> None:
        self.summary[name] = value

    @property
    def all_bounds_pass(self) -> bool:
        return all(b["pass"] for b in self.summary.get("bounds", []))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "challenge", "prediction", "feedback", "loss", "mistake",
                        "cum_regret_vs_truth", "learner_entropy"])
            for r in self.rows:
                w.writerow([r.t, r.challenge, _num(r.prediction), _num(r.feedback), _num(r.loss),
                            int(r.mistake), "" if r.cum_regret_vs_truth is None else _num(r.cum_regret_vs_truth),
                            _num(r.learner_entropy)])

    def write_summary(self, path) -> None:
        out = dict(self.summary)
        out["rounds"] = len(self.rows)
        out["mistakes"] = self.mistakes
        out["all_bounds_pass"] = self.all_bounds_pass
        with open(path, "w") as fh:
            json.dump(out, fh, indent=1, sort_keys=True)


def _num(x: float) -> str:
    return f"{float(x):.12g}"
