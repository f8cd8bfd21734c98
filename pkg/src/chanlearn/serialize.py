"""JSON serialization for operators, channels, test operators and combs.

Wire format for a complex matrix:

    {"rows": r, "cols": c, "data": "<base64>"}

where data is the row-major sequence of entries, each entry two little-endian
IEEE-754 doubles (re, im).  Vectors use the same record with cols = 1.
Channels carry dims and whichever of kraus/choi is present; combs add their
per-step dims ladder.
"""

from __future__ import annotations

import base64
import json

import numpy as np


def matrix_to_obj(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    inter = np.empty(m.size * 2, dtype="<f8")
    inter[0::2] = np.real(m).ravel()
    inter[1::2] = np.imag(m).ravel()
    return {"rows": m.shape[0], "cols": m.shape[1], "data": base64.b64encode(inter.tobytes()).decode("ascii")}


def matrix_from_obj(obj: dict) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    m = raw[0::2] + 1j * raw[1::2]
    return m.reshape(obj["rows"], obj["cols"])


def dump(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
