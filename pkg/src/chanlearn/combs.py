"""Multi-time processes (quantum combs), link product, testers, twirling.

Leg conventions.  An r-step process has input registers A_1..A_r and output
registers B_1..B_r; its comb operator lives on the tensor product ordered
A_1, B_1, A_2, B_2, ..., A_r, B_r.  Validity is the ladder of partial-trace
constraints: Tr_{B_k}[N_k] = N_{k-1} x 1_{A_k} down to Tr_{B_1}[N_1] = 1_{A_1}.

The link product used here contracts ket indices with ket indices and bra
with bra:

    (O1 * O2)[(a, b), (a', b')] = sum_{m, x} O1[(a, m), (a', x)] O2[(m, b), (x, b')]

over the identified legs m, x.  This form preserves positivity and reproduces
channel composition on Choi matrices; the index map is fixed in LabeledOp.link
and tested against a Kraus-composition oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from . import serialize
from .channels import ChannelRep, choi_of_kraus
from .opcore import PSD_TOL, bell_basis, check_hermitian

COMB_TOL = 1e-9


class LabeledOp:
    """Dense operator with named legs; the workhorse for comb algebra."""

    def __init__(self, matrix: np.ndarray, legs: list):
        self.m = np.asarray(matrix, dtype=complex)
        self.legs = [(str(n), int(d)) for n, d in legs]
        dim = prod(d for _, d in self.legs) if self.legs else 1
        if self.m.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.m.shape} does not match legs {self.legs}")

    @property
    def names(self):
        return [n for n, _ in self.legs]

    def dims_of(self, names):
        table = dict(self.legs)
        return [table[n] for n in names]

    def tensor(self, other: "LabeledOp") -> "LabeledOp":
        return LabeledOp(np.kron(self.m, other.m), self.legs + other.legs)

    def permute(self, order) -> "LabeledOp":
        order = list(order)
        if sorted(order) != sorted(self.names):
            raise ValueError(f"permutation {order} does not match legs {self.names}")
        src = self.names
        perm = [src.index(n) for n in order]
        dims = [d for _, d in self.legs]
        L = len(dims)
        t = self.m.reshape(dims + dims)
        t = t.transpose(perm + [L + p for p in perm])
        new_legs = [self.legs[p] for p in perm]
        dim = prod(d for _, d in new_legs) if new_legs else 1
        return LabeledOp(t.reshape(dim, dim), new_legs)

    def trace_out(self, names) -> "LabeledOp":
        keep = [n for n in self.names if n not in set(names)]
        rearranged = self.permute(keep + [n for n in self.names if n in set(names)])
        d_keep = prod(rearranged.dims_of(keep)) if keep else 1
        d_drop = rearranged.m.shape[0] // d_keep
        t = rearranged.m.reshape(d_keep, d_drop, d_keep, d_drop)
        return LabeledOp(np.einsum("ijkj->ik", t), [(n, d) for n, d in rearranged.legs if n in keep])

    def apply_kraus(self, kraus, in_names, out_legs) -> "LabeledOp":
        """Conjugate by Kraus operators acting on ``in_names`` (in that order),
        replacing them with ``out_legs`` [(name, dim), ...]."""
        rest = [n for n in self.names if n not in set(in_names)]
        arranged = self.permute(rest + list(in_names))
        d_rest = prod(arranged.dims_of(rest)) if rest else 1
        d_in = prod(arranged.dims_of(in_names)) if in_names else 1
        d_out = prod(d for _, d in out_legs) if out_legs else 1
        m4 = arranged.m.reshape(d_rest, d_in, d_rest, d_in)
        out = np.zeros((d_rest, d_out, d_rest, d_out), dtype=complex)
        for k in kraus:
            k = np.asarray(k, dtype=complex).reshape(d_out, d_in)
            out += np.einsum("oi,ripj,qj->ropq", k, m4, k.conj())
        new_legs = [(n, d) for n, d in arranged.legs if n in set(rest)] + list(out_legs)
        return LabeledOp(out.reshape(d_rest * d_out, d_rest * d_out), new_legs)

    def link(self, other: "LabeledOp", over) -> "LabeledOp":
        """Link product contracting the legs named in ``over``."""
        over = list(over)
        for n in over:
            if n not in self.names or n not in other.names:
                raise ValueError(f"leg {n!r} not shared; cannot link")
            if dict(self.legs)[n] != dict(other.legs)[n]:
                raise ValueError(f"leg {n!r} dimension mismatch")
        free1 = [n for n in self.names if n not in set(over)]
        free2 = [n for n in other.names if n not in set(over)]
        a = self.permute(free1 + over)
        b = other.permute(over + free2)
        da = prod(a.dims_of(free1)) if free1 else 1
        dx = prod(a.dims_of(over)) if over else 1
        db = prod(b.dims_of(free2)) if free2 else 1
        m1 = a.m.reshape(da, dx, da, dx)
        m2 = b.m.reshape(dx, db, dx, db)
        r = np.einsum("amcx,mbxd->abcd", m1, m2)
        legs = [(n, d) for n, d in a.legs if n in set(free1)] + [(n, d) for n, d in b.legs if n in set(free2)]
        return LabeledOp(r.reshape(da * db, da * db), legs)


def _gamma_unnormalized(d: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * d + np.arange(d)] = 1.0
    return np.outer(v, v)


def _leg_names(r: int):
    return [f"A{k}" for k in range(1, r + 1)], [f"B{k}" for k in range(1, r + 1)]


def canonical_order(r: int):
    a, b = _leg_names(r)
    out = []
    for k in range(r):
        out += [a[k], b[k]]
    return out


@dataclass
class CombStep:
    """One time step of a process: a channel (mem_in x A) -> (mem_out x B),
    Kraus input index ordered (mem, A) and output index ordered (mem, B)."""

    kraus: list
    d_mem_in: int
    d_a: int
    d_mem_out: int
    d_b: int

    @classmethod
    def from_channel(cls, ch: ChannelRep) -> "CombStep":
        return cls(ch.kraus_list(), 1, ch.d_in, 1, ch.d_out)


@dataclass
class CombOperator:
    """Comb operator of an r-step process, legs A1,B1,...,Ar,Br."""

    in_dims: list
    out_dims: list
    op: np.ndarray

    def __post_init__(self):
        self.in_dims = [int(d) for d in self.in_dims]
        self.out_dims = [int(d) for d in self.out_dims]
        self.op = check_hermitian(self.op)
        d = prod(self.in_dims) * prod(self.out_dims)
        if self.op.shape != (d, d):
            raise ValueError(f"operator shape {self.op.shape} does not match dims")

    @property
    def r(self) -> int:
        return len(self.in_dims)

    def labeled(self) -> LabeledOp:
        a, b = _leg_names(self.r)
        legs = []
        for k in range(self.r):
            legs += [(a[k], self.in_dims[k]), (b[k], self.out_dims[k])]
        return LabeledOp(self.op, legs)

    def validity(self) -> dict:
        return check_comb(self.op, self.in_dims, self.out_dims)

    def require_valid(self, tol: float = COMB_TOL) -> "CombOperator":
        rep = self.validity()
        if not rep["ok"]:
            raise ValueError(f"comb fails validity checks: {rep}")
        return self


def check_comb(op: np.ndarray, in_dims, out_dims, tol: float = COMB_TOL) -> dict:
    """Report-style ladder check of the comb constraints.

    Level k records || Tr_{B_k}[N_k] - N_{k-1} x 1_{A_k} ||_F, where the
    candidate N_{k-1} is extracted by averaging over A_k.  Level 1 compares
    against the identity.  ``psd_min`` is the minimum eigenvalue of the comb.
    """
    op = np.asarray(op, dtype=complex)
    r = len(in_dims)
    psd_min = float(np.linalg.eigvalsh(check_hermitian(op)).min())
    levels = []
    current = op
    for k in range(r, 0, -1):
        d_front = prod(in_dims[:k]) * prod(out_dims[: k - 1])
        t = partial_trace_last(current, d_front, out_dims[k - 1])
        d_prev = d_front // in_dims[k - 1]
        n_prev = partial_trace_last(t, d_prev, in_dims[k - 1]) / in_dims[k - 1]
        target = np.kron(n_prev, np.eye(in_dims[k - 1])) if k > 1 else np.eye(in_dims[0])
        levels.append(float(np.linalg.norm(t - target)))
        current = n_prev
    levels.reverse()
    return {"psd_min": psd_min, "levels": levels, "ok": psd_min >= -PSD_TOL and max(levels) <= tol}


def partial_trace_last(op: np.ndarray, d_front: int, d_last: int) -> np.ndarray:
    t = op.reshape(d_front, d_last, d_front, d_last)
    return np.einsum("ijkj->ik", t)


def comb_from_channels(steps) -> CombOperator:
    """Comb operator of the process obtained by chaining steps through their
    memory registers.  First step must have trivial input memory; a final
    nontrivial memory is traced out.

    Construction: feed half of an unnormalized maximally entangled pair into
    every input register and push the other half through the step channels.
    """
    steps = [CombStep.from_channel(s) if isinstance(s, ChannelRep) else s for s in steps]
    if steps[0].d_mem_in != 1:
        raise ValueError("first step must have trivial input memory")
    for k in range(1, len(steps)):
        if steps[k].d_mem_in != steps[k - 1].d_mem_out:
            raise ValueError(f"memory dimension mismatch between steps {k} and {k + 1}")
    state = LabeledOp(np.array([[1.0 + 0j]]), [])
    mem = None
    for k, st in enumerate(steps, start=1):
        gamma = LabeledOp(_gamma_unnormalized(st.d_a), [(f"A{k}", st.d_a), (f"A{k}'", st.d_a)])
        state = state.tensor(gamma)
        in_names = ([mem] if mem else []) + [f"A{k}'"]
        mem_next = f"M{k}" if st.d_mem_out > 1 else None
        out_legs = ([(mem_next, st.d_mem_out)] if mem_next else []) + [(f"B{k}", st.d_b)]
        kraus = st.kraus
        if st.d_mem_in == 1 and mem is None:
            kraus = [np.asarray(x).reshape(st.d_mem_out * st.d_b, st.d_a) for x in kraus]
        state = state.apply_kraus(kraus, in_names, out_legs)
        mem = mem_next
    if mem is not None:
        state = state.trace_out([mem])
    r = len(steps)
    state = state.permute(canonical_order(r))
    return CombOperator([s.d_a for s in steps], [s.d_b for s in steps], state.m)


def link_product(n1: CombOperator, n2: CombOperator, wiring: dict | None = None) -> CombOperator:
    """Link two combs, feeding outputs of ``n1`` into inputs of ``n2``.

    ``wiring`` maps leg names of n1 (e.g. "B1") to leg names of n2 (e.g.
    "A1"); by default every output of n1 is wired to the matching input of
    n2 in order.  The surviving legs are re-labelled into canonical comb
    order: n1's steps first, then n2's unwired steps.
    """
    if wiring is None:
        if n1.r != n2.r:
            raise ValueError("default wiring needs matching step counts")
        wiring = {f"B{k}": f"A{k}" for k in range(1, n1.r + 1)}
    l1 = n1.labeled()
    l2 = n2.labeled()
    for b, a in wiring.items():
        if dict(l1.legs)[b] != dict(l2.legs)[a]:
            raise ValueError(f"wiring {b}->{a} has mismatched dimensions")
    shared = {b: f"X{i}" for i, b in enumerate(sorted(wiring))}
    inverse = {a: shared[b] for b, a in wiring.items()}
    l1 = LabeledOp(l1.m, [(shared.get(n, "L:" + n), d) for n, d in l1.legs])
    l2 = LabeledOp(l2.m, [(inverse.get(n, "R:" + n), d) for n, d in l2.legs])
    linked = l1.link(l2, over=list(shared.values()))
    in_dims, out_dims, order = [], [], []
    for k in range(1, n1.r + 1):
        if f"L:A{k}" in linked.names:
            in_dims.append(dict(linked.legs)[f"L:A{k}"])
            order.append(f"L:A{k}")
        if f"L:B{k}" in linked.names:
            out_dims.append(dict(linked.legs)[f"L:B{k}"])
            order.append(f"L:B{k}")
        if f"R:B{k}" in linked.names and f"L:B{k}" not in linked.names:
            out_dims.append(dict(linked.legs)[f"R:B{k}"])
            order.append(f"R:B{k}")
    for k in range(1, n2.r + 1):
        for side, bucket in (("A", in_dims), ("B", out_dims)):
            name = f"R:{side}{k}"
            if name in linked.names and name not in order:
                bucket.append(dict(linked.legs)[name])
                order.append(name)
    linked = linked.permute(order)
    if len(in_dims) != len(out_dims):
        raise ValueError("wiring does not produce an input/output-paired comb")
    return CombOperator(in_dims, out_dims, linked.m)


def compose_channels_choi(c1: CombOperator, c2: CombOperator) -> CombOperator:
    """Sequential composition of two r=1 combs (channel Choi matrices)."""
    return link_product(c1, c2, wiring={"B1": "A1"})


# ---------------------------------------------------------------------------
# time-local Bell structure


def _joint_bell_columns(comb: CombOperator) -> np.ndarray:
    cols = None
    for d_a, d_b in zip(comb.in_dims, comb.out_dims):
        if d_a != d_b:
            raise ValueError("time-local Bell analysis needs square steps")
        n = int(round(np.log2(d_a)))
        b = bell_basis(n)
        cols = b if cols is None else np.kron(cols, b)
    return cols


def time_local_twirl(comb: CombOperator) -> np.ndarray:
    """Exact outcome distribution of time-local Bell measurements:
    q_w = Tr[(Phi^{w_1} x ... x Phi^{w_r}) N] / 2^(n r), flat joint order."""
    cols = _joint_bell_columns(comb)
    d_total = prod(comb.in_dims)
    q = np.real(np.einsum("ij,ik,kj->j", cols.conj(), comb.op, cols)) / d_total
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def time_local_twirl_sample(comb: CombOperator, rng, k: int = 1):
    """Draw k joint Bell outcomes; returns (samples, exact distribution).

    Samples are flat joint indices into the lexicographic (z_1,x_1,...,z_r,x_r)
    order; step-wise indices follow by repeated divmod with 4**n_k.
    """
    q = time_local_twirl(comb)
    return rng.choice(q.size, size=k, p=q), q


def twirled_comb(comb: CombOperator) -> CombOperator:
    """Pinch each step into its Bell basis (time-local Pauli twirl)."""
    cols = _joint_bell_columns(comb)
    diag = np.real(np.einsum("ij,ik,kj->j", cols.conj(), comb.op, cols))
    return CombOperator(comb.in_dims, comb.out_dims, (cols * diag) @ cols.conj().T)


# ---------------------------------------------------------------------------
# testers


@dataclass
class TesterOperator:
    """Test operator E for an r-step process, with optional dominating
    co-strategy certificate S (an operator on A1,B1,...,B_{r-1},A_r)."""

    in_dims: list
    out_dims: list
    op: np.ndarray
    certificate: np.ndarray | None = None

    def __post_init__(self):
        self.op = check_hermitian(self.op)
        if np.linalg.eigvalsh(self.op).min() < -PSD_TOL:
            raise ValueError("tester operator is not PSD")
        if self.certificate is not None:
            self.certificate = check_hermitian(self.certificate)
            gap = self._dominator() - _to_canonical_tester_legs(self)
            if np.linalg.eigvalsh(gap).min() < -PSD_TOL:
                raise ValueError("certificate does not dominate the tester")

    @property
    def r(self) -> int:
        return len(self.in_dims)

    def _dominator(self) -> np.ndarray:
        legs = _cert_legs(self.in_dims, self.out_dims)
        s = LabeledOp(self.certificate, legs).tensor(LabeledOp(np.eye(self.out_dims[-1], dtype=complex), [(f"B{self.r}", self.out_dims[-1])]))
        return s.permute(canonical_order(self.r)).m


def _cert_legs(in_dims, out_dims):
    r = len(in_dims)
    legs = []
    for k in range(1, r):
        legs += [(f"A{k}", in_dims[k - 1]), (f"B{k}", out_dims[k - 1])]
    legs.append((f"A{r}", in_dims[r - 1]))
    return legs


def _to_canonical_tester_legs(t: TesterOperator) -> np.ndarray:
    return t.op


def check_costrategy(s: np.ndarray, in_dims, out_dims, tol: float = COMB_TOL) -> dict:
    """Ladder check for a co-strategy: Tr_{A_k}[D_k] = D_{k-1} x 1_{B_{k-1}},
    ending in Tr_{A_1}[D_1] = 1."""
    r = len(in_dims)
    psd_min = float(np.linalg.eigvalsh(check_hermitian(s)).min())
    levels = []
    current = s
    for k in range(r, 0, -1):
        d_front = prod(in_dims[: k - 1]) * prod(out_dims[: k - 1])
        t = partial_trace_last(current, d_front, in_dims[k - 1])
        if k == 1:
            levels.append(abs(float(np.real(t[0, 0])) - 1.0))
            break
        d_prev = d_front // out_dims[k - 2]
        d_km1 = partial_trace_last(t, d_prev, out_dims[k - 2]) / out_dims[k - 2]
        levels.append(float(np.linalg.norm(t - np.kron(d_km1, np.eye(out_dims[k - 2])))))
        current = d_km1
    levels.reverse()
    return {"psd_min": psd_min, "levels": levels, "ok": psd_min >= -PSD_TOL and max(levels) <= tol}


def tester_product(states, effects) -> TesterOperator:
    """Memoryless tester: fresh test (rho_k, M_k) at every step,
    E = (x)_k rho_k^T x M_k, certificate the matching co-strategy."""
    e = np.array([[1.0 + 0j]])
    in_dims, out_dims = [], []
    for rho, m in zip(states, effects):
        e = np.kron(e, np.kron(np.asarray(rho).T, m))
        in_dims.append(rho.shape[0])
        out_dims.append(m.shape[0])
    cert = np.array([[1.0 + 0j]])
    for k, (rho, m) in enumerate(zip(states, effects)):
        cert = np.kron(cert, np.asarray(rho).T)
        if k < len(states) - 1:
            cert = np.kron(cert, np.eye(out_dims[k]))
    return TesterOperator(in_dims, out_dims, e, certificate=cert)


def tester_sequential(rho, channels, effect, dims) -> TesterOperator:
    """Tester with memory: input state rho on (R_0, A_1), channels
    F_k: (R_{k-1}, B_k) -> (R_k, A_{k+1}) and a final effect on (R_{r-1}, B_r).

    The operator is the conjugated link chain of the pieces over the memory
    legs; the certificate replaces the effect with the identity and traces the
    final memory.  ``dims`` is a dict with keys "mem" (list of r memory dims
    R_0..R_{r-1}), "in" (A dims), "out" (B dims).
    """
    mem, in_dims, out_dims = dims["mem"], dims["in"], dims["out"]
    r = len(in_dims)
    chain = LabeledOp(np.asarray(rho, dtype=complex), [("R0", mem[0]), ("A1", in_dims[0])])
    for k, f in enumerate(channels, start=1):
        legs = [(f"R{k-1}", mem[k - 1]), (f"B{k}", out_dims[k - 1]), (f"R{k}", mem[k]), (f"A{k+1}", in_dims[k])]
        cf = LabeledOp(choi_of_kraus(f, mem[k - 1] * out_dims[k - 1], mem[k] * in_dims[k]), legs)
        chain = chain.link(cf, over=[f"R{k-1}"])
    m_t = LabeledOp(np.asarray(effect, dtype=complex).T, [(f"R{r-1}", mem[r - 1]), (f"B{r}", out_dims[r - 1])])
    e = chain.link(m_t, over=[f"R{r-1}"]).permute(canonical_order(r))
    cert = chain.trace_out([f"R{r-1}"]).permute([n for n, _ in _cert_legs(in_dims, out_dims)])
    return TesterOperator(in_dims, out_dims, e.m.conj(), certificate=cert.m.conj())


def tester_value(tester: TesterOperator, comb: CombOperator) -> float:
    val = float(np.real(np.trace(tester.op @ comb.op)))
    if val < -1e-8 or val > 1 + 1e-8:
        raise ValueError(f"tester value {val} outside [0, 1]")
    return val


def simulate_sequential_tester(rho, tester_channels, effect, dims, steps) -> float:
    """Operational oracle for tester_sequential: interleave the tester pieces
    with the process steps and return the outcome probability."""
    steps = [CombStep.from_channel(s) if isinstance(s, ChannelRep) else s for s in steps]
    mem, in_dims, out_dims = dims["mem"], dims["in"], dims["out"]
    r = len(in_dims)
    state = LabeledOp(np.asarray(rho, dtype=complex), [("R0", mem[0]), ("A1", in_dims[0])])
    proc_mem = None
    for k, st in enumerate(steps, start=1):
        in_names = ([proc_mem] if proc_mem else []) + [f"A{k}"]
        proc_mem_next = f"M{k}" if st.d_mem_out > 1 else None
        out_legs = ([(proc_mem_next, st.d_mem_out)] if proc_mem_next else []) + [(f"B{k}", st.d_b)]
        kraus = st.kraus
        if st.d_mem_in == 1 and proc_mem is None:
            kraus = [np.asarray(x).reshape(st.d_mem_out * st.d_b, st.d_a) for x in kraus]
        state = state.apply_kraus(kraus, in_names, out_legs)
        proc_mem = proc_mem_next
        if k < r:
            state = state.apply_kraus(tester_channels[k - 1], [f"R{k-1}", f"B{k}"], [(f"R{k}", mem[k]), (f"A{k+1}", in_dims[k])])
    if proc_mem is not None:
        state = state.trace_out([proc_mem])
    final = state.permute([f"R{r-1}", f"B{r}"])
    return float(np.real(np.trace(np.asarray(effect) @ final.m)))


# ---------------------------------------------------------------------------
# serialization


def comb_to_obj(comb: CombOperator) -> dict:
    return {
        "kind": "comb",
        "r": comb.r,
        "in_dims": comb.in_dims,
        "out_dims": comb.out_dims,
        "operator": serialize.matrix_to_obj(comb.op),
    }


def comb_from_obj(obj: dict) -> CombOperator:
    return CombOperator(obj["in_dims"], obj["out_dims"], serialize.matrix_from_obj(obj["operator"]))
