"""Iterative term isolation: isolate, split qudits, restrict, prune, repeat.

Each step picks the lowest-id remaining term ``v``, discards every term that
shares two or more qudits with it, splits each qudit of ``v`` into blocks
``C^d1 ⊗ C^d2`` (``v`` on the first factor, everything else on the second),
restricts to one block per qudit and tears the first factors off together
with ``v``.  The loop ends when no two remaining terms share a qudit.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

import numpy as np

from .algebra import DEFAULT_SEED, QuditDecomposition, TensorFactorization, bv_decompose_qudit
from .errors import BudgetExceeded, OracleRefused
from .graph import (
    DEFAULT_BUDGET as AUDIT_BUDGET,
    ExpansionReport,
    build_interaction_graph,
    gamma_bound,
    isolation_penalty,
    local_expansion_error,
)
from .model import CLHInstance, LocalTerm, QuditInfo, drop_trivial_factors, validate_instance
from .oracle import DEFAULT_BUDGET as ORACLE_BUDGET, components, ground_energy
from .tensor import clean_projection, conjugate_axis, factor_residual

log = logging.getLogger(__name__)

PRUNE_TOL = 1e-7
ENERGY_TOL = 1e-6


@dataclass
class GoodTerm:
    """An isolated term after restriction, living on its own torn-off factors."""

    step: int
    term: int
    qudits: tuple[int, ...]
    dims: tuple[int, ...]
    matrix: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


@dataclass
class Restriction:
    """Result of restricting the remaining system to one block per qudit of ``v``."""

    good: GoodTerm
    terms: dict[int, LocalTerm]
    dims: dict[int, int]
    violated: list[int]
    dropped_terms: list[int]
    pruned_factors: list[tuple[int, int]]
    pruned_qudits: list[int]
    isolated_residual: float
    others_residual: float


def restrict(instance: CLHInstance, v: int, blocks: dict[int, TensorFactorization], step: int = 0) -> Restriction:
    """Conjugate by the chosen block isometries, split off ``v`` and prune.

    ``instance`` is the remaining system after the discarded terms were
    removed.  Terms are snapped back to exact projections after compression,
    then identity factors and scalar terms are pruned (a scalar 1 is counted as
    permanently violated, a scalar 0 disappears).
    """
    dims = dict(instance.dims)
    term = instance.term(v)
    support = list(term.support)

    # the isolated term: conjugate every axis, keep the d1 factors
    mat = term.matrix
    cur = [dims[q] for q in support]
    for i, q in enumerate(support):
        mat = conjugate_axis(mat, cur, i, blocks[q].isometry)
        cur[i] = blocks[q].isometry.shape[0]
    split = []
    for q in support:
        split += [blocks[q].d1, blocks[q].d2]
    iso_res = 0.0
    for i in reversed(range(len(support))):
        r, mat = factor_residual(mat, split, 2 * i + 1)
        iso_res = max(iso_res, r)
        split.pop(2 * i + 1)
    good = GoodTerm(step, v, tuple(support), tuple(split), clean_projection(mat))

    new_terms: dict[int, LocalTerm] = {}
    other_res = 0.0
    touched = set()
    for t in instance.terms:
        if t.id == v:
            continue
        hit = [q for q in t.support if q in blocks]
        if not hit:
            new_terms[t.id] = t
            continue
        touched.add(t.id)
        m = t.matrix
        tdims = [dims[q] for q in t.support]
        for q in hit:
            axis = t.support.index(q)
            blk = blocks[q]
            m = conjugate_axis(m, tdims, axis, blk.isometry)
            sdims = tdims[:axis] + [blk.d1, blk.d2] + tdims[axis + 1:]
            r, m = factor_residual(m, sdims, axis)
            other_res = max(other_res, r)
            tdims[axis] = blk.d2
        new_terms[t.id] = LocalTerm(t.id, t.support, clean_projection(m))

    for q in support:
        dims[q] = blocks[q].d2
    gone = sorted(q for q in support if dims[q] == 1)
    for q in gone:
        del dims[q]

    violated, dropped, pruned = [], [], []
    for tid in sorted(touched):
        t = new_terms[tid]
        # dimension-one factors are dropped outright
        keep = [q for q in t.support if q in dims]
        if len(keep) != len(t.support):
            pruned += [(tid, q) for q in t.support if q not in dims]
            t = LocalTerm(tid, tuple(keep), t.matrix)
        t, dq = drop_trivial_factors(t, dims, PRUNE_TOL)
        pruned += [(tid, q) for q in dq]
        if t.is_scalar:
            del new_terms[tid]
            if t.matrix[0, 0].real > 0.5:
                violated.append(tid)
            else:
                dropped.append(tid)
        else:
            new_terms[tid] = t
    return Restriction(good, new_terms, dims, violated, dropped, pruned, gone, iso_res, other_res)


def restricted_instance(r: Restriction) -> CLHInstance:
    return CLHInstance(tuple(QuditInfo(q, d) for q, d in sorted(r.dims.items())),
                       tuple(r.terms[t] for t in sorted(r.terms)))


# ----------------------------------------------------------------------------
# subspace oracles

class SubspaceOracle(Protocol):
    def choose(self, instance: CLHInstance, v: int, decs: dict[int, QuditDecomposition], step: int) -> dict[int, int]:
        ...


class LowestIndexOracle:
    """Always the first block on every qudit.  No ground-space guarantee."""

    name = "lowest"

    def choose(self, instance, v, decs, step):
        return {q: 0 for q in decs}


class FixedChoiceOracle:
    """Replays externally supplied block labels, one mapping per step."""

    name = "fixed"

    def __init__(self, choices: list[dict[int, int]]):
        self.choices = choices

    def choose(self, instance, v, decs, step):
        if step >= len(self.choices):
            raise OracleRefused(f"no block choice supplied for step {step}", step)
        return dict(self.choices[step])


class ExactProver:
    """Honest prover: the first block tuple (lexicographic) keeping the ground energy.

    Every block projector commutes with the remaining Hamiltonian, so a block
    tuple overlaps the ground space exactly when the ground energy of the
    restricted system equals the current one.  Only the connected component
    containing ``v`` is diagonalized.
    """

    name = "exact"

    def __init__(self, budget: int = ORACLE_BUDGET):
        self.budget = budget

    def choose(self, instance, v, decs, step):
        comp = next(c for c in components(instance) if v in c.term_index)
        try:
            before = ground_energy(comp, self.budget)
        except BudgetExceeded as exc:
            raise BudgetExceeded(
                f"step {step}: {exc}; supply an external witness or use the lowest-index oracle"
            ) from None
        support = instance.term(v).support
        ranges = [range(len(decs[q].blocks)) for q in support]
        for combo in itertools.product(*ranges):
            blocks = {q: decs[q].blocks[a] for q, a in zip(support, combo)}
            r = restrict(comp, v, blocks, step)
            after = r.good.energy + len(r.violated) + ground_energy(restricted_instance(r), self.budget)
            if abs(after - before) <= ENERGY_TOL:
                return dict(zip(support, combo))
        raise OracleRefused(f"step {step}: no block tuple overlaps the ground space", step)


# ----------------------------------------------------------------------------
# run records

@dataclass
class ChainLink:
    step: int
    isometry: np.ndarray
    d1: int
    d2: int


@dataclass
class IsolationRecord:
    t: int
    v: int
    S: tuple[int, ...]
    removed: list[int]
    decompositions: dict[int, QuditDecomposition]
    chosen_alpha: dict[int, int]
    pruned_terms: list[int]
    violated_terms: list[int]
    pruned_factors: list[tuple[int, int]]
    pruned_qudits: list[int]
    isolated_residual: float = 0.0
    others_residual: float = 0.0

    def chosen_block(self, q: int) -> TensorFactorization:
        return self.decompositions[q].blocks[self.chosen_alpha[q]]


@dataclass
class PenaltyLedger:
    entries: list[tuple[int, int, Fraction]]
    epsilon: Fraction
    k: int
    d: int
    m: int
    removed_total: int
    exhaustive: bool

    @property
    def gamma(self) -> Fraction:
        return gamma_bound(self.k, self.d, self.epsilon)

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.removed_total, self.m) if self.m else Fraction(0)

    @property
    def applicable(self) -> bool:
        return self.epsilon < Fraction(1, 2)

    @property
    def bound_holds(self) -> bool:
        return self.ratio <= self.gamma

    def entry_total(self) -> Fraction:
        return sum((p for _, _, p in self.entries), Fraction(0))

    def step_totals(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for t, _, p in self.entries:
            out[t] = out.get(t, Fraction(0)) + p
        return out


@dataclass
class IsolationRun:
    instance: CLHInstance
    seed: int
    records: list[IsolationRecord] = field(default_factory=list)
    R_bad: list[int] = field(default_factory=list)
    R_good: list[GoodTerm] = field(default_factory=list)
    R_rem_final: CLHInstance | None = None
    violated: list[int] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    dimension_ledger: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)
    chains: dict[int, list[ChainLink]] = field(default_factory=dict)
    expansion: ExpansionReport | None = None

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def E_kept(self) -> float:
        e = sum(g.energy for g in self.R_good) + len(self.violated)
        if self.R_rem_final is not None:
            e += sum(float(np.linalg.eigvalsh(t.matrix)[0]) for t in self.R_rem_final.terms)
        return float(e)

    @property
    def interval(self) -> tuple[float, float]:
        return self.E_kept, self.E_kept + len(self.R_bad)

    def partition_ok(self) -> bool:
        rem = [t.id for t in self.R_rem_final.terms] if self.R_rem_final else []
        good = [g.term for g in self.R_good]
        parts = self.R_bad + good + rem + self.violated + self.dropped
        return sorted(parts) == sorted(t.id for t in self.instance.terms)


def has_intersections(instance: CLHInstance) -> bool:
    return any(len(ts) >= 2 for ts in instance.terms_on.values())


class _State:
    """Mutable remaining system: current local dimensions and remaining terms."""

    def __init__(self, instance: CLHInstance):
        self.dims = dict(instance.dims)
        self.terms = {t.id: t for t in instance.terms}

    def instance(self) -> CLHInstance:
        return CLHInstance(tuple(QuditInfo(q, d) for q, d in sorted(self.dims.items())),
                           tuple(self.terms[t] for t in sorted(self.terms)))


def _initial_scalars(run: IsolationRun, state: _State) -> None:
    for tid in sorted(state.terms):
        t = state.terms[tid]
        if t.is_scalar:
            del state.terms[tid]
            (run.violated if t.matrix[0, 0].real > 0.5 else run.dropped).append(tid)


def isolate_term(run: IsolationRun, state: _State, v: int, oracle: SubspaceOracle) -> IsolationRecord:
    """One isolate / split / restrict / prune step on the running state."""
    t = run.T
    inst = state.instance()
    graph = build_interaction_graph(inst)
    _, removal = isolation_penalty(graph, v)
    removed = sorted(removal)
    for r in removed:
        del state.terms[r]
    run.R_bad.extend(removed)
    inst = state.instance()
    support = inst.term(v).support
    decs = {q: bv_decompose_qudit(inst, v, q, run.seed + 7919 * t + q) for q in support}
    alpha = oracle.choose(inst, v, decs, t)
    for q in support:
        if q not in alpha or not 0 <= alpha[q] < len(decs[q].blocks):
            raise OracleRefused(f"step {t}: invalid block label for qudit {q}", t)
    blocks = {q: decs[q].blocks[alpha[q]] for q in support}
    res = restrict(inst, v, blocks, t)
    for q in support:
        before = inst.dims[q]
        run.dimension_ledger.setdefault(q, []).append((t, before, blocks[q].d2))
        run.chains.setdefault(q, []).append(
            ChainLink(t, blocks[q].isometry, blocks[q].d1, blocks[q].d2))
    state.dims = res.dims
    state.terms = res.terms
    run.R_good.append(res.good)
    run.violated.extend(res.violated)
    run.dropped.extend(res.dropped_terms)
    rec = IsolationRecord(t, v, tuple(support), removed, decs, alpha, res.dropped_terms + res.violated,
                          res.violated, res.pruned_factors, res.pruned_qudits,
                          res.isolated_residual, res.others_residual)
    run.records.append(rec)
    return rec


def penalty_ledger(run: IsolationRun) -> PenaltyLedger:
    """Share each step's discarded count over ``S_t`` in proportion to initial degrees."""
    inst = run.instance
    degrees = build_interaction_graph(inst).degrees
    entries = []
    for rec in run.records:
        total = sum(degrees[q] for q in rec.S)
        for q in rec.S:
            entries.append((rec.t, q, Fraction(len(rec.removed) * degrees[q], total)))
    eps = run.expansion.epsilon if run.expansion else Fraction(0)
    exhaustive = run.expansion.exhaustive if run.expansion else False
    return PenaltyLedger(entries, eps, inst.locality, inst.d, inst.m, len(run.R_bad), exhaustive)


def run_isolation(
    instance: CLHInstance,
    oracle: SubspaceOracle | None = None,
    seed: int = DEFAULT_SEED,
    audit_budget: int = AUDIT_BUDGET,
    validate: bool = True,
):
    """Run the isolation loop to completion.

    Returns ``(run, ledger, witness)``; the witness is a :class:`clhforge.witness.Witness`.
    """
    from .witness import witness_from_run

    if validate:
        report = validate_instance(instance)
        if not report.ok:
            raise ValueError(f"instance is not a valid commuting projector instance: {report.as_dict()}")
    oracle = oracle or ExactProver()
    run = IsolationRun(instance, seed)
    graph = build_interaction_graph(instance)
    run.expansion = local_expansion_error(graph, max(instance.locality, 1), audit_budget)
    state = _State(instance)
    _initial_scalars(run, state)
    while has_intersections(state.instance()):
        before = len(state.terms)
        v = min(state.terms)
        isolate_term(run, state, v, oracle)
        assert len(state.terms) < before
    run.R_rem_final = state.instance()
    ledger = penalty_ledger(run)
    if ledger.applicable and not ledger.bound_holds:
        log.error("discarded fraction %s exceeds 2kd*eps = %s", ledger.ratio, ledger.gamma)
    return run, ledger, witness_from_run(run)
