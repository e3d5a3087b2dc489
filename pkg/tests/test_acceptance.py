"""Acceptance suite: eight end-to-end criteria over a seeded corpus.

Each test prints one ``PASS`` / ``FAIL`` line (visible under ``pytest -v``)
before asserting.
"""

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pytest

from clhforge.algebra import decomposition_residuals
from clhforge.circuit import apply_circuit, build_circuit
from clhforge.errors import BudgetExceeded
from clhforge.generators import (
    gen_commuting_pauli,
    gen_csp_embed,
    gen_design_expander,
    gen_toric,
    planted_sat_clauses,
)
from clhforge.isolation import ExactProver, LowestIndexOracle, run_isolation
from clhforge.model import energy_of_state, validate_instance
from clhforge.oracle import full_spectrum, ground_energy, integrality_check
from clhforge.witness import verify_witness

from conftest import MUTATIONS, mutate_witness

CIRCUIT_DIM = 2**12
INTEGRALITY_DIM = 2**10
RUNTIME_LIMIT = 300.0
E_TOL = 1e-7
RES_TOL = 1e-8

# (n, k, degree, overlap_cap, options, seeds, prover)
CORPUS_SHAPES = [
    (12, 3, 3, 2, {"mode": "diagonal"}, range(6), "exact"),
    (12, 3, 3, 2, {"mode": "rotated"}, range(6), "exact"),
    (12, 3, 4, 2, {"mode": "pauli"}, range(6), "exact"),
    (12, 3, 5, 2, {"mode": "rotated"}, range(4), "exact"),
    (8, 3, 3, 2, {"mode": "rotated", "dims": 3}, range(6), "exact"),
    (7, 3, 3, 2, {"mode": "diagonal", "dims": 3}, range(6), "exact"),
    (12, 3, 3, 1, {"mode": "rotated"}, range(6), "exact"),
    (12, 3, 3, 1, {"mode": "diagonal"}, range(6, 12), "exact"),
    (13, 4, 4, 2, {"mode": "diagonal"}, range(6), "exact"),
    (13, 4, 4, 2, {"mode": "rotated"}, range(6), "exact"),
    (14, 4, 5, 2, {"mode": "diagonal"}, range(4), "exact"),
    (16, 4, 5, 2, {"mode": "diagonal", "dims": 3}, range(6), "lowest"),
]


def report(number, title, ok, detail):
    line = f"[acceptance {number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(line)
    return ok


@pytest.fixture
def say(capsys):
    def emit(*args):
        with capsys.disabled():
            print()
            return report(*args)
    return emit


class RecordingOracle:
    """Wraps a subspace oracle and checks every decomposition it is shown."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.residuals = []

    def choose(self, instance, v, decs, step):
        for dec in decs.values():
            self.residuals.append(decomposition_residuals(instance, v, dec))
        return self.inner.choose(instance, v, decs, step)


@dataclass
class Case:
    label: str
    instance: object
    cap: int
    run: object = None
    ledger: object = None
    witness: object = None
    seconds: float = 0.0
    residuals: list = field(default_factory=list)
    verified: object = None
    lam: float | None = None
    circuit: object = None
    circuit_energy: float | None = None
    replay_energy: float | None = None


@pytest.fixture(scope="module")
def corpus():
    cases, skipped = [], []
    for n, k, deg, cap, opts, seeds, prover in CORPUS_SHAPES:
        for seed in seeds:
            label = f"design(n={n},k={k},D={deg},cap={cap},{opts},seed={seed})"
            try:
                inst = gen_design_expander(n, k, deg, cap, seed, **opts)
            except BudgetExceeded:
                skipped.append((label, "generation infeasible"))
                continue
            case = Case(label, inst, cap)
            oracle = RecordingOracle(ExactProver() if prover == "exact" else LowestIndexOracle())
            t0 = time.perf_counter()
            case.run, case.ledger, case.witness = run_isolation(inst, oracle, seed)
            case.seconds = time.perf_counter() - t0
            case.residuals = oracle.residuals
            if not case.ledger.applicable:
                skipped.append((label, f"measured eps = {case.ledger.epsilon} >= 1/2"))
                continue
            cases.append(case)
    for case in cases:
        inst = case.instance
        case.verified = verify_witness(inst, case.witness)
        if inst.total_dim <= CIRCUIT_DIM:
            case.lam = ground_energy(inst)
            if case.verified.accepted:
                case.circuit = build_circuit(case.run, case.witness)
                case.circuit_energy = energy_of_state(inst, apply_circuit(case.circuit, inst))
                replayed = build_circuit(case.verified.run, case.witness)
                case.replay_energy = energy_of_state(inst, apply_circuit(replayed, inst))
    return cases, skipped


def test_criterion_1_discard_bound(corpus, say):
    cases, skipped = corpus
    seconds = sum(c.seconds for c in cases)
    ks = sorted({c.ledger.k for c in cases})
    ds = sorted({c.ledger.d for c in cases})
    bad = [c.label for c in cases if not Fraction(len(c.run.R_bad), c.instance.m) <= c.ledger.gamma]
    worst = max(Fraction(len(c.run.R_bad), c.instance.m) / c.ledger.gamma
                for c in cases if c.ledger.gamma > 0)
    ok = len(cases) >= 50 and not bad and seconds <= RUNTIME_LIMIT and ks == [3, 4] and ds == [2, 3]
    say(1, "|R_bad|/m <= 2kd*eps (exact rationals)", ok,
        f"{len(cases)} instances (k={ks}, d={ds}; {len(skipped)} candidates excluded), "
        f"{len(bad)} violations, max ratio/gamma = {float(worst):.3f}, isolation time {seconds:.1f} s")
    assert ok, (bad, skipped)


def test_criterion_2_energy_approximation(corpus, say):
    cases, _ = corpus
    checked, bad = 0, []
    for c in cases:
        if c.instance.total_dim > CIRCUIT_DIM:
            continue
        checked += 1
        slack = float(c.ledger.gamma) * c.instance.m
        lo, hi = c.verified.interval if c.verified.accepted else (np.inf, -np.inf)
        if not (abs(c.circuit_energy - c.lam) <= slack + E_TOL and lo - E_TOL <= c.lam <= hi + E_TOL):
            bad.append(c.label)
    ok = checked > 0 and not bad
    say(2, "|<psi|H|psi> - lambda| <= 2kd*eps*m and lambda in certified interval", ok,
        f"{checked} instances with dim <= 2^12, {len(bad)} failures")
    assert ok, bad


def test_criterion_3_degree_one_neighbors(corpus, say):
    cases, _ = corpus
    audited = [c for c in cases if c.run.expansion.exhaustive]
    sets = sum(c.run.expansion.audited_sets for c in audited)
    bad = [(c.label, c.run.expansion.fact1_violations) for c in audited if c.run.expansion.fact1_violations]
    ok = len(audited) >= 20 and not bad
    say(3, "exhaustive audit: eps_S < 1/2 implies degree-one fraction >= 1 - 2 eps_S", ok,
        f"{len(audited)} instances, {sets} subsets audited, {len(bad)} violations")
    assert ok, bad


def test_criterion_4_decomposition_correctness(corpus, say):
    cases, _ = corpus
    res = [r for c in cases for r in c.residuals]
    restrict = [max(rec.isolated_residual, rec.others_residual) for c in cases for rec in c.run.records]
    worst_bd = max(r.block_diagonal for r in res)
    worst_fr = max(r.factorization for r in res)
    worst_rs = max(restrict, default=0.0)
    law = all(r.dimension_law for r in res)
    strict = [r.strict_decrease for r in res if r.strict_decrease is not None]
    ok = worst_bd <= RES_TOL and worst_fr <= RES_TOL and worst_rs <= RES_TOL and law and all(strict)
    say(4, "decomposition residuals, dimension law, strict decrease", ok,
        f"{len(res)} decompositions, block-diag {worst_bd:.1e}, factorization {worst_fr:.1e}, "
        f"restriction {worst_rs:.1e}, strict decrease {sum(strict)}/{len(strict)} applicable")
    assert ok


def integrality_corpus():
    out = [("toric L=2", gen_toric(2))]
    for seed in range(8):
        for mode in ("diagonal", "rotated"):
            out.append((f"design 9/3/3/2 {mode} {seed}", gen_design_expander(9, 3, 3, 2, seed, mode=mode)))
        out.append((f"design 10/3/3/1 {seed}", gen_design_expander(10, 3, 2, 1, seed, mode="rotated")))
        out.append((f"design d=3 6/3/2/2 {seed}", gen_design_expander(6, 3, 2, 2, seed, mode="rotated", dims=3)))
        out.append((f"pauli 10/4/9 {seed}", gen_commuting_pauli(10, 4, 9, seed)))
        clauses, _ = planted_sat_clauses(10, 20, 3, seed)
        out.append((f"planted sat {seed}", gen_csp_embed(clauses, 2)))
    return out


def test_criterion_5_integral_spectra(say):
    corpus = integrality_corpus()
    checked, bad = 0, []
    for label, inst in corpus:
        assert inst.total_dim <= INTEGRALITY_DIM
        assert validate_instance(inst).ok
        spec = full_spectrum(inst)
        checked += 1
        if not (spec.complete and integrality_check(spec, inst.m)):
            bad.append(label)
    ok = checked >= 40 and not bad
    say(5, "spectra are integers in [0, m] (dim <= 2^10)", ok, f"{checked} instances, {len(bad)} failures")
    assert ok, bad


def test_criterion_6_exact_case(corpus, say):
    cases, _ = corpus
    exact = [c for c in cases if c.cap == 1]
    bad = []
    for c in exact:
        if c.run.R_bad or c.circuit_energy is None or abs(c.circuit_energy - c.lam) > 1e-9:
            bad.append(c.label)
        elif abs(c.run.E_kept - c.lam) > 1e-9:
            bad.append(c.label)
    ok = len(exact) > 0 and not bad
    say(6, "overlap cap 1: R_bad empty and energy = lambda to 1e-9", ok,
        f"{len(exact)} instances, {len(bad)} failures")
    assert ok, bad


def test_criterion_7_circuit_contract(corpus, say):
    cases, _ = corpus
    emitted = [c for c in cases if c.circuit is not None]
    bad = []
    for c in emitted:
        circ = c.circuit
        singles = all({q for q, _ in g.factors} == {g.qudit} for g in circ.layer1)
        supports = [set(g.factors) for g in circ.layer2]
        disjoint = sum(len(s) for s in supports) == len(set().union(*supports)) if supports else True
        same = abs(c.circuit_energy - c.replay_energy) <= 1e-9
        if circ.check() or circ.depth != 2 or not singles or not disjoint or not same:
            bad.append(c.label)
    ok = len(emitted) > 0 and not bad
    say(7, "depth 2, single-qudit layer 1, disjoint layer 2, energy reproduced", ok,
        f"{len(emitted)} circuits, {len(bad)} failures")
    assert ok, bad


def test_criterion_8_verifier_soundness(say):
    honest = []
    seed = 0
    while len(honest) < 100:
        mode = ("diagonal", "rotated")[seed % 2]
        inst = gen_design_expander(9, 3, 3, 2, seed, mode=mode)
        _, _, w = run_isolation(inst, seed=seed)
        seed += 1
        if w.steps:
            honest.append((inst, w))
    accepted = sum(verify_witness(inst, w).accepted for inst, w in honest)
    rng = np.random.default_rng(2024)
    rejected, by_kind = 0, {k: 0 for k in MUTATIONS}
    for i in range(100):
        kind = MUTATIONS[i % len(MUTATIONS)]
        inst, w = honest[i]
        if not verify_witness(inst, mutate_witness(w, kind, rng, inst)).accepted:
            rejected += 1
            by_kind[kind] += 1
    ok = accepted == 100 and rejected == 100
    say(8, "verifier soundness", ok,
        f"honest accepted {accepted}/100, mutated rejected {rejected}/100 {by_kind}")
    assert ok
