"""Witness documents and their polynomial-time verification.

A witness lists, per isolation step, the isolated term, the discarded terms
and, for every qudit of the isolated term, the chosen block label with its
projector and isometry.  The verifier replays the steps on the instance,
checking each claim before using it, and finally diagonalizes the kept
pieces, each acting on at most ``k`` factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import TensorFactorization, block_projectors
from .graph import build_interaction_graph, isolation_penalty
from .isolation import (
    ChainLink,
    IsolationRecord,
    IsolationRun,
    _State,
    _initial_scalars,
    has_intersections,
    restrict,
)
from .model import CLHInstance, dumps, matrix_to_pairs, pairs_to_flat, parse_json, schema_check
from .tensor import expand_operator

VERIFY_TOL = 1e-8
LABEL_TOL = 1e-6
ENERGY_TOL = 1e-7


@dataclass
class QuditClaim:
    id: int
    alpha: int
    projector: np.ndarray
    isometry: np.ndarray
    d1: int
    d2: int


@dataclass
class WitnessStep:
    term: int
    removed: list[int]
    qudits: list[QuditClaim]


@dataclass
class Witness:
    seed: int
    steps: list[WitnessStep]
    E_kept: float
    R_bad_count: int
    target: str = "ground"

    @property
    def claimed_interval(self) -> tuple[float, float]:
        return self.E_kept, self.E_kept + self.R_bad_count


def witness_from_run(run: IsolationRun) -> Witness:
    steps = []
    for rec in run.records:
        claims = []
        for q in rec.S:
            blk = rec.chosen_block(q)
            claims.append(QuditClaim(q, rec.chosen_alpha[q], blk.projector, blk.isometry, blk.d1, blk.d2))
        steps.append(WitnessStep(rec.v, list(rec.removed), claims))
    return Witness(run.seed, steps, run.E_kept, len(run.R_bad))


# ----------------------------------------------------------------------------
# serialization

_INT = {"type": "integer"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                      "minItems": 2, "maxItems": 2}}
WITNESS_SCHEMA = {
    "type": "object",
    "required": ["version", "seed", "steps", "E_kept", "R_bad_count"],
    "properties": {
        "version": {"const": 1},
        "seed": _INT,
        "target": {"const": "ground"},
        "E_kept": {"type": "number"},
        "R_bad_count": {"type": "integer", "minimum": 0},
        "claimed_interval": {"type": "array", "items": {"type": "number"}},
        "steps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["term", "removed", "qudits"],
                "properties": {
                    "term": _INT,
                    "removed": {"type": "array", "items": _INT},
                    "qudits": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "alpha", "projector", "isometry", "d1", "d2"],
                            "properties": {
                                "id": _INT,
                                "alpha": _INT,
                                "projector": _MATRIX,
                                "isometry": _MATRIX,
                                "d1": {"type": "integer", "minimum": 1},
                                "d2": {"type": "integer", "minimum": 1},
                            },
                        },
                    },
                },
            },
        },
    },
}


def witness_to_doc(w: Witness) -> dict:
    return {
        "version": 1,
        "seed": w.seed,
        "target": w.target,
        "steps": [
            {
                "term": s.term,
                "removed": list(s.removed),
                "qudits": [
                    {
                        "id": c.id,
                        "alpha": c.alpha,
                        "projector": matrix_to_pairs(c.projector),
                        "isometry": matrix_to_pairs(c.isometry),
                        "d1": c.d1,
                        "d2": c.d2,
                    }
                    for c in s.qudits
                ],
            }
            for s in w.steps
        ],
        "E_kept": float(w.E_kept),
        "R_bad_count": w.R_bad_count,
        "claimed_interval": [float(w.E_kept), float(w.E_kept + w.R_bad_count)],
    }


def witness_from_doc(doc: dict) -> Witness:
    """Parse a witness; matrices are kept flat until the verifier knows their shapes."""
    schema_check(doc, WITNESS_SCHEMA)
    steps = []
    for s in doc["steps"]:
        claims = []
        for c in s["qudits"]:
            claims.append(QuditClaim(int(c["id"]), int(c["alpha"]), pairs_to_flat(c["projector"]),
                                     pairs_to_flat(c["isometry"]), int(c["d1"]), int(c["d2"])))
        steps.append(WitnessStep(int(s["term"]), [int(r) for r in s["removed"]], claims))
    return Witness(int(doc["seed"]), steps, float(doc["E_kept"]), int(doc["R_bad_count"]),
                   doc.get("target", "ground"))


def save_witness(w: Witness) -> bytes:
    return dumps(witness_to_doc(w))


def load_witness(data: bytes | str) -> Witness:
    return witness_from_doc(parse_json(data))


# ----------------------------------------------------------------------------
# verification

@dataclass
class VerificationResult:
    accepted: bool
    failed_check: str | None = None
    message: str = ""
    step: int | None = None
    E_kept: float | None = None
    R_bad_count: int | None = None
    run: IsolationRun | None = field(default=None, repr=False)

    @property
    def interval(self) -> tuple[float, float] | None:
        if not self.accepted:
            return None
        return self.E_kept, self.E_kept + self.R_bad_count


class _Reject(Exception):
    def __init__(self, check: str, message: str, step: int | None = None):
        super().__init__(message)
        self.check = check
        self.step = step


def _shape_claim(c: QuditClaim, dim: int, step: int) -> tuple[np.ndarray, np.ndarray]:
    if c.projector.size != dim * dim:
        raise _Reject("b", f"projector for qudit {c.id} has {c.projector.size} entries, expected {dim * dim}", step)
    rows = c.d1 * c.d2
    if c.isometry.size != rows * dim:
        raise _Reject("c", f"isometry for qudit {c.id} has {c.isometry.size} entries, expected {rows * dim}", step)
    return c.projector.reshape(dim, dim), c.isometry.reshape(rows, dim)


def verify_witness(instance: CLHInstance, witness: Witness) -> VerificationResult:
    """Replay a witness and accept or reject it.

    Checks, per step: (a) the discarded set is exactly the set of terms sharing
    two or more qudits with the isolated term; (b) each claimed projector is
    the labelled block of the isolated term's algebra on that qudit, is an
    orthogonal projector and commutes with every remaining term on the qudit;
    (c) each isometry maps the block onto ``C^d1 ⊗ C^d2`` with the isolated
    term on the first factor and every other term on the second.  After the
    last step no two remaining terms may overlap; (d) the kept energy is the
    sum of the minimal eigenvalues of the kept pieces.  The certified interval
    is ``[E_kept, E_kept + |R_bad|]``.
    """
    run = IsolationRun(instance, witness.seed)
    state = _State(instance)
    _initial_scalars(run, state)
    try:
        for t, step in enumerate(witness.steps):
            _verify_step(run, state, t, step)
        if has_intersections(state.instance()):
            raise _Reject("a", "remaining terms still overlap after the last step")
        run.R_rem_final = state.instance()
        e_kept = run.E_kept
        if abs(e_kept - witness.E_kept) > ENERGY_TOL:
            raise _Reject("d", f"claimed E_kept {witness.E_kept} but kept pieces give {e_kept}")
        if witness.R_bad_count != len(run.R_bad):
            raise _Reject("d", f"claimed {witness.R_bad_count} discarded terms, replay discarded {len(run.R_bad)}")
    except _Reject as rej:
        return VerificationResult(False, rej.check, str(rej), rej.step)
    return VerificationResult(True, None, "accepted", None, e_kept, len(run.R_bad), run)


def _verify_step(run: IsolationRun, state: _State, t: int, step: WitnessStep) -> None:
    inst = state.instance()
    v = step.term
    if v not in state.terms:
        raise _Reject("a", f"term {v} is not among the remaining terms", t)
    _, removal = isolation_penalty(build_interaction_graph(inst), v)
    if sorted(step.removed) != sorted(removal):
        raise _Reject("a", f"discarded set {sorted(step.removed)} does not isolate term {v} minimally "
                           f"(expected {sorted(removal)})", t)
    for r in step.removed:
        del state.terms[r]
    run.R_bad.extend(sorted(step.removed))
    inst = state.instance()
    support = inst.term(v).support
    if sorted(c.id for c in step.qudits) != sorted(support):
        raise _Reject("b", f"qudit claims {[c.id for c in step.qudits]} do not match support {list(support)}", t)
    dims = inst.dims
    blocks: dict[int, TensorFactorization] = {}
    for c in step.qudits:
        d = dims[c.id]
        proj, iso = _shape_claim(c, d, t)
        tol = VERIFY_TOL * d
        # (b) block label and invariance
        canon = block_projectors(inst, v, c.id, run.seed + 7919 * t + c.id)
        if not 0 <= c.alpha < len(canon):
            raise _Reject("b", f"qudit {c.id}: block label {c.alpha} out of range ({len(canon)} blocks)", t)
        if np.linalg.norm(canon[c.alpha] - proj) > LABEL_TOL:
            raise _Reject("b", f"qudit {c.id}: projector does not match block {c.alpha}", t)
        if np.linalg.norm(proj - proj.conj().T) > tol or np.linalg.norm(proj @ proj - proj) > tol:
            raise _Reject("b", f"qudit {c.id}: claimed projector is not an orthogonal projector", t)
        for tid in inst.terms_on[c.id]:
            term = inst.term(tid)
            pe = expand_operator(proj, [c.id], term.support, dims)
            if np.linalg.norm(pe @ term.matrix - term.matrix @ pe) > tol * pe.shape[0]:
                raise _Reject("b", f"qudit {c.id}: block is not invariant under term {tid}", t)
        # (c) isometry contract
        if c.d1 * c.d2 != int(round(np.trace(proj).real)):
            raise _Reject("c", f"qudit {c.id}: d1*d2 = {c.d1 * c.d2} differs from the block rank", t)
        if np.linalg.norm(iso @ iso.conj().T - np.eye(iso.shape[0])) > tol:
            raise _Reject("c", f"qudit {c.id}: isometry is not an isometry", t)
        if np.linalg.norm(iso.conj().T @ iso - proj) > tol:
            raise _Reject("c", f"qudit {c.id}: isometry does not have the block as its domain", t)
        blocks[c.id] = TensorFactorization(proj, iso, (c.d1, c.d2))
    res = restrict(inst, v, blocks, t)
    tol = VERIFY_TOL * max(dims[q] for q in support) * 10
    if res.isolated_residual > tol:
        raise _Reject("c", f"term {v} is not confined to factor 0 (residual {res.isolated_residual:.2e})", t)
    if res.others_residual > tol:
        raise _Reject("c", f"neighbors of term {v} are not confined to factor 1 "
                           f"(residual {res.others_residual:.2e})", t)
    for q in support:
        run.chains.setdefault(q, []).append(ChainLink(t, blocks[q].isometry, blocks[q].d1, blocks[q].d2))
        run.dimension_ledger.setdefault(q, []).append((t, dims[q], blocks[q].d2))
    state.dims = res.dims
    state.terms = res.terms
    run.R_good.append(res.good)
    run.violated.extend(res.violated)
    run.dropped.extend(res.dropped_terms)
    run.records.append(IsolationRecord(
        t, v, tuple(support), sorted(step.removed), {}, {c.id: c.alpha for c in step.qudits},
        res.dropped_terms + res.violated, res.violated, res.pruned_factors, res.pruned_qudits,
        res.isolated_residual, res.others_residual))
