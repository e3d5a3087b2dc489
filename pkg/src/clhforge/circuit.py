"""Depth-two state preparation from a completed (or replayed) isolation run.

Every physical qudit ends up split into a chain of factors: one factor torn
off at each step it took part in, plus whatever remnant survives.  Layer 1 is
one isometry per qudit (the composed chain, mapping the physical qudit onto
its factors); layer 2 is one unitary per kept piece, acting on that piece's
factors.  The prepared state is ``L1^dag L2 |0...0>``: layer 2 acts first on
the factor register, then layer 1 embeds the factors back into the qudits.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import BudgetExceeded
from .isolation import IsolationRun
from .oracle import DEFAULT_BUDGET
from .tensor import apply_on_axes

REMNANT = -1


@dataclass
class QuditGate:
    qudit: int
    matrix: np.ndarray  # (prod(factor dims), d_q)
    factors: list[tuple[int, int]]  # (qudit, step); step REMNANT is the surviving remnant
    factor_dims: list[int]


@dataclass
class ComponentGate:
    label: str
    factors: list[tuple[int, int]]
    dims: list[int]
    unitary: np.ndarray
    energy: float


@dataclass
class DepthTwoCircuit:
    layer1: list[QuditGate]
    layer2: list[ComponentGate]

    @property
    def depth(self) -> int:
        return 2

    def check(self) -> list[str]:
        """Structural problems (empty when the circuit meets its contract)."""
        problems = []
        for g in self.layer1:
            if any(q != g.qudit for q, _ in g.factors):
                problems.append(f"layer-1 gate on qudit {g.qudit} touches other qudits")
        seen: set[tuple[int, int]] = set()
        for g in self.layer2:
            if seen & set(g.factors):
                problems.append(f"layer-2 gate {g.label} overlaps another gate")
            seen |= set(g.factors)
            u = g.unitary
            if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-8:
                problems.append(f"layer-2 gate {g.label} is not unitary")
        return problems

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "layer1": [
                {"qudit": g.qudit, "factors": [list(f) for f in g.factors], "factor_dims": g.factor_dims}
                for g in self.layer1
            ],
            "layer2": [
                {"gate": g.label, "factors": [list(f) for f in g.factors], "dims": g.dims, "energy": g.energy}
                for g in self.layer2
            ],
        }


def _compose_chain(d: int, links) -> tuple[np.ndarray, list[int], list[int]]:
    w = np.eye(d, dtype=complex)
    steps: list[int] = []
    fdims: list[int] = []
    rem = d
    for link in links:
        head = w.shape[0] // rem
        w = w.reshape(head, rem, d)
        w = np.tensordot(link.isometry, w, axes=([1], [1]))  # (d1*d2, head, d)
        w = np.transpose(w, (1, 0, 2)).reshape(-1, d)
        steps.append(link.step)
        fdims.append(link.d1)
        rem = link.d2
    if rem > 1:
        steps.append(REMNANT)
        fdims.append(rem)
    return w, steps, fdims


def _ground_unitary(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    return v, float(w[0])


def build_circuit(run: IsolationRun, witness=None) -> DepthTwoCircuit:
    """Assemble both layers from the run's isometry chains and kept pieces.

    ``witness`` is accepted for symmetry with the verifier; a run replayed by
    :func:`clhforge.witness.verify_witness` carries the same chains.
    """
    inst = run.instance
    layer1 = []
    for q in inst.qudits:
        w, steps, fdims = _compose_chain(q.dim, run.chains.get(q.id, []))
        layer1.append(QuditGate(q.id, w, [(q.id, s) for s in steps], fdims))
    layer2 = []
    for g in run.R_good:
        u, e = _ground_unitary(g.matrix)
        layer2.append(ComponentGate(f"good:{g.term}", [(q, g.step) for q in g.qudits], list(g.dims), u, e))
    if run.R_rem_final is not None:
        for t in run.R_rem_final.terms:
            u, e = _ground_unitary(t.matrix)
            dims = [run.R_rem_final.dims[q] for q in t.support]
            layer2.append(ComponentGate(f"rem:{t.id}", [(q, REMNANT) for q in t.support], dims, u, e))
    return DepthTwoCircuit(layer1, layer2)


def apply_circuit(circuit: DepthTwoCircuit, instance, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Prepare the explicit state vector over the instance's qudits."""
    total = prod(q.dim for q in instance.qudits)
    if total > budget:
        raise BudgetExceeded(f"state dimension {total} exceeds budget {budget}")
    gates = {g.qudit: g for g in circuit.layer1}
    order = [q.id for q in instance.qudits]
    labels: list[tuple[int, int]] = []
    shape: list[int] = []
    for q in order:
        labels += gates[q].factors
        shape += gates[q].factor_dims
    pos = {f: i for i, f in enumerate(labels)}
    state = np.zeros(shape or [1], dtype=complex)
    state[(0,) * len(state.shape)] = 1.0
    for g in circuit.layer2:
        axes = [pos[f] for f in g.factors if f in pos]
        if len(axes) != len(g.factors):
            raise ValueError(f"layer-2 gate {g.label} refers to unknown factors")
        state = apply_on_axes(state, g.unitary, axes)
    outs = [int(gates[q].matrix.shape[0]) for q in order]
    state = state.reshape(outs)
    for i, q in enumerate(order):
        emb = gates[q].matrix.conj().T  # (d_q, out_q)
        state = np.moveaxis(np.tensordot(emb, state, axes=([1], [i])), 0, i)
    return state.ravel()
