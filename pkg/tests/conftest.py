import copy

import numpy as np
import pytest

from clhforge.generators import clause_projector, gen_toric, pauli_projector
from clhforge.model import CLHInstance, LocalTerm, QuditInfo, canonicalize

KET0 = np.diag([1.0, 0.0]).astype(complex)
KET1 = np.diag([0.0, 1.0]).astype(complex)


def make_instance(dims, terms, canonical=True):
    """``terms`` is a list of (support, matrix); ids follow list order."""
    qudits = tuple(QuditInfo(i, d) for i, d in enumerate(dims))
    inst = CLHInstance(qudits, tuple(LocalTerm(i, tuple(s), m) for i, (s, m) in enumerate(terms)))
    return canonicalize(inst) if canonical else inst


def random_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def hidden_split_instance(seed=0):
    """A dim-4 qudit secretly split as 2 (x) 2: term 0 acts on the first half,
    term 1 on the second half; each also touches its own qubit."""
    rng = np.random.default_rng(seed)
    u = random_unitary(4, rng)
    # Bell projectors: their compressions span all 2x2 matrices on the half they touch
    bell = np.zeros(4, dtype=complex)
    bell[[0, 3]] = 1 / np.sqrt(2)
    pa = np.outer(bell, bell.conj())  # on (qubit 0, half a)
    pb = pa  # on (half b, qubit 2)
    a = np.kron(pa, np.eye(2))  # qubit0, half a, half b
    b = np.kron(np.eye(2), pb)  # half a, half b, qubit2
    ua = np.kron(np.eye(2), u)
    ub = np.kron(u, np.eye(2))
    return make_instance([2, 4, 2], [((0, 1), ua @ a @ ua.conj().T), ((1, 2), ub @ b @ ub.conj().T)])


@pytest.fixture
def toric2():
    return gen_toric(2)


@pytest.fixture(scope="session")
def toric3():
    return gen_toric(3)


@pytest.fixture
def xz_conflict():
    """(I - XX)/2 on (0,1) and (I - ZZ)/2 on (1,2): they do not commute."""
    return make_instance([2, 2, 2], [((0, 1), pauli_projector("XX")), ((1, 2), pauli_projector("ZZ"))])


@pytest.fixture
def three_clauses():
    """Three diagonal clauses on three bits."""
    return make_instance([2, 2, 2], [
        ((0, 1), clause_projector([2, 2], [(0, 0)])),
        ((1, 2), clause_projector([2, 2], [(1, 1)])),
        ((0, 2), clause_projector([2, 2], [(0, 1), (1, 0)])),
    ])


MUTATIONS = ("isometry", "removal", "alpha")


def mutate_witness(witness, kind, rng, instance):
    """A deep copy of ``witness`` with one deliberate fault of the given kind."""
    w = copy.deepcopy(witness)
    t = int(rng.integers(len(w.steps)))
    step = w.steps[t]
    claim = step.qudits[int(rng.integers(len(step.qudits)))]
    if kind == "isometry":
        iso = claim.isometry.copy()
        iso.flat[int(rng.integers(iso.size))] += 1e-3
        claim.isometry = iso
    elif kind == "removal":
        if step.removed and rng.random() < 0.5:
            step.removed = step.removed[1:]
        else:
            extra = [t.id for t in instance.terms if t.id != step.term and t.id not in step.removed]
            step.removed = sorted(set(step.removed) | {int(rng.choice(extra))})
    elif kind == "alpha":
        claim.alpha = int(rng.choice([-1, 50, claim.alpha + 1 + int(rng.integers(3))]))
    else:
        raise ValueError(kind)
    return w
