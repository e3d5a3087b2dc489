"""Seeded instance generators.

All generators return canonicalized instances that pass
:func:`clhforge.model.validate_instance`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from math import prod
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, StructureError
from .model import CLHInstance, LocalTerm, QuditInfo, canonicalize, drop_trivial_factors

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(letters: str) -> np.ndarray:
    return reduce(np.kron, (PAULI[c] for c in letters), np.eye(1, dtype=complex))


def pauli_projector(letters: str) -> np.ndarray:
    """``(I - P) / 2``: the projector onto the -1 eigenspace of ``P``."""
    p = pauli_matrix(letters)
    return 0.5 * (np.eye(p.shape[0]) - p)


def symplectic(letters: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([c in "XY" for c in letters], dtype=np.uint8)
    z = np.array([c in "ZY" for c in letters], dtype=np.uint8)
    return x, z


def paulis_commute(a: dict[int, str], b: dict[int, str]) -> bool:
    """Symplectic test on sparse Pauli strings ``{qubit: letter}``."""
    anti = 0
    for q in set(a) & set(b):
        xa, za = symplectic(a[q])
        xb, zb = symplectic(b[q])
        anti += int(xa[0]) * int(zb[0]) + int(za[0]) * int(xb[0])
    return anti % 2 == 0


@dataclass
class GeneratorSpec:
    kind: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0


# ----------------------------------------------------------------------------
# toric code

def toric_edges(L: int) -> tuple[list[list[int]], list[list[int]]]:
    """Edge lists of the stars and plaquettes of an L x L torus.

    Horizontal edge ``(x, y)`` has index ``y L + x``; vertical edges follow.
    """
    def h(x, y):
        return (y % L) * L + (x % L)

    def v(x, y):
        return L * L + (y % L) * L + (x % L)

    stars = [[h(x, y), h(x - 1, y), v(x, y), v(x, y - 1)] for y in range(L) for x in range(L)]
    plaqs = [[h(x, y), v(x + 1, y), h(x, y + 1), v(x, y)] for y in range(L) for x in range(L)]
    return stars, plaqs


def gen_toric(L: int) -> CLHInstance:
    """Kitaev toric code: L^2 star terms (I - XXXX)/2 then L^2 plaquette terms (I - ZZZZ)/2."""
    if L < 2:
        raise ValueError("torus side must be >= 2")
    stars, plaqs = toric_edges(L)
    qudits = tuple(QuditInfo(i, 2) for i in range(2 * L * L))
    terms = []
    for i, s in enumerate(stars):
        terms.append(LocalTerm(i, tuple(s), pauli_projector("XXXX")))
    for j, p in enumerate(plaqs):
        terms.append(LocalTerm(L * L + j, tuple(p), pauli_projector("ZZZZ")))
    return canonicalize(CLHInstance(qudits, tuple(terms)))


# ----------------------------------------------------------------------------
# classical constraint satisfaction embedded as diagonal projectors

def clause_projector(dims: Sequence[int], forbidden: Sequence[Sequence[int]]) -> np.ndarray:
    side = prod(dims)
    diag = np.zeros(side)
    seen = set()
    for a in forbidden:
        a = tuple(int(x) for x in a)
        if a in seen:
            raise StructureError(f"duplicate forbidden assignment {a}")
        if len(a) != len(dims) or any(not 0 <= x < d for x, d in zip(a, dims)):
            raise StructureError(f"assignment {a} does not fit dims {list(dims)}")
        seen.add(a)
        diag[np.ravel_multi_index(a, dims)] = 1.0
    return np.diag(diag).astype(complex)


def gen_csp_embed(clauses: Sequence[tuple[Sequence[int], Sequence[Sequence[int]]]],
                  dims: Sequence[int] | int) -> CLHInstance:
    """One diagonal projector per clause, summing indicators of its forbidden assignments."""
    nvars = 1 + max((max(s) for s, _ in clauses if len(s)), default=-1)
    if isinstance(dims, int):
        dims = [dims] * nvars
    qudits = tuple(QuditInfo(i, int(d)) for i, d in enumerate(dims))
    terms = []
    for i, (support, forbidden) in enumerate(clauses):
        sdims = [dims[q] for q in support]
        terms.append(LocalTerm(i, tuple(support), clause_projector(sdims, forbidden)))
    return canonicalize(CLHInstance(qudits, tuple(terms)))


def planted_sat_clauses(n: int, count: int, k: int, seed: int,
                        overlap_cap: int | None = None) -> tuple[list, list[int]]:
    """Random k-SAT clauses (one forbidden assignment each) satisfied by a planted assignment."""
    rng = np.random.default_rng(seed)
    planted = [int(b) for b in rng.integers(0, 2, size=n)]
    clauses = []
    supports: list[set] = []
    tries = 0
    while len(clauses) < count:
        tries += 1
        if tries > 100 * count + 1000:
            raise BudgetExceeded("could not place clauses under the overlap cap")
        support = sorted(int(q) for q in rng.choice(n, size=k, replace=False))
        if overlap_cap is not None and any(len(s & set(support)) > overlap_cap for s in supports):
            continue
        while True:
            forb = [int(b) for b in rng.integers(0, 2, size=k)]
            if any(forb[i] != planted[q] for i, q in enumerate(support)):
                break
        clauses.append((support, [forb]))
        supports.append(set(support))
    return clauses, planted


def brute_force_assignments(instance: CLHInstance) -> list[tuple[tuple[int, ...], float]]:
    """Energy of every computational basis state of a diagonal instance."""
    out = []
    shape = [q.dim for q in instance.qudits]
    pos = {q.id: i for i, q in enumerate(instance.qudits)}
    for a in itertools.product(*(range(d) for d in shape)):
        e = 0.0
        for t in instance.terms:
            if t.is_scalar:
                e += t.matrix[0, 0].real
                continue
            sd = [instance.dims[q] for q in t.support]
            idx = np.ravel_multi_index(tuple(a[pos[q]] for q in t.support), sd)
            e += t.matrix[idx, idx].real
        out.append((a, float(e)))
    return out


# ----------------------------------------------------------------------------
# commuting Pauli stabilizer-style instances

def gen_commuting_pauli(n: int, k: int, count: int, seed: int, budget: int = 100000) -> CLHInstance:
    """Rejection-sample ``count`` pairwise commuting Pauli strings of weight 1..k; terms ``(I - P)/2``."""
    rng = np.random.default_rng(seed)
    accepted: list[dict[int, str]] = []
    tries = 0
    while len(accepted) < count:
        tries += 1
        if tries > budget:
            raise BudgetExceeded(f"sampled {budget} Pauli strings without reaching {count}")
        w = int(rng.integers(1, k + 1))
        support = sorted(int(q) for q in rng.choice(n, size=w, replace=False))
        letters = {q: "XYZ"[int(rng.integers(3))] for q in support}
        if letters in accepted:
            continue
        if all(paulis_commute(letters, other) for other in accepted):
            accepted.append(letters)
    return pauli_instance(n, accepted)


def pauli_instance(n: int, strings: Sequence[dict[int, str]]) -> CLHInstance:
    qudits = tuple(QuditInfo(i, 2) for i in range(n))
    terms = []
    for i, s in enumerate(strings):
        support = tuple(sorted(s))
        terms.append(LocalTerm(i, support, pauli_projector("".join(s[q] for q in support))))
    return canonicalize(CLHInstance(qudits, tuple(terms)))


# ----------------------------------------------------------------------------
# bounded-overlap designs with controlled local expansion

def design_supports(n: int, k: int, degree: int, overlap_cap: int, rng: np.random.Generator,
                    budget: int = 200000) -> list[tuple[int, ...]]:
    """Greedy random k-subsets, any two sharing at most ``overlap_cap`` elements,
    until every element lies in at least ``degree`` subsets."""
    deg = np.zeros(n, dtype=int)
    supports: list[tuple[int, ...]] = []
    member: list[list[int]] = [[] for _ in range(n)]
    tries = 0
    while deg.min() < degree:
        tries += 1
        if tries > budget:
            raise BudgetExceeded(
                f"design stalled at minimum degree {deg.min()} < {degree} after {budget} draws")
        low = np.flatnonzero(deg == deg.min())
        first = int(rng.choice(low))
        rest = [int(q) for q in rng.choice(np.delete(np.arange(n), first), size=k - 1, replace=False)]
        cand = tuple(sorted([first] + rest))
        shared: dict[int, int] = {}
        for q in cand:
            for t in member[q]:
                shared[t] = shared.get(t, 0) + 1
        if any(c > overlap_cap for c in shared.values()):
            continue
        for q in cand:
            member[q].append(len(supports))
            deg[q] += 1
        supports.append(cand)
    return supports


def _random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _diagonal_term(tid: int, support: tuple[int, ...], dims: dict[int, int], rng: np.random.Generator,
                   max_fraction: float) -> LocalTerm:
    sdims = [dims[q] for q in support]
    side = prod(sdims)
    for _ in range(1000):
        count = int(rng.integers(1, max(1, int(max_fraction * side)) + 1))
        idx = rng.choice(side, size=count, replace=False)
        diag = np.zeros(side)
        diag[idx] = 1.0
        term = LocalTerm(tid, support, np.diag(diag).astype(complex))
        if not drop_trivial_factors(term, dims)[1]:
            return term
    raise BudgetExceeded(f"could not draw a non-trivial diagonal term on {support}")


def gen_design_expander(n: int, k: int, degree: int, overlap_cap: int = 1, seed: int = 0,
                        mode: str = "diagonal", dims: int | Sequence[int] = 2,
                        max_fraction: float = 0.5, budget: int = 200000) -> CLHInstance:
    """Bounded-overlap design populated with commuting projectors.

    ``mode`` is ``diagonal`` (random diagonal projectors), ``rotated`` (the same,
    conjugated by one random unitary per qudit) or ``pauli`` (qubits only,
    full-weight commuting Pauli strings on each support).
    """
    if overlap_cap not in (1, 2):
        raise ValueError("overlap_cap must be 1 or 2")
    rng = np.random.default_rng(seed)
    if isinstance(dims, int):
        dims = [dims] * n
    dmap = {i: int(d) for i, d in enumerate(dims)}
    supports = design_supports(n, k, degree, overlap_cap, rng, budget)
    qudits = tuple(QuditInfo(i, dmap[i]) for i in range(n))
    if mode == "pauli":
        if any(d != 2 for d in dmap.values()):
            raise ValueError("pauli mode needs qubits")
        strings: list[dict[int, str]] = []
        for s in supports:
            # all 3^k full-weight strings in random order: exhaustive, so failure is definitive
            words = list(itertools.product("XYZ", repeat=len(s)))
            for i in rng.permutation(len(words)):
                cand = dict(zip(s, words[i]))
                if all(paulis_commute(cand, o) for o in strings):
                    strings.append(cand)
                    break
            else:
                raise BudgetExceeded(f"no full-weight Pauli string on {s} commutes with the earlier terms")
        return pauli_instance(n, strings)
    if mode not in ("diagonal", "rotated"):
        raise ValueError(f"unknown mode {mode!r}")
    terms = [_diagonal_term(i, s, dmap, rng, max_fraction) for i, s in enumerate(supports)]
    if mode == "rotated":
        units = {q: _random_unitary(dmap[q], rng) for q in range(n)}
        rotated = []
        for t in terms:
            u = reduce(np.kron, (units[q] for q in t.support), np.eye(1, dtype=complex))
            rotated.append(LocalTerm(t.id, t.support, u @ t.matrix @ u.conj().T))
        terms = rotated
    return canonicalize(CLHInstance(qudits, tuple(terms)))


def generate(spec: GeneratorSpec) -> CLHInstance:
    p = dict(spec.parameters)
    if spec.kind == "toric":
        return gen_toric(int(p["L"]))
    if spec.kind == "csp_embed":
        return gen_csp_embed(p["clauses"], p.get("dims", 2))
    if spec.kind == "planted_sat":
        clauses, _ = planted_sat_clauses(int(p["n"]), int(p["count"]), int(p.get("k", 3)), spec.seed,
                                         p.get("overlap_cap"))
        return gen_csp_embed(clauses, [2] * int(p["n"]))
    if spec.kind == "commuting_pauli":
        return gen_commuting_pauli(int(p["n"]), int(p["k"]), int(p["count"]), spec.seed)
    if spec.kind == "design_expander":
        return gen_design_expander(
            int(p["n"]), int(p["k"]), int(p["degree"]), int(p.get("overlap_cap", 1)), spec.seed,
            mode=p.get("mode", "diagonal"), dims=p.get("dims", 2),
            max_fraction=float(p.get("max_fraction", 0.5)),
        )
    raise ValueError(f"unknown generator kind {spec.kind!r}")
