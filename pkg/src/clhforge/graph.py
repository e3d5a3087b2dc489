"""Bipartite interaction graphs, local-expansion audits and isolation penalties.

Left nodes are qudits, right nodes are terms.  Expansion errors are kept as
exact :class:`fractions.Fraction` values so that bounds such as
``|R_bad| / m <= 2 k d eps`` can be compared without rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

from .model import CLHInstance

DEFAULT_BUDGET = 10**7


@dataclass
class BipartiteGraph:
    left: list[int]
    right: list[int]
    left_adj: dict[int, list[int]]
    right_adj: dict[int, list[int]]

    @property
    def degrees(self) -> dict[int, int]:
        return {v: len(self.left_adj[v]) for v in self.left}

    def degree(self, v: int) -> int:
        return len(self.left_adj[v])

    def copy(self) -> "BipartiteGraph":
        return BipartiteGraph(
            list(self.left),
            list(self.right),
            {v: list(a) for v, a in self.left_adj.items()},
            {r: list(a) for r, a in self.right_adj.items()},
        )

    def remove_right(self, r: int) -> None:
        for v in self.right_adj.pop(r):
            self.left_adj[v].remove(r)
        self.right.remove(r)

    def remove_edge(self, v: int, r: int) -> None:
        self.left_adj[v].remove(r)
        self.right_adj[r].remove(v)


def graph_from_supports(qudits: Iterable[int], supports: dict[int, Sequence[int]]) -> BipartiteGraph:
    left = sorted(qudits)
    right = sorted(supports)
    left_adj: dict[int, list[int]] = {v: [] for v in left}
    right_adj: dict[int, list[int]] = {}
    for r in right:
        right_adj[r] = sorted(supports[r])
        for v in right_adj[r]:
            left_adj[v].append(r)
    return BipartiteGraph(left, right, left_adj, right_adj)


def build_interaction_graph(instance: CLHInstance) -> BipartiteGraph:
    """One left node per qudit, one right node per term, an edge per non-trivial action.

    Instances are canonicalized on construction, so supports already exclude
    identity factors.
    """
    return graph_from_supports(
        (q.id for q in instance.qudits), {t.id: t.support for t in instance.terms}
    )


def neighbor_set(graph: BipartiteGraph, S: Iterable[int]) -> set[int]:
    out: set[int] = set()
    for v in S:
        if v not in graph.left_adj:
            raise KeyError(f"unknown left node {v}")
        out.update(graph.left_adj[v])
    return out


def expansion_error(graph: BipartiteGraph, S: Iterable[int]) -> Fraction:
    """``1 - |Gamma(S)| / sum_{v in S} D_v`` (zero when the degree sum is zero)."""
    S = list(S)
    total = sum(graph.degree(v) for v in S)
    if total == 0:
        return Fraction(0)
    return 1 - Fraction(len(neighbor_set(graph, S)), total)


def degree_one_fraction(graph: BipartiteGraph, S: Iterable[int]) -> Fraction:
    """Fraction of ``Gamma(S)`` with exactly one edge into ``S``.

    Returns 1 when ``Gamma(S)`` is empty (vacuously every neighbor qualifies).
    """
    S = set(S)
    if not S:
        raise ValueError("S must be nonempty")
    nbrs = neighbor_set(graph, S)
    if not nbrs:
        return Fraction(1)
    ones = sum(1 for r in nbrs if sum(1 for v in graph.right_adj[r] if v in S) == 1)
    return Fraction(ones, len(nbrs))


def isolation_penalty(graph: BipartiteGraph, term: int) -> tuple[int, set[int]]:
    """Terms sharing at least two qudits with ``term``; removing exactly these isolates it."""
    if term not in graph.right_adj:
        raise KeyError(f"unknown right node {term}")
    mine = set(graph.right_adj[term])
    counts: dict[int, int] = {}
    for v in mine:
        for r in graph.left_adj[v]:
            if r != term:
                counts[r] = counts.get(r, 0) + 1
    removal = {r for r, c in counts.items() if c >= 2}
    return len(removal), removal


def is_isolated(graph: BipartiteGraph, term: int) -> bool:
    return isolation_penalty(graph, term)[0] == 0


@dataclass
class ExpansionReport:
    epsilon: Fraction
    worst_set: tuple[int, ...]
    alpha1_min: Fraction
    per_term_epsilon: dict[int, Fraction]
    exhaustive: bool
    kmax: int
    audited_sets: int
    fact1_violations: list[tuple[int, ...]] = field(default_factory=list)
    per_term_penalty: dict[int, int] = field(default_factory=dict)

    @property
    def per_term_max(self) -> Fraction:
        return max(self.per_term_epsilon.values(), default=Fraction(0))

    def as_dict(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "epsilon_exact": str(self.epsilon),
            "exhaustive": self.exhaustive,
            "kmax": self.kmax,
            "audited_sets": self.audited_sets,
            "worst_set": list(self.worst_set),
            "alpha1_min": float(self.alpha1_min),
            "per_term_epsilon_max": float(self.per_term_max),
            "fact1_violations": [list(s) for s in self.fact1_violations],
            "per_term": [
                {
                    "term": t,
                    "epsilon": float(e),
                    "penalty": self.per_term_penalty.get(t, 0),
                }
                for t, e in sorted(self.per_term_epsilon.items())
            ],
        }

    def table(self) -> str:
        lines = [
            f"epsilon      {float(self.epsilon):.6f}  ({self.epsilon})"
            + ("" if self.exhaustive else "  [per-term neighborhoods only]"),
            f"worst_set    {list(self.worst_set)}",
            f"alpha1_min   {float(self.alpha1_min):.6f}",
            f"audited      {self.audited_sets} sets of size <= {self.kmax}",
            "",
            f"{'term':>6} {'epsilon':>10} {'penalty':>8}",
        ]
        for t, e in sorted(self.per_term_epsilon.items()):
            lines.append(f"{t:>6} {float(e):>10.6f} {self.per_term_penalty.get(t, 0):>8}")
        return "\n".join(lines)


def count_subsets(n: int, kmax: int) -> int:
    return sum(comb(n, j) for j in range(1, min(kmax, n) + 1))


def _masks(graph: BipartiteGraph) -> tuple[list[int], list[int], dict[int, int]]:
    bit = {r: i for i, r in enumerate(graph.right)}
    masks = []
    degs = []
    for v in graph.left:
        mask = 0
        for r in graph.left_adj[v]:
            mask |= 1 << bit[r]
        masks.append(mask)
        degs.append(len(graph.left_adj[v]))
    return masks, degs, bit


def local_expansion_error(graph: BipartiteGraph, kmax: int, budget: int = DEFAULT_BUDGET) -> ExpansionReport:
    """Exact maximum expansion error over all nonempty left sets of size <= kmax.

    The sets are enumerated depth first in lexicographic order, carrying the
    running neighbor union and the set of neighbors hit more than once, so
    ``worst_set`` is the lexicographically first maximizer.  The same pass
    records the minimum degree-one fraction and every set violating the
    degree-one lower bound ``1 - 2 eps_S`` (for ``eps_S < 1/2``).

    If the number of sets exceeds ``budget``, only the neighborhoods of the
    terms are audited and the report is flagged non-exhaustive.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    per_term = {r: expansion_error(graph, graph.right_adj[r]) for r in graph.right}
    penalties = {r: isolation_penalty(graph, r)[0] for r in graph.right}
    n = len(graph.left)
    total = count_subsets(n, kmax)
    if total > budget:
        worst_t = max(per_term, key=lambda r: (per_term[r], -r), default=None)
        eps = per_term[worst_t] if worst_t is not None else Fraction(0)
        worst = tuple(graph.right_adj[worst_t]) if worst_t is not None else ()
        alpha = min(
            (degree_one_fraction(graph, graph.right_adj[r]) for r in graph.right if graph.right_adj[r]),
            default=Fraction(1),
        )
        return ExpansionReport(eps, worst, alpha, per_term, False, kmax, len(per_term),
                               per_term_penalty=penalties)

    masks, degs, _ = _masks(graph)
    left = graph.left
    # running extrema as integer numerator/denominator pairs; Fractions only at the end
    best = [0, 1, ()]
    amin = [1, 1]
    violations: list[tuple[int, ...]] = []
    count = 0
    chosen: list[int] = []

    def visit(start: int, seen: int, multi: int, dsum: int) -> None:
        nonlocal count
        for i in range(start, n):
            m = masks[i]
            s2 = seen | m
            mu2 = multi | (seen & m)
            d2 = dsum + degs[i]
            chosen.append(i)
            count += 1
            nb = s2.bit_count()
            if d2 > 0:
                num = d2 - nb
                if num * best[1] > best[0] * d2:
                    best[0], best[1] = num, d2
                    best[2] = tuple(left[j] for j in chosen)
                if nb:
                    ones = (s2 & ~mu2).bit_count()
                    if ones * amin[1] < amin[0] * nb:
                        amin[0], amin[1] = ones, nb
                    # eps_S < 1/2 and ones/nb < 1 - 2 eps_S
                    if 2 * num < d2 and ones * d2 < (2 * nb - d2) * nb:
                        violations.append(tuple(left[j] for j in chosen))
            if len(chosen) < kmax:
                visit(i + 1, s2, mu2, d2)
            chosen.pop()

    visit(0, 0, 0, 0)
    return ExpansionReport(Fraction(best[0], best[1]), best[2], Fraction(amin[0], amin[1]),
                           per_term, True, kmax, count, violations, penalties)


def gamma_bound(k: int, d: int, eps: Fraction) -> Fraction:
    """The discarded-fraction bound ``2 k d eps``."""
    return 2 * k * d * Fraction(eps)
