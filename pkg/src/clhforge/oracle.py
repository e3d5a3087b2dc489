"""Desk-scale ground truth: full Hamiltonians, spectra, ground energies and ground spaces."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator

from .errors import BudgetExceeded
from .model import CLHInstance, QuditInfo
from .tensor import apply_on_axes, expand_operator

DEFAULT_BUDGET = 2**14
DENSE_LIMIT = 2**10
TAU_GAP = 1e-6
INTEGRALITY_TOL = 1e-7
LANCZOS_TOL = 1e-9
MAX_GROUND_COLUMNS = 512


@dataclass
class DenseHamiltonian:
    dimension: int
    matvec: Callable[[np.ndarray], np.ndarray]
    offset: float = 0.0
    dense: np.ndarray | None = None

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dimension, self.dimension), matvec=self.matvec, dtype=complex)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        eye = np.eye(self.dimension, dtype=complex)
        return np.stack([self.matvec(eye[:, i]) for i in range(self.dimension)], axis=1)


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    ground_energy: float
    ground_degeneracy: int | None
    complete: bool = True


def assemble(instance: CLHInstance, budget: int = DEFAULT_BUDGET, dense_limit: int = DENSE_LIMIT) -> DenseHamiltonian:
    """Matrix-free ``H = sum_i H_i`` (dense copy below ``dense_limit``).

    Terms with empty support contribute a constant offset.
    """
    dim = instance.total_dim
    if dim > budget:
        raise BudgetExceeded(f"dimension {dim} exceeds oracle budget {budget}")
    shape = [q.dim for q in instance.qudits]
    pos = {q.id: i for i, q in enumerate(instance.qudits)}
    offset = sum(float(t.matrix[0, 0].real) for t in instance.terms if t.is_scalar)
    local = [(t.matrix, [pos[q] for q in t.support]) for t in instance.terms if not t.is_scalar]

    def matvec(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex).reshape(shape)
        out = offset * x
        for mat, axes in local:
            out = out + apply_on_axes(x, mat, axes)
        return out.ravel()

    dense = None
    if dim <= dense_limit:
        order = [q.id for q in instance.qudits]
        dense = offset * np.eye(dim, dtype=complex)
        for t in instance.terms:
            if not t.is_scalar:
                dense += expand_operator(t.matrix, t.support, order, instance.dims)
    return DenseHamiltonian(dim, matvec, offset, dense)


def components(instance: CLHInstance) -> list[CLHInstance]:
    """Split into independent sub-instances (terms linked by shared qudits).

    Scalar terms and untouched qudits are dropped; see :func:`scalar_offset`.
    """
    parent = {q.id: q.id for q in instance.qudits}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in instance.terms:
        for a, b in zip(t.support, t.support[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list] = {}
    for t in instance.terms:
        if t.support:
            groups.setdefault(find(t.support[0]), []).append(t)
    out = []
    for root in sorted(groups):
        terms = groups[root]
        qs = sorted({q for t in terms for q in t.support})
        out.append(CLHInstance(tuple(QuditInfo(q, instance.dims[q]) for q in qs), tuple(terms)))
    return out


def scalar_offset(instance: CLHInstance) -> float:
    return sum(float(t.matrix[0, 0].real) for t in instance.terms if t.is_scalar)


def krylov_levels(h: DenseHamiltonian, seed: int = 0, tol: float = LANCZOS_TOL) -> np.ndarray:
    """Distinct eigenvalues reachable from a random start vector.

    A sum of commuting projectors has at most ``m + 1`` distinct eigenvalues,
    so fully reorthogonalized Lanczos hits an invariant subspace after that
    many steps and its Ritz values are then the levels themselves.  A random
    complex start vector overlaps every eigenspace almost surely.  (ARPACK's
    restarted iteration is unreliable on such massively degenerate spectra.)
    """
    rng = np.random.default_rng(seed)
    v = rng.normal(size=h.dimension) + 1j * rng.normal(size=h.dimension)
    basis = [v / np.linalg.norm(v)]
    alphas: list[float] = []
    betas: list[float] = []
    scale = 1.0
    while True:
        q = basis[-1]
        w = h.matvec(q)
        a = float(np.vdot(q, w).real)
        alphas.append(a)
        scale = max(scale, abs(a))
        b_mat = np.array(basis)
        for _ in range(2):
            w = w - b_mat.T @ (b_mat.conj() @ w)
        b = float(np.linalg.norm(w))
        if b <= tol * scale or len(basis) == h.dimension:
            break
        betas.append(b)
        basis.append(w / b)
    if len(alphas) == 1:
        return np.array(alphas)
    return np.sort(eigh_tridiagonal(np.array(alphas), np.array(betas), eigvals_only=True))


def _lowest(h: DenseHamiltonian, count: int = 1) -> np.ndarray:
    """Lowest eigenvalues with multiplicity below the dense limit, distinct levels above it."""
    if h.dense is not None:
        return np.linalg.eigvalsh(h.dense)[:count]
    return krylov_levels(h)[:count]


def _component_ground(inst: CLHInstance, budget: int) -> float:
    return float(_lowest(assemble(inst, budget))[0])


def ground_energy(instance: CLHInstance, budget: int = DEFAULT_BUDGET) -> float:
    """Smallest eigenvalue, computed per connected component and summed."""
    total = scalar_offset(instance)
    for comp in components(instance):
        total += _component_ground(comp, budget)
    return total


def full_spectrum(instance: CLHInstance, budget: int = DEFAULT_BUDGET, count: int = 16) -> Spectrum:
    """Every eigenvalue below the dense limit.

    Above it, the lowest ``count`` distinct levels are returned (``complete``
    is False) and the degeneracy is the rank of the ground space.
    """
    h = assemble(instance, budget)
    if h.dense is not None:
        w = np.linalg.eigvalsh(h.dense)
        lam = float(w[0])
        return Spectrum(w, lam, int(np.sum(w <= lam + TAU_GAP)), True)
    w = krylov_levels(h)
    try:
        deg = _filtered_ground_space(h, w).shape[1]
    except BudgetExceeded:
        deg = None
    return Spectrum(w[:count], float(w[0]), deg, False)


def _filtered_ground_space(h: DenseHamiltonian, levels: np.ndarray) -> np.ndarray:
    """Ground space via the interpolating polynomial that annihilates every higher level."""
    lam, rest = levels[0], levels[1:]
    rng = np.random.default_rng(1)
    cols = 8
    while True:
        x = rng.normal(size=(h.dimension, cols)) + 1j * rng.normal(size=(h.dimension, cols))
        for e in rest:
            hx = np.column_stack([h.matvec(x[:, j]) for j in range(cols)])
            x = (hx - e * x) / (lam - e)
        u, s, _ = np.linalg.svd(x, full_matrices=False)
        rank = int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0
        if rank < cols or cols >= h.dimension:
            return u[:, :rank]
        if cols >= MAX_GROUND_COLUMNS:
            raise BudgetExceeded(f"ground space exceeds {MAX_GROUND_COLUMNS} dimensions")
        cols = min(2 * cols, h.dimension)


def ground_space(instance: CLHInstance, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Orthonormal columns spanning the ground space (deterministic ordering)."""
    h = assemble(instance, budget)
    if h.dense is not None:
        w, v = np.linalg.eigh(h.dense)
        g = v[:, w <= w[0] + TAU_GAP]
        q, _ = np.linalg.qr(g)
        return q
    return _filtered_ground_space(h, krylov_levels(h))


def ground_projector(instance: CLHInstance, budget: int = 2**12) -> np.ndarray:
    g = ground_space(instance, budget)
    return g @ g.conj().T


def integrality_check(spectrum: Spectrum, m: int, tol: float = INTEGRALITY_TOL) -> bool:
    w = np.asarray(spectrum.eigenvalues, dtype=float)
    r = np.round(w)
    return bool(np.all(np.abs(w - r) <= tol) and np.all(r >= 0) and np.all(r <= m))


def dimension_of(qudits: list[QuditInfo]) -> int:
    return prod(q.dim for q in qudits)
