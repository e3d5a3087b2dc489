"""Finite-dimensional *-algebras on a single qudit and their block structure.

Every algebra is stored by an orthonormal basis of Hermitian matrices (the
algebra is closed under adjoint, so its Hermitian part spans it over C).  The
block structure is recovered constructively:

* the center is the null space of a commutator system,
* a generic Hermitian central element separates the minimal central
  projectors,
* inside one block a generic Hermitian element gives the minimal projectors,
  and off-diagonal compressions of a generic element give matrix units, from
  which the tensor-factor isometry is read off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Sequence

import numpy as np

from .errors import DecompositionError, IsolationError
from .model import CLHInstance, LocalTerm
from .tensor import conjugate_axis, factor_residual, expand_operator

RANK_TOL = 1e-8
TAU_GAP = 1e-6
DEFAULT_SEED = 20240601
MAX_RETRIES = 25


def tau_alg(dim: int) -> float:
    return 1e-8 * dim


@dataclass
class OperatorAlgebra:
    ambient_dim: int
    basis: list[np.ndarray]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, matrix: np.ndarray) -> float:
        """Distance from ``matrix`` to the algebra (Frobenius)."""
        parts = [_hermitian(matrix), _hermitian(-1j * matrix)]
        res = 0.0
        for h in parts:
            v = _rvec(h)
            for b in self.basis:
                bv = _rvec(b)
                v = v - (bv @ v) * bv
            res += float(v @ v)
        return float(np.sqrt(res))


@dataclass
class CentralDecomposition:
    projectors: list[np.ndarray]

    @property
    def labels(self) -> list[int]:
        return list(range(len(self.projectors)))


@dataclass
class TensorFactorization:
    projector: np.ndarray
    isometry: np.ndarray  # shape (d1*d2, ambient); V V^dag = I, V^dag V = projector
    dims: tuple[int, int]

    @property
    def d1(self) -> int:
        return self.dims[0]

    @property
    def d2(self) -> int:
        return self.dims[1]


@dataclass
class QuditDecomposition:
    qudit: int
    dim: int
    blocks: list[TensorFactorization] = field(default_factory=list)

    def dimension_law(self) -> bool:
        return sum(b.d1 * b.d2 for b in self.blocks) == self.dim


# ----------------------------------------------------------------------------
# linear-algebra plumbing

def _hermitian(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _rvec(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h.real.ravel(), h.imag.ravel()])


def _from_rvec(v: np.ndarray, dim: int) -> np.ndarray:
    half = dim * dim
    return (v[:half] + 1j * v[half:]).reshape(dim, dim)


def hermitian_parts(mats: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    for m in mats:
        out.append(_hermitian(m))
        out.append(_hermitian(-1j * m))
    return out


def orthonormalize(mats: Sequence[np.ndarray], dim: int, start: Sequence[np.ndarray] = ()) -> list[np.ndarray]:
    """Gram-Schmidt over Hermitian matrices in insertion order (Hilbert-Schmidt product).

    ``start`` must already be orthonormal; it is kept first and unchanged.
    """
    basis = [_rvec(b) for b in start]
    for m in mats:
        v = _rvec(m)
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for b in basis:
                v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > RANK_TOL * norm0 and norm > 1e-13:
            basis.append(v / norm)
    return [_from_rvec(b, dim) for b in basis]


def algebra_closure(generators: Sequence[np.ndarray], dim: int | None = None) -> OperatorAlgebra:
    """Smallest unital *-algebra containing the generators."""
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if dim is None:
        if not gens:
            raise ValueError("need at least one generator or an explicit dimension")
        dim = gens[0].shape[0]
    eye = np.eye(dim, dtype=complex) / np.sqrt(dim)
    basis = orthonormalize(hermitian_parts(gens), dim, start=[eye])
    known = 0
    while True:
        size = len(basis)
        products = []
        # products among already-closed elements need not be recomputed
        for j in range(known, size):
            for i in range(j + 1):
                products.append(basis[i] @ basis[j])
        known = size
        basis = orthonormalize(hermitian_parts(products), dim, start=basis)
        if len(basis) == size:
            return OperatorAlgebra(dim, basis)


def algebra_center(algebra: OperatorAlgebra) -> OperatorAlgebra:
    """Basis of the center, from the null space of ``sum_i c_i [B_i, B_j] = 0``."""
    dim = algebra.ambient_dim
    b = algebra.dim
    if b == 1:
        return OperatorAlgebra(dim, list(algebra.basis))
    cols = []
    for bi in algebra.basis:
        cols.append(np.concatenate([_rvec(-1j * (bi @ bj - bj @ bi)) for bj in algebra.basis]))
    system = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(system)
    scale = max(s[0], 1.0) if s.size else 1.0
    null = [vh[i] for i in range(b) if i >= s.size or s[i] <= RANK_TOL * scale]
    elems = [sum(c * bi for c, bi in zip(vec.real, algebra.basis)) for vec in null]
    eye = np.eye(dim, dtype=complex) / np.sqrt(dim)
    return OperatorAlgebra(dim, orthonormalize(elems, dim, start=[eye]))


def _group_eigs(w: np.ndarray, gap: float = TAU_GAP) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > gap:
            groups.append([i])
        else:
            groups[-1].append(i)
    return groups


def _cmp_projectors(a: np.ndarray, b: np.ndarray, tol: float = 1e-6) -> int:
    va, vb = _rvec(a), _rvec(b)
    for x, y in zip(va, vb):
        if abs(x - y) > tol:
            return -1 if x > y else 1
    return 0


def canonical_order(projectors: list[np.ndarray]) -> list[np.ndarray]:
    """Sort projectors by their entries (descending, with tolerance).

    Minimal central projectors are basis independent, so this ordering gives
    every block a reproducible label.
    """
    return sorted(projectors, key=cmp_to_key(_cmp_projectors))


def central_projectors(algebra: OperatorAlgebra, seed: int = DEFAULT_SEED) -> CentralDecomposition:
    center = algebra_center(algebra)
    dim = algebra.ambient_dim
    r = center.dim
    if r == 1:
        return CentralDecomposition([np.eye(dim, dtype=complex)])
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        coeffs = rng.uniform(-1.0, 1.0, size=r)
        z = _hermitian(sum(c * m for c, m in zip(coeffs, center.basis)))
        w, v = np.linalg.eigh(z)
        groups = _group_eigs(w)
        if len(groups) == r:
            projs = [v[:, g] @ v[:, g].conj().T for g in groups]
            return CentralDecomposition(canonical_order(projs))
    raise DecompositionError(f"could not separate {r} central blocks after {MAX_RETRIES} draws")


def _range_basis(projector: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_hermitian(projector))
    return v[:, w > 0.5][:, ::-1]


def block_tensor_factorization(
    algebra: OperatorAlgebra, block: np.ndarray, seed: int = DEFAULT_SEED
) -> TensorFactorization:
    """Isometry splitting ``range(block)`` into ``C^d1 ⊗ C^d2`` with the algebra on the first factor."""
    dim = algebra.ambient_dim
    u = _range_basis(block)
    u.shape[1]
    comp = [u.conj().T @ b @ u for b in algebra.basis]
    rng = np.random.default_rng(seed)
    tol = tau_alg(dim)
    last = None
    for _ in range(MAX_RETRIES):
        x = _hermitian(sum(c * m for c, m in zip(rng.uniform(-1.0, 1.0, len(comp)), comp)))
        w, vecs = np.linalg.eigh(x)
        groups = _group_eigs(w)
        d1 = len(groups)
        sizes = {len(g) for g in groups}
        if len(sizes) != 1:
            continue
        d2 = sizes.pop()
        q = [vecs[:, g] @ vecs[:, g].conj().T for g in groups]
        f = vecs[:, groups[0]]
        y = sum(complex(a, b) * m for a, b, m in
                zip(rng.uniform(-1, 1, len(comp)), rng.uniform(-1, 1, len(comp)), comp))
        units = [q[0]]
        ok = True
        for qu in q[1:]:
            mu = qu @ y @ q[0]
            scale = np.linalg.norm(mu) ** 2 / d2
            if scale < 1e-12:
                ok = False
                break
            units.append(mu / np.sqrt(scale))
        if not ok:
            continue
        phi = np.concatenate([e @ f for e in units], axis=1)  # columns indexed (u, j)
        iso = (u @ phi).conj().T
        fact = TensorFactorization(block, iso, (d1, d2))
        res = factorization_residual(algebra, fact)
        if res <= tol:
            return fact
        last = res
    raise DecompositionError("matrix-unit construction failed", last)


def factorization_residual(algebra: OperatorAlgebra, fact: TensorFactorization) -> float:
    """Largest violation of the isometry and ``A' ⊗ I`` contracts over the algebra basis."""
    v = fact.isometry
    res = float(np.linalg.norm(v @ v.conj().T - np.eye(v.shape[0])))
    res = max(res, float(np.linalg.norm(v.conj().T @ v - fact.projector)))
    for b in algebra.basis:
        conj = v @ b @ v.conj().T
        res = max(res, factor_residual(conj, list(fact.dims), 1)[0])
    return res


# ----------------------------------------------------------------------------
# qudit-level operations

def compressions(term: LocalTerm, qudit: int, dims: dict[int, int]) -> list[np.ndarray]:
    """All ``(<a| ⊗ I) H (|b> ⊗ I)`` over basis states of the term's other qudits."""
    if qudit not in term.support:
        raise IsolationError(f"qudit {qudit} is not in the support of term {term.id}", term=term.id)
    sdims = [dims[q] for q in term.support]
    n = len(sdims)
    axis = term.support.index(qudit)
    t = term.matrix.reshape(tuple(sdims) * 2)
    others = [i for i in range(n) if i != axis]
    t = np.transpose(t, others + [axis] + [n + i for i in others] + [n + axis])
    d = sdims[axis]
    rest = int(np.prod([sdims[i] for i in others])) if others else 1
    t = t.reshape(rest, d, rest, d)
    return [t[a, :, b, :] for a in range(rest) for b in range(rest)]


def induced_algebra(term: LocalTerm, qudit: int, dims: dict[int, int]) -> OperatorAlgebra:
    d = dims[qudit]
    gens = orthonormalize(hermitian_parts(compressions(term, qudit, dims)), d)
    return algebra_closure(gens, d)


def overlapping_terms(instance: CLHInstance, isolated: int) -> list[int]:
    """Terms sharing two or more qudits with ``isolated``."""
    mine = set(instance.term(isolated).support)
    return [t.id for t in instance.terms if t.id != isolated and len(mine & set(t.support)) >= 2]


def bv_decompose_qudit(
    instance: CLHInstance, isolated: int, qudit: int, seed: int = DEFAULT_SEED
) -> QuditDecomposition:
    """Split one qudit of an isolated term into blocks, each a product of two factors.

    Factor 0 carries the isolated term, factor 1 carries every other term on the
    qudit.  When no other term touches the qudit, the whole qudit is handed to
    the isolated term as a single block of dims ``(d, 1)``.
    """
    term = instance.term(isolated)
    if qudit not in term.support:
        raise IsolationError(f"qudit {qudit} is not in the support of term {isolated}", term=isolated)
    bad = overlapping_terms(instance, isolated)
    if bad:
        raise IsolationError(
            f"term {isolated} is not isolated: term {bad[0]} shares at least two qudits with it",
            term=bad[0],
        )
    dims = instance.dims
    d = dims[qudit]
    others = [t for t in instance.terms_on.get(qudit, []) if t != isolated]
    if not others:
        eye = np.eye(d, dtype=complex)
        return QuditDecomposition(qudit, d, [TensorFactorization(eye, eye, (d, 1))])
    alg = induced_algebra(term, qudit, dims)
    cd = central_projectors(alg, seed)
    blocks = [block_tensor_factorization(alg, p, seed + i) for i, p in enumerate(cd.projectors)]
    return QuditDecomposition(qudit, d, blocks)


def block_projectors(instance: CLHInstance, isolated: int, qudit: int, seed: int = DEFAULT_SEED) -> list[np.ndarray]:
    """Canonical block projectors only (what a verifier needs to check a block label)."""
    dims = instance.dims
    others = [t for t in instance.terms_on.get(qudit, []) if t != isolated]
    if not others:
        return [np.eye(dims[qudit], dtype=complex)]
    return central_projectors(induced_algebra(instance.term(isolated), qudit, dims), seed).projectors


@dataclass
class DecompositionResiduals:
    block_diagonal: float
    factorization: float
    dimension_law: bool
    strict_decrease: bool | None  # None when the law does not apply


def decomposition_residuals(instance: CLHInstance, isolated: int, dec: QuditDecomposition) -> DecompositionResiduals:
    """Check a qudit decomposition against every term currently acting on the qudit."""
    dims = instance.dims
    q = dec.qudit
    on_q = instance.terms_on.get(q, [])
    bd = 0.0
    fr = 0.0
    for tid in on_q:
        t = instance.term(tid)
        sdims = [dims[x] for x in t.support]
        axis = t.support.index(q)
        pinched = np.zeros_like(t.matrix)
        for blk in dec.blocks:
            pe = expand_operator(blk.projector, [q], list(t.support), dims)
            pinched = pinched + pe @ t.matrix @ pe
        bd = max(bd, float(np.linalg.norm(t.matrix - pinched)))
        for blk in dec.blocks:
            conj = conjugate_axis(t.matrix, sdims, axis, blk.isometry)
            split = sdims[:axis] + [blk.d1, blk.d2] + sdims[axis + 1:]
            # the isolated term must be trivial on factor 1, every other term on factor 0
            target = axis + 1 if tid == isolated else axis
            fr = max(fr, factor_residual(conj, split, target)[0])
    for blk in dec.blocks:
        v = blk.isometry
        fr = max(fr, float(np.linalg.norm(v @ v.conj().T - np.eye(v.shape[0]))))
    others = [t for t in on_q if t != isolated]
    applies = isolated in on_q and bool(others)
    strict = None
    if applies:
        strict = all(b.d1 < dec.dim and b.d2 < dec.dim for b in dec.blocks)
    return DecompositionResiduals(bd, fr, dec.dimension_law(), strict)
