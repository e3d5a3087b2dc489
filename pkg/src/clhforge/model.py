"""Commuting local Hamiltonian instances: data model, validation, energies, I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import prod
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .errors import SchemaError, StructureError
from .tensor import apply_on_axes, factor_residual

TAU_TRIV = 1e-9


def tau_matrix(side: int) -> float:
    """Commutation / projection / hermiticity tolerance for a matrix of this side."""
    return 1e-9 * side


@dataclass(frozen=True)
class QuditInfo:
    id: int
    dim: int


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """A term acting on ``support`` (qudit ids) with a dense matrix.

    The matrix is indexed row-major over the tensor-product basis of the
    support, in support order.
    """

    id: int
    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(q) for q in self.support))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def is_scalar(self) -> bool:
        return len(self.support) == 0


@dataclass(frozen=True, eq=False)
class CLHInstance:
    qudits: tuple[QuditInfo, ...]
    terms: tuple[LocalTerm, ...]
    k: int | None = None
    pruned: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qudits", tuple(self.qudits))
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "pruned", tuple(self.pruned))

    @property
    def n(self) -> int:
        return len(self.qudits)

    @property
    def m(self) -> int:
        return len(self.terms)

    @cached_property
    def dims(self) -> dict[int, int]:
        return {q.id: q.dim for q in self.qudits}

    @property
    def d(self) -> int:
        """Largest local dimension (the ``d`` of CLH(k, d))."""
        return max((q.dim for q in self.qudits), default=1)

    @property
    def locality(self) -> int:
        if self.k is not None:
            return self.k
        return max((len(t.support) for t in self.terms), default=0)

    @property
    def total_dim(self) -> int:
        return prod(q.dim for q in self.qudits)

    @cached_property
    def term_index(self) -> dict[int, LocalTerm]:
        return {t.id: t for t in self.terms}

    def term(self, tid: int) -> LocalTerm:
        return self.term_index[tid]

    @cached_property
    def terms_on(self) -> dict[int, list[int]]:
        """Qudit id -> ids of terms whose support contains it."""
        out: dict[int, list[int]] = {q.id: [] for q in self.qudits}
        for t in self.terms:
            for q in t.support:
                out.setdefault(q, []).append(t.id)
        return out

    def support_dims(self, term: LocalTerm) -> list[int]:
        return [self.dims[q] for q in term.support]


@dataclass
class ValidationReport:
    commuting: bool
    projective: bool
    locality_ok: bool
    offending_pairs: list[tuple[int, int, float]] = field(default_factory=list)
    non_projective: list[tuple[int, float, float]] = field(default_factory=list)
    trivial_factors: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.commuting and self.projective and self.locality_ok

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "commuting": self.commuting,
            "projective": self.projective,
            "locality_ok": self.locality_ok,
            "offending_pairs": [
                {"terms": [a, b], "commutator_norm": c} for a, b, c in self.offending_pairs
            ],
            "non_projective": [
                {"term": t, "hermiticity": h, "idempotence": p} for t, h, p in self.non_projective
            ],
            "trivial_factors": [list(p) for p in self.trivial_factors],
        }


def check_structure(instance: CLHInstance) -> None:
    """Raise :class:`StructureError` if supports or matrix sides are inconsistent."""
    ids = [q.id for q in instance.qudits]
    if len(set(ids)) != len(ids):
        raise StructureError("duplicate qudit ids")
    for q in instance.qudits:
        if q.dim < 1:
            raise StructureError(f"qudit {q.id} has dimension {q.dim}")
    seen = set()
    for t in instance.terms:
        if t.id in seen:
            raise StructureError(f"duplicate term id {t.id}", term=t.id)
        seen.add(t.id)
        if len(set(t.support)) != len(t.support):
            raise StructureError(f"term {t.id} lists a qudit twice", term=t.id)
        for q in t.support:
            if q not in instance.dims:
                raise StructureError(f"term {t.id} references unknown qudit {q}", term=t.id)
        side = prod(instance.dims[q] for q in t.support)
        if t.matrix.shape != (side, side):
            raise StructureError(
                f"term {t.id} matrix has shape {t.matrix.shape}, expected ({side}, {side})",
                term=t.id,
            )


def detect_trivial_factor(term: LocalTerm, qudit: int, dims: dict[int, int], tol: float = TAU_TRIV) -> bool:
    """True iff ``term`` equals the identity on ``qudit`` tensored with something else."""
    axis = term.support.index(qudit)
    residual, _ = factor_residual(term.matrix, [dims[q] for q in term.support], axis)
    return residual <= tol


def drop_trivial_factors(term: LocalTerm, dims: dict[int, int], tol: float = TAU_TRIV) -> tuple[LocalTerm, list[int]]:
    """Remove every qudit the term acts on as the identity.  Returns the new term and dropped ids."""
    support = list(term.support)
    matrix = term.matrix
    dropped = []
    i = 0
    while i < len(support):
        sdims = [dims[q] for q in support]
        if sdims[i] == 1:
            residual, reduced = 0.0, matrix.reshape(prod(sdims[:i] + sdims[i + 1:]), -1)
        else:
            residual, reduced = factor_residual(matrix, sdims, i)
        if residual <= tol:
            dropped.append(support.pop(i))
            matrix = reduced
        else:
            i += 1
    if not dropped:
        return term, []
    return LocalTerm(term.id, tuple(support), matrix), dropped


def canonicalize(instance: CLHInstance, tol: float = TAU_TRIV) -> CLHInstance:
    """Sort every support ascending and prune identity factors.

    Pruned ``(term, qudit)`` pairs are recorded on the returned instance.
    """
    check_structure(instance)
    dims = instance.dims
    terms = []
    pruned = list(instance.pruned)
    for t in instance.terms:
        order = sorted(range(len(t.support)), key=lambda i: t.support[i])
        matrix = t.matrix
        if order != list(range(len(order))):
            sdims = [dims[q] for q in t.support]
            n = len(sdims)
            tens = matrix.reshape(tuple(sdims) * 2)
            tens = np.transpose(tens, order + [n + i for i in order])
            matrix = tens.reshape(matrix.shape)
        term = LocalTerm(t.id, tuple(t.support[i] for i in order), matrix)
        term, dropped = drop_trivial_factors(term, dims, tol)
        pruned.extend((t.id, q) for q in dropped)
        terms.append(term)
    return CLHInstance(instance.qudits, tuple(terms), instance.k, tuple(pruned))


def _grouped(term: LocalTerm, first: list[int], second: list[int], dims: dict[int, int]) -> np.ndarray:
    """Term as a 4-index tensor (first, second, first', second') over two qudit groups."""
    sup = list(term.support)
    sdims = [dims[q] for q in sup]
    n = len(sup)
    order = [sup.index(q) for q in first + second]
    t = term.matrix.reshape(sdims + sdims).transpose(order + [n + i for i in order])
    f, s = prod(dims[q] for q in first), prod(dims[q] for q in second)
    return t.reshape(f, s, f, s)


def _is_diagonal(m: np.ndarray) -> bool:
    return not np.any(m[~np.eye(m.shape[0], dtype=bool)])


def _operator_schmidt(t4: np.ndarray, weight_first: bool) -> tuple[np.ndarray, np.ndarray]:
    """Split ``t4`` (indices f, s, f', s') as ``sum_i F_i (x) S_i``.

    The factor on the side without the weight is Hilbert-Schmidt orthonormal.
    """
    f, s = t4.shape[0], t4.shape[1]
    mat = t4.transpose(0, 2, 1, 3).reshape(f * f, s * s)
    u, sv, vh = np.linalg.svd(mat, full_matrices=False)
    keep = sv > 1e-14 * (sv[0] if sv.size else 0.0)
    u, sv, vh = u[:, keep], sv[keep], vh[keep]
    if weight_first:
        u = u * sv
    else:
        vh = vh * sv[:, None]
    return u.T.reshape(-1, f, f), vh.reshape(-1, s, s)


def commutator_norm(a: LocalTerm, b: LocalTerm, dims: dict[int, int]) -> tuple[float, int]:
    """Frobenius norm of ``[A, B]`` on the joint support, and the joint dimension.

    With ``A = sum_i X_i (x) Y_i`` (split at the shared qudits, ``X_i``
    orthonormal) and ``B = sum_j Z_j (x) W_j`` (``W_j`` orthonormal), the
    commutator is ``sum_ij X_i (x) [Y_i, Z_j] (x) W_j`` and its squared norm is
    the sum of the small commutators' squared norms.
    """
    side = prod(dims[q] for q in set(a.support) | set(b.support))
    if _is_diagonal(a.matrix) and _is_diagonal(b.matrix):
        return 0.0, side
    shared = [q for q in a.support if q in b.support]
    a_only = [q for q in a.support if q not in shared]
    b_only = [q for q in b.support if q not in shared]
    _, ys = _operator_schmidt(_grouped(a, a_only, shared, dims), weight_first=False)
    zs, _ = _operator_schmidt(_grouped(b, shared, b_only, dims), weight_first=True)
    comm = np.einsum("iab,jbc->ijac", ys, zs) - np.einsum("jab,ibc->ijac", zs, ys)
    return float(np.linalg.norm(comm)), side


def overlapping_pairs(instance: CLHInstance) -> Iterable[tuple[LocalTerm, LocalTerm]]:
    pairs = set()
    for ids in instance.terms_on.values():
        for a, b in combinations(sorted(ids), 2):
            pairs.add((a, b))
    for a, b in sorted(pairs):
        yield instance.term(a), instance.term(b)


def validate_instance(instance: CLHInstance) -> ValidationReport:
    check_structure(instance)
    dims = instance.dims
    offending = []
    for a, b in overlapping_pairs(instance):
        norm, side = commutator_norm(a, b, dims)
        if norm > tau_matrix(side):
            offending.append((a.id, b.id, norm))
    non_proj = []
    for t in instance.terms:
        side = t.matrix.shape[0]
        herm = float(np.linalg.norm(t.matrix - t.matrix.conj().T))
        idem = float(np.linalg.norm(t.matrix @ t.matrix - t.matrix))
        if herm > tau_matrix(side) or idem > tau_matrix(side):
            non_proj.append((t.id, herm, idem))
    trivial = list(instance.pruned)
    for t in instance.terms:
        for q in t.support:
            if detect_trivial_factor(t, q, dims):
                trivial.append((t.id, q))
    k = instance.locality
    return ValidationReport(
        commuting=not offending,
        projective=not non_proj,
        locality_ok=all(len(t.support) <= k for t in instance.terms),
        offending_pairs=offending,
        non_projective=non_proj,
        trivial_factors=trivial,
    )


def energy_of_state(instance: CLHInstance, psi: np.ndarray) -> float:
    """Sum of ``<psi|H_i|psi>`` evaluated term by term on the state tensor."""
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != instance.total_dim:
        raise StructureError(f"state has length {psi.size}, instance dimension is {instance.total_dim}")
    order = [q.id for q in instance.qudits]
    pos = {q: i for i, q in enumerate(order)}
    tens = psi.reshape([q.dim for q in instance.qudits])
    total = 0.0
    for t in instance.terms:
        if t.is_scalar:
            total += float(t.matrix[0, 0].real) * float(np.vdot(psi, psi).real)
            continue
        out = apply_on_axes(tens, t.matrix, [pos[q] for q in t.support])
        total += float(np.vdot(tens, out).real)
    return total


def basis_state(instance: CLHInstance, digits: Sequence[int]) -> np.ndarray:
    """Computational basis state with the given local digits (in qudit order)."""
    psi = np.zeros([q.dim for q in instance.qudits], dtype=complex)
    psi[tuple(digits)] = 1.0
    return psi.ravel()


# ----------------------------------------------------------------------------
# serialization

def _matrix_schema() -> dict:
    pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
    return {"type": "array", "items": pair}


INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["version", "qudits", "terms"],
    "properties": {
        "version": {"const": 1},
        "qudits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "dim"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "dim": {"type": "integer", "minimum": 2},
                },
            },
        },
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "support", "matrix"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "support": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "matrix": _matrix_schema(),
                },
            },
        },
        "k": {"type": "integer", "minimum": 0},
    },
}


def matrix_to_pairs(matrix: np.ndarray) -> list[list[float]]:
    flat = np.asarray(matrix, dtype=complex).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def pairs_to_flat(pairs: Sequence[Sequence[float]]) -> np.ndarray:
    """Flat complex vector from [re, im] pairs; keeps signed zeros so saves round-trip byte for byte."""
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    out = np.empty(arr.shape[0], dtype=complex)
    out.real, out.imag = arr[:, 0], arr[:, 1]
    return out


def pairs_to_matrix(pairs: Sequence[Sequence[float]], rows: int, cols: int | None = None) -> np.ndarray:
    flat = pairs_to_flat(pairs)
    cols = rows if cols is None else cols
    if flat.size != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {flat.size}")
    return flat.reshape(rows, cols)


def schema_check(doc: object, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, "/".join(str(p) for p in err.absolute_path))


def instance_from_doc(doc: dict) -> CLHInstance:
    schema_check(doc, INSTANCE_SCHEMA)
    qudits = tuple(QuditInfo(int(q["id"]), int(q["dim"])) for q in doc["qudits"])
    ids = sorted(q.id for q in qudits)
    if ids != list(range(len(ids))):
        raise SchemaError("qudit ids must be unique and contiguous from 0", "qudits")
    dims = {q.id: q.dim for q in qudits}
    terms = []
    for i, t in enumerate(doc["terms"]):
        for j, q in enumerate(t["support"]):
            if q not in dims:
                raise SchemaError(f"unknown qudit {q}", f"terms/{i}/support/{j}")
        side = prod(dims[q] for q in t["support"])
        try:
            matrix = pairs_to_matrix(t["matrix"], side)
        except ValueError as exc:
            raise SchemaError(str(exc), f"terms/{i}/matrix") from None
        terms.append(LocalTerm(int(t["id"]), tuple(t["support"]), matrix))
    instance = CLHInstance(qudits, tuple(terms), doc.get("k"))
    try:
        return canonicalize(instance)
    except StructureError as exc:
        raise SchemaError(str(exc), "terms") from None


def instance_to_doc(instance: CLHInstance) -> dict:
    doc = {
        "version": 1,
        "qudits": [{"id": q.id, "dim": q.dim} for q in instance.qudits],
        "terms": [
            {"id": t.id, "support": list(t.support), "matrix": matrix_to_pairs(t.matrix)}
            for t in instance.terms
        ],
    }
    if instance.k is not None:
        doc["k"] = instance.k
    return doc


def dumps(doc: dict) -> bytes:
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode()


def parse_json(data: bytes | str) -> object:
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None


def load_instance(data: bytes | str) -> CLHInstance:
    return instance_from_doc(parse_json(data))


def save_instance(instance: CLHInstance) -> bytes:
    return dumps(instance_to_doc(instance))
