"""Small tensor-product helpers shared by every module.

Operators on a list of qudits are stored as square matrices over the
tensor-product basis, row-major in the order of the qudit list.  The helpers
below reshape them into tensors with one row axis and one column axis per
qudit so that local manipulations never build anything global.
"""

from __future__ import annotations

from math import prod
from typing import Sequence

import numpy as np


def as_tensor(matrix: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return np.asarray(matrix).reshape(tuple(dims) + tuple(dims))


def as_matrix(tensor: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    side = prod(dims)
    return tensor.reshape(side, side)


def apply_on_axes(state: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply ``op`` to the given axes of a state tensor.

    ``state`` may carry extra trailing batch axes; only the listed axes are
    touched.  ``op`` is a square matrix over the listed axes in order.
    """
    axes = list(axes)
    if not axes:
        return op.reshape(()) * state if op.size == 1 else state
    local = [state.shape[a] for a in axes]
    op_t = op.reshape(tuple(local) + tuple(local))
    n = len(axes)
    out = np.tensordot(op_t, state, axes=(list(range(n, 2 * n)), axes))
    return np.moveaxis(out, list(range(n)), axes)


def expand_operator(
    matrix: np.ndarray,
    support: Sequence[int],
    target: Sequence[int],
    dims: dict[int, int] | Sequence[int],
) -> np.ndarray:
    """Embed an operator on ``support`` into the larger qudit list ``target``.

    ``dims`` maps qudit id to local dimension.  Returns a dense matrix over
    ``target`` (identity on the qudits not in ``support``).
    """
    target = list(target)
    tdims = [dims[q] for q in target]
    side = prod(tdims)
    eye = np.eye(side, dtype=complex).reshape(tuple(tdims) + (side,))
    axes = [target.index(q) for q in support]
    out = apply_on_axes(eye, np.asarray(matrix, dtype=complex), axes)
    return out.reshape(side, side)


def trace_out(matrix: np.ndarray, dims: Sequence[int], axis: int) -> np.ndarray:
    """Partial trace over one tensor factor; returns the reduced matrix."""
    dims = list(dims)
    n = len(dims)
    t = as_tensor(matrix, dims)
    t = np.trace(t, axis1=axis, axis2=n + axis)
    rest = dims[:axis] + dims[axis + 1:]
    return as_matrix(t, rest) if rest else t.reshape(1, 1)


def insert_identity(matrix: np.ndarray, dims: Sequence[int], axis: int, dim: int) -> np.ndarray:
    """Inverse shape of :func:`trace_out`: tensor an identity in at ``axis``."""
    dims = list(dims)
    n = len(dims)
    t = np.asarray(matrix).reshape(tuple(dims) + tuple(dims))
    full = np.multiply.outer(t, np.eye(dim))
    # full axes: rows(0..n-1), cols(n..2n-1), id_row(2n), id_col(2n+1)
    full = np.moveaxis(full, [2 * n, 2 * n + 1], [axis, n + 1 + axis])
    new = dims[:axis] + [dim] + dims[axis:]
    return as_matrix(full, new)


def factor_residual(matrix: np.ndarray, dims: Sequence[int], axis: int) -> tuple[float, np.ndarray]:
    """Distance of ``matrix`` from ``reduced ⊗ I`` on ``axis``.

    Returns ``(residual, reduced)`` where ``reduced`` is the partial trace over
    the axis divided by its dimension (the best identity-factor fit).
    """
    d = dims[axis]
    reduced = trace_out(matrix, dims, axis) / d
    rest = list(dims[:axis]) + list(dims[axis + 1:])
    rebuilt = insert_identity(reduced, rest, axis, d)
    return float(np.linalg.norm(matrix - rebuilt)), reduced


def conjugate_axis(matrix: np.ndarray, dims: Sequence[int], axis: int, iso: np.ndarray) -> np.ndarray:
    """Return ``(iso ⊗ I) M (iso† ⊗ I)`` with ``iso`` acting on one axis.

    ``iso`` has shape ``(out, dims[axis])``; the result lives on dims with
    ``dims[axis]`` replaced by ``out``.
    """
    dims = list(dims)
    n = len(dims)
    t = as_tensor(matrix, dims)
    t = np.moveaxis(np.tensordot(iso, t, axes=([1], [axis])), 0, axis)
    t = np.moveaxis(np.tensordot(t, iso.conj(), axes=([n + axis], [1])), -1, n + axis)
    new = dims.copy()
    new[axis] = iso.shape[0]
    return as_matrix(t, new)


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def clean_projection(matrix: np.ndarray) -> np.ndarray:
    """Snap a near-projection to the exact spectral projector onto eigenvalues > 1/2."""
    w, v = np.linalg.eigh(hermitian_part(matrix))
    keep = v[:, w > 0.5]
    return keep @ keep.conj().T
