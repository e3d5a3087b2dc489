import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag

from clhforge.algebra import (
    algebra_center,
    algebra_closure,
    block_tensor_factorization,
    bv_decompose_qudit,
    central_projectors,
    decomposition_residuals,
    factorization_residual,
    induced_algebra,
)
from clhforge.errors import IsolationError
from clhforge.generators import PAULI, clause_projector, gen_design_expander, pauli_projector
from clhforge.model import LocalTerm
from clhforge.tensor import conjugate_axis, factor_residual

from conftest import hidden_split_instance, make_instance, random_unitary

X, Z = PAULI["X"], PAULI["Z"]


def random_hermitian(d, rng):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return z + z.conj().T


def structured_algebra(blocks, rng):
    """Generators of U (⊕_i M_{a_i} ⊗ I_{b_i}) U^dag for ``blocks = [(a_i, b_i), ...]``."""
    dim = sum(a * b for a, b in blocks)
    u = random_unitary(dim, rng)
    gens = []
    for _ in range(3):
        parts = [np.kron(random_hermitian(a, rng), np.eye(b)) for a, b in blocks]
        gens.append(u @ block_diag(*parts) @ u.conj().T)
    return algebra_closure(gens, dim), u


# --- algebra_closure -------------------------------------------------------

def test_closure_of_identity():
    assert algebra_closure([np.eye(2)]).dim == 1


def test_closure_of_x():
    alg = algebra_closure([X])
    assert alg.dim == 2
    assert alg.contains(np.eye(2)) < 1e-12 and alg.contains(X) < 1e-12
    assert alg.contains(Z) > 0.5


def test_closure_of_x_and_z():
    alg = algebra_closure([X, Z])
    assert alg.dim == 4
    for m in (np.eye(2), X, Z, X @ Z):
        assert alg.contains(m) < 1e-10


@pytest.mark.parametrize("blocks, expected", [
    ([(2, 1), (1, 1)], 5),
    ([(2, 2)], 4),
    ([(1, 3)], 1),
    ([(1, 1), (1, 1), (1, 1)], 3),
    ([(3, 1), (2, 2)], 13),
])
def test_closure_dimension_of_block_algebras(blocks, expected):
    alg, _ = structured_algebra(blocks, np.random.default_rng(7))
    assert alg.dim == expected == sum(a * a for a, _ in blocks)


def test_closure_is_closed_under_products():
    alg, _ = structured_algebra([(2, 1), (1, 2)], np.random.default_rng(3))
    for a in alg.basis:
        for b in alg.basis:
            assert alg.contains(a @ b) < 1e-8


# --- algebra_center --------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 4])
def test_center_of_full_algebra(d):
    rng = np.random.default_rng(d)
    alg = algebra_closure([random_hermitian(d, rng), random_hermitian(d, rng)])
    assert alg.dim == d * d
    center = algebra_center(alg)
    assert center.dim == 1
    assert center.contains(np.eye(d)) < 1e-10


def test_center_of_commutative_algebra():
    alg = algebra_closure([np.diag([1.0, 2.0, 3.0])])
    assert algebra_center(alg).dim == alg.dim == 3


def test_center_of_m2_plus_m1():
    alg, u = structured_algebra([(2, 1), (1, 1)], np.random.default_rng(11))
    center = algebra_center(alg)
    assert center.dim == 2
    # the two block identities
    for blk in (block_diag(np.eye(2), 0), block_diag(np.zeros((2, 2)), 1)):
        assert center.contains(u @ blk @ u.conj().T) < 1e-8


# --- central_projectors ----------------------------------------------------

def test_projectors_of_trivial_center():
    cd = central_projectors(algebra_closure([X, Z]))
    assert len(cd.projectors) == 1
    np.testing.assert_allclose(cd.projectors[0], np.eye(2))


@pytest.mark.parametrize("d", [2, 3, 5])
def test_projectors_of_diagonal_algebra(d):
    cd = central_projectors(algebra_closure([np.diag(np.arange(d, dtype=float))]))
    assert len(cd.projectors) == d
    for p in cd.projectors:
        assert np.trace(p).real == pytest.approx(1)
    np.testing.assert_allclose(sum(cd.projectors), np.eye(d), atol=1e-10)


def test_projectors_of_m2_plus_m1():
    alg, _ = structured_algebra([(2, 1), (1, 1)], np.random.default_rng(11))
    cd = central_projectors(alg)
    assert sorted(round(np.trace(p).real) for p in cd.projectors) == [1, 2]


def test_projector_labels_do_not_depend_on_seed():
    alg, _ = structured_algebra([(1, 1), (2, 1), (1, 2)], np.random.default_rng(5))
    a = central_projectors(alg, seed=1).projectors
    b = central_projectors(alg, seed=99).projectors
    for p, q in zip(a, b):
        np.testing.assert_allclose(p, q, atol=1e-8)


# --- block_tensor_factorization --------------------------------------------

def test_hidden_tensor_factor():
    rng = np.random.default_rng(2)
    u = random_unitary(4, rng)
    gens = [u @ np.kron(m, np.eye(2)) @ u.conj().T for m in (X, Z)]
    alg = algebra_closure(gens)
    fact = block_tensor_factorization(alg, np.eye(4))
    assert fact.dims == (2, 2)
    assert factorization_residual(alg, fact) <= 1e-9
    for b in alg.basis:
        conj = fact.isometry @ b @ fact.isometry.conj().T
        assert factor_residual(conj, [2, 2], 1)[0] <= 1e-9


@pytest.mark.parametrize("d", [2, 3, 4])
def test_scalar_algebra_gives_trivial_first_factor(d):
    alg = algebra_closure([np.eye(d)])
    assert block_tensor_factorization(alg, np.eye(d)).dims == (1, d)


@pytest.mark.parametrize("d", [2, 3])
def test_full_algebra_gives_trivial_second_factor(d):
    rng = np.random.default_rng(d)
    alg = algebra_closure([random_hermitian(d, rng), random_hermitian(d, rng)])
    assert block_tensor_factorization(alg, np.eye(d)).dims == (d, 1)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 3)), min_size=1, max_size=3),
       st.integers(0, 10**6))
def test_block_structure_recovered(blocks, seed):
    rng = np.random.default_rng(seed)
    alg, _ = structured_algebra(blocks, rng)
    cd = central_projectors(alg, seed)
    assert len(cd.projectors) == len(blocks)
    found = []
    for i, p in enumerate(cd.projectors):
        fact = block_tensor_factorization(alg, p, seed + i)
        assert factorization_residual(alg, fact) <= 1e-8
        v = fact.isometry
        np.testing.assert_allclose(v @ v.conj().T, np.eye(v.shape[0]), atol=1e-8)
        np.testing.assert_allclose(v.conj().T @ v, p, atol=1e-8)
        found.append(fact.dims)
    assert sorted(found) == sorted(blocks)
    assert sum(a * b for a, b in found) == alg.ambient_dim


# --- induced_algebra -------------------------------------------------------

def test_product_term_induces_span_of_b():
    b = np.diag([1.0, 0.0, 0.0]).astype(complex)
    a = np.diag([0.0, 1.0]).astype(complex)
    t = LocalTerm(0, (0, 1), np.kron(a, b))
    alg = induced_algebra(t, 1, {0: 2, 1: 3})
    assert alg.dim == 2
    assert alg.contains(b) < 1e-12 and alg.contains(np.eye(3)) < 1e-12


def test_diagonal_term_induces_diagonal_algebra():
    t = LocalTerm(0, (0, 1), clause_projector([2, 3], [(0, 0), (1, 2), (0, 1)]))
    alg = induced_algebra(t, 1, {0: 2, 1: 3})
    for b in alg.basis:
        np.testing.assert_allclose(b, np.diag(np.diag(b)), atol=1e-12)
    for a in alg.basis:
        for c in alg.basis:
            assert alg.contains(a @ c) < 1e-10


def test_identity_action_induces_scalars():
    p = np.diag([1.0, 0.0]).astype(complex)
    t = LocalTerm(0, (0, 1), np.kron(p, np.eye(2)))
    assert induced_algebra(t, 1, {0: 2, 1: 2}).dim == 1


# --- bv_decompose_qudit ----------------------------------------------------

def test_lone_qudit_is_one_block():
    inst = make_instance([2, 3], [((0, 1), clause_projector([2, 3], [(0, 0)]))])
    dec = bv_decompose_qudit(inst, 0, 1)
    assert [b.dims for b in dec.blocks] == [(3, 1)]
    assert dec.dimension_law()


@pytest.mark.parametrize("seed", range(5))
def test_hidden_split_recovered(seed):
    inst = hidden_split_instance(seed)
    dec = bv_decompose_qudit(inst, 0, 1, seed)
    assert [b.dims for b in dec.blocks] == [(2, 2)]
    res = decomposition_residuals(inst, 0, dec)
    assert res.block_diagonal <= 1e-8 and res.factorization <= 1e-8
    assert res.dimension_law and res.strict_decrease
    # conjugated actions: term 0 as M ⊗ I, term 1 as I ⊗ N on the split qudit
    iso = dec.blocks[0].isometry
    a = conjugate_axis(inst.term(0).matrix, [2, 4], 1, iso)
    b = conjugate_axis(inst.term(1).matrix, [4, 2], 0, iso)
    assert factor_residual(a, [2, 2, 2], 2)[0] <= 1e-8
    assert factor_residual(b, [2, 2, 2], 0)[0] <= 1e-8


def test_diagonal_terms_give_one_dimensional_factors():
    inst = make_instance([3, 3, 3], [
        ((0, 1), clause_projector([3, 3], [(0, 0), (1, 1)])),
        ((1, 2), clause_projector([3, 3], [(2, 0), (0, 2)])),
    ])
    dec = bv_decompose_qudit(inst, 0, 1)
    assert dec.dimension_law()
    assert all(b.d1 == 1 or b.d2 == 1 for b in dec.blocks)
    for b in dec.blocks:
        np.testing.assert_allclose(b.projector, np.diag(np.diag(b.projector)), atol=1e-10)


def test_non_isolated_term_is_refused():
    inst = make_instance([2, 2, 2], [
        ((0, 1), pauli_projector("ZZ")), ((0, 1), pauli_projector("XX")), ((1, 2), pauli_projector("ZZ"))])
    with pytest.raises(IsolationError) as exc:
        bv_decompose_qudit(inst, 0, 1)
    assert exc.value.term == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**5), st.sampled_from(["diagonal", "rotated"]), st.sampled_from([2, 3]))
def test_decomposition_laws_on_designs(seed, mode, d):
    n = 9 if d == 2 else 7
    inst = gen_design_expander(n, 3, 2, 1, seed, mode=mode, dims=d)
    for term in inst.terms:
        for q in term.support:
            dec = bv_decompose_qudit(inst, term.id, q, seed)
            res = decomposition_residuals(inst, term.id, dec)
            assert res.block_diagonal <= 1e-8 and res.factorization <= 1e-8
            assert res.dimension_law
            assert res.strict_decrease in (True, None)
