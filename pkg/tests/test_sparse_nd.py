import logging
import time

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ls_sparsify.grid import build_grid, classify, neighbor_table
from ls_sparsify.kernel_op import SizeMismatchError, quadrature_coeffs
from ls_sparsify.media import build_medium
from ls_sparsify.sparse_nd import (
    StructurallySingularFrontError,
    apply_AB,
    assemble,
    factorize,
    nd_order,
    solve,
)
from ls_sparsify.stencil import build_stencils


def _random_stencil_matrix(grid, seed=0):
    """Random complex matrix with the 3^dim neighborhood pattern."""
    rng = np.random.default_rng(seed)
    table = neighbor_table(grid)
    rows = np.repeat(np.arange(grid.size), table.shape[1])
    cols = table.ravel()
    keep = cols >= 0
    vals = rng.standard_normal(keep.sum()) + 1j * rng.standard_normal(keep.sum())
    return sparse.csr_matrix((vals, (rows[keep], cols[keep])), shape=(grid.size, grid.size))


def _system(shape="rectangle", n=16, omega=16.0, mode="auto"):
    grid = build_grid(2, n, shape)
    classification = classify(grid)
    coeffs = quadrature_coeffs(grid, omega)
    name = "gaussian-bump" if shape == "rectangle" else "l2ball-cavity"
    medium = build_medium(grid, name, omega=omega, buffer_b=2)
    stencils = build_stencils(coeffs, medium, grid, classification, mode=mode)
    return grid, classification, medium, stencils


# ============================================================================
# Assembly
# ============================================================================

def test_assemble_rows():
    grid, classification, medium, stencils = _system()
    P, AB = assemble(stencils, medium, grid, classification)
    assert P.shape == AB.shape == (grid.size, grid.size)

    i = int(classification.interior[10])
    nb = classification.neighbors[i]
    np.testing.assert_allclose(AB[i, nb].toarray().ravel(), stencils.interior.weights)
    expected = stencils.interior.weights + stencils.c_row * medium.q[nb]
    np.testing.assert_allclose(P[i, nb].toarray().ravel(), expected)
    assert P[i].nnz == 9

    j = int(classification.boundary[0])
    np.testing.assert_allclose(P[j].toarray(), AB[j].toarray())
    # corner point: four neighbors
    assert AB[j].nnz == 4


def test_assemble_randomized():
    grid, classification, medium, stencils = _system("l2ball")
    P, AB = assemble(stencils, medium, grid, classification)
    for i in classification.boundary[:5]:
        st = stencils.general_boundary[int(i)]
        assert AB[int(i)].nnz == st.size


def test_apply_AB_size():
    grid, classification, medium, stencils = _system(n=12)
    _, AB = assemble(stencils, medium, grid, classification)
    with pytest.raises(SizeMismatchError):
        apply_AB(AB, np.ones(grid.size + 1))


# ============================================================================
# Nested dissection
# ============================================================================

def test_small_dissection():
    grid = build_grid(2, 4)
    ordering = nd_order(grid, leaf_size=4)
    root = ordering.root
    assert len(root.ids) == 4
    assert np.all(grid.coords[root.ids][:, 0] == 1)
    sizes = sorted(sum(len(ordering.nodes[d].ids) for d in _subtree(ordering, ch))
                   for ch in root.children)
    assert sizes == [4, 8]
    assert sorted(ordering.order.tolist()) == list(range(16))


def _subtree(ordering, k):
    out = [k]
    for ch in ordering.nodes[k].children:
        out += _subtree(ordering, ch)
    return out


@pytest.mark.parametrize("dim,n,shape", [(2, 20, "rectangle"), (2, 20, "l1ball"), (3, 10, "l2ball")])
def test_separators_disconnect_children(dim, n, shape):
    grid = build_grid(dim, n, shape)
    ordering = nd_order(grid, leaf_size=8)
    assert sorted(ordering.order.tolist()) == list(range(grid.size))
    for node in ordering.nodes:
        assert len(node.ids) <= 8 or not node.is_leaf
        if len(node.children) == 2:
            a = grid.coords[np.concatenate([ordering.nodes[d].ids for d in _subtree(ordering, node.children[0])])]
            b = grid.coords[np.concatenate([ordering.nodes[d].ids for d in _subtree(ordering, node.children[1])])]
            gap = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
            assert gap.min() >= 2
    assert ordering.depth >= 2


def test_leaf_size_validation():
    with pytest.raises(ValueError):
        nd_order(build_grid(2, 8), leaf_size=0)


# ============================================================================
# Multifrontal LU
# ============================================================================

@pytest.mark.parametrize("dim,n,shape,leaf", [
    (2, 12, "rectangle", 1),
    (2, 12, "rectangle", 64),
    (2, 16, "l2ball", 4),
    (3, 8, "rectangle", 8),
])
def test_factorize_matches_spsolve(dim, n, shape, leaf):
    grid = build_grid(dim, n, shape)
    P = _random_stencil_matrix(grid)
    fact = factorize(P, nd_order(grid, leaf_size=leaf))
    y = np.random.default_rng(5).standard_normal(grid.size) + 0j
    np.testing.assert_allclose(solve(fact, y), spsolve(P.tocsc(), y), rtol=1e-8, atol=1e-10)
    assert fact.perturbations == []
    assert fact.factor_nnz > 0
    assert fact.max_front >= 1


def test_factorize_preconditioner_system():
    grid, classification, medium, stencils = _system()
    P, _ = assemble(stencils, medium, grid, classification)
    fact = factorize(P, nd_order(grid, classification, leaf_size=16))
    y = np.random.default_rng(9).standard_normal(grid.size) + 0j
    x = solve(fact, y)
    assert np.linalg.norm(P @ x - y) <= 1e-8 * np.linalg.norm(y)


def test_tiny_pivot_is_perturbed(caplog):
    grid = build_grid(2, 4)
    P = sparse.identity(16, dtype=complex, format="lil")
    P[0, 1] = 1.0
    P[1, 0] = 1.0
    P[1, 1] = 1.0  # rows 0 and 1 are equal
    with caplog.at_level(logging.WARNING, logger="ls_sparsify.sparse_nd"):
        fact = factorize(P.tocsr(), nd_order(grid, leaf_size=16))
    assert len(fact.perturbations) == 1
    front, pivot, original, threshold = fact.perturbations[0]
    assert original < threshold
    assert "perturbed" in caplog.text
    assert np.all(np.isfinite(solve(fact, np.ones(16))))


def test_empty_row_is_structurally_singular():
    grid = build_grid(2, 4)
    P = sparse.identity(16, dtype=complex, format="csr")
    P.data[3] = 0.0
    with pytest.raises(StructurallySingularFrontError):
        factorize(P, nd_order(grid))


def test_factorize_size_checks():
    grid = build_grid(2, 4)
    with pytest.raises(SizeMismatchError):
        factorize(sparse.identity(15, format="csr"), nd_order(grid))
    fact = factorize(sparse.identity(16, dtype=complex, format="csr"), nd_order(grid))
    with pytest.raises(SizeMismatchError):
        solve(fact, np.ones(3))


@pytest.mark.slow
def test_2d_factorization_scaling():
    stats = {}
    for n in (64, 128):
        grid, classification, medium, stencils = _system(n=n, omega=float(n))
        P, _ = assemble(stencils, medium, grid, classification)
        ordering = nd_order(grid, classification)
        start = time.perf_counter()
        fact = factorize(P, ordering)
        stats[n] = (time.perf_counter() - start, fact.factor_nnz)
    assert stats[128][1] / stats[64][1] <= 5
    assert stats[128][0] / stats[64][0] <= 10
