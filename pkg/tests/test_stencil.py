import itertools

import numpy as np
import pytest

from ls_sparsify.grid import build_grid, classify, stencil_offsets
from ls_sparsify.kernel_op import kernel_table, quadrature_coeffs
from ls_sparsify.media import build_medium
from ls_sparsify.stencil import (
    DegenerateStencilError,
    boundary_orientations,
    build_sketch,
    build_stencils,
    derive_c_row,
    interior_stencil,
    orientation_offsets,
    randomized_boundary_stencils,
    rect_boundary_stencils,
    smallest_left_singular_vector,
)


def _explicit_block(coeffs, offsets, far):
    """M(a, j) = k_{a - j} built entry by entry."""
    n = coeffs.n
    table = kernel_table(coeffs.green_kind, coeffs.h, n, coeffs.k0)
    M = np.empty((len(offsets), len(far)), dtype=complex)
    for r, a in enumerate(offsets):
        for c, j in enumerate(far):
            M[r, c] = table[tuple(np.asarray(a) - np.asarray(j) + n)]
    return M


def _reference(M):
    U, S, _ = np.linalg.svd(M, full_matrices=False)
    return np.conj(U[:, -1]), S[-1]


def _same_direction(a, b):
    return abs(np.vdot(b, a)) == pytest.approx(1.0, abs=1e-8)


# ============================================================================
# Smallest singular direction
# ============================================================================

def test_smallest_left_singular_vector_single():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((9, 20)) + 1j * rng.standard_normal((9, 20))
    alpha, sigma = smallest_left_singular_vector(M)
    ref, ref_sigma = _reference(M)
    assert sigma == pytest.approx(ref_sigma)
    assert _same_direction(alpha, ref)
    assert np.linalg.norm(alpha) == pytest.approx(1.0)
    assert np.linalg.norm(alpha @ M) == pytest.approx(sigma)
    # phase convention: largest entry real and positive
    k = np.argmax(np.abs(alpha))
    assert alpha[k].imag == pytest.approx(0.0, abs=1e-14)
    assert alpha[k].real > 0


def test_smallest_left_singular_vector_batched():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((5, 6, 12)) + 0j
    alpha, sigma = smallest_left_singular_vector(M)
    assert alpha.shape == (5, 6)
    for k in range(5):
        assert np.linalg.norm(alpha[k] @ M[k]) == pytest.approx(sigma[k])


def test_wide_null_space():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((9, 4)) + 0j
    alpha, sigma = smallest_left_singular_vector(M)
    assert sigma == 0.0
    assert np.linalg.norm(alpha @ M) < 1e-12


def test_all_zero_block():
    with pytest.raises(DegenerateStencilError):
        smallest_left_singular_vector(np.zeros((4, 8)))


# ============================================================================
# Deterministic stencils
# ============================================================================

def test_interior_stencil_matches_dense_svd():
    n = 8
    grid = build_grid(2, n)
    coeffs = quadrature_coeffs(grid, 15.0)
    st = interior_stencil(coeffs, grid)

    offsets = stencil_offsets(2)
    far = [j for j in itertools.product(range(-(n - 1), n), repeat=2) if max(map(abs, j)) > 1]
    ref, ref_sigma = _reference(_explicit_block(coeffs, offsets, far))
    assert st.residual == pytest.approx(ref_sigma, rel=1e-6)
    assert _same_direction(st.weights, ref)
    assert st.size == 9


def test_interior_stencil_is_symmetric():
    grid = build_grid(2, 16)
    st = interior_stencil(quadrature_coeffs(grid, 30.0), grid)
    mod = np.abs(st.weights).reshape(3, 3)
    np.testing.assert_allclose(mod, mod.T, atol=1e-8)
    np.testing.assert_allclose(mod, mod[::-1, :], atol=1e-8)


def test_orientation_offsets():
    assert len(orientation_offsets((-1, 0))) == 6
    assert len(orientation_offsets((1, 1))) == 4
    assert len(orientation_offsets((0, 1, -1))) == 12
    assert np.all(orientation_offsets((1, 0))[:, 0] <= 0)
    assert len(boundary_orientations(2)) == 8
    assert len(boundary_orientations(3)) == 26


@pytest.mark.parametrize("orientation", [(-1, 0), (1, 1), (0, 1)])
def test_rect_boundary_stencil_matches_dense_svd(orientation):
    n, b = 10, 2
    grid = build_grid(2, n)
    coeffs = quadrature_coeffs(grid, 12.0)
    stencils = rect_boundary_stencils(coeffs, grid, b)
    st = stencils[orientation]

    ranges = []
    for o in orientation:
        if o == -1:
            ranges.append(range(b, n))
        elif o == 1:
            ranges.append(range(-(n - 1), -b + 1))
        else:
            ranges.append(range(-(n - 1), n))
    far = list(itertools.product(*ranges))
    offsets = orientation_offsets(orientation)
    ref, ref_sigma = _reference(_explicit_block(coeffs, offsets, far))
    assert st.residual == pytest.approx(ref_sigma, rel=1e-6, abs=1e-14)
    assert _same_direction(st.weights, ref)
    assert len(stencils) == 8


def test_interior_stencil_3d_matches_dense_svd():
    n = 6
    grid = build_grid(3, n)
    coeffs = quadrature_coeffs(grid, 6.0)
    st = interior_stencil(coeffs, grid)

    far = [j for j in itertools.product(range(-(n - 1), n), repeat=3) if max(map(abs, j)) > 1]
    M = _explicit_block(coeffs, stencil_offsets(3), far)
    _, ref_sigma = _reference(M)
    assert st.size == 27
    assert st.residual == pytest.approx(ref_sigma, rel=1e-6)
    assert np.linalg.norm(st.weights @ M) == pytest.approx(ref_sigma, rel=1e-6)


@pytest.mark.parametrize("orientation", [(-1, 0, 0), (1, 1, 0), (-1, 1, -1)])
def test_rect_boundary_stencil_3d_matches_dense_svd(orientation):
    n, b = 6, 2
    grid = build_grid(3, n)
    coeffs = quadrature_coeffs(grid, 6.0)
    st = rect_boundary_stencils(coeffs, grid, b)[orientation]

    ranges = []
    for o in orientation:
        if o == -1:
            ranges.append(range(b, n))
        elif o == 1:
            ranges.append(range(-(n - 1), -b + 1))
        else:
            ranges.append(range(-(n - 1), n))
    M = _explicit_block(coeffs, orientation_offsets(orientation), list(itertools.product(*ranges)))
    _, ref_sigma = _reference(M)
    assert st.residual == pytest.approx(ref_sigma, rel=1e-6, abs=1e-14)
    assert np.linalg.norm(st.weights @ M) == pytest.approx(ref_sigma, rel=1e-6, abs=1e-14)


def test_rect_boundary_errors():
    grid = build_grid(2, 8)
    coeffs = quadrature_coeffs(grid, 8.0)
    with pytest.raises(ValueError):
        rect_boundary_stencils(coeffs, grid, 4)
    with pytest.raises(ValueError):
        rect_boundary_stencils(coeffs, grid, 1)
    ball = build_grid(2, 8, "l2ball")
    with pytest.raises(ValueError):
        rect_boundary_stencils(quadrature_coeffs(ball, 8.0), ball, 2)


def test_c_row():
    grid = build_grid(3, 8)
    coeffs = quadrature_coeffs(grid, 6.0)
    alpha = interior_stencil(coeffs, grid).weights
    offsets = stencil_offsets(3)
    K_local = np.array([[coeffs.coefficient(a - c) for c in offsets] for a in offsets])
    np.testing.assert_allclose(derive_c_row(coeffs, alpha), alpha @ K_local, rtol=1e-12)


# ============================================================================
# Randomized stencils
# ============================================================================

def _rect_setup(n=16, omega=16.0):
    grid = build_grid(2, n)
    coeffs = quadrature_coeffs(grid, omega)
    medium = build_medium(grid, "gaussian-bump", omega=omega, buffer_b=2)
    return grid, classify(grid), coeffs, medium


def test_sketch_is_seeded():
    grid, _, coeffs, medium = _rect_setup()
    a = build_sketch(coeffs, medium, 36, seed=7)
    b = build_sketch(coeffs, medium, 36, seed=7)
    c = build_sketch(coeffs, medium, 36, seed=8)
    assert a.T.shape == (grid.size, 36)
    np.testing.assert_array_equal(a.T, b.T)
    assert not np.allclose(a.T, c.T)
    with pytest.raises(ValueError):
        build_sketch(coeffs, medium, 8)


def test_randomized_beats_deterministic_on_the_sketch():
    grid, classification, coeffs, medium = _rect_setup()
    sketch = build_sketch(coeffs, medium, 36, seed=0)
    randomized, fallbacks = randomized_boundary_stencils(sketch, grid, classification)
    rect = rect_boundary_stencils(coeffs, grid, 2)
    assert fallbacks == 0
    assert len(randomized) == classification.n_boundary

    for k, i in enumerate(classification.boundary):
        orientation = tuple(classification.orientation[k])
        det = rect[orientation]
        ids = classification.neighbors[i][classification.neighbors[i] >= 0]
        det_res = np.linalg.norm(det.weights @ sketch.T[ids]) / sketch.norm
        rand = randomized[int(i)]
        np.testing.assert_array_equal(rand.offsets, det.offsets)
        assert rand.residual <= det_res + 1e-12


def test_zero_medium_falls_back_to_identity():
    grid = build_grid(2, 12, "l2ball")
    classification = classify(grid)
    coeffs = quadrature_coeffs(grid, 12.0)
    medium = build_medium(grid, "l2ball-cavity", omega=12.0, depth=0.0)
    sketch = build_sketch(coeffs, medium, 36)
    stencils, fallbacks = randomized_boundary_stencils(sketch, grid, classification)
    assert fallbacks == classification.n_boundary
    for i, st in stencils.items():
        centre = np.flatnonzero(np.all(st.offsets == 0, axis=1))[0]
        assert st.weights[centre] == 1.0
        assert np.count_nonzero(st.weights) == 1


# ============================================================================
# build_stencils
# ============================================================================

def test_build_stencils_auto_modes():
    grid, classification, coeffs, medium = _rect_setup()
    rect = build_stencils(coeffs, medium, grid, classification)
    assert rect.mode == "deterministic-rect"
    summary = rect.residual_summary()
    assert set(summary) == {"interior", "edge", "corner"}
    k = 0
    st = rect.boundary_stencil(classification.boundary[k], classification.orientation[k])
    assert st is rect.rect_boundary[tuple(classification.orientation[k])]

    ball = build_grid(2, 16, "l2ball")
    ball_cls = classify(ball)
    ball_coeffs = quadrature_coeffs(ball, 16.0)
    ball_medium = build_medium(ball, "l2ball-cavity", omega=16.0, buffer_b=2)
    rand = build_stencils(ball_coeffs, ball_medium, ball, ball_cls, seed=3)
    assert rand.mode == "randomized"
    assert len(rand.general_boundary) == ball_cls.n_boundary
    assert "boundary_max" in rand.residual_summary()
    np.testing.assert_allclose(rand.c_row, derive_c_row(ball_coeffs, rand.interior.weights))


def test_build_stencils_bad_mode():
    grid, classification, coeffs, medium = _rect_setup()
    with pytest.raises(ValueError):
        build_stencils(coeffs, medium, grid, classification, mode="magic")
