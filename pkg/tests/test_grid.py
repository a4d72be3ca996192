import numpy as np
import pytest

from ls_sparsify.grid import (
    GridSpecError,
    build_grid,
    class_name,
    classify,
    layer_depth,
    neighbor_table,
    neighborhood,
    read_mask,
    stencil_offsets,
    write_mask,
)


# ============================================================================
# Lattice
# ============================================================================

def test_offsets_are_lexicographic():
    offs = stencil_offsets(2)
    assert offs.shape == (9, 2)
    assert offs[0].tolist() == [-1, -1]
    assert offs[4].tolist() == [0, 0]
    assert offs[-1].tolist() == [1, 1]
    assert len(stencil_offsets(3)) == 27


def test_rectangle_points_are_cell_centered():
    grid = build_grid(2, 8)
    assert grid.size == 64
    assert grid.h == pytest.approx(1 / 8)
    pts = grid.points()
    assert pts[0] == pytest.approx([1 / 16, 1 / 16])
    assert pts[-1] == pytest.approx([15 / 16, 15 / 16])
    # lexicographic: last axis fastest
    assert grid.coords[1].tolist() == [0, 1]


def test_scatter_gather():
    grid = build_grid(2, 8, "l2ball")
    v = np.arange(grid.size, dtype=float)
    lattice = grid.scatter(v, fill=-1.0)
    assert lattice.shape == (8, 8)
    assert np.all(lattice[~grid.membership] == -1.0)
    np.testing.assert_array_equal(grid.gather(lattice), v)


def test_l2ball_member_count():
    # per quadrant, 3 of the 16 cell centers lie outside radius 1/2
    grid = build_grid(2, 8, "l2ball")
    assert grid.size == 52


def test_l1ball_is_inside_l2ball():
    l1 = build_grid(3, 10, "l1ball")
    l2 = build_grid(3, 10, "l2ball")
    assert np.all(l2.membership[l1.membership])
    assert l1.size < l2.size < 1000


def test_explicit_mask(tmp_path):
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:6, 1:7] = True
    path = tmp_path / "m.lsmask"
    write_mask(path, mask)
    np.testing.assert_array_equal(read_mask(path, dim=2, n=8), mask)

    grid = build_grid(2, 8, "explicit-mask", mask_path=str(path))
    assert grid.size == 24
    grid = build_grid(2, 8, "explicit-mask", mask=mask)
    assert grid.size == 24


def test_mask_errors(tmp_path):
    path = tmp_path / "bad.lsmask"
    path.write_bytes(b"NOPE 2 8\n" + bytes(64))
    with pytest.raises(GridSpecError, match="magic"):
        read_mask(path)

    path.write_bytes(b"LSMASK 2 8\n" + bytes(10))
    with pytest.raises(GridSpecError, match="expected 64"):
        read_mask(path)

    write_mask(path, np.ones((8, 8), dtype=bool))
    with pytest.raises(GridSpecError, match="n=8"):
        read_mask(path, n=9)


@pytest.mark.parametrize("kwargs", [
    dict(dim=1, n=8),
    dict(dim=2, n=8, shape="hexagon"),
    dict(dim=2, n=4, shape="l2ball"),
    dict(dim=2, n=8, shape="l2ball", radius=0.7),
    dict(dim=2, n=8, shape="explicit-mask"),
    dict(dim=2, n=8, shape="explicit-mask", mask=np.zeros((8, 8), dtype=bool)),
    dict(dim=2, n=8, shape="explicit-mask", mask=np.ones((8, 7), dtype=bool)),
])
def test_build_grid_errors(kwargs):
    with pytest.raises(GridSpecError):
        build_grid(**kwargs)


# ============================================================================
# Neighborhoods and classification
# ============================================================================

def test_neighbor_table_and_neighborhood():
    grid = build_grid(2, 8)
    table = neighbor_table(grid)
    assert table.shape == (64, 9)
    corner = grid.index[0, 0]
    assert neighborhood(grid, corner) == [0, 1, 8, 9]
    assert table[corner].tolist() == [-1, -1, -1, -1, 0, 1, -1, 8, 9]
    middle = grid.index[3, 4]
    assert len(neighborhood(grid, middle)) == 9
    with pytest.raises(GridSpecError):
        neighborhood(grid, 64)


@pytest.mark.parametrize("dim,n", [(2, 8), (2, 13), (3, 8)])
def test_rectangle_counts(dim, n):
    c = classify(build_grid(dim, n))
    assert c.n_interior == (n - 2) ** dim
    assert c.n_boundary == n**dim - (n - 2) ** dim
    assert set(c.interior).isdisjoint(c.boundary)


def test_rect_orientation_labels():
    grid = build_grid(3, 8)
    c = classify(grid)
    labels = [c.rect_class(k) for k in range(c.n_boundary)]
    assert labels.count("corner") == 8
    assert labels.count("edge") == 12 * 6
    assert labels.count("face") == 6 * 36

    k = list(c.boundary).index(grid.index[0, 3, 7])
    assert c.orientation[k].tolist() == [-1, 0, 1]


def test_class_name_2d():
    assert class_name((0, -1)) == "edge"
    assert class_name((1, 1)) == "corner"


def test_ball_has_no_orientation():
    c = classify(build_grid(2, 16, "l2ball"))
    assert c.orientation is None
    with pytest.raises(GridSpecError):
        c.rect_class(0)
    assert c.n_boundary > 0


def test_layer_depth():
    grid = build_grid(2, 8)
    depth = grid.scatter(layer_depth(grid))
    assert depth[0, 0] == 1
    assert depth[0, 4] == 1
    assert depth[1, 1] == 2
    assert depth[3, 4] == 4
    assert depth.max() == 4


@pytest.mark.parametrize("dim,n,shape", [(2, 10, "rectangle"), (2, 12, "l2ball"), (3, 9, "l1ball")])
def test_neighborhoods_are_symmetric(dim, n, shape):
    grid = build_grid(dim, n, shape)
    table = neighbor_table(grid)
    for i in range(grid.size):
        assert i in table[i]
        for j in table[i][table[i] >= 0]:
            assert i in table[j]
