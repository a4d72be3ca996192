# ls_sparsify/grid.py
"""
Regular cell-centered lattice over the unit box, the member set of the
domain, 3^dim neighborhoods and the interior/boundary split.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_cdt

logger = logging.getLogger(__name__)

SHAPES = ("rectangle", "l2ball", "l1ball", "explicit-mask")
MIN_POINTS = 8
MASK_MAGIC = "LSMASK"


class GridSpecError(ValueError):
    """Invalid grid size, shape or shape parameters."""


def stencil_offsets(dim):
    """All offsets in {-1,0,1}^dim in lexicographic order."""
    return np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=int)


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    n: int
    h: float
    shape: str
    membership: np.ndarray  # bool, shape (n,)*dim
    index: np.ndarray = field(repr=False)  # global point id or -1, shape (n,)*dim
    coords: np.ndarray = field(repr=False)  # (N, dim) lattice indices, 0-based

    @property
    def size(self):
        return len(self.coords)

    @property
    def is_rectangle(self):
        return self.shape == "rectangle"

    def points(self):
        """Physical point centers x_i = (i + 1/2) h, shape (N, dim)."""
        return (self.coords + 0.5) * self.h

    def scatter(self, values, fill=0):
        """Place a member-point vector onto the full (n,)*dim lattice."""
        values = np.asarray(values)
        out = np.full((self.n,) * self.dim + values.shape[1:], fill, dtype=values.dtype)
        out[tuple(self.coords.T)] = values
        return out

    def gather(self, lattice):
        """Restrict a lattice array to the member points."""
        return np.asarray(lattice)[tuple(self.coords.T)]


@dataclass(frozen=True, eq=False)
class Classification:
    interior: np.ndarray  # sorted point ids
    boundary: np.ndarray  # sorted point ids
    neighbors: np.ndarray = field(repr=False)  # (N, 3^dim) point ids or -1
    # per-boundary-point orientation in {-1,0,1}^dim, rectangles only
    orientation: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def n_boundary(self):
        return len(self.boundary)

    def rect_class(self, k):
        """Class label of the k-th boundary point ('face', 'edge' or 'corner')."""
        if self.orientation is None:
            raise GridSpecError("Error: rectangular labels exist only for rectangle grids")
        return class_name(self.orientation[k])


def class_name(orientation):
    orientation = tuple(int(o) for o in orientation)
    dim = len(orientation)
    touched = sum(1 for o in orientation if o != 0)
    if dim == 2:
        return {1: "edge", 2: "corner"}[touched]
    return {1: "face", 2: "edge", 3: "corner"}[touched]


def read_mask(path, dim=None, n=None):
    """
    Read an explicit-mask raster: header line "LSMASK dim n" then n^dim
    bytes of 0/1 in lexicographic order.
    """
    raw = Path(path).read_bytes()
    try:
        header, body = raw.split(b"\n", 1)
        magic, mdim, mn = header.decode("ascii").split()
        mdim, mn = int(mdim), int(mn)
    except Exception as e:
        raise GridSpecError(f"Error parsing mask file {path}: {e}")

    if magic != MASK_MAGIC:
        raise GridSpecError(f"Error parsing mask file {path}: bad magic '{magic}'")
    if dim is not None and mdim != dim:
        raise GridSpecError(f"Error: mask is {mdim}D but the grid is {dim}D")
    if n is not None and mn != n:
        raise GridSpecError(f"Error: mask has n={mn} but the grid has n={n}")
    if len(body) != mn**mdim:
        raise GridSpecError(f"Error: mask body has {len(body)} bytes, expected {mn**mdim}")

    bits = np.frombuffer(body, dtype=np.uint8)
    if np.any(bits > 1):
        raise GridSpecError("Error: mask bytes must be 0 or 1")
    return bits.astype(bool).reshape((mn,) * mdim)


def write_mask(path, membership):
    membership = np.asarray(membership, dtype=bool)
    header = f"{MASK_MAGIC} {membership.ndim} {membership.shape[0]}\n".encode("ascii")
    Path(path).write_bytes(header + membership.astype(np.uint8).tobytes())


def _membership(dim, n, shape, params):
    if shape == "rectangle":
        return np.ones((n,) * dim, dtype=bool)

    if shape == "explicit-mask":
        if params.get("mask") is not None:
            mask = np.asarray(params["mask"], dtype=bool)
        elif params.get("mask_path"):
            mask = read_mask(params["mask_path"], dim=dim, n=n)
        else:
            raise GridSpecError("Error: explicit-mask shape needs 'mask' or 'mask_path'")
        if mask.shape != (n,) * dim:
            raise GridSpecError(f"Error: mask shape {mask.shape} does not match {(n,) * dim}")
        return mask.copy()

    radius = float(params.get("radius", 0.5))
    if not 0 < radius <= 0.5:
        raise GridSpecError(f"Error: ball radius must be in (0, 1/2], got {radius}")

    h = 1.0 / n
    axes = np.meshgrid(*([(np.arange(n) + 0.5) * h - 0.5] * dim), indexing="ij")
    if shape == "l2ball":
        dist = np.sqrt(sum(a * a for a in axes))
    else:
        dist = sum(np.abs(a) for a in axes)
    return dist <= radius + 1e-12


def build_grid(dim, n, shape="rectangle", **params):
    """
    Build the cell-centered lattice x_i = (i + 1/2) h, h = 1/n, and its member set.

    Args:
        dim: 2 or 3
        n: points per dimension
        shape: 'rectangle', 'l2ball', 'l1ball' or 'explicit-mask'
        params: radius (balls), mask / mask_path (explicit-mask)

    Returns:
        Grid with members numbered in lexicographic lattice order
    """
    if dim not in (2, 3):
        raise GridSpecError(f"Error: dim must be 2 or 3, got {dim}")
    if shape not in SHAPES:
        raise GridSpecError(f"Error: unknown shape '{shape}', expected one of {SHAPES}")
    # tiny rectangles are allowed for unit checks; solver configs enforce MIN_POINTS
    if n < 1 or (shape != "rectangle" and n < MIN_POINTS):
        raise GridSpecError(f"Error: n must be >= {MIN_POINTS}, got {n}")

    membership = _membership(dim, n, shape, params)
    if not membership.any():
        raise GridSpecError("Error: the domain has no member points")

    index = np.full(membership.shape, -1, dtype=np.int64)
    coords = np.argwhere(membership)  # lexicographic (C order)
    index[tuple(coords.T)] = np.arange(len(coords))

    logger.debug("built %dD %s grid n=%d with N=%d", dim, shape, n, len(coords))
    return Grid(dim=dim, n=n, h=1.0 / n, shape=shape, membership=membership,
                index=index, coords=coords)


def neighbor_table(grid):
    """Point ids of every 3^dim neighbor (lexicographic offsets), -1 where absent."""
    padded = np.pad(grid.index, 1, constant_values=-1)
    table = np.empty((grid.size, 3**grid.dim), dtype=np.int64)
    base = grid.coords + 1
    for k, off in enumerate(stencil_offsets(grid.dim)):
        table[:, k] = padded[tuple((base + off).T)]
    return table


def neighborhood(grid, i):
    """mu(i): member points within infinity-distance 1 of point i, lexicographic offsets."""
    if not 0 <= i < grid.size:
        raise GridSpecError(f"Error: point {i} is not a member point")
    c = grid.coords[i]
    out = []
    for off in stencil_offsets(grid.dim):
        p = c + off
        if np.all(p >= 0) and np.all(p < grid.n) and grid.index[tuple(p)] >= 0:
            out.append(int(grid.index[tuple(p)]))
    return out


def classify(grid):
    """Split members into interior (full neighborhood) and boundary points."""
    neighbors = neighbor_table(grid)
    full = np.all(neighbors >= 0, axis=1)
    interior = np.flatnonzero(full)
    boundary = np.flatnonzero(~full)

    orientation = None
    if grid.is_rectangle:
        c = grid.coords[boundary]
        orientation = np.where(c == 0, -1, np.where(c == grid.n - 1, 1, 0))

    logger.debug("classified N=%d: N_I=%d N_B=%d", grid.size, len(interior), len(boundary))
    return Classification(interior=interior, boundary=boundary,
                          neighbors=neighbors, orientation=orientation)


def layer_depth(grid):
    """
    Chessboard distance (in lattice layers) from each member point to the
    complement of the member set; the outermost layer has depth 1.
    """
    padded = np.pad(grid.membership, 1, constant_values=False)
    depth = distance_transform_cdt(padded, metric="chessboard")
    return grid.gather(depth[(slice(1, -1),) * grid.dim])
