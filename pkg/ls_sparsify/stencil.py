# ls_sparsify/stencil.py
"""
Local annihilating stencils: the rows of A (interior) and B (boundary) of the
sparse system, and the derived row of C.

A stencil is a unit vector alpha over the 3^dim neighborhood of a point chosen
so that alpha . K(neighborhood, far points) is as small as possible, i.e. the
left singular vector of the smallest singular value of that block.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ls_sparsify.grid import class_name, stencil_offsets
from ls_sparsify.kernel_op import apply_K, kernel_table

logger = logging.getLogger(__name__)

MODES = ("auto", "deterministic-rect", "randomized")
# sketch rows below this fraction of ||T|| count as degenerate
DEGENERATE_RTOL = 1e-14
# columns per QR chunk when sweeping a region
CHUNK_COLUMNS = 1 << 17


class DegenerateStencilError(ValueError):
    """The local block has no nonzero entry, so no stencil direction is preferred."""


@dataclass(frozen=True, eq=False)
class Stencil:
    offsets: np.ndarray  # (s, dim) neighbor offsets, lexicographic
    weights: np.ndarray  # (s,) complex, unit norm
    residual: float

    @property
    def size(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    T: np.ndarray = field(repr=False)  # (N, r)
    r: int
    seed: int

    @property
    def norm(self):
        return float(np.linalg.norm(self.T))


@dataclass(frozen=True, eq=False)
class StencilSet:
    mode: str
    interior: Stencil
    c_row: np.ndarray  # (3^dim,) shared C(i, mu(i)) row
    rect_boundary: dict = field(default_factory=dict)  # orientation tuple -> Stencil
    general_boundary: dict = field(default_factory=dict)  # boundary point id -> Stencil
    degenerate_points: int = 0

    def boundary_stencil(self, point, orientation=None):
        if self.general_boundary:
            return self.general_boundary[int(point)]
        return self.rect_boundary[tuple(int(o) for o in orientation)]

    def residual_summary(self):
        """Largest stencil residual per class label."""
        summary = {"interior": self.interior.residual}
        for orientation, st in self.rect_boundary.items():
            label = class_name(orientation)
            summary[label] = max(summary.get(label, 0.0), st.residual)
        if self.general_boundary:
            res = np.array([st.residual for st in self.general_boundary.values()])
            summary["boundary_max"] = float(res.max())
            summary["boundary_mean"] = float(res.mean())
        return summary


def _fix_phase(alpha):
    """Rotate so the largest-modulus entry (first on ties) is real and positive."""
    k = np.argmax(np.abs(alpha), axis=-1)
    pivot = np.take_along_axis(alpha, k[..., None], axis=-1)
    return alpha * (np.conj(pivot) / np.abs(pivot))


def smallest_left_singular_vector(M):
    """
    Left singular vector of the smallest singular value of M, as a row alpha
    minimizing ||alpha M|| over unit vectors.

    Accepts a single (s, p) matrix or a stack (..., s, p). When p < s the
    minimum is 0 and alpha spans part of the left null space.

    Returns:
        (alpha, sigma_min)
    """
    M = np.asarray(M, dtype=complex)
    s, p = M.shape[-2:]
    if not np.any(M.reshape(-1, s * p), axis=1).all():
        raise DegenerateStencilError("Error: cannot pick a stencil for an all-zero block")

    U, S, _ = np.linalg.svd(M, full_matrices=p < s)
    alpha = _fix_phase(np.conj(U[..., :, -1]))
    sigma = S[..., -1] if p >= s else np.zeros(M.shape[:-2])
    if np.ndim(sigma) == 0:
        sigma = float(sigma)
    return alpha, sigma


def _smallest_from_factor(R, s):
    """alpha and sigma_min of M from a triangular factor with R^H R = M M^H."""
    _, S, Vh = np.linalg.svd(R, full_matrices=True)
    alpha = _fix_phase(Vh[-1])
    sigma = float(S[-1]) if len(S) == s else 0.0
    return alpha, sigma


def _region_factor(ext, extent, offsets, lo, hi, exclude_center=False):
    """
    Triangular factor R of M M^H where M(a, j) = k_{a-j} for a in `offsets`
    and j in the box [lo, hi] (optionally without the 3^dim center block).

    The box is swept in chunks along its first axis; each chunk's columns are
    folded into R by a QR of [R; M_chunk^H], so the full block is never stored.
    """
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    s = len(offsets)
    widths = hi - lo + 1
    if np.any(widths <= 0):
        return None

    plane = int(np.prod(widths[1:]))
    step = max(1, CHUNK_COLUMNS // max(plane, 1))
    R = np.zeros((0, s), dtype=complex)
    for start in range(lo[0], hi[0] + 1, step):
        c_lo = lo.copy()
        c_hi = hi.copy()
        c_lo[0] = start
        c_hi[0] = min(hi[0], start + step - 1)
        # position p along an axis holds j = c_hi - p, the same for every row a
        rows = []
        for a in offsets:
            sl = tuple(slice(a[k] - c_hi[k] + extent, a[k] - c_lo[k] + extent + 1)
                       for k in range(len(a)))
            rows.append(ext[sl].ravel())
        block = np.array(rows)

        if exclude_center:
            axes = [c_hi[k] - np.arange(c_hi[k] - c_lo[k] + 1) for k in range(len(c_lo))]
            mesh = np.meshgrid(*axes, indexing="ij")
            center = np.all([np.abs(m) <= 1 for m in mesh], axis=0).ravel()
            block = block[:, ~center]
        if block.shape[1] == 0:
            continue
        R = np.linalg.qr(np.vstack([R, block.conj().T]), mode="r")
    return R


def _extended_table(coeffs):
    # offsets a - j reach n when j spans the full [-n+1, n-1] range
    extent = coeffs.n
    ext = kernel_table(coeffs.green_kind, coeffs.h, extent, coeffs.k0)
    return ext, extent


def interior_stencil(coeffs, grid=None):
    """
    alpha minimizing ||alpha K(mu(0), I_n)|| with I_n the offsets |j_k| <= n-1
    outside mu(0). Shared by every interior point by translation invariance.
    """
    dim, n = coeffs.dim, coeffs.n
    offsets = stencil_offsets(dim)
    ext, extent = _extended_table(coeffs)
    R = _region_factor(ext, extent, offsets, [-(n - 1)] * dim, [n - 1] * dim,
                       exclude_center=True)
    if R is None or not np.any(R):
        raise DegenerateStencilError("Error: the interior region is empty, n is too small")
    alpha, sigma = _smallest_from_factor(R, len(offsets))
    logger.info("interior stencil: sigma_min=%.3e", sigma)
    return Stencil(offsets=offsets, weights=alpha, residual=sigma)


def orientation_offsets(orientation):
    """Neighbor offsets of a rectangle boundary point that stay inside the box."""
    offsets = stencil_offsets(len(orientation))
    keep = np.ones(len(offsets), dtype=bool)
    for k, o in enumerate(orientation):
        if o == 1:
            keep &= offsets[:, k] <= 0
        elif o == -1:
            keep &= offsets[:, k] >= 0
    return offsets[keep]


def _orientation_region(orientation, n, b):
    lo, hi = [], []
    for o in orientation:
        if o == 1:
            lo.append(-(n - 1))
            hi.append(-b)
        elif o == -1:
            lo.append(b)
            hi.append(n - 1)
        else:
            lo.append(-(n - 1))
            hi.append(n - 1)
    return lo, hi


def boundary_orientations(dim):
    """All orientations in {-1,0,1}^dim except 0 (2D: 4 edges + 4 corners; 3D: 26)."""
    return [tuple(int(v) for v in o) for o in stencil_offsets(dim) if np.any(o)]


def rect_boundary_stencils(coeffs, grid, b):
    """
    One stencil per boundary class and orientation of a rectangular grid.

    For an orientation o the far region is, along each axis k, the offsets
    j_k in [b, n-1] (o_k = -1), [-(n-1), -b] (o_k = +1) or the full range
    (o_k = 0): every point at least b layers in from the touched sides,
    where the medium may be nonzero.

    Returns:
        dict orientation -> Stencil
    """
    n, dim = coeffs.n, coeffs.dim
    if not grid.is_rectangle:
        raise ValueError("Error: rectangular boundary stencils need a rectangle grid")
    if b < 2:
        raise ValueError(f"Error: buffer width b must be >= 2, got {b}")
    if 2 * b >= n:
        raise ValueError(f"Error: buffer width b={b} leaves no far region for n={n} (need b < n/2)")

    ext, extent = _extended_table(coeffs)
    out = {}
    for orientation in boundary_orientations(dim):
        offsets = orientation_offsets(orientation)
        lo, hi = _orientation_region(orientation, n, b)
        R = _region_factor(ext, extent, offsets, lo, hi)
        alpha, sigma = _smallest_from_factor(R, len(offsets))
        out[orientation] = Stencil(offsets=offsets, weights=alpha, residual=sigma)
        logger.debug("%s stencil %s: sigma_min=%.3e", class_name(orientation), orientation, sigma)

    logger.info("rectangular boundary stencils: %d classes, max sigma_min=%.3e",
                len(out), max(st.residual for st in out.values()))
    return out


def build_sketch(coeffs, medium, r, seed=0):
    """
    T = K (q . R) for a complex Gaussian R of size N x r drawn from a seeded
    generator, applied in column batches.
    """
    dim, N = coeffs.dim, coeffs.grid.size
    if r < 3**dim:
        raise ValueError(f"Error: sketch size r must be >= {3**dim}, got {r}")
    if medium.size != N:
        raise ValueError(f"Error: medium has {medium.size} points, grid has {N}")

    rng = np.random.default_rng(seed)
    Rm = (rng.standard_normal((N, r)) + 1j * rng.standard_normal((N, r))) / np.sqrt(2.0)

    T = np.zeros((N, r), dtype=complex)
    if not medium.is_zero:
        batch = max(1, min(r, (1 << 24) // (2 * coeffs.n) ** dim))
        for start in range(0, r, batch):
            cols = slice(start, start + batch)
            T[:, cols] = apply_K(coeffs, medium.q[:, None] * Rm[:, cols])

    logger.info("sketch: N=%d r=%d seed=%d ||T||=%.3e", N, r, seed, np.linalg.norm(T))
    return SketchMatrix(T=T, r=r, seed=seed)


def randomized_boundary_stencils(sketch, grid, classification):
    """
    Per-point boundary stencils alpha_i minimizing ||alpha_i T(mu(i), :)||.

    Points are grouped by which neighbors are present and each group is solved
    with one batched SVD. A point whose sketch rows are negligible against
    ||T|| gets the identity stencil.

    Returns:
        (dict point -> Stencil, number of identity fallbacks)
    """
    offsets = stencil_offsets(grid.dim)
    center = len(offsets) // 2
    T = sketch.T
    tnorm = sketch.norm
    neighbors = classification.neighbors

    groups = defaultdict(list)
    for i in classification.boundary:
        groups[tuple(neighbors[i] >= 0)].append(int(i))

    out = {}
    fallbacks = 0
    for pattern, points in groups.items():
        present = np.array(pattern)
        offs = offsets[present]
        ids = neighbors[np.array(points)][:, present]  # (g, s)
        blocks = T[ids]  # (g, s, r)
        local = np.linalg.norm(blocks, axis=(1, 2))
        degenerate = local <= DEGENERATE_RTOL * tnorm

        identity = (np.flatnonzero(present) == center).astype(complex)
        for k in np.flatnonzero(degenerate):
            out[points[k]] = Stencil(offsets=offs, weights=identity, residual=0.0)
        fallbacks += int(degenerate.sum())

        live = np.flatnonzero(~degenerate)
        if len(live):
            alpha, sigma = smallest_left_singular_vector(blocks[live])
            for k, a, sg in zip(live, alpha, np.atleast_1d(sigma)):
                out[points[k]] = Stencil(offsets=offs, weights=a, residual=float(sg) / tnorm)

    logger.info("randomized boundary stencils: N_B=%d patterns=%d fallbacks=%d",
                len(out), len(groups), fallbacks)
    return out, fallbacks


def derive_c_row(coeffs, alpha_int):
    """c = alpha_int . K(mu(0), mu(0)), entries read from the coefficient table."""
    offsets = stencil_offsets(coeffs.dim)
    local = kernel_table(coeffs.green_kind, coeffs.h, 2, coeffs.k0)
    diff = offsets[:, None, :] - offsets[None, :, :] + 2
    K_local = local[tuple(np.moveaxis(diff, -1, 0))]
    return np.asarray(alpha_int) @ K_local


def build_stencils(coeffs, medium, grid, classification, mode="auto", r=None, seed=0, b=None):
    """
    Build every stencil the sparse system needs.

    Args:
        mode: 'deterministic-rect' (per-class stencils, rectangles only),
              'randomized' (per-point stencils from a sketch) or 'auto'
              (deterministic for rectangles, randomized otherwise)
        r: sketch columns, default 4 * 3^dim
        seed: sketch seed
        b: buffer width used for the rectangular regions, default medium.buffer_b

    Returns:
        StencilSet
    """
    if mode not in MODES:
        raise ValueError(f"Error: unknown stencil mode '{mode}', expected one of {MODES}")
    if mode == "auto":
        mode = "deterministic-rect" if grid.is_rectangle else "randomized"

    interior = interior_stencil(coeffs, grid)
    c_row = derive_c_row(coeffs, interior.weights)

    if mode == "deterministic-rect":
        rect = rect_boundary_stencils(coeffs, grid, medium.buffer_b if b is None else b)
        return StencilSet(mode=mode, interior=interior, c_row=c_row, rect_boundary=rect)

    r = 4 * 3**grid.dim if r is None else int(r)
    sketch = build_sketch(coeffs, medium, r, seed)
    general, fallbacks = randomized_boundary_stencils(sketch, grid, classification)
    return StencilSet(mode=mode, interior=interior, c_row=c_row,
                      general_boundary=general, degenerate_points=fallbacks)
