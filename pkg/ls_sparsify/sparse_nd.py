# ls_sparsify/sparse_nd.py
"""
The sparse system [A + Cq; B] and its right-hand-side applier [A; B],
a geometric nested-dissection ordering, and a multifrontal LU over it.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgWarning, lu_factor, solve_triangular

from ls_sparsify.kernel_op import SizeMismatchError

logger = logging.getLogger(__name__)

LEAF_SIZE = 64
PIVOT_RTOL = 1e-14


class StructurallySingularFrontError(RuntimeError):
    """A row of the sparse system has no entries, so no front can pivot on it."""


# ============================================================================
# Assembly
# ============================================================================

def _offset_index(offsets):
    """Position of each offset in the lexicographic 3^dim list."""
    offsets = np.asarray(offsets)
    dim = offsets.shape[1]
    weights = 3 ** np.arange(dim - 1, -1, -1)
    return (offsets + 1) @ weights


def assemble(stencils, medium, grid, classification):
    """
    Build P = [A + Cq; B] and AB = [A; B] as CSR matrices.

    Interior row i: A(i, mu(i)) = alpha_int, P(i, j) = alpha_int_j + c_j q_j.
    Boundary row i: both matrices carry the boundary stencil of i.
    """
    N = grid.size
    if medium.size != N:
        raise SizeMismatchError(f"Error: medium has {medium.size} points, grid has {N}")

    q = medium.q
    neighbors = classification.neighbors
    rows, cols, a_vals, p_vals = [], [], [], []

    interior = classification.interior
    if len(interior):
        s = neighbors.shape[1]
        c = neighbors[interior].ravel()
        alpha = np.tile(stencils.interior.weights, len(interior))
        rows.append(np.repeat(interior, s))
        cols.append(c)
        a_vals.append(alpha)
        p_vals.append(alpha + np.tile(stencils.c_row, len(interior)) * q[c])

    for k, i in enumerate(classification.boundary):
        try:
            if stencils.general_boundary:
                st = stencils.general_boundary[int(i)]
            else:
                st = stencils.rect_boundary[tuple(int(o) for o in classification.orientation[k])]
        except (KeyError, TypeError):
            raise ValueError(f"Error: no boundary stencil covers point {int(i)}")
        c = neighbors[i, _offset_index(st.offsets)]
        if np.any(c < 0):
            raise ValueError(f"Error: stencil of point {int(i)} reaches outside the domain")
        rows.append(np.full(len(c), i))
        cols.append(c)
        a_vals.append(st.weights)
        p_vals.append(st.weights)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    P = sparse.coo_matrix((np.concatenate(p_vals), (rows, cols)), shape=(N, N)).tocsr()
    AB = sparse.coo_matrix((np.concatenate(a_vals), (rows, cols)), shape=(N, N)).tocsr()
    logger.info("assembled sparse system: N=%d nnz=%d", N, P.nnz)
    return P, AB


def apply_AB(AB, v):
    """[A; B] v."""
    v = np.asarray(v)
    if v.shape[0] != AB.shape[1]:
        raise SizeMismatchError(f"Error: vector has {v.shape[0]} entries, expected {AB.shape[1]}")
    return AB @ v


# ============================================================================
# Nested dissection
# ============================================================================

@dataclass(eq=False)
class SeparatorNode:
    ids: np.ndarray  # point ids eliminated at this node (separator or leaf)
    children: list = field(default_factory=list)  # node indices
    level: int = 0

    @property
    def is_leaf(self):
        return not self.children


@dataclass(frozen=True, eq=False)
class Ordering:
    order: np.ndarray  # order[k] = point eliminated k-th
    nodes: list  # SeparatorNode in postorder, root last

    @property
    def position(self):
        pos = np.empty(len(self.order), dtype=np.int64)
        pos[self.order] = np.arange(len(self.order))
        return pos

    @property
    def root(self):
        return self.nodes[-1]

    @property
    def depth(self):
        return max(node.level for node in self.nodes)


def _split_axis(extent, last_axis):
    """Longest axis; ties go to the first one cyclically after the last split axis."""
    dim = len(extent)
    best = extent.max()
    for k in range(1, dim + 1):
        axis = (last_axis + k) % dim
        if extent[axis] == best:
            return axis
    return 0


def nd_order(grid, classification=None, leaf_size=LEAF_SIZE):
    """
    Geometric nested dissection: split the tight bounding box of the member
    points on its longest axis at the midpoint layer, which separates the two
    halves under the 3^dim adjacency, and recurse until at most `leaf_size`
    points remain.

    Returns:
        Ordering with nodes in postorder (children before parents)
    """
    if leaf_size < 1:
        raise ValueError(f"Error: leaf_size must be >= 1, got {leaf_size}")

    nodes = []
    coords = grid.coords

    def dissect(ids, last_axis, level):
        if len(ids) <= leaf_size:
            nodes.append(SeparatorNode(ids=ids, level=level))
            return len(nodes) - 1

        c = coords[ids]
        lo, hi = c.min(axis=0), c.max(axis=0)
        axis = _split_axis(hi - lo, last_axis)
        mid = (lo[axis] + hi[axis]) // 2
        along = c[:, axis]

        children = []
        for part in (ids[along < mid], ids[along > mid]):
            if len(part):
                children.append(dissect(part, axis, level + 1))
        nodes.append(SeparatorNode(ids=ids[along == mid], children=children, level=level))
        return len(nodes) - 1

    dissect(np.arange(grid.size), -1, 0)
    order = np.concatenate([node.ids for node in nodes]).astype(np.int64)
    logger.debug("nested dissection: %d nodes, leaf_size=%d", len(nodes), leaf_size)
    return Ordering(order=order, nodes=nodes)


# ============================================================================
# Multifrontal LU
# ============================================================================

@dataclass(eq=False)
class Front:
    own: np.ndarray  # positions eliminated here (contiguous)
    update: np.ndarray  # later positions coupled to this subtree
    lu: np.ndarray | None = field(default=None, repr=False)
    perm: np.ndarray | None = field(default=None, repr=False)
    U12: np.ndarray | None = field(default=None, repr=False)
    L21: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.own) + len(self.update)


@dataclass(frozen=True, eq=False)
class Factorization:
    n: int
    ordering: Ordering
    fronts: list = field(repr=False)
    perturbations: list = field(default_factory=list)  # (front, pivot, |original|, threshold)
    factor_nnz: int = 0

    @property
    def max_front(self):
        return max((f.size for f in self.fronts), default=0)


def _lapack_perm(piv):
    """Row permutation equivalent to LAPACK's sequential row swaps."""
    perm = np.arange(len(piv))
    for k, p in enumerate(piv):
        perm[k], perm[p] = perm[p], perm[k]
    return perm


def _factor_front(F, p, index, perturbations):
    """Partial LU of the leading p x p block; returns (lu, perm, U12, L21, Schur complement)."""
    F11, F12 = F[:p, :p], F[:p, p:]
    F21, F22 = F[p:, :p], F[p:, p:]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(F11, check_finite=False)
    perm = _lapack_perm(piv)

    scale = np.linalg.norm(F, np.inf)
    threshold = PIVOT_RTOL * scale if scale > 0 else PIVOT_RTOL
    diag = np.diagonal(lu)
    for k in np.flatnonzero(np.abs(diag) < threshold):
        d = diag[k]
        phase = d / abs(d) if d != 0 else 1.0
        perturbations.append((index, int(k), float(abs(d)), float(threshold)))
        logger.warning("front %d: pivot %d perturbed from %.3e to %.3e", index, k, abs(d), threshold)
        lu[k, k] = phase * threshold

    if F12.shape[1] == 0:
        return lu, perm, np.zeros((p, 0), dtype=complex), np.zeros((0, p), dtype=complex), F22
    U12 = solve_triangular(lu, F12[perm], lower=True, unit_diagonal=True, check_finite=False)
    L21 = solve_triangular(lu, F21.T, trans="T", lower=False, check_finite=False).T
    return lu, perm, U12, L21, F22 - L21 @ U12


def factorize(P, ordering):
    """
    Multifrontal LU of P in the nested-dissection order, with partial pivoting
    restricted to each front's pivot block. Pivots below 1e-14 ||front||_inf
    are raised to that threshold and logged in `perturbations`.
    """
    P = sparse.csr_matrix(P, copy=True)
    P.eliminate_zeros()
    N = P.shape[0]
    if P.shape != (N, N) or N != len(ordering.order):
        raise SizeMismatchError(f"Error: matrix {P.shape} does not match ordering of {len(ordering.order)}")

    empty = np.flatnonzero(np.diff(P.indptr) == 0)
    if len(empty):
        raise StructurallySingularFrontError(f"Error: rows {empty[:5].tolist()} of the system are empty")

    order = ordering.order
    pos = ordering.position
    Pp = P[order][:, order].tocoo()
    pattern = (abs(Pp) + abs(Pp.T)).tocsr()

    # owner of every position, and subtree extents in position space
    owner = np.empty(N, dtype=np.int64)
    starts = []
    cursor = 0
    for k, node in enumerate(ordering.nodes):
        owner[cursor:cursor + len(node.ids)] = k
        starts.append(cursor)
        cursor += len(node.ids)

    entry_owner = owner[np.minimum(Pp.row, Pp.col)]
    by_owner = np.argsort(entry_owner, kind="stable")
    bounds = np.searchsorted(entry_owner[by_owner], np.arange(len(ordering.nodes) + 1))

    fronts = []
    schur = {}
    subtree_end = {}
    perturbations = []
    nnz = 0

    for k, node in enumerate(ordering.nodes):
        p = len(node.ids)
        own = np.arange(starts[k], starts[k] + p)
        end = starts[k] + p - 1
        for ch in node.children:
            end = max(end, subtree_end[ch])
        subtree_end[k] = end

        coupled = [pattern.indices[pattern.indptr[r]:pattern.indptr[r + 1]] for r in own]
        coupled += [fronts[ch].update for ch in node.children]
        update = np.unique(np.concatenate(coupled)) if coupled else np.empty(0, dtype=np.int64)
        update = update[update > end]

        index = np.concatenate([own, update])
        F = np.zeros((len(index), len(index)), dtype=complex)

        sel = by_owner[bounds[k]:bounds[k + 1]]
        if len(sel):
            r = np.searchsorted(index, Pp.row[sel])
            c = np.searchsorted(index, Pp.col[sel])
            np.add.at(F, (r, c), Pp.data[sel])

        for ch in node.children:
            child_update, S = fronts[ch].update, schur.pop(ch)
            if len(child_update):
                loc = np.searchsorted(index, child_update)
                F[np.ix_(loc, loc)] += S

        front = Front(own=own, update=update)
        if p:
            front.lu, front.perm, front.U12, front.L21, S = _factor_front(F, p, k, perturbations)
            nnz += p * p + 2 * p * len(update)
        else:
            S = F
        schur[k] = S
        fronts.append(front)
        logger.debug("front %d: pivots=%d update=%d", k, p, len(update))

    fact = Factorization(n=N, ordering=ordering, fronts=fronts,
                         perturbations=perturbations, factor_nnz=nnz)
    logger.info("factorized: N=%d fronts=%d max_front=%d factor_nnz=%d perturbed=%d",
                N, len(fronts), fact.max_front, nnz, len(perturbations))
    return fact


def solve(fact, y):
    """x with P x = y, by a forward sweep up the front tree and a backward sweep down."""
    y = np.asarray(y)
    if y.shape[0] != fact.n:
        raise SizeMismatchError(f"Error: vector has {y.shape[0]} entries, expected {fact.n}")

    order = fact.ordering.order
    w = np.array(y[order], dtype=complex)

    for front in fact.fronts:
        if front.lu is None:
            continue
        c1 = solve_triangular(front.lu, w[front.own][front.perm], lower=True,
                              unit_diagonal=True, check_finite=False)
        w[front.own] = c1
        if len(front.update):
            w[front.update] -= front.L21 @ c1

    for front in reversed(fact.fronts):
        if front.lu is None:
            continue
        rhs = w[front.own]
        if len(front.update):
            rhs = rhs - front.U12 @ w[front.update]
        w[front.own] = solve_triangular(front.lu, rhs, lower=False, check_finite=False)

    x = np.empty_like(w)
    x[order] = w
    return x
