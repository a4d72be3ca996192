# ls_sparsify/krylov.py
"""
Full (non-restarted) GMRES and the sparsifying preconditioner map
v -> P^-1 [A; B] (I + Kq) v it is run on.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ls_sparsify.kernel_op import forward
from ls_sparsify.sparse_nd import apply_AB, solve

logger = logging.getLogger(__name__)

# Arnoldi vectors shorter than this (relative to ||op(v_k)||) end the iteration
BREAKDOWN_RTOL = 1e-14


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-6
    maxit: int = 200

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError(f"Error: gmres tol must be in (0, 1), got {self.tol}")
        if int(self.maxit) != self.maxit or self.maxit < 1:
            raise ValueError(f"Error: gmres maxit must be a positive integer, got {self.maxit}")


@dataclass(frozen=True, eq=False)
class GmresResult:
    x: np.ndarray = field(repr=False)
    iterations: int
    residual_history: list
    converged: bool

    @property
    def residual(self):
        return self.residual_history[-1] if self.residual_history else 0.0


def _givens(a, b):
    """Complex rotation (c, s) with c a + s b = r e^{i arg a} and -conj(s) a + c b = 0."""
    if a == 0:
        return 0.0, 1.0
    r = np.hypot(abs(a), abs(b))
    return abs(a) / r, (a / abs(a)) * np.conj(b) / r


def gmres(op, rhs, opts=None):
    """
    Solve op(x) = rhs from x0 = 0.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass; the
    Hessenberg least-squares problem is kept triangular with complex Givens
    rotations, so its residual is available every step without forming x.

    Args:
        op: callable mapping an (N,) complex vector to an (N,) complex vector
        rhs: right-hand side
        opts: SolveOptions

    Returns:
        GmresResult with residual_history[k] = ||rhs - op(x_k)|| / ||rhs||
        (the least-squares residual after k+1 steps)
    """
    opts = opts or SolveOptions()
    rhs = np.asarray(rhs, dtype=complex)
    if not np.all(np.isfinite(rhs)):
        raise FloatingPointError("Error: gmres right-hand side is not finite")

    N = len(rhs)
    beta = np.linalg.norm(rhs)
    if beta == 0:
        return GmresResult(x=np.zeros(N, dtype=complex), iterations=1,
                           residual_history=[0.0], converged=True)

    m = int(opts.maxit)
    V = np.zeros((m + 1, N), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    e = np.zeros(m + 1, dtype=complex)
    e[0] = beta
    V[0] = rhs / beta

    history = []
    converged = False
    singular = False
    k = 0
    for k in range(m):
        w = np.array(op(V[k]), dtype=complex)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError(f"Error: operator produced non-finite values at iteration {k + 1}")
        wnorm = np.linalg.norm(w)

        for _ in range(2):
            for j in range(k + 1):
                h = np.vdot(V[j], w)
                w -= h * V[j]
                H[j, k] += h
        H[k + 1, k] = np.linalg.norm(w)
        breakdown = abs(H[k + 1, k]) <= BREAKDOWN_RTOL * wnorm
        if not breakdown:
            V[k + 1] = w / H[k + 1, k]

        for j in range(k):
            hj, hj1 = H[j, k], H[j + 1, k]
            H[j, k] = cs[j] * hj + sn[j] * hj1
            H[j + 1, k] = -np.conj(sn[j]) * hj + cs[j] * hj1
        cs[k], sn[k] = _givens(H[k, k], H[k + 1, k])
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0

        if abs(H[k, k]) <= BREAKDOWN_RTOL * wnorm:
            # op(V[k]) lies in span(V[:k]): the step cannot lower the residual
            singular = True
            history.append(history[-1] if history else 1.0)
            logger.warning("gmres breakdown at iteration %d: operator is singular on the Krylov space", k + 1)
            break

        e[k + 1] = -np.conj(sn[k]) * e[k]
        e[k] = cs[k] * e[k]

        res = abs(e[k + 1]) / beta
        history.append(float(res))
        logger.debug("gmres iteration %d: residual %.3e", k + 1, res)
        if res <= opts.tol:
            converged = True
            break
        if breakdown:
            logger.warning("gmres breakdown at iteration %d with residual %.3e", k + 1, res)
            break

    iterations = k + 1
    steps = k if singular else iterations
    if steps:
        y = solve_triangular(H[:steps, :steps], e[:steps], lower=False, check_finite=False)
        x = V[:steps].T @ y
    else:
        x = np.zeros(N, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"Error: gmres produced a non-finite iterate after {iterations} iterations")

    if converged:
        logger.info("gmres converged in %d iterations (residual %.3e)", iterations, history[-1])
    elif iterations == m:
        logger.warning("gmres stopped at maxit=%d with residual %.3e", iterations, history[-1])
    return GmresResult(x=x, iterations=iterations, residual_history=history, converged=converged)


class SparsifyingPreconditioner:
    """
    M^-1 v = P^-1 [A; B] v, and the left-preconditioned operator
    v -> M^-1 (I + Kq) v. Calling the object applies the operator.
    """

    def __init__(self, coeffs, medium, fact, AB):
        if not (coeffs.grid.size == medium.size == fact.n == AB.shape[0]):
            raise ValueError("Error: preconditioner pieces were built on different grids")
        self.coeffs = coeffs
        self.medium = medium
        self.fact = fact
        self.AB = AB
        self.apply_times = []

    def apply(self, v):
        start = time.perf_counter()
        out = solve(self.fact, apply_AB(self.AB, v))
        self.apply_times.append(time.perf_counter() - start)
        return out

    def rhs(self, g):
        """Preconditioned right-hand side M^-1 g."""
        return self.apply(g)

    def __call__(self, v):
        return self.apply(forward(self.coeffs, self.medium, v))

    @property
    def mean_apply_seconds(self):
        return float(np.mean(self.apply_times)) if self.apply_times else 0.0

    def reset_timing(self):
        self.apply_times = []


def preconditioned_op(coeffs, medium, fact, AB):
    """The map v -> solve(fact, apply_AB(forward(v)))."""
    return SparsifyingPreconditioner(coeffs, medium, fact, AB)
