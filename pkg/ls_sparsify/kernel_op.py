# ls_sparsify/kernel_op.py
"""
Translation-invariant quadrature weights k_t of the integral operator K and
its fast application by zero-padded FFT convolution.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from ls_sparsify.special_fn import GreenKind, green

logger = logging.getLogger(__name__)

KINDS = ("helmholtz", "laplace")
DIRECT_LIMIT = 10_000
QUAD_EPSREL = 1e-11


class SizeMismatchError(ValueError):
    """A field does not live on the grid it is applied to."""


@dataclass(frozen=True, eq=False)
class KernelCoeffs:
    dim: int
    n: int
    h: float
    omega: float
    kind: str
    green_kind: GreenKind
    k0: complex
    table: np.ndarray = field(repr=False)  # (2n-1,)*dim, offset t stored at t + n - 1
    spectrum: np.ndarray = field(repr=False)  # fftn of the periodized (2n,)*dim table
    grid: object = field(repr=False)

    def coefficient(self, t):
        """k_t for an integer offset t with |t_k| <= n - 1."""
        return self.table[tuple(np.asarray(t) + self.n - 1)]


def _check_kind(kind, dim, omega):
    if kind not in KINDS:
        raise ValueError(f"Error: unknown kernel kind '{kind}', expected one of {KINDS}")
    if kind == "laplace":
        if dim != 3:
            raise ValueError("Error: the Laplace kernel is 3D only")
        return GreenKind(dim=3, omega=0.0)
    if omega <= 0:
        raise ValueError(f"Error: Helmholtz kernels need omega > 0, got {omega}")
    return GreenKind(dim=dim, omega=float(omega))


def _quad(f, a, b):
    return integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_EPSREL, limit=200)[0]


def cell_integral(gkind: GreenKind, h):
    """
    k_0 = integral of G over the h-cell centered at the origin.

    The cell is split into pyramids with apex at the origin, one per face,
    and each pyramid is swept radially as y = s * p with p on the face; the
    Jacobian s^(dim-1) * h/2 cancels the singularity of G at the apex.
    Face symmetry leaves 8 half-edges in 2D and 48 face triangles in 3D.
    """
    half = 0.5 * h

    def radial(rho, part):
        # integral over s in [0, 1] of G(s rho) s^(dim-1)
        def f(s):
            if s == 0.0:
                return 0.0
            g = green(gkind, s * rho) * s ** (gkind.dim - 1)
            return g.real if part == "re" else g.imag
        return _quad(f, 0.0, 1.0)

    def integral(part):
        if gkind.dim == 2:
            return 8 * half**2 * _quad(lambda a: radial(half * np.hypot(a, 1.0), part), 0.0, 1.0)

        def inner(a):
            return _quad(lambda b: radial(half * np.sqrt(a * a + b * b + 1.0), part), 0.0, a)
        return 48 * half**3 * _quad(inner, 0.0, 1.0)

    re = integral("re")
    im = 0.0 if gkind.is_laplace else integral("im")
    return complex(re, im)


def kernel_table(gkind: GreenKind, h, extent, k0):
    """k_t = G(h|t|) h^dim for all offsets |t_k| <= extent, with k_0 at the center."""
    axis = np.arange(-extent, extent + 1)
    mesh = np.meshgrid(*([axis] * gkind.dim), indexing="ij")
    r = h * np.sqrt(sum(m.astype(float) ** 2 for m in mesh))
    center = (extent,) * gkind.dim
    r[center] = 1.0  # placeholder, overwritten below
    table = green(gkind, r.ravel()).reshape(r.shape) * h**gkind.dim
    table[center] = k0
    return table


def quadrature_coeffs(grid, omega, kind="helmholtz"):
    """
    Build the quadrature weights of K on `grid` and the spectrum used by apply_K.

    Off-origin weights are the trapezoidal values G(ht) h^dim; the origin weight
    is the exact cell integral of G (one-point correction).
    """
    gkind = _check_kind(kind, grid.dim, omega)
    n, h = grid.n, grid.h

    k0 = cell_integral(gkind, h)
    table = kernel_table(gkind, h, n - 1, k0)

    wrap = np.arange(-(n - 1), n) % (2 * n)
    padded = np.zeros((2 * n,) * grid.dim, dtype=complex)
    padded[np.ix_(*([wrap] * grid.dim))] = table
    spectrum = sfft.fftn(padded)

    logger.info("quadrature weights: %dD %s n=%d h=%.4g k0=%.6g%+.6gi",
                grid.dim, kind, n, h, k0.real, k0.imag)
    return KernelCoeffs(dim=grid.dim, n=n, h=h, omega=float(gkind.omega), kind=kind,
                        green_kind=gkind, k0=k0, table=table, spectrum=spectrum, grid=grid)


def _check_field(coeffs, v):
    v = np.asarray(v)
    if v.ndim not in (1, 2) or v.shape[0] != coeffs.grid.size:
        raise SizeMismatchError(
            f"Error: field has shape {v.shape}, expected ({coeffs.grid.size},) or "
            f"({coeffs.grid.size}, r)")
    return v


def apply_K(coeffs, v):
    """
    (Kv)_i = sum over members j of k_{i-j} v_j, by aperiodic convolution on the
    2n-periodic lattice. Accepts a single field (N,) or a block of columns (N, r).
    """
    v = _check_field(coeffs, v)
    grid, n, dim = coeffs.grid, coeffs.n, coeffs.dim

    padded = np.zeros((2 * n,) * dim + v.shape[1:], dtype=complex)
    padded[tuple(grid.coords.T)] = v
    axes = tuple(range(dim))
    spec = coeffs.spectrum if v.ndim == 1 else coeffs.spectrum[..., None]
    conv = sfft.ifftn(sfft.fftn(padded, axes=axes) * spec, axes=axes)
    return conv[tuple(grid.coords.T)]


def _row_offsets(coeffs, i):
    coords = coeffs.grid.coords
    return tuple((coords[i] - coords + coeffs.n - 1).T)


def apply_K_direct(coeffs, v):
    """Direct O(N^2) summation; validation oracle for apply_K."""
    v = _check_field(coeffs, v)
    N = coeffs.grid.size
    if N > DIRECT_LIMIT:
        raise SizeMismatchError(f"Error: direct summation is limited to N <= {DIRECT_LIMIT}, got {N}")

    out = np.empty(v.shape, dtype=complex)
    for i in range(N):
        out[i] = coeffs.table[_row_offsets(coeffs, i)] @ v
    return out


def dense_matrix(coeffs, limit=5000):
    """Explicit N x N matrix K(i, j) = k_{i-j}."""
    N = coeffs.grid.size
    if N > limit:
        raise SizeMismatchError(f"Error: dense assembly is limited to N <= {limit}, got {N}")
    K = np.empty((N, N), dtype=complex)
    for i in range(N):
        K[i] = coeffs.table[_row_offsets(coeffs, i)]
    return K


def forward(coeffs, medium, u):
    """(I + Kq) u."""
    u = _check_field(coeffs, u)
    if len(medium.q) != len(u):
        raise SizeMismatchError(f"Error: medium has {len(medium.q)} points, field has {len(u)}")
    q = medium.q if u.ndim == 1 else medium.q[:, None]
    return u + apply_K(coeffs, q * u)


def scattered_field_at(coeffs, medium, u, source, points, chunk=256):
    """
    Extend the computed field to arbitrary points x:

    Helmholtz: u(x) = -sum_j G(x - x_j) h^dim q_j (u_j + u_I(x_j))
    Laplace:   u(x) =  sum_j G(x - x_j) h^dim (f_j - q_j u_j)

    `source` is u_I on the member points (Helmholtz) or the source f (Laplace).
    A point that coincides with a lattice point uses k_0 for that term.
    """
    u = _check_field(coeffs, u)
    source = _check_field(coeffs, source)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != coeffs.dim:
        raise SizeMismatchError(f"Error: points must have {coeffs.dim} coordinates")

    if coeffs.kind == "laplace":
        density = source - medium.q * u
    else:
        density = -medium.q * (u + source)

    centers = coeffs.grid.points()
    vol = coeffs.h**coeffs.dim
    out = np.empty(len(points), dtype=complex)
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        r = np.linalg.norm(block[:, None, :] - centers[None, :, :], axis=2)
        hit = r < 1e-12 * coeffs.h
        weights = np.empty(r.shape, dtype=complex)
        weights[~hit] = green(coeffs.green_kind, r[~hit]) * vol
        weights[hit] = coeffs.k0
        out[start:start + chunk] = weights @ density
    return out
