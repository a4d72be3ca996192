# ls_sparsify/media.py
"""
Perturbation fields q on the grid (q = omega^2 m for Helmholtz, q = V for
Laplace), the incident plane wave, point sources and right-hand sides.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ls_sparsify.grid import layer_depth
from ls_sparsify.kernel_op import SizeMismatchError, apply_K

logger = logging.getLogger(__name__)

HELMHOLTZ_MEDIA = ("gaussian-bump", "square-cavity", "cube-cavity", "l2ball-cavity", "l1ball-cavity")
LAPLACE_MEDIA = ("laplace-gaussian", "laplace-ball")
MEDIA = HELMHOLTZ_MEDIA + LAPLACE_MEDIA

DEFAULTS = {
    "depth": 1.0 / 3.0,
    "sigma": 0.12,
    "outer": 0.3,
    "wall": 0.1,
    "smoothing": 3.0,
    "smoothing_length": 0.0,
    "eta": 1.1,
}

# the buffer taper ramps from 0 to 1 over this many layers past buffer_b
TAPER_LAYERS = 2


class MediumSpecError(ValueError):
    """Unknown medium name or medium parameters out of range."""


@dataclass(frozen=True, eq=False)
class Medium:
    name: str
    kind: str
    omega: float
    buffer_b: int
    q: np.ndarray = field(repr=False)  # omega^2 m (helmholtz) or V (laplace), member points
    # helmholtz only: tapered velocity c and contrast m = 1 - c^-2
    velocity: np.ndarray | None = field(default=None, repr=False)
    m: np.ndarray | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.q)

    @property
    def is_zero(self):
        return not np.any(self.q)

    @property
    def max_abs_q(self):
        return float(np.max(np.abs(self.q))) if self.size else 0.0


def smoothstep(t):
    """Quintic smoothstep t^3 (10 - 15 t + 6 t^2), clamped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def buffer_taper(grid, buffer_b):
    """0 on the buffer_b outermost layers, smooth ramp to 1 over the next layers."""
    depth = layer_depth(grid)
    return smoothstep((depth - buffer_b) / TAPER_LAYERS)


def _centered(grid):
    return grid.points() - 0.5


def _body_norm(x, body):
    if body == "square":
        return np.max(np.abs(x), axis=1)
    if body == "l2ball":
        return np.linalg.norm(x, axis=1)
    return np.sum(np.abs(x), axis=1)


def _smoothing_width(grid, p):
    """Transition width in domain units: smoothing_length if set, else smoothing grid points."""
    return p["smoothing_length"] if p["smoothing_length"] > 0 else p["smoothing"] * grid.h


def _cavity_indicator(grid, body, outer, wall, width):
    """Smoothed indicator of the wall between two concentric copies of `body`."""
    rho = _body_norm(_centered(grid), body)
    inner = outer - wall
    return smoothstep((outer - rho) / width) * smoothstep((rho - inner) / width)


def _gaussian(grid, sigma):
    r2 = np.sum(_centered(grid) ** 2, axis=1)
    return np.exp(-r2 / (2.0 * sigma * sigma))


def _smoothed_ball(grid, outer, width):
    rho = np.linalg.norm(_centered(grid), axis=1)
    return smoothstep((outer - rho) / width)


def _resolve_params(params):
    unknown = set(params) - set(DEFAULTS)
    if unknown:
        raise MediumSpecError(f"Error: unknown medium parameters {sorted(unknown)}")
    p = dict(DEFAULTS)
    p.update({k: float(v) for k, v in params.items()})

    if not 0.0 <= p["depth"] <= 1.0 / 3.0 + 1e-12:
        raise MediumSpecError(f"Error: depth must be in [0, 1/3], got {p['depth']}")
    if p["sigma"] <= 0:
        raise MediumSpecError(f"Error: sigma must be > 0, got {p['sigma']}")
    if not 0 < p["wall"] < p["outer"] <= 0.5:
        raise MediumSpecError(
            f"Error: need 0 < wall < outer <= 1/2, got wall={p['wall']} outer={p['outer']}")
    if p["smoothing"] < 1:
        raise MediumSpecError(f"Error: smoothing must be >= 1 point, got {p['smoothing']}")
    if p["smoothing_length"] < 0:
        raise MediumSpecError(f"Error: smoothing_length must be >= 0, got {p['smoothing_length']}")
    if p["eta"] < 0:
        raise MediumSpecError(f"Error: eta must be >= 0, got {p['eta']}")
    return p


def _check_name(name, dim):
    if name not in MEDIA:
        raise MediumSpecError(f"Error: unknown medium '{name}', expected one of {MEDIA}")
    if name == "square-cavity" and dim != 2:
        raise MediumSpecError("Error: square-cavity is a 2D medium, use cube-cavity in 3D")
    if name == "cube-cavity" and dim != 3:
        raise MediumSpecError("Error: cube-cavity is a 3D medium, use square-cavity in 2D")
    if name in LAPLACE_MEDIA and dim != 3:
        raise MediumSpecError(f"Error: {name} is a 3D medium")


def _check_not_vanished(name, q, buffer_b):
    if not np.any(q):
        raise MediumSpecError(
            f"Error: medium {name} vanishes inside the buffer (buffer_b={buffer_b}); "
            "lower medium.buffer_b or move the profile inward")


def build_medium(grid, name, omega=None, buffer_b=6, **params):
    """
    Evaluate the named profile at the member points and build q.

    Helmholtz names give a velocity c in [1 - depth, 1], m = 1 - c^-2 tapered to
    zero near the domain boundary, and q = omega^2 m. Laplace names give
    V = -eta n^2 phi with phi the (tapered) gaussian or smoothed-ball profile.

    Args:
        grid: Grid the medium lives on
        name: one of MEDIA
        omega: angular frequency (Helmholtz names only)
        buffer_b: number of outer layers where q is exactly zero
        params: depth, sigma, outer, wall, smoothing, smoothing_length, eta

    Returns:
        Medium
    """
    _check_name(name, grid.dim)
    p = _resolve_params(params)
    if int(buffer_b) != buffer_b or buffer_b < 2:
        raise MediumSpecError(f"Error: buffer_b must be an integer >= 2, got {buffer_b}")
    buffer_b = int(buffer_b)
    taper = buffer_taper(grid, buffer_b)

    if name in LAPLACE_MEDIA:
        if name == "laplace-gaussian":
            phi = _gaussian(grid, p["sigma"])
        else:
            phi = _smoothed_ball(grid, p["outer"], _smoothing_width(grid, p))
        q = -p["eta"] * grid.n**2 * phi * taper
        if p["eta"] > 0 and np.any(phi):
            _check_not_vanished(name, q, buffer_b)
        logger.info("medium %s: n=%d max|V|=%.4g", name, grid.n, np.max(np.abs(q)))
        return Medium(name=name, kind="laplace", omega=0.0, buffer_b=buffer_b, q=q, params=p)

    if omega is None or not np.isfinite(omega) or omega <= 0:
        raise MediumSpecError(f"Error: {name} needs omega > 0, got {omega}")

    if name == "gaussian-bump":
        shape = _gaussian(grid, p["sigma"])
    else:
        body = {"square-cavity": "square", "cube-cavity": "square",
                "l2ball-cavity": "l2ball", "l1ball-cavity": "l1ball"}[name]
        shape = _cavity_indicator(grid, body, p["outer"], p["wall"], _smoothing_width(grid, p))

    velocity = 1.0 - p["depth"] * shape
    m = (1.0 - velocity**-2) * taper
    if p["depth"] > 0 and np.any(shape):
        _check_not_vanished(name, m, buffer_b)
    velocity = (1.0 - m) ** -0.5
    q = float(omega) ** 2 * m

    logger.info("medium %s: omega=%g c in [%.4f, %.4f] buffer_b=%d",
                name, omega, velocity.min(), velocity.max(), buffer_b)
    return Medium(name=name, kind="helmholtz", omega=float(omega), buffer_b=buffer_b,
                  q=q, velocity=velocity, m=m, params=p)


def incident_plane_wave(grid, omega, direction):
    """u_I(x_i) = exp(i omega d.x_i); a nonzero direction is normalized to unit length."""
    d = np.asarray(direction, dtype=float).ravel()
    if d.shape != (grid.dim,):
        raise SizeMismatchError(f"Error: direction must have {grid.dim} components, got {d.shape[0]}")
    norm = np.linalg.norm(d)
    if norm == 0 or not np.isfinite(norm):
        raise MediumSpecError("Error: incident direction must be a nonzero finite vector")
    d = d / norm
    return np.exp(1j * omega * (grid.points() @ d))


def laplace_source(grid, position=None):
    """
    Delta source: zero except 1/h^dim at the member point nearest to `position`,
    given as fractions of the unit box.
    """
    if position is None:
        position = (0.25, 0.75, 0.5)[: grid.dim]
    pos = np.asarray(position, dtype=float).ravel()
    if pos.shape != (grid.dim,):
        raise SizeMismatchError(f"Error: source position must have {grid.dim} components")
    if np.any(pos < 0) or np.any(pos > 1):
        raise MediumSpecError(f"Error: source position must lie in the unit box, got {tuple(pos)}")

    dist = np.linalg.norm(grid.points() - pos, axis=1)
    f = np.zeros(grid.size, dtype=complex)
    f[int(np.argmin(dist))] = 1.0 / grid.h**grid.dim
    return f


def build_rhs(medium, source, coeffs):
    """
    Right-hand side g of (I + Kq) u = g.

    Helmholtz: g = K(-q u_I) with `source` the incident field u_I.
    Laplace:   g = K f with `source` the source density f.
    """
    source = np.asarray(source)
    if len(source) != medium.size or coeffs.grid.size != medium.size:
        raise SizeMismatchError(
            f"Error: rhs pieces disagree in size: medium {medium.size}, source {len(source)}, "
            f"grid {coeffs.grid.size}")
    if medium.kind == "laplace":
        return apply_K(coeffs, source)
    return apply_K(coeffs, -medium.q * source)
