# ls_sparsify/field_io.py
"""
Binary field files and grayscale PGM cross-section plots.

Field file layout:
    b"LSFLD1\\n"
    b"<dim> <n> <helmholtz|laplace> <dense|masked>\\n"
    masked only: n^dim membership bytes (0/1), lexicographic
    N pairs of little-endian float64 (real, imag), member points in order
"""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"LSFLD1\n"
LAYOUTS = ("dense", "masked")
FIELD_KINDS = ("helmholtz", "laplace")


class FieldFormatError(ValueError):
    """A field file is truncated or does not follow the layout."""


class FieldFile(NamedTuple):
    values: np.ndarray
    dim: int
    n: int
    kind: str
    membership: np.ndarray


def write_field(path, values, grid, kind="helmholtz"):
    if kind not in FIELD_KINDS:
        raise FieldFormatError(f"Error: field kind must be one of {FIELD_KINDS}, got '{kind}'")
    values = np.asarray(values, dtype=complex)
    if values.shape != (grid.size,):
        raise FieldFormatError(f"Error: field has shape {values.shape}, grid has {grid.size} points")

    layout = "dense" if grid.membership.all() else "masked"
    parts = [FIELD_MAGIC, f"{grid.dim} {grid.n} {kind} {layout}\n".encode("ascii")]
    if layout == "masked":
        parts.append(grid.membership.astype(np.uint8).tobytes())
    pairs = np.empty((grid.size, 2), dtype="<f8")
    pairs[:, 0] = values.real
    pairs[:, 1] = values.imag
    parts.append(pairs.tobytes())

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(parts))
    logger.debug("wrote field %s (%d points, %s)", path, grid.size, layout)
    return path


def read_field(path):
    """
    Returns:
        FieldFile(values, dim, n, kind, membership)
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(FIELD_MAGIC):
        raise FieldFormatError(f"Error parsing field file {path}: bad magic")
    rest = raw[len(FIELD_MAGIC):]
    try:
        header, body = rest.split(b"\n", 1)
        dim, n, kind, layout = header.decode("ascii").split()
        dim, n = int(dim), int(n)
    except Exception as e:
        raise FieldFormatError(f"Error parsing field file {path}: {e}")
    if kind not in FIELD_KINDS:
        raise FieldFormatError(f"Error parsing field file {path}: unknown kind '{kind}'")
    if layout not in LAYOUTS:
        raise FieldFormatError(f"Error parsing field file {path}: unknown layout '{layout}'")

    if layout == "masked":
        count = n**dim
        if len(body) < count:
            raise FieldFormatError(f"Error parsing field file {path}: truncated membership bitmap")
        membership = np.frombuffer(body[:count], dtype=np.uint8).astype(bool).reshape((n,) * dim)
        body = body[count:]
    else:
        membership = np.ones((n,) * dim, dtype=bool)

    N = int(membership.sum())
    if len(body) != 16 * N:
        raise FieldFormatError(f"Error parsing field file {path}: expected {16 * N} value bytes, got {len(body)}")
    pairs = np.frombuffer(body, dtype="<f8").reshape(N, 2)
    return FieldFile(pairs[:, 0] + 1j * pairs[:, 1], dim, n, kind, membership)


def emit_field(field, grid, path, kind="helmholtz"):
    return write_field(path, field, grid, kind)


def middle_slice(grid):
    """0-based index of the x3 cross-section plotted for 3D fields (ceil(n/2) in 1-based terms)."""
    return math.ceil(grid.n / 2) - 1


def field_image(field, grid, log_scale=False):
    """
    8-bit image of a 2D field or the middle x3 cross-section of a 3D field.

    Linear scale maps the real part over [-M, M] with M = max |Re u|;
    log scale maps log10 |u| over its own range. Rows run from high x2 (top)
    to low x2; points outside the domain are black.
    """
    field = np.asarray(field, dtype=complex)
    lattice = grid.scatter(field, fill=np.nan + 0j)
    member = grid.membership
    if grid.dim == 3:
        k = middle_slice(grid)
        lattice = lattice[:, :, k]
        member = member[:, :, k]

    image = np.zeros(lattice.shape, dtype=np.uint8)
    if log_scale:
        with np.errstate(divide="ignore"):
            values = np.log10(np.abs(lattice))
        finite = member & np.isfinite(values)
        if finite.any():
            lo, hi = values[finite].min(), values[finite].max()
            span = hi - lo
            scaled = (values[finite] - lo) / span if span > 0 else np.full(finite.sum(), 0.5)
            image[finite] = np.round(scaled * 255).astype(np.uint8)
    else:
        values = lattice.real
        M = np.max(np.abs(values[member])) if member.any() else 0.0
        if M > 0:
            image[member] = np.round((values[member] + M) / (2 * M) * 255).astype(np.uint8)
        else:
            image[member] = 128

    # lattice is indexed [x1, x2]; images are [row, column] with row 0 at the top
    return image.T[::-1]


def emit_plot(field, grid, path, log_scale=False):
    """Write the cross-section image as a binary PGM (P5)."""
    image = field_image(field, grid, log_scale=log_scale)
    rows, cols = image.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes())
    logger.debug("wrote plot %s (%dx%d)", path, cols, rows)
    return path


def read_pgm(path):
    raw = Path(path).read_bytes()
    header = raw.split(b"\n", 3)
    if len(header) < 4 or header[0] != b"P5":
        raise FieldFormatError(f"Error parsing plot {path}: not a binary PGM")
    cols, rows = (int(v) for v in header[1].split())
    return np.frombuffer(header[3], dtype=np.uint8).reshape(rows, cols)
