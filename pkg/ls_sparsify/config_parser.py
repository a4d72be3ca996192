# ls_sparsify/config_parser.py
"""
Run configuration: INI files, dotted `--section.key value` overrides, the
validated RunConfig, and the command lines understood by the session.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import shlex
from dataclasses import dataclass
from pathlib import Path

from ls_sparsify.grid import MIN_POINTS, SHAPES
from ls_sparsify.media import HELMHOLTZ_MEDIA, LAPLACE_MEDIA
from ls_sparsify.stencil import MODES

KINDS = ("helmholtz", "laplace")
ROUNDINGS = ("ceil", "floor")
# minimum points per wavelength in the slowest part of the medium
MIN_PPW = 4.0


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


# ============================================================================
# Value converters
# ============================================================================

def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _fraction(text):
    """Float that also accepts a/b, e.g. depth = 1/3."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _optional(convert):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none", "auto"):
            return None
        return convert(text)
    return parse


# section -> key -> (RunConfig field, converter)
SCHEMA = {
    "problem": {
        "kind": ("kind", str),
        "dim": ("dim", int),
        "omega": ("omega", _optional(float)),
        "direction": ("direction", _optional(_floats)),
        "eta": ("eta", float),
        "source": ("source", _optional(_floats)),
    },
    "grid": {
        "ppw": ("ppw", float),
        "n": ("n", _optional(int)),
        "rounding": ("rounding", str),
        "shape": ("shape", str),
        "radius": ("radius", float),
        "mask": ("mask", _optional(str)),
    },
    "medium": {
        "name": ("medium", _optional(str)),
        "depth": ("depth", _fraction),
        "sigma": ("sigma", float),
        "outer": ("outer", float),
        "wall": ("wall", float),
        "smoothing": ("smoothing", float),
        "smoothing_length": ("smoothing_length", float),
        "buffer_b": ("buffer_b", int),
    },
    "stencil": {
        "mode": ("stencil_mode", str),
        "r": ("r", _optional(int)),
        "seed": ("seed", int),
        "leaf_size": ("leaf_size", int),
    },
    "gmres": {
        "tol": ("tol", float),
        "maxit": ("maxit", int),
    },
    "output": {
        "dir": ("output_dir", str),
        "emit_fields": ("emit_fields", _bool),
        "emit_plots": ("emit_plots", _bool),
    },
    "bench": {
        "omegas": ("bench_omegas", _optional(_floats)),
        "ns": ("bench_ns", _optional(_ints)),
        "contrast": ("bench_contrast", _bool),
    },
}


@dataclass(frozen=True)
class RunConfig:
    kind: str = "helmholtz"
    dim: int = 2
    omega: float | None = 100.0
    direction: tuple | None = None
    eta: float = 1.1
    source: tuple | None = None

    ppw: float = 6.0
    n: int | None = None
    rounding: str = "ceil"
    shape: str = "rectangle"
    radius: float = 0.5
    mask: str | None = None

    medium: str | None = None
    depth: float = 1.0 / 3.0
    sigma: float = 0.12
    outer: float = 0.3
    wall: float = 0.1
    smoothing: float = 3.0
    smoothing_length: float = 0.0
    buffer_b: int = 6

    stencil_mode: str = "auto"
    r: int | None = None
    seed: int = 0
    leaf_size: int = 64

    tol: float = 1e-6
    maxit: int = 200

    output_dir: str = "output"
    emit_fields: bool = False
    emit_plots: bool = False

    bench_omegas: tuple | None = None
    bench_ns: tuple | None = None
    bench_contrast: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"Error: problem.kind must be one of {KINDS}, got '{self.kind}'")
        if self.dim not in (2, 3):
            raise ConfigError(f"Error: problem.dim must be 2 or 3, got {self.dim}")
        if self.kind == "laplace" and self.dim != 3:
            raise ConfigError("Error: the Laplace problem is 3D only")
        if self.shape not in SHAPES:
            raise ConfigError(f"Error: grid.shape must be one of {SHAPES}, got '{self.shape}'")
        if self.shape == "explicit-mask" and not self.mask:
            raise ConfigError("Error: grid.shape=explicit-mask needs grid.mask")
        if self.rounding not in ROUNDINGS:
            raise ConfigError(f"Error: grid.rounding must be one of {ROUNDINGS}")
        if self.stencil_mode not in MODES:
            raise ConfigError(f"Error: stencil.mode must be one of {MODES}")
        if self.stencil_mode == "deterministic-rect" and self.shape != "rectangle":
            raise ConfigError("Error: stencil.mode=deterministic-rect needs grid.shape=rectangle")
        if self.r is not None and self.r < 3**self.dim:
            raise ConfigError(f"Error: stencil.r must be >= {3**self.dim}, got {self.r}")
        if self.leaf_size < 1:
            raise ConfigError("Error: stencil.leaf_size must be >= 1")
        if not 0 < self.tol < 1:
            raise ConfigError(f"Error: gmres.tol must be in (0, 1), got {self.tol}")
        if self.maxit < 1:
            raise ConfigError("Error: gmres.maxit must be >= 1")
        if self.buffer_b < 2:
            raise ConfigError(f"Error: medium.buffer_b must be >= 2, got {self.buffer_b}")

        allowed = HELMHOLTZ_MEDIA if self.kind == "helmholtz" else LAPLACE_MEDIA
        if self.medium is not None and self.medium not in allowed:
            raise ConfigError(f"Error: medium.name for {self.kind} must be one of {allowed}")
        if self.direction is not None and len(self.direction) != self.dim:
            raise ConfigError(f"Error: problem.direction needs {self.dim} components")
        if self.source is not None and len(self.source) != self.dim:
            raise ConfigError(f"Error: problem.source needs {self.dim} components")

        if self.kind == "helmholtz":
            if self.omega is None or not self.omega > 0:
                raise ConfigError(f"Error: problem.omega must be > 0, got {self.omega}")
            if self.n is None and self.ppw <= 0:
                raise ConfigError("Error: grid.ppw must be > 0")
        elif self.n is None:
            raise ConfigError("Error: the Laplace problem needs an explicit grid.n")

        n = self.grid_n
        if n < MIN_POINTS:
            raise ConfigError(f"Error: grid.n must be >= {MIN_POINTS}, got {n}")
        if self.kind == "helmholtz" and self.slow_ppw < MIN_PPW - 1e-9:
            raise ConfigError(
                f"Error: only {self.slow_ppw:.2f} points per wavelength in the slowest medium "
                f"(need >= {MIN_PPW:g}); raise grid.ppw or grid.n")

    @property
    def grid_n(self):
        """Points per dimension: explicit n, else ppw points per free-space wavelength."""
        if self.n is not None:
            return int(self.n)
        raw = self.ppw * self.omega / (2.0 * math.pi)
        # guard against 96.00000000001 rounding up
        raw = round(raw, 9)
        return int(math.ceil(raw) if self.rounding == "ceil" else math.floor(raw))

    @property
    def slow_ppw(self):
        """
        Points per wavelength where the velocity is lowest (c = 1 - depth):
        the configured ppw, or the one implied by an explicit n.
        """
        if self.kind != "helmholtz":
            return math.inf
        ppw = self.ppw if self.n is None else 2.0 * math.pi * self.n / self.omega
        return ppw * (1.0 - self.depth)

    @property
    def medium_name(self):
        if self.medium:
            return self.medium
        if self.kind == "laplace":
            return "laplace-gaussian"
        return "gaussian-bump"

    @property
    def incident_direction(self):
        if self.direction is not None:
            return tuple(self.direction)
        return (0.0, -1.0) if self.dim == 2 else (0.0, 0.0, -1.0)

    @property
    def source_position(self):
        if self.source is not None:
            return tuple(self.source)
        return (0.25, 0.75, 0.5)[: self.dim]

    @property
    def sketch_r(self):
        return self.r if self.r is not None else 4 * 3**self.dim

    def medium_params(self):
        params = {"depth": self.depth, "sigma": self.sigma, "outer": self.outer,
                  "wall": self.wall, "smoothing": self.smoothing,
                  "smoothing_length": self.smoothing_length}
        if self.kind == "laplace":
            params["eta"] = self.eta
        return params

    def grid_params(self):
        if self.shape in ("l2ball", "l1ball"):
            return {"radius": self.radius}
        if self.shape == "explicit-mask":
            return {"mask_path": self.mask}
        return {}

    def replace(self, **changes):
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as e:
            raise ConfigError(f"Error: {e}")


# ============================================================================
# Parsing
# ============================================================================

def parse_config_file(path):
    """
    Read an INI run manifest into {section: {key: text}}.

    Unknown sections or keys are rejected so typos do not silently fall back
    to defaults.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Error: config file '{path}' does not exist")

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Error parsing config {path}: {e}")

    sections = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"Error parsing config {path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"Error parsing config {path}: unknown key {section}.{key}")
            sections.setdefault(section, {})[key] = value
    return sections


# flag spellings that map onto output keys
FLAG_ALIASES = {
    "--emit-fields": ("output", "emit_fields", "true"),
    "--emit-plots": ("output", "emit_plots", "true"),
}
VALUE_ALIASES = {
    "--output-dir": ("output", "dir"),
    "--config": None,
}


def parse_overrides(tokens):
    """
    Turn ['--grid.n', '32', '--emit-plots', ...] into
    ({section: {key: text}}, config_path or None).
    """
    overrides = {}
    config_path = None
    tokens = list(tokens)
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token in FLAG_ALIASES:
            section, key, value = FLAG_ALIASES[token]
            overrides.setdefault(section, {})[key] = value
            i += 1
            continue

        if not token.startswith("--"):
            raise ConfigError(f"Error parsing overrides: unexpected argument '{token}'")
        if "=" in token:
            token, value = token.split("=", 1)
            consumed = 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"Error parsing overrides: {token} needs a value")
            value = tokens[i + 1]
            consumed = 2

        if token == "--config":
            config_path = value
        elif token in VALUE_ALIASES:
            section, key = VALUE_ALIASES[token]
            overrides.setdefault(section, {})[key] = value
        else:
            dotted = token[2:]
            if "." not in dotted:
                raise ConfigError(f"Error parsing overrides: '{token}' is not --section.key")
            section, key = dotted.split(".", 1)
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"Error parsing overrides: unknown key {section}.{key}")
            overrides.setdefault(section, {})[key] = value
        i += consumed
    return overrides, config_path


def merge_sections(*layers):
    merged = {}
    for layer in layers:
        for section, values in (layer or {}).items():
            merged.setdefault(section, {}).update(values)
    return merged


def build_run_config(sections):
    """Convert {section: {key: text}} into a validated RunConfig."""
    kwargs = {}
    for section, values in sections.items():
        if section not in SCHEMA:
            raise ConfigError(f"Error: unknown section [{section}]")
        for key, text in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"Error: unknown key {section}.{key}")
            name, convert = SCHEMA[section][key]
            try:
                kwargs[name] = convert(text)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Error parsing {section}.{key}: {e}")
    return RunConfig(**kwargs)


def load_run_config(config_path=None, overrides=None):
    """Defaults, then the INI file, then dotted overrides."""
    file_sections = parse_config_file(config_path) if config_path else {}
    return build_run_config(merge_sections(file_sections, overrides))


COMMANDS = ("solve", "bench", "validate", "info")


def parse_command(command: str):
    """
    Parse a session command line:

        solve|bench|validate|info [--config path] [--section.key value ...]
        show reports
        show report <k>
        clear cache
    """
    try:
        tokens = shlex.split(command.strip().rstrip(";"))
    except ValueError as e:
        raise ConfigError(f"Error parsing command: {e}")
    if not tokens:
        raise ConfigError("Empty command")

    head = tokens[0].lower()
    if head == "show" and len(tokens) > 1 and tokens[1].lower() == "reports":
        return {"type": "SHOW_REPORTS"}
    if head == "show" and len(tokens) > 2 and tokens[1].lower() == "report":
        try:
            return {"type": "SHOW_REPORT", "index": int(tokens[2])}
        except ValueError:
            raise ConfigError(f"Error parsing command: '{tokens[2]}' is not a report number")
    if head == "clear" and len(tokens) > 1 and tokens[1].lower() == "cache":
        return {"type": "CLEAR_CACHE"}
    if head not in COMMANDS:
        raise ConfigError(f"Unknown command: {tokens[0]}")

    overrides, config_path = parse_overrides(tokens[1:])
    return {"type": head.upper(), "config": config_path, "overrides": overrides}
