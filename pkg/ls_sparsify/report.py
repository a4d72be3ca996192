# ls_sparsify/report.py
"""Solve reports, key=value blocks and aligned text tables."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass
class SolveReport:
    command: str
    kind: str
    dim: int
    omega: float
    n: int
    h: float
    N: int
    N_I: int
    N_B: int
    shape: str
    medium: str
    stencil_mode: str
    max_abs_q: float = 0.0
    setup_seconds: float = 0.0
    apply_seconds: float = 0.0
    iterations: int = 0
    solve_seconds: float = 0.0
    converged: bool = False
    residual: float = 0.0
    true_residual: float = 0.0
    true_residual_ok: bool = True
    residual_history: list = field(default_factory=list)
    stencil_residuals: dict = field(default_factory=dict)
    perturbations: int = 0
    factor_nnz: int = 0
    max_front: int = 0
    setup_reused: bool = False
    unpreconditioned: str | None = None
    dense_difference: float | None = None
    dense_residual: float | None = None
    fields: list = field(default_factory=list)
    status: str = "ok"

    def to_dict(self):
        return asdict(self)

    @property
    def ok(self):
        return self.converged and not self.status.startswith("error")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict):
        return ",".join(f"{k}:{_fmt(v)}" for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    if value is None:
        return "-"
    return str(value)


def format_report(report: SolveReport):
    """Machine-readable block, one key=value per line."""
    lines = []
    for key, value in report.to_dict().items():
        if key == "residual_history":
            value = [float(f"{v:.3e}") for v in value]
        lines.append(f"{key}={_fmt(value)}")
    return "\n".join(lines)


def sci(value):
    """Two-digit scientific notation as in the benchmark tables."""
    return f"{value:.1e}"


BENCH_COLUMNS = ["omega", "N", "T_s", "T_a", "n_p", "T_p", "unprec", "status"]


def bench_row(report: SolveReport):
    label = report.omega if report.kind == "helmholtz" else report.max_abs_q
    return {
        "omega": sci(label),
        "N": sci(report.N),
        "T_s": sci(report.setup_seconds),
        "T_a": sci(report.apply_seconds),
        "n_p": str(report.iterations),
        "T_p": sci(report.solve_seconds),
        "unprec": report.unpreconditioned or "-",
        "status": report.status,
    }


def format_table(rows, columns=None):
    """
    rows: list[dict]
    columns: list of keys, default the keys of the first row
    """
    if not rows:
        return "No rows found."

    headers = columns or list(rows[0].keys())
    widths = {h: max(len(h), *(len(str(row.get(h, ""))) for row in rows)) for h in headers}

    header_line = " | ".join(h.ljust(widths[h]) for h in headers)
    separator = "-" * len(header_line)
    row_lines = [" | ".join(str(row.get(h, "")).ljust(widths[h]) for h in headers) for row in rows]
    return "\n".join([header_line, separator] + row_lines + [f"\n{len(rows)} row(s)."])


def format_bench(reports):
    """Aligned table followed by one key=value block per row."""
    table = format_table([bench_row(r) for r in reports], BENCH_COLUMNS)
    blocks = [f"# row {k}\n{format_report(r)}" for k, r in enumerate(reports)]
    return "\n\n".join([table] + blocks)


def format_info(info: dict):
    width = max(len(k) for k in info)
    return "\n".join(f"{k.ljust(width)} = {_fmt(v)}" for k, v in info.items())
