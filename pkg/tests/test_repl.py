from repl import render
from ls_sparsify.report import SolveReport


def _report(**changes):
    base = dict(command="solve", kind="helmholtz", dim=2, omega=12.0, n=12, h=1 / 12,
                N=144, N_I=100, N_B=44, shape="rectangle", medium="gaussian-bump",
                stencil_mode="deterministic-rect", iterations=4, converged=True)
    base.update(changes)
    return SolveReport(**base)


def test_render_report():
    assert render(_report()).splitlines()[0] == "command=solve"


def test_render_bench_rows():
    text = render([_report(), _report(omega=16.0)])
    assert text.startswith("omega")
    assert "# row 1" in text


def test_render_passes_strings_through():
    assert render("✓ Dropped 0 cached setup(s).") == "✓ Dropped 0 cached setup(s)."
