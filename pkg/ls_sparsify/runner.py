# ls_sparsify/runner.py
"""
End-to-end runs: setup (grid, medium, weights, stencils, factorization),
preconditioned GMRES, the dense validation oracle, and benchmark sweeps.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ls_sparsify.config_parser import load_run_config
from ls_sparsify.field_io import emit_field, emit_plot
from ls_sparsify.grid import build_grid, classify
from ls_sparsify.kernel_op import dense_matrix, forward, quadrature_coeffs
from ls_sparsify.krylov import SolveOptions, gmres, preconditioned_op
from ls_sparsify.media import build_medium, build_rhs, incident_plane_wave, laplace_source
from ls_sparsify.report import SolveReport, format_info, format_report, format_table
from ls_sparsify.setup_cache import drop_setups, lookup_setup, setup_key, store_setup
from ls_sparsify.sparse_nd import assemble, factorize, nd_order
from ls_sparsify.stencil import build_stencils

logger = logging.getLogger(__name__)

DENSE_LIMIT = 5000
# unpreconditioned contrast runs stop here and report DNF
CONTRAST_MAXIT = 200
# the unpreconditioned residual may exceed the GMRES tolerance by this factor
TRUE_RESIDUAL_SLACK = 100.0


@dataclass(eq=False)
class Setup:
    key: str
    grid: object
    classification: object
    medium: object
    coeffs: object
    stencils: object
    P: object = field(repr=False)
    AB: object = field(repr=False)
    ordering: object = field(repr=False)
    fact: object = field(repr=False)
    precond: object = field(repr=False)
    setup_seconds: float = 0.0


def config_grid(config):
    return build_grid(config.dim, config.grid_n, config.shape, **config.grid_params())


def config_medium(config, grid):
    omega = config.omega if config.kind == "helmholtz" else None
    return build_medium(grid, config.medium_name, omega=omega, buffer_b=config.buffer_b,
                        **config.medium_params())


def build_setup(config):
    """Everything the preconditioner needs, timed as T_s."""
    start = time.perf_counter()
    omega = config.omega if config.kind == "helmholtz" else 0.0

    grid = config_grid(config)
    classification = classify(grid)
    medium = config_medium(config, grid)
    coeffs = quadrature_coeffs(grid, omega, config.kind)
    stencils = build_stencils(coeffs, medium, grid, classification, mode=config.stencil_mode,
                              r=config.sketch_r, seed=config.seed)
    P, AB = assemble(stencils, medium, grid, classification)
    ordering = nd_order(grid, classification, leaf_size=config.leaf_size)
    fact = factorize(P, ordering)
    precond = preconditioned_op(coeffs, medium, fact, AB)

    elapsed = time.perf_counter() - start
    logger.info("setup done in %.3fs: N=%d N_I=%d N_B=%d", elapsed, grid.size,
                classification.n_interior, classification.n_boundary)
    return Setup(key=setup_key(config), grid=grid, classification=classification,
                 medium=medium, coeffs=coeffs, stencils=stencils, P=P, AB=AB,
                 ordering=ordering, fact=fact, precond=precond, setup_seconds=elapsed)


def obtain_setup(config, session=None):
    """(setup, reused) from the session cache or freshly built."""
    key = setup_key(config)
    if session is not None:
        setup = lookup_setup(session, key)
        if setup is not None:
            return setup, True
    setup = build_setup(config)
    if session is not None:
        store_setup(session, key, setup)
    return setup, False


def source_field(config, grid):
    """Incident wave u_I (Helmholtz) or delta source f (Laplace)."""
    if config.kind == "laplace":
        return laplace_source(grid, config.source_position)
    return incident_plane_wave(grid, config.omega, config.incident_direction)


def relative_residual(setup, u, g):
    gnorm = np.linalg.norm(g)
    r = np.linalg.norm(g - forward(setup.coeffs, setup.medium, u))
    return float(r / gnorm) if gnorm > 0 else float(r)


def _base_report(config, setup, command, reused):
    return SolveReport(
        command=command, kind=config.kind, dim=config.dim,
        omega=float(config.omega) if config.kind == "helmholtz" else 0.0,
        n=setup.grid.n, h=setup.grid.h, N=setup.grid.size,
        N_I=setup.classification.n_interior, N_B=setup.classification.n_boundary,
        shape=config.shape, medium=config.medium_name, stencil_mode=setup.stencils.mode,
        max_abs_q=setup.medium.max_abs_q,
        setup_seconds=0.0 if reused else setup.setup_seconds,
        stencil_residuals=setup.stencils.residual_summary(),
        perturbations=len(setup.fact.perturbations),
        factor_nnz=setup.fact.factor_nnz, max_front=setup.fact.max_front,
        setup_reused=reused,
    )


def _solve(config, session, command, setup=None, reused=False):
    if setup is None:
        setup, reused = obtain_setup(config, session)
    source = source_field(config, setup.grid)
    g = build_rhs(setup.medium, source, setup.coeffs)

    precond = setup.precond
    precond.reset_timing()
    start = time.perf_counter()
    result = gmres(precond, precond.rhs(g), SolveOptions(tol=config.tol, maxit=config.maxit))
    solve_seconds = time.perf_counter() - start

    u = result.x
    report = _base_report(config, setup, command, reused)
    report.apply_seconds = precond.mean_apply_seconds
    report.iterations = result.iterations
    report.solve_seconds = solve_seconds
    report.converged = result.converged
    report.residual = result.residual
    report.residual_history = list(result.residual_history)
    report.true_residual = relative_residual(setup, u, g)
    report.true_residual_ok = report.true_residual <= TRUE_RESIDUAL_SLACK * config.tol
    report.status = "ok" if result.converged else "not converged"
    if not report.true_residual_ok:
        logger.warning("true residual %.3e exceeds %g * tol", report.true_residual, TRUE_RESIDUAL_SLACK)
    return report, setup, u, g, source


def _tag(config, setup):
    label = f"w{config.omega:g}" if config.kind == "helmholtz" else f"eta{config.eta:g}"
    return f"{config.kind}_{config.dim}d_{config.medium_name}_{label}_n{setup.grid.n}"


def emit_outputs(config, setup, u, source, report):
    """Field files and plots requested by the output options; paths go into the report."""
    if not (config.emit_fields or config.emit_plots):
        return
    out = Path(config.output_dir)
    tag = _tag(config, setup)
    grid = setup.grid
    laplace = config.kind == "laplace"

    if config.emit_fields:
        report.fields.append(str(emit_field(u, grid, out / f"u_{tag}.lsfld", config.kind)))
        if not laplace:
            report.fields.append(str(emit_field(u + source, grid, out / f"total_{tag}.lsfld", config.kind)))
            report.fields.append(str(emit_field(setup.medium.velocity, grid, out / f"c_{tag}.lsfld", config.kind)))
    if config.emit_plots:
        report.fields.append(str(emit_plot(u, grid, out / f"u_{tag}.pgm", log_scale=laplace)))
        if not laplace:
            report.fields.append(str(emit_plot(u + source, grid, out / f"total_{tag}.pgm")))


def run_solve(config, session=None):
    """Set up (or reuse), iterate and report; non-convergence is a report flag."""
    report, setup, u, g, source = _solve(config, session, "solve")
    emit_outputs(config, setup, u, source, report)
    return report


def run_validate(config, session=None):
    """Solve with GMRES and with dense LU on I + Kq, and compare."""
    N = config_grid(config).size
    if N > DENSE_LIMIT:
        raise ValueError(f"Error: validate is limited to N <= {DENSE_LIMIT}, got N={N}")

    report, setup, u, g, source = _solve(config, session, "validate")
    K = dense_matrix(setup.coeffs, limit=DENSE_LIMIT)
    A = K * setup.medium.q[None, :]
    A[np.diag_indices_from(A)] += 1.0
    u_dense = lu_solve(lu_factor(A, check_finite=False), g, check_finite=False)

    dnorm = np.linalg.norm(u_dense)
    diff = np.linalg.norm(u - u_dense)
    report.dense_difference = float(diff / dnorm) if dnorm > 0 else float(diff)
    gnorm = np.linalg.norm(g)
    dres = np.linalg.norm(g - A @ u_dense)
    report.dense_residual = float(dres / gnorm) if gnorm > 0 else float(dres)
    logger.info("validate: |u_gmres - u_dense| / |u_dense| = %.3e", report.dense_difference)
    emit_outputs(config, setup, u, source, report)
    return report


def _contrast(config, setup, g):
    """Unpreconditioned GMRES on the same system, for comparison."""
    result = gmres(lambda v: forward(setup.coeffs, setup.medium, v), g,
                   SolveOptions(tol=config.tol, maxit=CONTRAST_MAXIT))
    if result.converged:
        return str(result.iterations)
    return f"≥{CONTRAST_MAXIT} (DNF)"


def _error_report(config, exc):
    n = config.n or 0
    try:
        n = config.grid_n
    except Exception:
        pass
    return SolveReport(command="bench", kind=config.kind, dim=config.dim,
                       omega=float(config.omega or 0.0), n=n, h=1.0 / n if n else 0.0,
                       N=0, N_I=0, N_B=0, shape=config.shape, medium=config.medium_name,
                       stencil_mode=config.stencil_mode, status=f"error: {exc}")


def sweep_configs(config):
    """One config per bench.omegas entry (or bench.ns entry), else the config itself."""
    if config.bench_omegas:
        return [("omega", w) for w in config.bench_omegas]
    if config.bench_ns:
        return [("n", k) for k in config.bench_ns]
    return [(None, None)]


def run_bench(config, session=None):
    """One report per sweep point; failures are recorded in the row and the sweep goes on."""
    reports = []
    for name, value in sweep_configs(config):
        try:
            row_config = config if name is None else config.replace(**{name: value})
            report, setup, u, g, source = _solve(row_config, session, "bench")
            if row_config.bench_contrast:
                report.unpreconditioned = _contrast(row_config, setup, g)
            emit_outputs(row_config, setup, u, source, report)
        except Exception as e:
            logger.error("bench row %s=%s failed: %s", name, value, e)
            failed = config
            if name is not None:
                try:
                    failed = config.replace(**{name: value})
                except Exception:
                    pass
            report = _error_report(failed, e)
        reports.append(report)
        logger.info("bench row: omega=%g N=%d n_p=%d status=%s",
                    report.omega, report.N, report.iterations, report.status)
    return reports


def run_info(config):
    """Derived sizes for a config without building the preconditioner."""
    grid = config_grid(config)
    classification = classify(grid)
    mode = config.stencil_mode
    if mode == "auto":
        mode = "deterministic-rect" if grid.is_rectangle else "randomized"
    info = {
        "kind": config.kind,
        "dim": config.dim,
        "omega": config.omega if config.kind == "helmholtz" else 0.0,
        "n": grid.n,
        "h": grid.h,
        "N": grid.size,
        "N_I": classification.n_interior,
        "N_B": classification.n_boundary,
        "shape": config.shape,
        "medium": config.medium_name,
        "stencil_mode": mode,
        "sketch_r": config.sketch_r if mode == "randomized" else None,
        "setup_key": setup_key(config),
    }
    if config.kind == "helmholtz":
        info["wavelengths"] = config.omega / (2.0 * np.pi)
        info["slow_ppw"] = config.slow_ppw
    return info


def report_summary(reports):
    rows = []
    for k, r in enumerate(reports):
        rows.append({"#": str(k), "command": r.command, "kind": r.kind, "omega": f"{r.omega:g}",
                     "N": str(r.N), "n_p": str(r.iterations), "T_s": f"{r.setup_seconds:.2f}",
                     "status": r.status})
    return format_table(rows)


def execute_command(parsed, session):
    """Execute a parsed session command."""
    command_type = parsed["type"]

    if command_type == "SHOW_REPORTS":
        return report_summary(session.reports)

    elif command_type == "SHOW_REPORT":
        k = parsed["index"]
        if not 0 <= k < len(session.reports):
            return f"Error: no report #{k} ({len(session.reports)} stored)"
        return format_report(session.reports[k])

    elif command_type == "CLEAR_CACHE":
        return drop_setups(session)

    config = load_run_config(parsed.get("config"), parsed.get("overrides"))

    if command_type == "INFO":
        return format_info(run_info(config))

    elif command_type == "SOLVE":
        report = run_solve(config, session)
        session.reports.append(report)
        return report

    elif command_type == "VALIDATE":
        report = run_validate(config, session)
        session.reports.append(report)
        return report

    elif command_type == "BENCH":
        reports = run_bench(config, session)
        session.reports.extend(reports)
        return reports

    else:
        raise ValueError(f"Unknown command type: {command_type}")
