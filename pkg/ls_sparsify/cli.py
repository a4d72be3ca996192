# ls_sparsify/cli.py
"""
ls-sparsify <solve|bench|validate|info> [--config path] [--section.key value ...]
            [--emit-fields] [--emit-plots] [--output-dir path] [--log-level LEVEL]

Exit codes: 0 converged, 2 not converged, 1 error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ls_sparsify import configure_logging
from ls_sparsify.config_parser import COMMANDS, load_run_config, merge_sections, parse_overrides
from ls_sparsify.report import format_bench, format_info, format_report
from ls_sparsify.runner import run_bench, run_info, run_solve, run_validate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ls-sparsify",
        description="Sparsifying-preconditioned GMRES for the Lippmann-Schwinger equation.",
        epilog="Any config key can be overridden as --section.key value, e.g. --grid.n 64.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="INI run manifest")
    parser.add_argument("--output-dir", help="directory for report.txt, fields and plots")
    parser.add_argument("--emit-fields", action="store_true", help="write u (and u + u_I) field files")
    parser.add_argument("--emit-plots", action="store_true", help="write PGM cross-section plots")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default) or ERROR")
    return parser


def _flag_overrides(args):
    out = {}
    if args.output_dir:
        out.setdefault("output", {})["dir"] = args.output_dir
    if args.emit_fields:
        out.setdefault("output", {})["emit_fields"] = "true"
    if args.emit_plots:
        out.setdefault("output", {})["emit_plots"] = "true"
    return out


def run(command, config):
    """(text, exit code) for one CLI command."""
    if command == "info":
        return format_info(run_info(config)), EXIT_OK
    if command == "solve":
        report = run_solve(config)
        return format_report(report), EXIT_OK if report.converged else EXIT_NOT_CONVERGED
    if command == "validate":
        report = run_validate(config)
        return format_report(report), EXIT_OK if report.converged else EXIT_NOT_CONVERGED

    reports = run_bench(config)
    if any(r.status.startswith("error") for r in reports):
        code = EXIT_ERROR
    elif all(r.converged for r in reports):
        code = EXIT_OK
    else:
        code = EXIT_NOT_CONVERGED
    return format_bench(reports), code


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    try:
        configure_logging(args.log_level)
        dotted, extra_config = parse_overrides(extra)
        config = load_run_config(args.config or extra_config, merge_sections(dotted, _flag_overrides(args)))
        text, code = run(args.command, config)
    except Exception as e:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {e}" if str(e).startswith("Error") else f"❌ Error: {e}", file=sys.stderr)
        return EXIT_ERROR

    print(text)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        print(f"❌ Error: could not write {out / 'report.txt'}: {e}", file=sys.stderr)
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
