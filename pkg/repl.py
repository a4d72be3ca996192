# repl.py

from ls_sparsify import configure_logging
from ls_sparsify.report import SolveReport, format_bench, format_report
from ls_sparsify.session import Session


def print_welcome():
    """Print welcome banner"""
    print("=" * 60)
    print("  🌊 LIPPMANN-SCHWINGER SPARSIFYING SOLVER - REPL")
    print("=" * 60)
    print("  Sparsifying-preconditioned GMRES for (I + Kq) u = g")
    print("  Type 'help' for available commands")
    print("  Type 'exit' or 'quit' to leave")
    print("=" * 60)
    print()


def print_help():
    """Print available commands"""
    help_text = """
Available Commands:
-------------------

RUNS:
  info [--config path] [--section.key value ...]
    - Derived grid size n, h, N, N_I, N_B for a config, without solving
    - Example: info --problem.omega 200

  solve [--config path] [--section.key value ...]
    - Build (or reuse) the preconditioner and run GMRES
    - Example: solve --config configs/gaussian_bump_2d.ini --problem.omega 100

  validate [--config path] [--section.key value ...]
    - Compare against a dense LU solve (N <= 5000)
    - Example: validate --config configs/validate_bump_2d.ini

  bench [--config path] [--bench.omegas 100,200,400]
    - Sweep frequencies (or --bench.ns for grid sizes) and print a table

OVERRIDES:
  --problem.kind helmholtz|laplace     --problem.dim 2|3
  --problem.omega 100                  --problem.direction 0,-1
  --grid.ppw 6  --grid.n 64            --grid.shape rectangle|l2ball|l1ball|explicit-mask
  --medium.name gaussian-bump          --medium.buffer_b 6
  --stencil.mode auto|deterministic-rect|randomized
  --gmres.tol 1e-6 --gmres.maxit 200   --emit-fields --emit-plots --output-dir out

SESSION:
  show reports    - List the reports of this session
  show report <k> - Print report k as key=value lines
  clear cache     - Drop cached preconditioner setups

OTHER COMMANDS:
  help       - Show this help message
  exit/quit  - Exit the REPL
  clear      - Clear screen

Sample Workflow:
----------------
  1. info --config configs/gaussian_bump_2d.ini
  2. solve --config configs/gaussian_bump_2d.ini
  3. solve --config configs/gaussian_bump_2d.ini --problem.direction 1,0   (reuses the setup)
  4. show reports
"""
    print(help_text)


def render(result):
    """Turn a session result into printable text"""
    if isinstance(result, SolveReport):
        return format_report(result)
    if isinstance(result, list):
        return format_bench(result)
    return result


def main():
    configure_logging()
    print_welcome()

    session = Session()

    while True:
        try:
            # Read command
            command = input("LS> ").strip()

            # Skip empty commands
            if not command:
                continue

            # Handle special commands
            if command.lower() in ("exit", "quit", "exit()", "quit()"):
                print("\n👋 Goodbye!")
                break

            if command.lower() == "help":
                print_help()
                continue

            if command.lower() == "clear":
                import os
                os.system('clear' if os.name != 'nt' else 'cls')
                continue

            result = session.execute(command)

            if result:
                print(render(result))
                print()  # Empty line for readability

        except KeyboardInterrupt:
            print("\n\n👋 Interrupted. Goodbye!")
            break

        except Exception as e:
            message = str(e)
            print(f"❌ {message}" if message.startswith("Error") else f"❌ Error: {message}")
            print()


if __name__ == "__main__":
    main()
