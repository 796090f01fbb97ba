"""Command-line entry point: ``qlbm run`` and ``qlbm gates``."""

from __future__ import annotations

import argparse
import sys

from . import circuits, driver


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlbm",
        description="Quantum lattice Boltzmann lid-driven cavity on an exact statevector simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the cavity benchmark")
    driver.add_run_arguments(run)

    gates = sub.add_parser("gates", help="print the gate-count scaling table")
    gates.add_argument("--qubits", type=int, nargs="+", default=[13],
                       help="main-register sizes n to tabulate (default 13)")
    return parser


def _print_gates(qubits) -> None:
    header = ("n", "prep_cnot_bound", "diagonal_cnot", "propagation_mcx", "macros_gates",
              "boundary_gates_excl_diagonal")
    print("  ".join(f"{h:>16}" for h in header))
    for n in qubits:
        counts = circuits.gate_count_report(n).gate_counts
        print("  ".join(f"{v:>16}" for v in (n, *(counts[h] for h in header[1:]))))


def _summary(report: driver.ComparisonReport, cfg: driver.RunConfig) -> str:
    lines = [f"mode={cfg.mode} grid={cfg.sim.nx}x{cfg.sim.ny} steps={cfg.sim.steps} U={cfg.sim.U}"]
    for path, res in sorted(report.residual.items()):
        lines.append(f"{path:>9} residual  max|d omega|={res['omega']:.3e}  max|d psi|={res['psi']:.3e}")
    if report.per_step:
        lines.append(f"max L-inf relative error over all steps: {report.max_linf:.3e}")
    if cfg.out:
        lines.append(f"wrote {cfg.out}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gates":
        _print_gates(args.qubits)
        return 0
    try:
        cfg = driver.load_config(args)
    except ValueError as exc:
        parser.error(str(exc))
    report = driver.run_simulation(cfg)
    print(_summary(report, cfg))
    if cfg.compare and not report.passed:
        print(f"comparison failed: {report.max_linf:.3e} > {driver.COMPARE_THRESHOLD:g}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
