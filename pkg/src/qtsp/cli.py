"""Command-line front end.

Subcommands: gen (write a linear instance), solve (one training run),
exact (brute-force optimum), diag (dense-matrix ground state at tiny N),
sweep (random hyperparameter search) and report (CSV convergence table).
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, encoding, harness, instance as inst
from .errors import QtspError
from .instance import Instance, linear_instance, load_instance, save_instance


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); the contract wants 1
        raise _UsageError(message)


def _env_seed() -> int:
    return int(os.environ.get("QTSP_SEED", "0"))


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cities", type=int, help="generate a linear instance with this many cities")
    p.add_argument("--instance", type=str, help="path to an instance JSON file")


def _resolve_instance(args) -> tuple[Instance, bool]:
    """Returns (instance, generated_linear)."""
    if (args.cities is None) == (args.instance is None):
        raise _UsageError("exactly one of --cities and --instance is required")
    if args.cities is not None:
        return linear_instance(args.cities), True
    return load_instance(args.instance), False


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtsp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qtsp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write a linear instance as JSON")
    p_gen.add_argument("--cities", type=int, required=True)
    p_gen.add_argument("--out", type=str, default="-", help="output path, '-' for stdout")

    p_solve = sub.add_parser("solve", help="run one variational Monte Carlo optimization")
    _add_instance_flags(p_solve)
    p_solve.add_argument("--rep", choices=("qubit", "qudit"), required=True)
    p_solve.add_argument("--net", choices=("rbm", "cnn"),
                         help="ansatz (defaults to the representation's native one)")
    p_solve.add_argument("--seed", type=int, default=None,
                         help="master seed (default: QTSP_SEED env var, else 0)")
    p_solve.add_argument("--steps", type=int, default=2000, help="maximum MC steps")
    p_solve.add_argument("--lr", type=float, default=None)
    p_solve.add_argument("--chains", type=int, default=None)
    p_solve.add_argument("--swaps", type=int, default=None)
    p_solve.add_argument("--max-swap-len", type=int, default=None)
    p_solve.add_argument("--sample-size", type=int, default=None)
    p_solve.add_argument("--hidden", type=int, default=None, help="hidden units (qubit)")
    p_solve.add_argument("--channels", type=int, default=None, help="channels (qudit)")
    p_solve.add_argument("--kernel", type=int, default=None, help="kernel size (qudit)")
    p_solve.add_argument("--target", type=str, default=None,
                         help="stop when this energy is reached; 'auto' derives it")
    p_solve.add_argument("--time-limit", type=float, default=600.0,
                         help="wall-clock prune in seconds")
    p_solve.add_argument("--no-improve-steps", type=int, default=300)
    p_solve.add_argument("--fix-first", action=argparse.BooleanOptionalAction, default=True,
                         help="pin city 1 to the first tour slot")
    p_solve.add_argument("--out", type=str, default=None, help="stream a JSONL run record here")

    p_exact = sub.add_parser("exact", help="brute-force optimum (N <= 12)")
    _add_instance_flags(p_exact)

    p_diag = sub.add_parser("diag", help="dense-matrix ground state (N <= 5)")
    _add_instance_flags(p_diag)
    p_diag.add_argument("--variant", choices=("eq2", "eq4"), default="eq2")
    p_diag.add_argument("--p", type=float, default=None,
                        help="penalty (default: 10 * N * max distance)")
    p_diag.add_argument("--csv", type=str, default=None, help="also dump the matrix as CSV")

    p_sweep = sub.add_parser("sweep", help="random hyperparameter search with pruning")
    _add_instance_flags(p_sweep)
    p_sweep.add_argument("--rep", choices=("qubit", "qudit"), required=True)
    p_sweep.add_argument("--trials", type=int, default=20)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--steps", type=int, default=400, help="maximum MC steps per trial")
    p_sweep.add_argument("--time-limit", type=float, default=600.0)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", type=str, default="-", help="summary JSON path, '-' for stdout")

    p_report = sub.add_parser("report", help="CSV convergence table from sweep summaries")
    p_report.add_argument("summaries", nargs="*", help="sweep summary JSON files")
    p_report.add_argument("--out", type=str, default="-", help="CSV path, '-' for stdout")

    return parser


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_gen(args) -> int:
    instance = linear_instance(args.cities)
    if args.out == "-":
        payload = {
            "n_cities": instance.n_cities,
            "coords": instance.coords.tolist(),
            "dist": instance.dist.tolist(),
        }
        print(json.dumps(payload, indent=2))
    else:
        save_instance(instance, args.out)
    return 0


def _cmd_exact(args) -> int:
    instance, _ = _resolve_instance(args)
    tour, length = inst.brute_force_optimum(instance)
    print("tour:", " ".join(str(c) for c in tour))
    print(f"length: {length}")
    return 0


def _cmd_diag(args) -> int:
    instance, _ = _resolve_instance(args)
    if args.p is None:
        pen = encoding.default_penalties(instance)
    else:
        pen = encoding.PenaltyConfig(p=args.p, p_prime=args.p)
    h = encoding.dense_hamiltonian(instance, args.variant, pen)
    eigenvalues, eigenvectors = np.linalg.eigh(h)
    labels = encoding.basis_labels(instance.n_cities)
    top = int(np.argmax(np.abs(eigenvectors[:, 0])))
    print(f"variant: {args.variant}")
    print(f"dimension: {h.shape[0]}")
    print(f"ground_energy: {eigenvalues[0]}")
    print(f"dominant_basis_state: {labels[top]}")
    if args.csv is not None:
        Path(args.csv).write_text(encoding.dense_to_csv(h, instance.n_cities))
    return 0


def _solve_config(args, instance: Instance) -> "harness.VmcConfig":
    n = instance.n_cities
    rep = args.rep
    net = args.net if args.net is not None else ("cnn" if rep == "qudit" else "rbm")
    if (rep, net) not in (("qudit", "cnn"), ("qubit", "rbm")):
        raise _UsageError(f"--net {net} does not match --rep {rep}")
    hyper = harness.midpoint_hyperparams(n, rep)
    overrides = {
        "n_chains": args.chains,
        "n_swaps": args.swaps,
        "max_swap_len": args.max_swap_len,
        "sample_size": args.sample_size,
        "learning_rate": args.lr,
        "n_hidden": args.hidden,
        "n_channels": args.channels,
        "kernel_size": args.kernel,
    }
    for key, value in overrides.items():
        if value is not None:
            hyper[key] = value
    seed = args.seed if args.seed is not None else _env_seed()
    return harness.make_vmc_config(
        n, rep, hyper,
        seed=seed, max_steps=args.steps, wall_clock_s=args.time_limit,
        fix_first=args.fix_first, prune_no_improve_steps=args.no_improve_steps,
    )


def _resolve_target(args, instance: Instance) -> float | None:
    if args.target is None:
        return None
    if args.target == "auto":
        target = harness.default_target(instance)
        if target is None:
            raise QtspError("cannot derive --target auto for this instance; pass a number")
        return target
    try:
        return float(args.target)
    except ValueError as exc:
        raise _UsageError(f"--target must be a number or 'auto', got {args.target!r}") from exc


def _cmd_solve(args) -> int:
    instance, _ = _resolve_instance(args)
    cfg = _solve_config(args, instance)
    target = _resolve_target(args, instance)
    seed = cfg.sampler.seed
    spec = harness.ExperimentSpec(instance=instance, vmc=cfg, seed=seed, target_energy=target)

    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            def sink(line: dict) -> None:
                fh.write(json.dumps(line) + "\n")
                fh.flush()
            record = harness.run_experiment(spec, sink=sink)
    else:
        record = harness.run_experiment(spec)

    print(f"reason: {record.termination_reason}")
    print(f"steps: {record.n_steps}")
    print(f"best_energy: {record.best_energy}")
    print("best_tour:", " ".join(str(c) for c in record.best_tour))
    print(f"converged: {str(record.converged).lower()}")
    print(f"time_s: {record.total_time_s:.3f}")
    return 0


def _cmd_sweep(args) -> int:
    instance, _ = _resolve_instance(args)
    seed = args.seed if args.seed is not None else _env_seed()
    summary = harness.sweep(
        instance, args.rep, None, args.trials, seed,
        max_steps=args.steps, wall_clock_s=args.time_limit, jobs=args.jobs,
    )
    if args.out == "-":
        from dataclasses import asdict
        print(json.dumps(asdict(summary), indent=2))
    else:
        harness.save_summary(summary, args.out)
        print(f"converged: {summary.percent_converged:.1f}% of {summary.n_trials} trials")
    return 0


def _cmd_report(args) -> int:
    summaries = [harness.load_summary(p) for p in args.summaries]
    _write_text(args.out, harness.report_convergence(summaries))
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "exact": _cmd_exact,
    "diag": _cmd_diag,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'qtsp --help' for usage", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if not exc.code else 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (QtspError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
