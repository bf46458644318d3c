"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
converge (the report is still written).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import arrangements as arr
from .cone import ConeDecompositionError, decompose_all
from .experiments import (
    DataError,
    ExperimentConfig,
    _split_standardize,
    emit_plot_data,
    load_config,
    load_csv,
    make_1d_data,
    make_teacher_data,
    run,
    write_report,
)
from .kernels import ntk_matrix, save_kernel, save_kernel_csv
from .models import network_from_convex, network_to_text, relu_forward, relu_from_decomposition
from .solvers import group_lasso_fista, predict

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3

COMMAND_SOURCE = {
    "run-1d": "synthetic-1d",
    "run-teacher": "student-teacher",
    "run-csv": "csv",
}
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    p.add_argument("config", nargs="?", help="flat key = value config file")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="gated-mkl", description="Gated-ReLU multiple kernel learning experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, help_text in (
        ("run-1d", "1-D synthetic experiment with exact masks and NTK weights"),
        ("run-teacher", "student-teacher experiment with sampled masks"),
        ("run-csv", "binary classification on a CSV file"),
        ("decompose", "solve the group lasso and decompose it into a ReLU network"),
        ("weights", "masks, NTK weights and NTK kernel for a dataset"),
    ):
        _add_config_flags(sub.add_parser(name, help=help_text))
    return parser


def _config(args, source=None) -> ExperimentConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if getattr(args, f.name) is not None}
    return load_config(args.config, overrides, source)


def _dataset(cfg: ExperimentConfig):
    if cfg.source == "synthetic-1d":
        X, y = make_1d_data(cfg.n, cfg.seed)
        return X, y, arr.enumerate_1d(X)
    if cfg.source == "student-teacher":
        X, y = make_teacher_data(cfg.n, cfg.d, cfg.teacher_width, cfg.seed)
    else:
        if not cfg.csv:
            raise DataError("csv source needs a csv path")
        X, y = load_csv(cfg.csv, cfg.header)
        X, y, _, _, _ = _split_standardize(X, y, cfg)
    budget = cfg.masks or min(4 * X.shape[0] * X.shape[1], 2000)
    return X, y, arr.sample_arrangements(X, budget, cfg.max_draws, cfg.seed + 1)


def _write(out_dir, name, text):
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_experiment(cfg):
    report = run(cfg)
    write_report(report, cfg.out)
    from .plotting import render_all

    render_all(emit_plot_data(report, cfg.out), cfg.out)
    return report["converged"]


def cmd_decompose(cfg):
    X, y, masks = _dataset(cfg)
    lam = cfg.lambda_grid[0]
    W, rep = group_lasso_fista(X, masks, lam, y, tol=cfg.fista_tol, max_iter=cfg.fista_max_iter)
    decomp = decompose_all(X, masks, W)
    os.makedirs(cfg.out, exist_ok=True)
    converged = rep.converged and all(g.converged for g in decomp.groups)
    report = {
        "command": "decompose",
        "config": cfg.to_dict(),
        "lambda": lam,
        "masks": masks.p,
        "active_groups": int(np.count_nonzero(np.linalg.norm(W, axis=1))),
        "fista": rep.summary(),
        "feasible": decomp.feasible(),
        "max_equality_residual": float(decomp.eq_residuals.max(initial=0.0)),
        "max_cone_violation": float(decomp.cone_violations.max(initial=0.0)),
        "decomposition_objective": float(decomp.objectives.sum()),
        "converged": bool(converged),
    }
    _write(cfg.out, "gated_network.txt", network_to_text(network_from_convex(masks, W)))
    if decomp.feasible():
        relu = relu_from_decomposition(decomp)
        _write(cfg.out, "relu_network.txt", network_to_text(relu))
        report["train_max_abs_diff"] = float(np.abs(relu_forward(relu, X) - predict(X, masks, W)).max(initial=0.0))
    _write(cfg.out, "fista_log.csv", rep.to_log())
    write_report(report, cfg.out)
    return converged


def cmd_weights(cfg):
    X, _, masks = _dataset(cfg)
    if X.shape[1] == 2:
        exact_masks, exact = arr.exact_weights_2d(X)
        eta = arr.align_weights(exact_masks, exact, masks)
        method = "exact"
    else:
        eta = arr.estimate_ntk_weights(X, masks, cfg.mc_samples, cfg.seed + 2)
        method = "monte-carlo"
    os.makedirs(cfg.out, exist_ok=True)
    _write(cfg.out, "masks.txt", masks.to_text())
    lines = ["index,eta"] + [f"{i},{float(v)!r}" for i, v in enumerate(eta.eta)]
    _write(cfg.out, "weights.csv", "\n".join(lines) + "\n")
    H = ntk_matrix(X)
    save_kernel(os.path.join(cfg.out, "ntk.bin"), H)
    save_kernel_csv(os.path.join(cfg.out, "ntk.csv"), H)
    write_report({
        "command": "weights",
        "config": cfg.to_dict(),
        "masks": masks.p,
        "method": method,
        "weight_sum": float(eta.eta.sum()),
        "residual": float(eta.residual),
        "converged": True,
    }, cfg.out)
    return True


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args, COMMAND_SOURCE.get(args.command))
    except FileNotFoundError as exc:
        print(f"gated-mkl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, ValueError) as exc:
        print(f"gated-mkl: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command in COMMAND_SOURCE:
            ok = cmd_experiment(cfg)
        elif args.command == "decompose":
            ok = cmd_decompose(cfg)
        else:
            ok = cmd_weights(cfg)
    except (DataError, FileNotFoundError) as exc:
        print(f"gated-mkl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConeDecompositionError as exc:
        print(f"gated-mkl: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not ok:
        print("gated-mkl: a solver stopped before converging; see report.json", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
