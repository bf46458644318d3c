"""End-to-end experiment drivers and their report/plot-data output."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import arrangements as arr
from .cone import decompose_all
from .kernels import krr_fit_predict, ntk_cross, ntk_matrix
from .models import (
    GatedReluNetwork,
    gated_forward,
    network_from_convex,
    relu_forward,
    relu_from_decomposition,
)
from .solvers import (
    group_lasso_fista,
    group_lasso_objective,
    irls,
    predict,
    weighted_ridge,
)

log = logging.getLogger(__name__)

SOURCES = ("synthetic-1d", "student-teacher", "csv")
UCI_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)


class DataError(ValueError):
    """Bad input data (exit code 2 on the command line)."""


@dataclass
class ExperimentConfig:
    source: str = "synthetic-1d"
    seed: int = 0
    lambda_grid: tuple = (0.01,)
    n: int = 5
    d: int = 5
    teacher_width: int = 10
    masks: int = 0
    max_draws: int = 200_000
    mc_samples: int = 1_000_000
    csv: str = ""
    header: bool = False
    bias: bool = True
    split: float = 0.75
    tol: float = 1e-8
    max_iter: int = 2000
    eps_start: float = 1e-3
    eps_end: float = 1e-8
    fista_tol: float = 1e-10
    fista_max_iter: int = 200_000
    grid_points: int = 201
    timing: bool = False  # wall-clock seconds in the report; off keeps reports byte-identical
    out: str = "out"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        self.lambda_grid = tuple(float(v) for v in self.lambda_grid)
        if not self.lambda_grid or any(v <= 0 for v in self.lambda_grid):
            raise ValueError("lambda grid must be nonempty and positive")
        if not 0 < self.split < 1:
            raise ValueError("split ratio must lie in (0, 1)")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda_grid"] = list(self.lambda_grid)
        out.pop("out")
        return out


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise KeyError(f"unknown config key {name!r}")
    kind = types[name]
    if name == "lambda_grid":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if kind == "bool":
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"{name} expects a boolean, got {raw!r}")
        return low in ("1", "true", "yes")
    if kind == "int":
        return int(float(raw))
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = _coerce(key, raw)
    return values


SOURCE_DEFAULTS = {
    "synthetic-1d": {"n": 5, "lambda_grid": (0.01,)},
    "student-teacher": {"n": 10, "d": 5, "lambda_grid": (0.01,)},
    # classification only needs the sign; a looser IRLS stop keeps the grid fast
    "csv": {"lambda_grid": UCI_GRID, "tol": 1e-6, "max_iter": 1000},
}


def load_config(path=None, overrides=None, source=None) -> ExperimentConfig:
    """Source defaults, then the config file, then overrides (strings are parsed)."""
    from_file = {}
    if path:
        with open(path) as fh:
            from_file = parse_config_text(fh.read())
    parsed = {k: (_coerce(k, v) if isinstance(v, str) else v) for k, v in (overrides or {}).items()}
    src = source or parsed.get("source") or from_file.get("source") or "synthetic-1d"
    values = dict(SOURCE_DEFAULTS.get(src, {}))
    values.update(from_file)
    values.update(parsed)
    values["source"] = src
    return ExperimentConfig(**values)


def _rel(a, b):
    return (a - b) / abs(b) if b != 0 else (0.0 if a == b else float("inf"))


def _fit_summary(report) -> dict:
    return {
        "objectives": [float(v) for v in report.objectives],
        "final_objective": float(report.final_objective),
        "iterations": report.iterations,
        "converged": bool(report.converged),
    }


def _solver_battery(X, y, masks, eta_tilde, lam, cfg: ExperimentConfig, rng):
    W_opt, fista_rep = group_lasso_fista(X, masks, lam, y, tol=cfg.fista_tol, max_iter=cfg.fista_max_iter)
    optimum = group_lasso_objective(X, masks, W_opt, lam, y)
    W_ntk = weighted_ridge(X, masks, eta_tilde, lam, y)
    ntk_obj = group_lasso_objective(X, masks, W_ntk, lam, y)
    irls_kw = dict(eps_start=cfg.eps_start, eps_end=cfg.eps_end, max_iter=cfg.max_iter, tol=cfg.tol)
    W_irls, _, rep_ntk = irls(X, masks, lam, y, eta_tilde, **irls_kw)
    eta_rand = rng.uniform(0.0, 1.0, masks.p)
    W_rand, _, rep_rand = irls(X, masks, lam, y, eta_rand, **irls_kw)
    run = {
        "lambda": lam,
        "group_lasso_optimum": optimum,
        "fista": {
            "iterations": fista_rep.iterations,
            "converged": bool(fista_rep.converged),
            "active_groups": int(np.count_nonzero(np.linalg.norm(W_opt, axis=1))),
        },
        "ntk_objective": ntk_obj,
        "ntk_relative_gap": _rel(ntk_obj, optimum),
        "irls_from_ntk": _fit_summary(rep_ntk),
        "irls_from_random": _fit_summary(rep_rand),
        "irls_from_ntk_relative_gap": _rel(rep_ntk.final_objective, optimum),
        "irls_from_random_relative_gap": _rel(rep_rand.final_objective, optimum),
    }
    converged = fista_rep.converged and rep_ntk.converged and rep_rand.converged
    log.info("lambda=%g optimum=%.6g ntk=%.6g irls=%.6g", lam, optimum, ntk_obj, rep_ntk.final_objective)
    return run, W_opt, W_irls, converged


def _decomposition_summary(X, masks, W):
    decomp = decompose_all(X, masks, W)
    relu = relu_from_decomposition(decomp)
    gated = predict(X, masks, W)
    return decomp, relu, {
        "feasible": decomp.feasible(),
        "max_equality_residual": float(decomp.eq_residuals.max(initial=0.0)),
        "max_cone_violation": float(decomp.cone_violations.max(initial=0.0)),
        "objective": float(decomp.objectives.sum()),
        "relu_width": relu.width,
        "train_max_abs_diff": float(np.abs(relu_forward(relu, X) - gated).max(initial=0.0)),
    }


def make_1d_data(n: int, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-1.0, 1.0, n))
    y = rng.standard_normal(n)
    return np.c_[x, np.ones(n)], y


def run_1d(cfg: ExperimentConfig) -> dict:
    """1-D data with a bias column: exact masks and exact NTK weights."""
    X, y = make_1d_data(cfg.n, cfg.seed)
    masks = arr.enumerate_1d(X)
    exact_masks, exact_eta = arr.exact_weights_2d(X)
    eta = arr.align_weights(exact_masks, exact_eta, masks)
    rng = np.random.default_rng(cfg.seed + 1)
    runs, converged = [], True
    samples = None
    lo, hi = X[:, 0].min(), X[:, 0].max()
    pad = 0.25 * (hi - lo) + 0.5
    grid = np.linspace(lo - pad, hi + pad, cfg.grid_points)
    G = np.c_[grid, np.ones_like(grid)]
    for lam in cfg.lambda_grid:
        run, W_opt, W_irls, ok = _solver_battery(X, y, masks, eta.eta, lam, cfg, rng)
        converged &= ok
        _, relu, summary = _decomposition_summary(X, masks, W_opt)
        run["decomposition"] = summary
        runs.append(run)
        if samples is None:
            _, ntk_grid = krr_fit_predict(ntk_matrix(X), lam, y, ntk_cross(G, X))
            samples = {
                "lambda": lam,
                "x": grid.tolist(),
                "group_lasso_relu": relu_forward(relu, G).tolist(),
                "ntk_krr": ntk_grid.tolist(),
                "irls": gated_forward(network_from_convex(masks, W_irls), G).tolist(),
            }
    return {
        "experiment": "synthetic-1d",
        "config": cfg.to_dict(),
        "data": {"x": X[:, 0].tolist(), "y": y.tolist()},
        "masks": masks.p,
        "ntk_weight_residual": eta.residual,
        "runs": runs,
        "function_samples": samples,
        "converged": bool(converged),
    }


def make_teacher_data(n: int, d: int, width: int, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    teacher = GatedReluNetwork(
        rng.standard_normal((width, d)).reshape(width, d),
        rng.standard_normal((width, d)).reshape(width, d),
        rng.standard_normal(width),
    )
    return X, gated_forward(teacher, X)


def run_student_teacher(cfg: ExperimentConfig) -> dict:
    """Gaussian inputs, gated-ReLU teacher targets, sampled masks, Monte-Carlo NTK weights."""
    X, y = make_teacher_data(cfg.n, cfg.d, cfg.teacher_width, cfg.seed)
    budget = cfg.masks or 4096
    masks = arr.sample_arrangements(X, budget, cfg.max_draws, cfg.seed + 1)
    eta = arr.estimate_ntk_weights(X, masks, cfg.mc_samples, cfg.seed + 2)
    rng = np.random.default_rng(cfg.seed + 3)
    runs, converged = [], True
    for lam in cfg.lambda_grid:
        run, _, _, ok = _solver_battery(X, y, masks, eta.eta, lam, cfg, rng)
        converged &= ok
        runs.append(run)
    return {
        "experiment": "student-teacher",
        "config": cfg.to_dict(),
        "masks": masks.p,
        "ntk_weight_residual": eta.residual,
        "runs": runs,
        "converged": bool(converged),
    }


def load_csv(path, header: bool = False):
    """Numeric features plus a final label column in {0, 1} or {-1, +1}."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, 1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for col, cell in enumerate(row, 1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {col}: non-numeric cell {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() < 2:
        raise DataError(f"{path}: rows must share a width of at least two columns")
    data = np.array(rows)
    X, labels = data[:, :-1], data[:, -1]
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    values = set(np.unique(labels).tolist())
    if values <= {0.0, 1.0}:
        y = np.where(labels > 0, 1.0, -1.0)
    elif values <= {-1.0, 1.0}:
        y = labels.copy()
    else:
        raise DataError(f"{path}: labels must be in {{0,1}} or {{-1,+1}}, got {sorted(values)}")
    return X, y


def _split_standardize(X, y, cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    n = len(y)
    perm = rng.permutation(n)
    n_train = int(round(cfg.split * n))
    if n_train < 1 or n_train >= n:
        raise DataError(f"split {cfg.split} leaves an empty training or test set for n = {n}")
    tr, te = perm[:n_train], perm[n_train:]
    if len(np.unique(y[tr])) < 2:
        raise DataError("training split contains a single class")
    mu = X[tr].mean(axis=0)
    sd = X[tr].std(axis=0)
    keep = sd > 0
    if not np.any(keep):
        raise DataError("all features are constant on the training split")
    Z = (X[:, keep] - mu[keep]) / sd[keep]
    if cfg.bias:
        Z = np.c_[Z, np.ones(n)]
    return Z[tr], y[tr], Z[te], y[te], int(np.count_nonzero(~keep))


def run_csv(cfg: ExperimentConfig) -> dict:
    """Binary classification by squared loss on +-1 labels: NTK KRR against IRLS gated ReLU."""
    if not cfg.csv:
        raise DataError("csv source needs a csv path")
    X, y = load_csv(cfg.csv, cfg.header)
    Xtr, ytr, Xte, yte, dropped = _split_standardize(X, y, cfg)
    n_tr, d = Xtr.shape
    budget = cfg.masks or min(4 * n_tr * d, 2000)
    masks = arr.sample_arrangements(Xtr, budget, cfg.max_draws, cfg.seed + 1)
    H = ntk_matrix(Xtr)
    H_te = ntk_cross(Xte, Xtr)
    grid_rows, converged = [], True
    for lam in cfg.lambda_grid:
        _, ntk_out = krr_fit_predict(H, lam, ytr, H_te)
        W, _, rep = irls(
            Xtr, masks, lam, ytr,
            eps_start=cfg.eps_start, eps_end=cfg.eps_end, max_iter=cfg.max_iter, tol=cfg.tol,
        )
        converged &= rep.converged
        conv_out = gated_forward(network_from_convex(masks, W), Xte)
        grid_rows.append({
            "lambda": lam,
            "ntk_accuracy": float(np.mean(np.where(ntk_out >= 0, 1.0, -1.0) == yte)),
            "convex_accuracy": float(np.mean(np.where(conv_out >= 0, 1.0, -1.0) == yte)),
            "irls_objective": float(rep.final_objective),
            "irls_iterations": rep.iterations,
            "irls_converged": bool(rep.converged),
        })
    return {
        "experiment": "csv",
        "config": cfg.to_dict(),
        "n_train": n_tr,
        "n_test": len(yte),
        "features": d,
        "dropped_constant_features": dropped,
        "masks": masks.p,
        "grid": grid_rows,
        "best": {
            "ntk": best_lambda(grid_rows, "ntk_accuracy"),
            "convex": best_lambda(grid_rows, "convex_accuracy"),
        },
        "converged": bool(converged),
    }


def best_lambda(rows, key) -> dict:
    """Highest accuracy; ties go to the larger lambda."""
    best = max(rows, key=lambda r: (r[key], r["lambda"]))
    return {"lambda": best["lambda"], "accuracy": best[key]}


RUNNERS = {"synthetic-1d": run_1d, "student-teacher": run_student_teacher, "csv": run_csv}


def run(cfg: ExperimentConfig) -> dict:
    start = time.perf_counter()
    report = RUNNERS[cfg.source](cfg)
    if cfg.timing:
        report["timing_seconds"] = time.perf_counter() - start
    return report


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        fh.write(dump_report(report))
    return path


OBJECTIVE_HEADER = ["method", "lambda", "iteration", "objective"]
FUNCTION_HEADER = ["x", "group_lasso_relu", "ntk_krr", "irls"]
ACCURACY_HEADER = ["lambda", "ntk_accuracy", "convex_accuracy"]


def _objective_rows(report):
    for run in report.get("runs", []):
        lam = run["lambda"]
        n_iter = max(run["irls_from_ntk"]["iterations"], run["irls_from_random"]["iterations"])
        for k in range(n_iter):
            yield ["group_lasso_optimum", lam, k, run["group_lasso_optimum"]]
        for k in range(n_iter):
            yield ["ntk_weighted", lam, k, run["ntk_objective"]]
        for method in ("irls_from_ntk", "irls_from_random"):
            for k, obj in enumerate(run[method]["objectives"]):
                yield [method, lam, k, obj]


def emit_plot_data(report: dict, out_dir) -> dict:
    """Sidecar CSVs: objective series, 1-D function samples, accuracy grid."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "objectives": os.path.join(out_dir, "objectives.csv"),
        "function_samples": os.path.join(out_dir, "function_samples.csv"),
        "accuracy": os.path.join(out_dir, "accuracy.csv"),
    }
    try:
        with open(paths["objectives"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(OBJECTIVE_HEADER)
            for row in _objective_rows(report):
                w.writerow([row[0]] + [repr(float(v)) if isinstance(v, float) else v for v in row[1:]])
        with open(paths["function_samples"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FUNCTION_HEADER)
            samples = report.get("function_samples")
            if samples:
                for vals in zip(*(samples[k] for k in FUNCTION_HEADER)):
                    w.writerow([repr(float(v)) for v in vals])
        with open(paths["accuracy"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ACCURACY_HEADER)
            for row in report.get("grid", []):
                w.writerow([repr(float(row[k])) for k in ACCURACY_HEADER])
    except OSError as exc:
        raise OSError(f"cannot write plot data under {out_dir}: {exc}") from exc
    return paths


def read_plot_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
