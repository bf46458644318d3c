"""Figures rendered from the plot-data CSVs (headless Agg backend)."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import read_plot_csv  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_objectives(csv_path, png_path):
    series = defaultdict(lambda: ([], []))
    for row in read_plot_csv(csv_path):
        xs, ys = series[(row["method"], row["lambda"])]
        xs.append(int(row["iteration"]))
        ys.append(float(row["objective"]))
    if not series:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for (method, lam), (xs, ys) in sorted(series.items()):
        style = "--" if method in ("group_lasso_optimum", "ntk_weighted") else "-"
        ax.plot(xs, ys, style, label=f"{method} (lambda={float(lam):g})")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    return _save(fig, png_path)


def plot_function_samples(csv_path, png_path):
    rows = read_plot_csv(csv_path)
    if not rows:
        return None
    x = [float(r["x"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in ("group_lasso_relu", "ntk_krr", "irls"):
        ax.plot(x, [float(r[key]) for r in rows], label=key)
    ax.set_xlabel("x")
    ax.set_ylabel("prediction")
    ax.legend(fontsize=8)
    return _save(fig, png_path)


def plot_accuracy(csv_path, png_path):
    rows = read_plot_csv(csv_path)
    if not rows:
        return None
    lam = [float(r["lambda"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(lam, [float(r["ntk_accuracy"]) for r in rows], "o-", label="NTK")
    ax.semilogx(lam, [float(r["convex_accuracy"]) for r in rows], "s-", label="gated ReLU (IRLS)")
    ax.set_xlabel("lambda")
    ax.set_ylabel("test accuracy")
    ax.legend(fontsize=8)
    return _save(fig, png_path)


def render_all(paths: dict, out_dir) -> list:
    """Render whichever figures have data; returns the files written."""
    jobs = (
        (plot_objectives, paths["objectives"], "objectives.png"),
        (plot_function_samples, paths["function_samples"], "function_samples.png"),
        (plot_accuracy, paths["accuracy"], "accuracy.png"),
    )
    written = []
    for fn, src, name in jobs:
        out = fn(src, os.path.join(out_dir, name))
        if out:
            written.append(out)
    return written
