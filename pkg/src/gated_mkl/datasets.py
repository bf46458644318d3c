"""Small synthetic classification sets shipped with the package.

The bundled CSV files are exactly ``write_csv(generate(name))`` for the
names below, so they can be regenerated with ``python -m gated_mkl.datasets``.
"""

from __future__ import annotations

import os
from importlib import resources

import numpy as np

BUNDLED = ("blobs", "blobs_permuted", "xor", "circles", "moons")


def blobs(n=400, seed=0, gap=4.0):
    """Two Gaussian blobs far enough apart to be linearly separable with margin."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = rng.standard_normal((n, 2)) * 0.5
    X[:half, 0] -= gap / 2
    X[half:, 0] += gap / 2
    y = np.r_[np.zeros(half), np.ones(n - half)]
    return X, y


def xor(n=300, seed=0, noise=0.15):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    y = (np.sign(X[:, 0]) * np.sign(X[:, 1]) > 0).astype(float)
    return X + noise * rng.standard_normal((n, 2)), y


def circles(n=300, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n).astype(float)
    r = np.where(y > 0, 0.5, 1.0)
    th = rng.uniform(0, 2 * np.pi, n)
    X = np.c_[r * np.cos(th), r * np.sin(th)] + noise * rng.standard_normal((n, 2))
    return X, y


def moons(n=300, seed=0, noise=0.15):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n).astype(float)
    th = rng.uniform(0, np.pi, n)
    X = np.where(
        y[:, None] > 0,
        np.c_[1 - np.cos(th), 0.5 - np.sin(th)],
        np.c_[np.cos(th), np.sin(th)],
    )
    return X + noise * rng.standard_normal((n, 2)), y


def generate(name: str):
    if name == "blobs_permuted":
        X, y = blobs()
        return X, np.random.default_rng(1).permutation(y)
    makers = {"blobs": blobs, "xor": xor, "circles": circles, "moons": moons}
    if name not in makers:
        raise KeyError(f"unknown dataset {name!r}; choose from {BUNDLED}")
    return makers[name]()


def write_csv(path, X, y):
    with open(path, "w") as fh:
        for row, label in zip(X, y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def bundled_path(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"unknown dataset {name!r}; choose from {BUNDLED}")
    return str(resources.files("gated_mkl") / "data" / f"{name}.csv")


if __name__ == "__main__":
    out = os.path.join(os.path.dirname(__file__), "data")
    os.makedirs(out, exist_ok=True)
    for name in BUNDLED:
        write_csv(os.path.join(out, f"{name}.csv"), *generate(name))
