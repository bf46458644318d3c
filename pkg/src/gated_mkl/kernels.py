"""Masking kernels, the closed-form gated-ReLU NTK, and kernel ridge regression."""

from __future__ import annotations

import struct

import numpy as np
from scipy import linalg

from .arrangements import MaskSet, SimplexWeights, as_data_matrix

KERNEL_MAGIC = b"GMKK"


def spd_solve(A, b):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A`` by Cholesky.

    On factorisation failure the diagonal is jittered by
    ``1e-12 * trace / n``, growing tenfold up to ``1e-6 * trace / n``.
    """
    A = np.asarray(A, dtype=float)
    try:
        return linalg.cho_solve(linalg.cho_factor(A, lower=True), b)
    except linalg.LinAlgError:
        pass
    n = A.shape[0]
    scale = max(np.trace(A) / n, np.finfo(float).tiny)
    rel = 1e-12
    while rel <= 1e-6 * (1 + 1e-9):
        try:
            factor = linalg.cho_factor(A + rel * scale * np.eye(n), lower=True)
            return linalg.cho_solve(factor, b)
        except linalg.LinAlgError:
            rel *= 10
    raise linalg.LinAlgError("matrix is not positive definite even after jitter")


def check_kernel(K, name="kernel"):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square, got shape {K.shape}")
    scale = max(np.abs(K).max(initial=0.0), 1.0)
    if np.abs(K - K.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError(f"{name} is not symmetric")
    return K


def is_psd(K, rtol=1e-8) -> bool:
    K = np.asarray(K, dtype=float)
    norm = np.linalg.norm(K, 2)
    return bool(np.linalg.eigvalsh((K + K.T) / 2).min(initial=0.0) >= -rtol * max(norm, 1e-300))


def masking_kernel(X, D) -> np.ndarray:
    """``D X X^T D`` for a single mask ``D``."""
    X = as_data_matrix(X)
    D = np.asarray(D, dtype=bool)
    if D.shape != (X.shape[0],):
        raise ValueError(f"mask has length {D.shape}, expected {X.shape[0]}")
    Z = X * D[:, None]
    return Z @ Z.T


def weighted_kernel(X, masks: MaskSet, eta) -> np.ndarray:
    """``sum_i eta_i D_i X X^T D_i``, assembled as ``X X^T`` times the mask co-activation matrix."""
    X = as_data_matrix(X)
    eta = eta.eta if isinstance(eta, SimplexWeights) else np.asarray(eta, dtype=float)
    if eta.shape != (masks.p,):
        raise ValueError(f"need {masks.p} weights, got shape {eta.shape}")
    if np.any(eta < 0):
        raise ValueError("kernel weights must be nonnegative")
    if masks.n != X.shape[0]:
        raise ValueError("mask length does not match the number of rows")
    M = masks.masks.astype(float)
    coact = (M * eta[:, None]).T @ M
    return (X @ X.T) * coact


def _angle(a_hat, b_hat):
    # 2 atan2(|a - b|, |a + b|) stays accurate near 0 and pi, unlike arccos of the cosine
    return 2 * np.arctan2(np.linalg.norm(a_hat - b_hat, axis=-1), np.linalg.norm(a_hat + b_hat, axis=-1))


def ntk_value(x, xp) -> float:
    """Infinite-width NTK of the gated ReLU network between two inputs."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    nx, nxp = np.linalg.norm(x), np.linalg.norm(xp)
    if nx == 0 or nxp == 0:
        return 0.0
    return float((np.pi - _angle(x / nx, xp / nxp)) * (x @ xp) / (2 * np.pi))


def ntk_cross(A, B, chunk: int = 256) -> np.ndarray:
    """NTK between every row of ``A`` and every row of ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("inputs disagree on the number of features")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    Ah = A / np.where(na > 0, na, 1.0)[:, None]
    Bh = B / np.where(nb > 0, nb, 1.0)[:, None]
    theta = np.empty((len(A), len(B)))
    for s in range(0, len(A), chunk):
        theta[s : s + chunk] = _angle(Ah[s : s + chunk, None, :], Bh[None, :, :])
    H = (np.pi - theta) * (A @ B.T) / (2 * np.pi)
    H[(na == 0)[:, None] | (nb == 0)[None, :]] = 0.0
    return H


def ntk_matrix(X) -> np.ndarray:
    X = as_data_matrix(X)
    H = ntk_cross(X, X)
    return (H + H.T) / 2


def finite_width_ntk(X, width: int, variant: str = "gated", seed=0, chunk: int = 20_000) -> np.ndarray:
    """Random finite-width NTK of the ``1/sqrt(2m)``-scaled network at initialisation.

    ``variant="gated"`` draws gates, first-layer weights and output scalars;
    ``variant="reparam"`` draws the positive and negative ReLU weight pairs.
    """
    X = as_data_matrix(X)
    if width < 1:
        raise ValueError("width must be >= 1")
    if variant not in ("gated", "reparam"):
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)
    n, d = X.shape
    G = X @ X.T
    acc_outer = np.zeros((n, n))
    acc_gram = np.zeros((n, n))
    done = 0
    while done < width:
        m = min(chunk, width - done)
        done += m
        if variant == "gated":
            gates = rng.standard_normal((m, d))
            w1 = rng.standard_normal((m, d))
            w2 = rng.standard_normal(m)
            A = (X @ gates.T >= 0).astype(float)
            P = A * (X @ w1.T)
            acc_outer += P @ P.T
            acc_gram += (A * w2**2) @ A.T
        else:
            wp = rng.standard_normal((m, d))
            wm = rng.standard_normal((m, d))
            Ap = (X @ wp.T >= 0).astype(float)
            Am = (X @ wm.T >= 0).astype(float)
            acc_gram += Ap @ Ap.T + Am @ Am.T
    return (acc_outer + G * acc_gram) / (2 * width)


def krr_fit_predict(K, lam: float, y, K_test=None):
    """Kernel ridge regression; returns ``(train_outputs, test_outputs)``."""
    K = check_kernel(K)
    if lam <= 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=float)
    alpha = spd_solve(K + lam * np.eye(K.shape[0]), y)
    train = K @ alpha
    test = None if K_test is None else np.asarray(K_test, dtype=float) @ alpha
    return train, test


def mkl_objective(masks: MaskSet, X, eta, lam_hat: float, y) -> float:
    """``y^T (K(eta) + lam_hat I)^{-1} y``."""
    if lam_hat <= 0:
        raise ValueError("lam_hat must be positive")
    K = weighted_kernel(X, masks, eta)
    y = np.asarray(y, dtype=float)
    return float(y @ spd_solve(K + lam_hat * np.eye(len(y)), y))


def kernel_to_bytes(K) -> bytes:
    K = np.ascontiguousarray(K, dtype="<f8")
    n = K.shape[0]
    return KERNEL_MAGIC + struct.pack("<Q", n) + K.tobytes()


def kernel_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != KERNEL_MAGIC:
        raise ValueError("not a kernel file")
    (n,) = struct.unpack("<Q", data[4:12])
    payload = data[12:]
    if len(payload) != 8 * n * n:
        raise ValueError(f"payload has {len(payload)} bytes, expected {8 * n * n}")
    return np.frombuffer(payload, dtype="<f8").reshape(n, n).copy()


def save_kernel(path, K):
    with open(path, "wb") as fh:
        fh.write(kernel_to_bytes(K))


def load_kernel(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return kernel_from_bytes(fh.read())


def save_kernel_csv(path, K):
    np.savetxt(path, np.asarray(K, dtype=float), delimiter=",", fmt="%.17g")
