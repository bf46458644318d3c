"""Solvers for the gated-ReLU group lasso and its weighted-ridge relaxation.

Constant convention (fixed everywhere in this package)::

    group lasso      loss_scale/2 * ||sum_i D_i X w_i - y||^2 + lam * sum_i ||w_i||
    weighted ridge          1/2 * ||sum_i D_i X w_i - y||^2 + lam/2 * sum_i ||w_i||^2 / eta_i
    squared lasso    loss_scale/2 * ||sum_i D_i X w_i - y||^2 + lam_hat/2 * (sum_i ||w_i||)^2

With these constants the ridge predictions at ``eta`` are exactly kernel
ridge regression with ``K(eta)`` and the same ``lam``, ``eta_i = ||w_i||``
is the exact reweighting step, and the two lasso forms share solutions when
``lam_hat = lam / sum_i ||w_i*||``.

Group weights are ``(p, d)`` arrays, one row per mask.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .arrangements import MaskSet, SimplexWeights, as_data_matrix
from .kernels import spd_solve

log = logging.getLogger(__name__)

_FREEZE = 1e-14
_GAP_FLOOR = 1e-6


@dataclass
class FitReport:
    objectives: list = field(default_factory=list)
    max_group_norms: list = field(default_factory=list)
    active_counts: list = field(default_factory=list)
    converged: bool = False
    group_norms: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.objectives)

    @property
    def final_objective(self) -> float:
        return self.objectives[-1] if self.objectives else float("nan")

    def record(self, obj: float, W: np.ndarray):
        norms = np.linalg.norm(W, axis=1)
        self.objectives.append(float(obj))
        self.max_group_norms.append(float(norms.max(initial=0.0)))
        self.active_counts.append(int(np.count_nonzero(norms)))

    def to_log(self) -> str:
        lines = ["iteration,objective,max_group_norm,active_groups"]
        for k, (o, g, a) in enumerate(zip(self.objectives, self.max_group_norms, self.active_counts)):
            lines.append(f"{k},{o!r},{g!r},{a}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_objective": self.final_objective,
            "converged": self.converged,
            "active_groups": self.active_counts[-1] if self.active_counts else 0,
        }


def _mask_matrix(X, masks: MaskSet) -> np.ndarray:
    if masks.n != X.shape[0]:
        raise ValueError(f"masks have length {masks.n}, data has {X.shape[0]} rows")
    return masks.masks.astype(float)


def _forward(X, M, W):
    return np.einsum("np,pn->n", X @ W.T, M)


def _adjoint(X, M, r):
    return (M * r) @ X


def predict(X, masks: MaskSet, W) -> np.ndarray:
    """Convex-model outputs ``sum_i D_i X w_i`` on the training rows."""
    X = as_data_matrix(X)
    return _forward(X, _mask_matrix(X, masks), np.asarray(W, dtype=float))


def group_lasso_objective(X, masks: MaskSet, W, lam: float, y, loss_scale: float = 1.0) -> float:
    X = as_data_matrix(X)
    W = np.asarray(W, dtype=float)
    r = _forward(X, _mask_matrix(X, masks), W) - np.asarray(y, dtype=float)
    return float(0.5 * loss_scale * (r @ r) + lam * np.linalg.norm(W, axis=1).sum())


def squared_group_lasso_objective(X, masks: MaskSet, W, lam_hat: float, y, loss_scale: float = 1.0) -> float:
    X = as_data_matrix(X)
    W = np.asarray(W, dtype=float)
    r = _forward(X, _mask_matrix(X, masks), W) - np.asarray(y, dtype=float)
    return float(0.5 * loss_scale * (r @ r) + 0.5 * lam_hat * np.linalg.norm(W, axis=1).sum() ** 2)


def weighted_ridge(X, masks: MaskSet, eta, lam: float, y, method: str = "auto") -> np.ndarray:
    """Minimiser of the per-group weighted ridge problem.

    Groups with ``eta_i = 0`` stay at zero. ``method`` is ``"kernel"``
    (an ``n x n`` solve), ``"primal"`` (a solve in the active coordinates)
    or ``"auto"``, which picks the smaller system.
    """
    X = as_data_matrix(X)
    M = _mask_matrix(X, masks)
    eta = eta.eta if isinstance(eta, SimplexWeights) else np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if eta.shape != (masks.p,) or np.any(eta < 0):
        raise ValueError("eta must be a nonnegative vector with one entry per mask")
    n, d = X.shape
    W = np.zeros((masks.p, d))
    active = np.flatnonzero(eta > 0)
    if active.size == 0:
        return W
    Ma, ea = M[active], eta[active]
    if method == "auto":
        method = "kernel" if n <= active.size * d else "primal"
    if method == "kernel":
        K = (X @ X.T) * ((Ma * ea[:, None]).T @ Ma)
        alpha = spd_solve(K + lam * np.eye(n), y)
        W[active] = ea[:, None] * _adjoint(X, Ma, alpha)
    elif method == "primal":
        # scaled variables v_i = w_i / sqrt(eta_i) keep the system well conditioned
        Z = (Ma[:, :, None] * X[None, :, :] * np.sqrt(ea)[:, None, None]).transpose(1, 0, 2).reshape(n, -1)
        v = spd_solve(Z.T @ Z + lam * np.eye(Z.shape[1]), Z.T @ y)
        W[active] = np.sqrt(ea)[:, None] * v.reshape(active.size, d)
    else:
        raise ValueError(f"unknown method {method!r}")
    return W


def irls(
    X,
    masks: MaskSet,
    lam: float,
    y,
    eta0=None,
    *,
    eps_start: float = 1e-3,
    eps_end: float = 1e-8,
    eps_decay: float = 0.5,
    max_iter: int = 500,
    tol: float = 1e-8,
    update: str = "norm",
    loss_scale: float = 1.0,
):
    """Iteratively reweighted least squares for the group lasso.

    Alternates a weighted ridge solve with the reweighting
    ``eta_i <- ||w_i|| + eps`` (``update="norm"``) or
    ``eta_i <- sqrt(||w_i|| + eps)`` (``update="sqrt"``). ``eps`` decays
    geometrically from ``eps_start`` to ``eps_end``. The recorded objective
    is the group-lasso objective of each ridge iterate. Stops once ``eps``
    sits at its floor and the relative objective change is below ``tol``.

    Returns ``(W, eta, report)``.
    """
    X = as_data_matrix(X)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if update not in ("norm", "sqrt"):
        raise ValueError(f"unknown update rule {update!r}")
    eff_lam = lam / loss_scale
    if eta0 is None:
        eta = np.ones(masks.p)
    else:
        eta = eta0.eta if isinstance(eta0, SimplexWeights) else np.asarray(eta0, dtype=float)
        eta = eta.copy()
    if eta.shape != (masks.p,) or np.any(eta < 0):
        raise ValueError("eta0 must be a nonnegative vector with one entry per mask")

    report = FitReport()
    frozen = np.zeros(masks.p, dtype=bool)
    prev = None
    W = np.zeros((masks.p, X.shape[1]))
    for k in range(max_iter):
        W = weighted_ridge(X, masks, np.where(frozen, 0.0, eta), eff_lam, y)
        obj = group_lasso_objective(X, masks, W, lam, y, loss_scale)
        report.record(obj, W)
        eps = max(eps_end, eps_start * eps_decay**k)
        norms = np.linalg.norm(W, axis=1)
        eta = norms + eps if update == "norm" else np.sqrt(norms + eps)
        frozen |= eta < _FREEZE
        eta[frozen] = 0.0
        if prev is not None and eps <= eps_end and abs(prev - obj) <= tol * max(abs(obj), 1e-300):
            report.converged = True
            break
        prev = obj
    report.group_norms = np.linalg.norm(W, axis=1)
    if not report.converged:
        log.info("IRLS stopped at max_iter=%d without meeting tol=%g", max_iter, tol)
    return W, eta, report


def _power_lmax(X, M, iters: int = 30, rtol: float = 1e-6) -> float:
    # largest eigenvalue of the lifted Gram matrix sum_i D_i X X^T D_i
    C = (X @ X.T) * (M.T @ M)
    v = np.ones(C.shape[0]) / np.sqrt(C.shape[0])
    lam = 0.0
    for _ in range(iters):
        u = C @ v
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        new = float(v @ u)
        v = u / nu
        if abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    # Rayleigh quotients underestimate; the norm of C v bounds from the other side
    return max(lam, float(np.linalg.norm(C @ v)))


def lipschitz_constant(X, masks: MaskSet, loss_scale: float = 1.0) -> float:
    X = as_data_matrix(X)
    return 1.05 * loss_scale * _power_lmax(X, _mask_matrix(X, masks))


def dual_gap(X, masks: MaskSet, W, lam: float, y, loss_scale: float = 1.0) -> tuple[float, float]:
    """``(primal, dual)`` values; the dual point is the scaled residual made feasible.

    Dual problem: ``max z^T y - ||z||^2 / (2 s)`` subject to
    ``||(D_i X)^T z|| <= lam`` for every group.
    """
    X = as_data_matrix(X)
    M = _mask_matrix(X, masks)
    y = np.asarray(y, dtype=float)
    r = y - _forward(X, M, W)
    primal = 0.5 * loss_scale * (r @ r) + lam * np.linalg.norm(W, axis=1).sum()
    z = loss_scale * r
    c = np.linalg.norm(_adjoint(X, M, z), axis=1).max(initial=0.0)
    if c > lam:
        z = z * (lam / c)
    dual = z @ y - (z @ z) / (2 * loss_scale)
    return float(primal), float(dual)


def lambda_max(X, masks: MaskSet, y, loss_scale: float = 1.0) -> float:
    """Smallest ``lam`` for which the group-lasso solution is zero."""
    X = as_data_matrix(X)
    g = _adjoint(X, _mask_matrix(X, masks), np.asarray(y, dtype=float))
    return float(loss_scale * np.linalg.norm(g, axis=1).max(initial=0.0))


def _group_shrink(V, thresh):
    norms = np.linalg.norm(V, axis=1)
    scale = np.where(norms > thresh, 1 - thresh / np.where(norms > 0, norms, 1.0), 0.0)
    return V * scale[:, None]


def _squared_l1_threshold(a, c):
    """Threshold of the prox of ``c/2 (sum_i a_i)^2`` over nonnegative ``a``."""
    s = np.sort(a)[::-1]
    csum = np.cumsum(s)
    k = np.arange(1, len(s) + 1)
    tau = c * csum / (1 + c * k)
    ok = np.flatnonzero(s > tau)
    return float(tau[ok[-1]]) if ok.size else 0.0


def _fista(X, masks, y, loss_scale, prox, objective, gap, max_iter, tol, W0, check_every=10, stall=500):
    M = _mask_matrix(X, masks)
    y = np.asarray(y, dtype=float)
    L = lipschitz_constant(X, masks, loss_scale)
    W = np.zeros((masks.p, X.shape[1])) if W0 is None else np.array(W0, dtype=float)
    report = FitReport()
    if L == 0:
        report.record(objective(W), W)
        report.converged = True
        report.group_norms = np.linalg.norm(W, axis=1)
        return W, report
    step = 1.0 / L
    Z = W.copy()
    t = 1.0
    F = objective(W)
    for k in range(max_iter):
        grad = loss_scale * _adjoint(X, M, _forward(X, M, Z) - y)
        W_new = prox(Z - step * grad, step)
        F_new = objective(W_new)
        if F_new > F:
            # monotone restart: drop momentum and retry from the last accepted point
            t = 1.0
            Z = W.copy()
            report.record(F, W)
        else:
            t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
            Z = W_new + ((t - 1) / t_new) * (W_new - W)
            W, F, t = W_new, F_new, t_new
            report.record(F, W)
        if k % check_every == 0 or k == max_iter - 1:
            primal, dual = gap(W)
            rel = (primal - dual) / max(abs(primal), 1e-300)
            if rel <= tol:
                report.converged = True
                break
            # a residual-based dual point lags the primal by ~sqrt(eps), so
            # a stalled objective with a small gap also counts as converged
            if k >= stall and report.objectives[-stall] - F <= 4e-16 * abs(F):
                report.converged = rel <= _GAP_FLOOR
                break
    report.group_norms = np.linalg.norm(W, axis=1)
    return W, report


def _newton_polish(X, masks, W, lam, y, loss_scale, max_vars=1500, iters=30):
    """Damped Newton on the groups that are nonzero in ``W``.

    Near the optimum the objective is smooth on the active groups, so a few
    Newton steps take the residual to machine precision; first-order
    iterates stall a few digits short of that, which is what limits the
    duality-gap certificate for small ``lam``.
    """
    norms = np.linalg.norm(W, axis=1)
    active = np.flatnonzero(norms > 1e-9 * norms.max(initial=0.0))
    d = X.shape[1]
    if active.size == 0 or active.size * d > max_vars:
        return W
    M = masks.masks[active].astype(float)
    A = (M[:, :, None] * X[None, :, :]).transpose(1, 0, 2).reshape(X.shape[0], -1)
    y = np.asarray(y, dtype=float)
    AtA = A.T @ A
    k = active.size

    def obj(w):
        r = A @ w - y
        return 0.5 * loss_scale * (r @ r) + lam * np.linalg.norm(w.reshape(k, d), axis=1).sum()

    w = W[active].ravel().copy()
    F = obj(w)
    for _ in range(iters):
        blocks = w.reshape(k, d)
        bn = np.linalg.norm(blocks, axis=1)
        if np.any(bn <= 1e-14 * bn.max()):
            break
        unit = blocks / bn[:, None]
        grad = loss_scale * A.T @ (A @ w - y) + lam * unit.ravel()
        H = loss_scale * AtA
        for j in range(k):
            sl = slice(j * d, (j + 1) * d)
            H[sl, sl] += lam * (np.eye(d) - np.outer(unit[j], unit[j])) / bn[j]
        step = np.linalg.lstsq(H, -grad, rcond=1e-13)[0]
        t = 1.0
        while t > 1e-8:
            cand = w + t * step
            Fc = obj(cand)
            if Fc <= F:
                break
            t *= 0.5
        else:
            break
        done = np.linalg.norm(cand - w) <= 1e-15 * max(np.linalg.norm(w), 1e-300)
        w, F = cand, Fc
        if done:
            break
    out = np.zeros_like(W)
    out[active] = w.reshape(k, d)
    return out


def group_lasso_fista(
    X,
    masks: MaskSet,
    lam: float,
    y,
    *,
    loss_scale: float = 1.0,
    max_iter: int = 200_000,
    tol: float = 1e-10,
    W0=None,
):
    """Accelerated proximal gradient on the group lasso with monotone restarts.

    Step ``1/L`` with ``L`` from power iteration (times 1.05); the prox is
    blockwise group soft-thresholding. Terminates when the relative duality
    gap falls below ``tol``. Returns ``(W, report)``.
    """
    X = as_data_matrix(X)
    if lam <= 0:
        raise ValueError("lam must be positive")

    def objective(W):
        return group_lasso_objective(X, masks, W, lam, y, loss_scale)

    def gap(W):
        return dual_gap(X, masks, W, lam, y, loss_scale)

    def prox(V, step):
        return _group_shrink(V, lam * step)

    W, report = _fista(X, masks, y, loss_scale, prox, objective, gap, max_iter, tol, W0)
    primal, dual = gap(W)
    rel = (primal - dual) / max(abs(primal), 1e-300)
    if rel > tol:
        P = _newton_polish(X, masks, W, lam, y, loss_scale)
        p_primal, p_dual = gap(P)
        p_rel = (p_primal - p_dual) / max(abs(p_primal), 1e-300)
        if p_primal <= primal * (1 + 1e-14) and p_rel < rel:
            W, rel = P, p_rel
            report.record(p_primal, W)
            report.group_norms = np.linalg.norm(W, axis=1)
        report.converged = rel <= max(tol, _GAP_FLOOR)
    if not report.converged:
        log.info("FISTA stopped at max_iter=%d without meeting tol=%g", max_iter, tol)
    return W, report


def squared_dual_gap(X, masks: MaskSet, W, lam_hat: float, y, loss_scale: float = 1.0):
    X = as_data_matrix(X)
    M = _mask_matrix(X, masks)
    y = np.asarray(y, dtype=float)
    r = y - _forward(X, M, W)
    primal = 0.5 * loss_scale * (r @ r) + 0.5 * lam_hat * np.linalg.norm(W, axis=1).sum() ** 2
    z = loss_scale * r
    c = np.linalg.norm(_adjoint(X, M, z), axis=1).max(initial=0.0)
    dual = z @ y - (z @ z) / (2 * loss_scale) - c * c / (2 * lam_hat)
    return float(primal), float(dual)


def squared_group_lasso_fista(
    X,
    masks: MaskSet,
    lam_hat: float,
    y,
    *,
    loss_scale: float = 1.0,
    max_iter: int = 200_000,
    tol: float = 1e-12,
    W0=None,
):
    """FISTA on the squared group lasso (the MKL-equivalent form)."""
    X = as_data_matrix(X)
    if lam_hat <= 0:
        raise ValueError("lam_hat must be positive")

    def objective(W):
        return squared_group_lasso_objective(X, masks, W, lam_hat, y, loss_scale)

    def gap(W):
        return squared_dual_gap(X, masks, W, lam_hat, y, loss_scale)

    def prox(V, step):
        tau = _squared_l1_threshold(np.linalg.norm(V, axis=1), lam_hat * step)
        return _group_shrink(V, tau)

    return _fista(X, masks, y, loss_scale, prox, objective, gap, max_iter, tol, W0)


def lambda_hat_from_solution(W, lam: float) -> float:
    total = float(np.linalg.norm(np.asarray(W, dtype=float), axis=1).sum())
    if total <= 0:
        raise ValueError("solution is zero; the squared-lasso mapping is undefined")
    return lam / total


def mkl_weights_from_solution(W) -> SimplexWeights:
    """Optimal kernel weights ``eta_i = ||w_i|| / sum_j ||w_j||``."""
    norms = np.linalg.norm(np.asarray(W, dtype=float), axis=1)
    total = norms.sum()
    if total <= 0:
        raise ValueError("solution is zero; kernel weights are undefined")
    return SimplexWeights(norms / total)
