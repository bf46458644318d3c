"""Cone decomposition: turn gated-ReLU groups into pairs of genuine ReLU neurons.

For each group the program is::

    min ||v|| + ||u||   s.t.  D X (v - u) = D X w,  (2D - I) X v >= 0,  (2D - I) X u >= 0

solved by a primal-dual splitting (Chambolle-Pock). Every checkpoint maps
the iterate onto the feasible set with two exact corrections: a null-space
projection for the equality and a shift of both ``v`` and ``u`` along a
strictly interior gate direction for the cones. Only improving feasible
points are accepted, so the recorded objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .arrangements import MaskSet, as_data_matrix


class ConeDecompositionError(RuntimeError):
    pass


@dataclass
class GroupDecomposition:
    v: np.ndarray
    u: np.ndarray
    eq_residual: float
    cone_violation: float
    objective: float
    trajectory: list = field(default_factory=list)
    converged: bool = True


@dataclass
class ConeDecomposition:
    V: np.ndarray
    U: np.ndarray
    eq_residuals: np.ndarray
    cone_violations: np.ndarray
    objectives: np.ndarray
    groups: list = field(default_factory=list, repr=False)

    def feasible(self, eq_tol: float = 1e-8, cone_tol: float = 1e-10) -> bool:
        return bool(np.all(self.eq_residuals <= eq_tol) and np.all(self.cone_violations <= cone_tol))


def _interior_direction(SX, nonzero, gate, rng, attempts=50):
    """A direction with strictly positive slack on every nonzero row."""
    A = SX[nonzero]
    if A.shape[0] == 0:
        return np.zeros(SX.shape[1]), np.ones(0)

    def slack_ok(g):
        return g is not None and np.all(A @ g > 0)

    d = SX.shape[1]
    # maximise the smallest slack over the unit box
    res = linprog(
        np.r_[np.zeros(d), -1.0],
        A_ub=np.c_[-A, np.ones(A.shape[0])],
        b_ub=np.zeros(A.shape[0]),
        bounds=[(-1, 1)] * d + [(None, 1)],
        method="highs",
    )
    if res.status == 0 and -res.fun > 0:
        g = res.x[:d]
        if slack_ok(g):
            return g, A @ g
    if slack_ok(gate):
        return gate, A @ gate
    base = np.zeros(d) if gate is None else np.asarray(gate, dtype=float)
    scale = max(np.linalg.norm(base), 1.0)
    for _ in range(attempts):
        g = base + 0.1 * scale * rng.standard_normal(d)
        if slack_ok(g):
            return g, A @ g
    raise ConeDecompositionError("no strictly interior gate direction for this mask")


def decompose_group(
    X,
    D,
    w,
    gate=None,
    *,
    tol: float = 1e-4,
    max_iter: int = 100_000,
    check_every: int = 25,
    seed: int = 0,
) -> GroupDecomposition:
    """Split one gated group ``w`` into ReLU-feasible ``(v, u)`` with ``v - u`` matching on ``D``.

    Stops once the best feasible objective is within relative ``tol`` of
    the dual lower bound carried by the splitting iterate.
    """
    X = as_data_matrix(X)
    D = np.asarray(D, dtype=bool)
    w = np.asarray(w, dtype=float)
    n, d = X.shape
    if D.shape != (n,) or w.shape != (d,):
        raise ValueError("mask or weight shape does not match the data")
    if not np.all(np.isfinite(w)):
        raise ValueError("group weights must be finite")
    scale = np.linalg.norm(w)
    if scale == 0:
        z = np.zeros(d)
        return GroupDecomposition(z, z.copy(), 0.0, 0.0, 0.0, [0.0])
    w = w / scale

    sign = np.where(D, 1.0, -1.0)
    SX = sign[:, None] * X
    DX = X * D[:, None]
    nonzero = np.any(X != 0, axis=1)
    rng = np.random.default_rng(seed)
    g, g_slack = _interior_direction(SX, nonzero, gate, rng)
    # the equality only fixes v - u on the row space of D X; an orthonormal
    # basis of that space is a perfectly conditioned stand-in for D X
    _, sv, Vt = np.linalg.svd(DX, full_matrices=False)
    rank = int(np.sum(sv > 1e-12 * max(sv.max(initial=0.0), 1e-300)))
    Q = Vt[:rank]
    null_proj = np.eye(d) - Q.T @ Q
    target = Q @ w
    # cone rows are scale free; unit rows balance the splitting steps
    norms = np.linalg.norm(SX, axis=1)
    SXn = SX[nonzero] / norms[nonzero, None]
    m = SXn.shape[0]

    def repair(v, u):
        delta = null_proj @ ((v - u) - w)
        c = (w + delta) - (v - u)
        v = v + c / 2
        u = u - c / 2
        worst = -np.minimum(SX[nonzero] @ v, SX[nonzero] @ u)
        shift = max(0.0, float(np.max(worst / g_slack, initial=0.0)))
        return v + shift * g, u + shift * g

    def objective(v, u):
        return float(np.linalg.norm(v) + np.linalg.norm(u))

    best_v, best_u = repair(w.copy(), np.zeros(d))
    best = objective(best_v, best_u)
    trajectory = [best]

    # K x = [Q (v - u); S X v; S X u]
    Kmat = np.block([[Q, -Q], [SXn, np.zeros_like(SXn)], [np.zeros_like(SXn), SXn]])
    # diagonal preconditioning (Pock & Chambolle, alpha = 1)
    absK = np.abs(Kmat)
    col = absK.sum(axis=0)
    row = absK.sum(axis=1)
    # one step per block keeps the prox a plain group shrinkage; smaller steps stay valid
    tau_v = 1.0 / max(col[:d].max(), 1e-300)
    tau_u = 1.0 / max(col[d:].max(), 1e-300)
    tau = np.r_[np.full(d, tau_v), np.full(d, tau_u)]
    sigma = np.where(row > 0, 1.0 / np.where(row > 0, row, 1.0), 0.0)
    lower = np.r_[target, np.zeros(2 * m)]
    upper = np.r_[target, np.full(2 * m, np.inf)]

    def shrink(z, t):
        nz = np.linalg.norm(z)
        return z * max(0.0, 1 - t / nz) if nz > 0 else z

    def prox_f(x):
        return np.r_[shrink(x[:d], tau_v), shrink(x[d:], tau_u)]

    def lower_bound(q):
        a = -Kmat.T @ q
        scale_q = max(1.0, np.linalg.norm(a[:d]), np.linalg.norm(a[d:]))
        return float(-(q[:rank] @ target) / scale_q)

    x = np.r_[best_v, best_u]
    xb = x.copy()
    q = np.zeros(rank + 2 * m)
    converged = False
    for k in range(1, max_iter + 1):
        s = q + sigma * (Kmat @ xb)
        safe = np.where(sigma > 0, sigma, 1.0)
        q = s - sigma * np.clip(s / safe, lower, upper)
        x_new = prox_f(x - tau * (Kmat.T @ q))
        xb = 2 * x_new - x
        x = x_new
        if k % check_every == 0:
            cv, cu = repair(x[:d], x[d:])
            obj = objective(cv, cu)
            if obj < best:
                best, best_v, best_u = obj, cv, cu
                trajectory.append(best)
            if best - lower_bound(q) <= tol * max(best, 1e-300):
                converged = True
                break

    v, u = best_v * scale, best_u * scale
    target = DX @ (w * scale)
    eq_res = float(np.abs(target - DX @ (v - u)).max(initial=0.0))
    cone_viol = float(max(0.0, -np.min(SX @ v, initial=0.0), -np.min(SX @ u, initial=0.0)))
    return GroupDecomposition(
        v, u, eq_res, cone_viol, best * scale, [t * scale for t in trajectory], converged
    )


def decompose_all(X, masks: MaskSet, W, **kwargs) -> ConeDecomposition:
    """Decompose every group; zero groups map to ``(0, 0)``."""
    X = as_data_matrix(X)
    W = np.asarray(W, dtype=float)
    if W.shape != (masks.p, X.shape[1]):
        raise ValueError(f"weights have shape {W.shape}, expected {(masks.p, X.shape[1])}")
    groups = []
    for i in range(masks.p):
        gate = None if masks.gates is None else masks.gates[i]
        try:
            groups.append(decompose_group(X, masks.masks[i], W[i], gate, **kwargs))
        except ConeDecompositionError as exc:
            raise ConeDecompositionError(f"group {i}: {exc}") from exc
    return ConeDecomposition(
        V=np.array([g.v for g in groups]),
        U=np.array([g.u for g in groups]),
        eq_residuals=np.array([g.eq_residual for g in groups]),
        cone_violations=np.array([g.cone_violation for g in groups]),
        objectives=np.array([g.objective for g in groups]),
        groups=groups,
    )
