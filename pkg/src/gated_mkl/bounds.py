"""In-sample prediction-error bound for the gated-ReLU group lasso.

With ``lam = t * sigma * ||X||_F / n`` the group-lasso estimate satisfies
``(1/n) ||f_hat - f*||^2 <= 2 lam sum_i ||w*_i||`` with probability at least
``1 - 2 exp(-t^2 / 8)``. The bound is proved for the loss
``(1/n) ||r||^2 + lam sum ||w||``; in this package's half-loss convention that
problem is ``(1/2n) ||r||^2 + (lam/2) sum ||w||``, which is what the harness
solves.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .arrangements import MaskSet, as_data_matrix
from .solvers import group_lasso_fista, predict

SIGMA_ZERO_LAMBDA = 1e-10


@dataclass
class PlantedModel:
    W_star: np.ndarray
    sigma: float

    def __post_init__(self):
        self.W_star = np.asarray(self.W_star, dtype=float)
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def outputs(self, X, masks: MaskSet) -> np.ndarray:
        return predict(X, masks, self.W_star)

    @property
    def group_norm_sum(self) -> float:
        return float(np.linalg.norm(self.W_star, axis=1).sum())


def make_planted_model(masks: MaskSet, d: int, active: int, sigma: float, seed=0) -> PlantedModel:
    rng = np.random.default_rng(seed)
    W = np.zeros((masks.p, d))
    idx = rng.choice(masks.p, size=min(active, masks.p), replace=False)
    W[idx] = rng.standard_normal((len(idx), d))
    return PlantedModel(W, sigma)


def bound_lambda(t: float, sigma: float, X) -> float:
    """``t * sigma * ||X||_F / n``."""
    X = as_data_matrix(X)
    if t <= 0 or sigma < 0:
        raise ValueError("need t > 0 and sigma >= 0")
    return t * sigma * np.linalg.norm(X, "fro") / X.shape[0]


def prediction_error(f_hat, f_star) -> float:
    f_hat = np.asarray(f_hat, dtype=float)
    f_star = np.asarray(f_star, dtype=float)
    if f_hat.shape != f_star.shape:
        raise ValueError("prediction vectors differ in length")
    diff = f_hat - f_star
    return float(diff @ diff) / len(diff)


def violation_ceiling(t: float) -> float:
    return 2 * np.exp(-t * t / 8)


@dataclass
class CoverageReport:
    t: float
    lam: float
    trials: int
    violations: int
    ceiling: float
    bound: float
    max_error: float
    mean_error: float

    @property
    def rate(self) -> float:
        return self.violations / self.trials

    @property
    def allowed(self) -> float:
        """Ceiling plus three binomial standard deviations."""
        c = min(self.ceiling, 1.0)
        return c + 3 * np.sqrt(c * (1 - c) / self.trials)

    def to_dict(self) -> dict:
        out = {k: (v if isinstance(v, int) else float(v)) for k, v in asdict(self).items()}
        out["rate"] = float(self.rate)
        out["allowed"] = float(self.allowed)
        return out


def bound_coverage(
    planted: PlantedModel,
    masks: MaskSet,
    X,
    t: float,
    trials: int,
    seed=0,
    *,
    tol: float = 1e-8,
    max_iter: int = 50_000,
    slack: float = 1e-9,
) -> CoverageReport:
    """Empirical violation count of the prediction-error bound over noise draws."""
    X = as_data_matrix(X)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = X.shape[0]
    f_star = planted.outputs(X, masks)
    lam = bound_lambda(t, planted.sigma, X)
    if lam == 0:
        lam = SIGMA_ZERO_LAMBDA
    bound = 2 * lam * planted.group_norm_sum
    rng = np.random.default_rng(seed)
    errors = []
    violations = 0
    for _ in range(trials):
        y = f_star + planted.sigma * rng.standard_normal(n)
        W, _ = group_lasso_fista(X, masks, lam / 2, y, loss_scale=1.0 / n, tol=tol, max_iter=max_iter)
        err = prediction_error(predict(X, masks, W), f_star)
        errors.append(err)
        if err > bound + slack:
            violations += 1
    return CoverageReport(
        t=t,
        lam=lam,
        trials=trials,
        violations=violations,
        ceiling=violation_ceiling(t),
        bound=bound,
        max_error=float(max(errors)),
        mean_error=float(np.mean(errors)),
    )


def gaussian_norm_tail(X, sigma: float, thresholds, draws: int = 10_000, seed=0):
    """Empirical ``P[||eps^T X|| > z]`` next to ``2 exp(-z^2 / (2 sigma^2 tr(X^T X)))``.

    Returns a list of ``(z, empirical, bound)`` tuples.
    """
    X = as_data_matrix(X)
    rng = np.random.default_rng(seed)
    eps = sigma * rng.standard_normal((draws, X.shape[0]))
    norms = np.linalg.norm(eps @ X, axis=1)
    trace = float(np.sum(X * X))
    out = []
    for z in thresholds:
        emp = float(np.mean(norms > z))
        bound = 2 * np.exp(-z * z / (2 * sigma * sigma * trace)) if sigma > 0 else 0.0
        out.append((float(z), emp, float(bound)))
    return out
