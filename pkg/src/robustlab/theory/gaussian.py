"""Two isotropic Gaussians with equal priors: optimal and l2-robust-optimal errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import Dataset


@dataclass(frozen=True)
class GaussianModel:
    mu1: np.ndarray
    mu_minus1: np.ndarray
    sigma: float

    def __post_init__(self):
        mu1 = np.asarray(self.mu1, dtype=np.float64)
        mum1 = np.asarray(self.mu_minus1, dtype=np.float64)
        if mu1.shape != mum1.shape or mu1.ndim != 1:
            raise ValueError("means must be vectors of equal length")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if np.array_equal(mu1, mum1):
            raise ValueError("class means must differ")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu_minus1", mum1)

    @property
    def dim(self) -> int:
        return self.mu1.size

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.mu1 - self.mu_minus1))

    @classmethod
    def symmetric(cls, d: int, separation: float, sigma: float = 1.0) -> "GaussianModel":
        """Means at +/- separation/2 along the first axis."""
        mu = np.zeros(d)
        mu[0] = separation / 2
        return cls(mu, -mu, sigma)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def separation_for_accuracy(accuracy: float, epsilon: float, sigma: float = 1.0) -> float:
    """Mean distance at which the optimal robust accuracy at ``epsilon`` equals ``accuracy``."""
    from scipy.special import ndtri

    return 2 * epsilon + 2 * sigma * float(ndtri(accuracy))


def sample(model: GaussianModel, n: int, seed: int) -> Dataset:
    """Labels uniform on {-1, +1}; x ~ N(mu_y, sigma^2 I)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    y = np.where(rng.integers(0, 2, size=n) == 1, 1, -1)
    means = np.where((y == 1)[:, None], model.mu1, model.mu_minus1)
    x = means + model.sigma * rng.standard_normal((n, model.dim))
    return Dataset(x, y, {"source": "gaussian", "sigma": model.sigma})


def optimal_classifier_predict(model: GaussianModel, x) -> np.ndarray | int:
    """Sign of w.(x - midpoint) with w = mu1 - mu_-1; ties go to +1."""
    w = model.mu1 - model.mu_minus1
    mid = 0.5 * (model.mu1 + model.mu_minus1)
    score = (np.asarray(x, dtype=np.float64) - mid) @ w
    out = np.where(score >= 0, 1, -1)
    return int(out) if np.ndim(out) == 0 else out


def bayes_error(model: GaussianModel) -> float:
    return normal_cdf(-model.separation / (2 * model.sigma))


def robust_error(model: GaussianModel, epsilon: float) -> float:
    """Closed-form optimal l2-robust error. Past epsilon = separation/2 the value exceeds 1/2
    and lies outside the regime where the formula is derived; see ``in_proof_regime``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return normal_cdf((2 * epsilon - model.separation) / (2 * model.sigma))


def in_proof_regime(model: GaussianModel, epsilon: float) -> bool:
    return epsilon <= model.separation / 2


def exact_adv_error_linear(model: GaussianModel, w, b: float, epsilon: float, n: int, seed: int) -> float:
    """Monte-Carlo l2-adversarial error of the linear rule sign(w.x + b).

    For a linear rule the worst l2 perturbation moves the signed margin by
    exactly epsilon, so a sample is lost iff y * margin <= epsilon.
    """
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("w must be non-zero")
    ds = sample(model, n, seed)
    margin = (ds.inputs @ w + b) / norm
    return float(np.mean(ds.labels * margin <= epsilon))


def mc_standard_error(q: float, n: int) -> float:
    return math.sqrt(max(q * (1 - q), 0.0) / n)


def optimal_linear_rule(model: GaussianModel) -> tuple[np.ndarray, float]:
    """(w, b) of the optimal classifier written as sign(w.x + b)."""
    w = model.mu1 - model.mu_minus1
    return w, -float(w @ (0.5 * (model.mu1 + model.mu_minus1)))


def error_table(model: GaussianModel, eps_grid, n: int = 0, seed: int = 0) -> list[dict]:
    rows = []
    w, b = optimal_linear_rule(model)
    for eps in eps_grid:
        row = {"eps": float(eps), "bayes_error": bayes_error(model), "robust_error": robust_error(model, eps),
               "in_regime": in_proof_regime(model, eps)}
        if n:
            mc = exact_adv_error_linear(model, w, b, eps, n, seed)
            row["mc_estimate"] = mc
            row["mc_se"] = mc_standard_error(mc, n)
        rows.append(row)
    return rows
