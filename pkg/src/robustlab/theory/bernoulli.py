"""Uniform mixture of two product-Bernoulli distributions on {-1, 1}^d.

Closed-form Bayes / l0-robust / l-inf-robust errors, the matching classifiers,
and an exhaustive enumeration oracle over the effective coordinates that the
formulas are checked against.

Patterns over the k effective coordinates are encoded as integers: bit j set
means effective coordinate j disagrees with theta(1), so the popcount of a
pattern is its Hamming distance to theta(1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..data import Dataset

MAX_ORACLE_K = 22
MAX_BRUTE_K = 4


@dataclass(frozen=True)
class BernoulliModel:
    theta1: np.ndarray
    theta_minus1: np.ndarray
    t: float

    def __post_init__(self):
        a = np.asarray(self.theta1, dtype=np.int64)
        b = np.asarray(self.theta_minus1, dtype=np.int64)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("centres must be vectors of equal length")
        if not (np.isin(a, (-1, 1)).all() and np.isin(b, (-1, 1)).all()):
            raise ValueError("centre entries must be +1 or -1")
        if not 0 < self.t < 0.5:
            raise ValueError("t must lie in (0, 1/2)")
        if np.array_equal(a, b):
            raise ValueError("centres must differ in at least one coordinate")
        object.__setattr__(self, "theta1", a)
        object.__setattr__(self, "theta_minus1", b)

    @property
    def dim(self) -> int:
        return self.theta1.size

    @classmethod
    def with_k(cls, k: int, t: float, d: int | None = None, seed: int = 0) -> "BernoulliModel":
        """Random centres in dimension d (default k) that disagree on exactly k coordinates."""
        d = d or k
        rng = np.random.default_rng(seed)
        theta1 = rng.choice([-1, 1], size=d)
        theta_m1 = theta1.copy()
        flip = rng.choice(d, size=k, replace=False)
        theta_m1[flip] *= -1
        return cls(theta1, theta_m1, t)


def effective_dims(model: BernoulliModel) -> tuple[int, list[int]]:
    idx = np.flatnonzero(model.theta1 != model.theta_minus1)
    return int(idx.size), idx.tolist()


def sample(model: BernoulliModel, n: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    y = np.where(rng.integers(0, 2, size=n) == 1, 1, -1)
    centres = np.where((y == 1)[:, None], model.theta1, model.theta_minus1)
    keep = rng.uniform(size=centres.shape) < 0.5 + model.t
    return Dataset(np.where(keep, centres, -centres), y, {"source": "bernoulli", "t": model.t})


def _binary(x) -> np.ndarray:
    x = np.asarray(x)
    if not np.isin(x, (-1, 1)).all():
        raise ValueError("input must have entries in {-1, +1}")
    return x


def _hamming(x: np.ndarray, centre: np.ndarray) -> np.ndarray:
    return np.sum(x != centre, axis=-1)


def _scalar(out):
    return int(out) if np.ndim(out) == 0 else out


def bayes_predict(model: BernoulliModel, x):
    """+1 iff x is at least as close (Hamming) to theta(1) as to theta(-1)."""
    x = _binary(x)
    out = np.where(_hamming(x, model.theta1) <= _hamming(x, model.theta_minus1), 1, -1)
    return _scalar(out)


def l0_robust_predict(model: BernoulliModel, x, s: int):
    """+1 iff the effective part of x is within Hamming distance s of theta(1)."""
    k, idx = effective_dims(model)
    if not 0 <= s <= k:
        raise ValueError(f"threshold s must lie in [0, {k}]")
    x = _binary(x)
    out = np.where(_hamming(x[..., idx], model.theta1[idx]) <= s, 1, -1)
    return _scalar(out)


def sign_map(x) -> np.ndarray:
    """Coordinate-wise sign with sign(0) = +1."""
    return np.where(np.asarray(x, dtype=np.float64) >= 0, 1, -1)


def linf_robust_predict(model: BernoulliModel, x_real):
    return bayes_predict(model, sign_map(x_real))


# --- closed forms -----------------------------------------------------------

def _log_term(k: int, i: int, t: float) -> float:
    return (math.lgamma(k + 1) - math.lgamma(i + 1) - math.lgamma(k - i + 1)
            + i * math.log(0.5 + t) + (k - i) * math.log(0.5 - t))


def binom_term(k: int, i: int, t: float) -> float:
    """C(k, i) (1/2 + t)^i (1/2 - t)^(k - i), evaluated in log space."""
    return math.exp(_log_term(k, i, t))


def lower_sum(k: int, upper: int, t: float) -> float:
    """sum_{i=0}^{upper} binom_term(k, i, t), with the upper limit clamped to [-1, k]."""
    upper = min(upper, k)
    if upper < 0:
        return 0.0
    return math.fsum(binom_term(k, i, t) for i in range(upper + 1))


def bayes_error(k: int, t: float) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k % 2 == 0:
        return lower_sum(k, k // 2, t) - 0.5 * binom_term(k, k // 2, t)
    return lower_sum(k, k // 2, t)


def l0_threshold_error(k: int, t: float, s: int, epsilon: int) -> float:
    """l0-adversarial error of the Hamming-threshold rule with threshold s.

    Sum limits are clamped to k. At s = k the rule is constant +1 and no
    flip can carry a class +1 point past distance k, so that term is empty.
    """
    pos_term = lower_sum(k, k - s + epsilon - 1, t) if s < k else 0.0
    return 0.5 * lower_sum(k, s + epsilon, t) + 0.5 * pos_term


def _integer_eps(epsilon) -> int:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon != int(epsilon):
        warnings.warn(f"l0 budget {epsilon} floored to {int(epsilon)}", stacklevel=3)
    return int(epsilon)


def l0_optimal_error(k: int, t: float, epsilon, verify: bool = True) -> tuple[int, float]:
    """Best threshold s (smallest on ties) and its l0-adversarial error.

    When ``verify`` is set and k is small enough for enumeration, the value is
    re-derived with ``exact_adv_error`` and a mismatch raises.
    """
    eps = _integer_eps(epsilon)
    errs = [l0_threshold_error(k, t, s, eps) for s in range(k + 1)]
    best = min(errs)
    s_star = next(s for s, e in enumerate(errs) if e <= best + 1e-15)
    if verify and k <= 12:
        model = BernoulliModel(np.ones(k, dtype=int), -np.ones(k, dtype=int), t)
        check = exact_adv_error(model, lambda x: l0_robust_predict(model, x, s_star), 0, eps)
        if abs(check - errs[s_star]) > 1e-12:
            raise AssertionError(f"formula {errs[s_star]} disagrees with enumeration {check} (k={k}, eps={eps})")
    return s_star, errs[s_star]


def linf_optimal_error(model: BernoulliModel, epsilon: float) -> float:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    k, _ = effective_dims(model)
    return bayes_error(k, model.t) if epsilon < 1 else 0.5


def epsilon_frontier(k: int, t: float, eps_max: int) -> list[dict]:
    rows = []
    for eps in range(int(eps_max) + 1):
        s, err = l0_optimal_error(k, t, eps, verify=False)
        rows.append({"eps": eps, "s_star": s, "error": err})
    return rows


# --- enumeration oracle -----------------------------------------------------

def _class_probs(k: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """P(pattern | y=+1) and P(pattern | y=-1) for every pattern over k effective coordinates."""
    pc = np.array([bin(u).count("1") for u in range(1 << k)])
    log_hi, log_lo = math.log(0.5 + t), math.log(0.5 - t)
    p_pos = np.exp((k - pc) * log_hi + pc * log_lo)
    p_neg = np.exp(pc * log_hi + (k - pc) * log_lo)
    return p_pos, p_neg


def _patterns_to_inputs(model: BernoulliModel) -> np.ndarray:
    k, idx = effective_dims(model)
    codes = np.arange(1 << k)
    bits = (codes[:, None] >> np.arange(k)[None, :]) & 1
    x = np.tile(model.theta1, (1 << k, 1))
    x[:, idx] = model.theta1[idx] * (1 - 2 * bits)
    return x


def _dilate(mask: np.ndarray, k: int, flips: list[tuple[int, np.ndarray | None]], rounds: int) -> np.ndarray:
    """Grow a boolean set over patterns by ``rounds`` single-coordinate moves.

    ``flips`` lists (bit, allowed) pairs; ``allowed`` restricts which source
    patterns may flip that bit (None = all). Works on the last axis so a whole
    stack of labelings can be dilated at once.
    """
    codes = np.arange(1 << k)
    for _ in range(rounds):
        grown = mask.copy()
        for bit, allowed in flips:
            nb = mask[..., codes ^ (1 << bit)]
            grown |= nb if allowed is None else (nb & allowed)
        if np.array_equal(grown, mask):
            break
        mask = grown
    return mask


def _reach_moves(model: BernoulliModel, p, epsilon) -> tuple[list, int]:
    k, idx = effective_dims(model)
    if p == 0:
        return [(j, None) for j in range(k)], _integer_eps(epsilon)
    if p == math.inf:
        # l-inf budget e moves a coordinate across the sign threshold (sign(0) = +1):
        # -1 -> +1 needs e >= 1, +1 -> -1 needs e > 1.
        x = _patterns_to_inputs(model)[:, idx]
        moves = []
        for j in range(k):
            up_ok, down_ok = epsilon >= 1, epsilon > 1
            # allowed[u]: pattern u may flip bit j, decided by u's own value there
            allowed = np.where(x[:, j] == -1, up_ok, down_ok)
            if up_ok or down_ok:
                moves.append((j, allowed))
        return moves, k
    raise ValueError("oracle supports p in {0, inf}")


def exact_adv_error(model: BernoulliModel, classifier: Callable[[np.ndarray], np.ndarray], p, epsilon) -> float:
    """Exact adversarial error by enumerating all 2^k effective patterns.

    ``classifier`` maps an (m, d) matrix of +/-1 inputs to +/-1 labels and must
    ignore non-effective coordinates (every rule in this module does). For
    p=inf the classifier is taken to act through ``sign_map``.
    A pattern of class y counts as an error iff some pattern reachable within
    the budget is labelled differently from y.
    """
    k, _ = effective_dims(model)
    if k > MAX_ORACLE_K:
        raise ValueError(f"k={k} too large for enumeration (max {MAX_ORACLE_K})")
    labels = np.asarray(classifier(_patterns_to_inputs(model))).reshape(-1)
    return _adv_error_of_labelings(model, labels[None, :], p, epsilon)[0]


def _adv_error_of_labelings(model: BernoulliModel, labels: np.ndarray, p, epsilon) -> np.ndarray:
    k, _ = effective_dims(model)
    p_pos, p_neg = _class_probs(k, model.t)
    moves, rounds = _reach_moves(model, p, epsilon)
    reach_neg = _dilate(labels == -1, k, moves, rounds)
    reach_pos = _dilate(labels == 1, k, moves, rounds)
    err = 0.5 * (reach_neg.astype(float) @ p_pos) + 0.5 * (reach_pos.astype(float) @ p_neg)
    return err


def brute_force_optimal(model: BernoulliModel, p, epsilon) -> tuple[float, np.ndarray]:
    """Minimum adversarial error over every labelling of the 2^k effective patterns.

    Returns (error, labels) with labels indexed by pattern code; the first
    labelling (in enumeration order) attaining the minimum is the witness.
    """
    k, _ = effective_dims(model)
    if k > MAX_BRUTE_K:
        raise ValueError(f"brute force limited to k <= {MAX_BRUTE_K}")
    n_pat = 1 << k
    codes = np.arange(1 << n_pat, dtype=np.int64)
    labels = np.where((codes[:, None] >> np.arange(n_pat)[None, :]) & 1, 1, -1)
    errs = _adv_error_of_labelings(model, labels, p, epsilon)
    best = errs.min()
    i = int(np.flatnonzero(errs <= best + 1e-15)[0])
    return float(errs[i]), labels[i]
