"""Perturbation sets and white/black-box attacks on ``tensornet`` models.

All attacks are batched: ``x`` is (n, d), ``y`` is (n,). A single example can be
passed as a vector and comes back as a vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .tensornet import Params, batch_loss, forward, input_loss_and_grad

INF = math.inf


@dataclass(frozen=True)
class PerturbationSet:
    p: float
    epsilon: float
    clamp01: bool = True

    def __post_init__(self):
        if self.p not in (0, 2, INF):
            raise ValueError(f"norm order must be 0, 2 or inf, got {self.p}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


def linf(eps: float, clamp01: bool = True) -> PerturbationSet:
    return PerturbationSet(INF, eps, clamp01)


def l2(eps: float, clamp01: bool = True) -> PerturbationSet:
    return PerturbationSet(2, eps, clamp01)


@dataclass(frozen=True)
class AttackConfig:
    steps: int
    lr: float
    signed: bool = True
    random_start: bool = True
    restarts: int = 1
    targeted: int | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def training_steps(epsilon: float, lr: float = 0.05) -> int:
    """Step count of the training attack: epsilon * 2.5 / lr, at least one."""
    return max(1, int(round(epsilon * 2.5 / lr)))


def preset(name: str, epsilon: float | None = None) -> AttackConfig:
    """Named attack recipes.

    ``train-pgd`` depends on epsilon (its step count scales with the budget).
    """
    if name == "train-pgd":
        if epsilon is None:
            raise ValueError("train-pgd needs epsilon to size its step count")
        return AttackConfig(steps=training_steps(epsilon, 0.05), lr=0.05)
    if name == "eval-200":
        return AttackConfig(steps=200, lr=0.05)
    if name == "strong-pgd":
        return AttackConfig(steps=1000, lr=0.01)
    if name == "profile-pgd":
        return AttackConfig(steps=200, lr=0.01)
    if name == "actual-grad":
        return AttackConfig(steps=2000, lr=5e4, signed=False)
    if name == "l2-eval":
        return AttackConfig(steps=125, lr=0.1)
    if name == "fast":
        return AttackConfig(steps=10, lr=0.1)
    raise KeyError(f"unknown attack preset {name!r}")


PRESETS = ("train-pgd", "eval-200", "strong-pgd", "profile-pgd", "actual-grad", "l2-eval", "fast")


def child_seed(seed, *keys) -> list[int]:
    """Independent RNG stream for a sub-task, derived from a parent seed."""
    return [*np.atleast_1d(seed).tolist(), *keys]


def _sign(v: np.ndarray) -> np.ndarray:
    # np.sign already maps 0 -> 0
    return np.sign(v)


def project(delta: np.ndarray, pset: PerturbationSet) -> np.ndarray:
    """Nearest point of the epsilon-ball (rows of a batch are projected independently)."""
    delta = np.asarray(delta, dtype=np.float64)
    eps = pset.epsilon
    if pset.p == INF:
        return np.clip(delta, -eps, eps)
    if pset.p == 2:
        d2 = np.atleast_2d(delta)
        norms = np.linalg.norm(d2, axis=1, keepdims=True)
        scale = np.where(norms > eps, eps / np.where(norms > 0, norms, 1.0), 1.0)
        out = d2 * scale
        return out.reshape(delta.shape)
    raise ValueError("projection onto an l0 ball is not supported by gradient attacks")


def _finish(x: np.ndarray, x_adv: np.ndarray, pset: PerturbationSet) -> np.ndarray:
    x_adv = x + project(x_adv - x, pset)
    if pset.clamp01:
        x_adv = np.clip(x_adv, 0.0, 1.0)
    return x_adv


def _random_start(x: np.ndarray, pset: PerturbationSet, rng: np.random.Generator) -> np.ndarray:
    n, d = x.shape
    if pset.p == INF:
        delta = rng.uniform(-pset.epsilon, pset.epsilon, size=(n, d))
    else:
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = pset.epsilon * rng.uniform(size=(n, 1)) ** (1.0 / d)
        delta = g * r
    return _finish(x, x + delta, pset)


def _step_direction(g: np.ndarray, pset: PerturbationSet, signed: bool) -> np.ndarray:
    if not signed:
        return g
    if pset.p == INF:
        return _sign(g)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / np.where(norms > 0, norms, 1.0)


def _as_batch(x, y):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    return np.atleast_2d(x), np.atleast_1d(np.asarray(y)), single


def fgsm(p: Params, x, y, pset: PerturbationSet) -> np.ndarray:
    """One signed step of size epsilon from the clean point."""
    if pset.p != INF:
        raise ValueError("fgsm is defined for the l-inf ball")
    xb, yb, single = _as_batch(x, y)
    if pset.epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    _, g = input_loss_and_grad(p, xb, yb)
    out = _finish(xb, xb + pset.epsilon * _sign(g), pset)
    return out[0] if single else out


def _descend(p, x, labels, pset, cfg, rng, direction: float) -> np.ndarray:
    """Run PGD on ``direction * loss(labels)`` (direction=+1 ascends)."""
    x_adv = _random_start(x, pset, rng) if cfg.random_start else x.copy()
    for _ in range(cfg.steps):
        _, g = input_loss_and_grad(p, x_adv, labels)
        x_adv = _finish(x, x_adv + direction * cfg.lr * _step_direction(g, pset, cfg.signed), pset)
    return x_adv


def pgd(p: Params, x, y, pset: PerturbationSet, cfg: AttackConfig, seed: int = 0) -> np.ndarray:
    """Projected gradient ascent on the cross-entropy of the true label.

    With several restarts the per-example restart with the largest final loss wins.
    If ``cfg.targeted`` is set, descends on the loss of that class instead.
    """
    xb, yb, single = _as_batch(x, y)
    if pset.epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    rng = np.random.default_rng(seed)
    best, best_loss = None, None
    for _ in range(cfg.restarts):
        if cfg.targeted is None:
            cand = _descend(p, xb, yb, pset, cfg, rng, +1.0)
        else:
            tgt = np.full_like(yb, cfg.targeted)
            cand = _descend(p, xb, tgt, pset, cfg, rng, -1.0)
        cand_loss = batch_loss(p, cand, yb)
        if best is None:
            best, best_loss = cand, cand_loss
        else:
            better = cand_loss > best_loss
            best[better] = cand[better]
            best_loss = np.where(better, cand_loss, best_loss)
    return best[0] if single else best


def targeted_pgd(p: Params, x, y, pset: PerturbationSet, cfg: AttackConfig, seed: int = 0) -> np.ndarray:
    """Run one targeted PGD per wrong class; keep the target giving the largest true-label loss."""
    xb, yb, single = _as_batch(x, y)
    if pset.epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    n_classes = p.arch.n_classes
    best = xb.copy()
    best_loss = np.full(len(yb), -np.inf)
    for t in range(n_classes):
        mask = yb != t
        if not mask.any():
            continue
        cand = pgd(p, xb[mask], yb[mask], pset, replace(cfg, targeted=t), seed=child_seed(seed, t))
        cand_loss = batch_loss(p, cand, yb[mask])
        idx = np.flatnonzero(mask)
        better = cand_loss > best_loss[idx]
        best[idx[better]] = cand[better]
        best_loss[idx[better]] = cand_loss[better]
    return best[0] if single else best


def brute_force_attack(p: Params, x, y, epsilon: float, n_samples: int, seed: int = 0,
                       clamp01: bool = True, chunk: int = 256) -> np.ndarray:
    """Best of ``n_samples`` random corners x + eps * s, s uniform in {-1, +1}^d."""
    xb, yb, single = _as_batch(x, y)
    pset = linf(epsilon, clamp01)
    best = xb.copy()
    best_loss = batch_loss(p, xb, yb)
    if epsilon == 0 or n_samples == 0:
        return best[0] if single else best
    rng = np.random.default_rng(seed)
    n, d = xb.shape
    for i in range(n):
        left = n_samples
        while left > 0:
            m = min(chunk, left)
            left -= m
            signs = rng.integers(0, 2, size=(m, d)) * 2.0 - 1.0
            cands = _finish(xb[i], xb[i] + epsilon * signs, pset)
            cl = batch_loss(p, cands, np.full(m, yb[i]))
            j = int(np.argmax(cl))
            if cl[j] > best_loss[i]:
                best_loss[i] = cl[j]
                best[i] = cands[j]
    return best[0] if single else best


def random_search_attack(p: Params, x, y, pset: PerturbationSet, n_queries: int, seed: int = 0) -> np.ndarray:
    """Gradient-free greedy search over the corners of the l-inf ball.

    Starts from a random corner and proposes single-coordinate sign flips,
    keeping a flip whenever the loss goes up. Only loss values are queried.
    """
    if pset.p != INF:
        raise ValueError("random search explores l-inf corners only")
    xb, yb, single = _as_batch(x, y)
    if pset.epsilon == 0 or n_queries == 0:
        return np.array(x, dtype=np.float64, copy=True)
    rng = np.random.default_rng(seed)
    n, d = xb.shape
    signs = rng.integers(0, 2, size=(n, d)) * 2.0 - 1.0
    cur = _finish(xb, xb + pset.epsilon * signs, pset)
    cur_loss = batch_loss(p, cur, yb)
    rows = np.arange(n)
    for _ in range(n_queries):
        coord = rng.integers(0, d, size=n)
        prop_signs = signs.copy()
        prop_signs[rows, coord] *= -1
        prop = _finish(xb, xb + pset.epsilon * prop_signs, pset)
        prop_loss = batch_loss(p, prop, yb)
        accept = prop_loss > cur_loss
        signs[accept] = prop_signs[accept]
        cur[accept] = prop[accept]
        cur_loss = np.where(accept, prop_loss, cur_loss)
    return cur[0] if single else cur


# --- accuracy helpers -------------------------------------------------------

def clean_correct(p: Params, x, y) -> np.ndarray:
    return np.argmax(forward(p, np.atleast_2d(x)), axis=1) == np.atleast_1d(y)


def robust_correct(p: Params, x, y, x_adv) -> np.ndarray:
    """Correct on both the clean point and the attacked point (the clean point is in the ball)."""
    return clean_correct(p, x, y) & clean_correct(p, x_adv, y)


def robust_accuracy(p: Params, x, y, x_adv) -> float:
    return float(np.mean(robust_correct(p, x, y, x_adv)))


def transfer_attack(source: Params, target: Params, x, y, pset: PerturbationSet, cfg: AttackConfig,
                    seed: int = 0) -> dict:
    """Craft PGD examples on ``source`` and score them on ``target``."""
    if source.arch.input_dim != target.arch.input_dim:
        raise ValueError("source and target models take different input sizes")
    x_adv = pgd(source, x, y, pset, cfg, seed)
    return {
        "x_adv": x_adv,
        "accuracy": robust_accuracy(target, x, y, x_adv),
        "clean_accuracy": float(np.mean(clean_correct(target, x, y))),
    }


def evaluate_checklist(model, baseline_model, ds, pset, cfg=None, surrogate=None):
    """See ``robustlab.checklist.evaluate_checklist``."""
    from .checklist import ChecklistConfig
    from .checklist import evaluate_checklist as run

    return run(model, baseline_model, ds, pset, cfg or ChecklistConfig(), surrogate)
