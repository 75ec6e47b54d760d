"""Standard, adversarial, warm-started (extended) and iterative adversarial training."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import attacks
from .attacks import INF, PerturbationSet
from .data import Dataset, batches
from .tensornet import Optimizer, Params, batch_loss, loss_and_grad

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    optimizer: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 0.0
    momentum: float = 0.0
    attack: str = "train-pgd"
    epsilon: float = 0.0
    p: float = INF
    clamp01: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def make_optimizer(self) -> Optimizer:
        return Optimizer(self.optimizer, self.lr, self.weight_decay, self.momentum)


@dataclass
class EpochRecord:
    epoch: int
    eps: float
    adv_loss: float
    clean_loss: float
    weight_delta: float


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)
    params: Params | None = None
    stop_epoch: int | None = None
    checkpoint: str | None = None

    @property
    def adv_losses(self) -> list[float]:
        return [r.adv_loss for r in self.records]

    @property
    def clean_losses(self) -> list[float]:
        return [r.clean_loss for r in self.records]

    @property
    def weight_deltas(self) -> list[float]:
        return [r.weight_delta for r in self.records]

    @property
    def eps(self) -> list[float]:
        return [r.eps for r in self.records]

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in (header or {}).items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh)
            w.writerow(["epoch", "eps", "adv_loss", "clean_loss", "weight_delta"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.eps), repr(r.adv_loss), repr(r.clean_loss), repr(r.weight_delta)])

    def as_dict(self) -> dict:
        return {"records": [asdict(r) for r in self.records], "stop_epoch": self.stop_epoch}


def attack_config(cfg: TrainConfig, eps: float) -> attacks.AttackConfig:
    return attacks.preset(cfg.attack, eps) if cfg.attack == "train-pgd" else attacks.preset(cfg.attack)


def inner_max(p: Params, x: np.ndarray, y: np.ndarray, pset: PerturbationSet, acfg, seed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Approximate the inner maximisation for a batch.

    Returns (worst inputs, their losses, clean losses). The clean point is a
    member of the ball, so it is kept wherever the attack did not beat it.
    """
    clean = batch_loss(p, x, y)
    if pset.epsilon == 0:
        return x, clean, clean
    x_adv = attacks.pgd(p, x, y, pset, acfg, seed)
    adv = batch_loss(p, x_adv, y)
    keep_clean = clean > adv
    if keep_clean.any():
        x_adv = x_adv.copy()
        x_adv[keep_clean] = x[keep_clean]
        adv = np.where(keep_clean, clean, adv)
    return x_adv, adv, clean


def _run(p0: Params, ds: Dataset, cfg: TrainConfig, eps_for_epoch: Callable[[int], float],
         epochs: int, opt: Optimizer | None = None, on_epoch=None) -> tuple[Params, TrainReport]:
    opt = opt or cfg.make_optimizer()
    values = p0.values.copy()
    report = TrainReport()
    for epoch in range(1, epochs + 1):
        eps = eps_for_epoch(epoch)
        pset = PerturbationSet(cfg.p, eps, cfg.clamp01)
        acfg = attack_config(cfg, eps) if eps > 0 else None
        start = values.copy()
        adv_sum = clean_sum = 0.0
        for b, (_, xb, yb) in enumerate(batches(ds, cfg.batch_size, cfg.seed, epoch)):
            p = Params(p0.arch, values)
            x_in, adv, clean = inner_max(p, xb, yb, pset, acfg, [cfg.seed, epoch, b])
            adv_sum += adv.sum()
            clean_sum += clean.sum()
            _, grad = loss_and_grad(p, x_in, yb)
            values = opt.step(values, grad)
        rec = EpochRecord(epoch, eps, adv_sum / len(ds), clean_sum / len(ds), float(np.linalg.norm(values - start)))
        report.records.append(rec)
        log.info("epoch %d eps=%.3f adv_loss=%.4f clean_loss=%.4f dw=%.4f",
                 epoch, eps, rec.adv_loss, rec.clean_loss, rec.weight_delta)
        if on_epoch is not None and on_epoch(epoch, Params(p0.arch, values.copy()), report):
            break
    report.params = Params(p0.arch, values)
    return report.params, report


def train_standard(p0: Params, ds: Dataset, cfg: TrainConfig) -> tuple[Params, TrainReport]:
    """Plain empirical risk minimisation (no perturbations)."""
    return _run(p0, ds, cfg, lambda e: 0.0, cfg.epochs)


def train_adversarial(p0: Params, ds: Dataset, cfg: TrainConfig) -> tuple[Params, TrainReport]:
    """Every gradient step is taken at attack-perturbed inputs of budget ``cfg.epsilon``."""
    return _run(p0, ds, cfg, lambda e: cfg.epsilon, cfg.epochs)


def train_extended(checkpoint: Params, ds: Dataset, cfg: TrainConfig, eps0: float) -> tuple[Params, TrainReport]:
    """Adversarial training at ``cfg.epsilon`` warm-started from a model trained at ``eps0``.

    The optimizer state starts fresh at the switch.
    """
    if cfg.epsilon < eps0:
        raise ValueError(f"extended training needs a larger budget: {cfg.epsilon} < {eps0}")
    if cfg.epsilon == eps0:
        warnings.warn("extended training at the checkpoint's own epsilon just continues training", stacklevel=2)
    return _run(checkpoint, ds, cfg, lambda e: cfg.epsilon, cfg.epochs)


@dataclass(frozen=True)
class EpsSchedule:
    kind: str = "linear_step"
    delta: float = 0.01
    eps_max: float = 0.4
    start: float = 0.0
    factor: float = 1.0
    stop_ratio: float | None = 1.5

    def __post_init__(self):
        if self.kind not in ("constant", "linear_step", "exponential"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "linear_step" and self.delta < 0:
            raise ValueError("linear schedule must be non-decreasing")
        if self.kind == "exponential" and (self.factor < 1 or self.start < 0):
            raise ValueError("exponential schedule must be non-decreasing")

    def eps_at(self, epoch: int) -> float:
        """Budget in effect during ``epoch`` (1-based); the first epoch uses ``start``."""
        if self.kind == "constant":
            return self.start
        if self.kind == "linear_step":
            return min(self.eps_max, self.start + (epoch - 1) * self.delta)
        return min(self.eps_max, self.start * self.factor ** (epoch - 1))


def detect_loss_jump(losses, ratio: float) -> int | None:
    """First 1-based epoch whose loss is at least ``ratio`` times the previous epoch's."""
    for i in range(1, len(losses)):
        prev = losses[i - 1]
        if prev > 0 and losses[i] / prev >= ratio:
            return i + 1
    return None


def train_iat(p0: Params, ds: Dataset, cfg: TrainConfig, sched: EpsSchedule,
              max_epochs: int | None = None) -> tuple[Params, TrainReport, int | None]:
    """Grow epsilon per epoch; optionally halt at a sudden training-loss jump.

    When the jump rule fires at epoch e, the parameters from the end of epoch
    e-1 are returned and ``stop_epoch`` is e.
    """
    epochs = max_epochs or cfg.epochs
    saved: dict[int, Params] = {0: p0.copy()}
    state = {"stop": None}

    def on_epoch(epoch, params, report):
        saved[epoch] = params
        saved.pop(epoch - 2, None)
        if sched.stop_ratio is None:
            return False
        hit = detect_loss_jump(report.adv_losses[-2:], sched.stop_ratio)
        if hit is not None:
            state["stop"] = epoch
            return True
        return False

    params, report = _run(p0, ds, cfg, sched.eps_at, epochs, on_epoch=on_epoch)
    if state["stop"] is not None:
        params = saved[state["stop"] - 1]
        report.params = params
        report.stop_epoch = state["stop"]
    return params, report, state["stop"]


def convergence_report(report: TrainReport) -> dict:
    if len(report.records) < 2:
        raise ValueError("need at least two epochs")
    losses = np.array(report.adv_losses)
    return {
        "loss_deltas": np.diff(losses).tolist(),
        "weight_deltas": report.weight_deltas[1:],
    }


def evaluate(p: Params, ds: Dataset, pset: PerturbationSet, acfg: attacks.AttackConfig | None,
             seed: int = 0, chunk: int = 500) -> dict:
    """Clean and robust accuracy of ``p`` on ``ds`` under a PGD attack."""
    clean = attacks.clean_correct(p, ds.inputs, ds.labels)
    if pset.epsilon == 0 or acfg is None:
        return {"clean_accuracy": float(clean.mean()), "robust_accuracy": float(clean.mean())}
    ok = np.empty(len(ds), dtype=bool)
    for s in range(0, len(ds), chunk):
        xs, ys = ds.inputs[s:s + chunk], ds.labels[s:s + chunk]
        x_adv = attacks.pgd(p, xs, ys, pset, acfg, [seed, s])
        ok[s:s + chunk] = attacks.robust_correct(p, xs, ys, x_adv)
    return {"clean_accuracy": float(clean.mean()), "robust_accuracy": float(ok.mean())}


def final_adv_loss(report: TrainReport) -> float:
    return report.adv_losses[-1] if report.records else math.nan
