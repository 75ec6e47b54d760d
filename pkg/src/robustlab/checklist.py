"""Sanity-check battery for robustness evaluations.

Each item compares an alternative attack against the reference training PGD.
``delta`` is reference accuracy minus alternative accuracy in percentage
points, so a positive delta means the alternative attack found more
adversarial examples. Delta items pass when delta <= ``max_delta``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import attacks
from .attacks import AttackConfig, PerturbationSet
from .data import Dataset
from .tensornet import Params

EPS_GRID = (0.1, 0.2, 0.3, 0.4)


@dataclass
class ChecklistItem:
    item: int
    name: str
    passed: bool
    values: dict = field(default_factory=dict)


@dataclass
class ChecklistReport:
    epsilon: float
    n_examples: int
    items: list[ChecklistItem] = field(default_factory=list)

    def get(self, item: int) -> ChecklistItem:
        return next(i for i in self.items if i.item == item)

    @property
    def all_passed(self) -> bool:
        return all(i.passed for i in self.items)

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps({"meta": meta or {}, **asdict(self)}, indent=2, sort_keys=True)


@dataclass(frozen=True)
class ChecklistConfig:
    max_delta: float = 3.0
    restarts: int = 10
    long_steps: int = 2000
    brute_samples: int = 1000
    random_queries: int = 500
    eps_grid: tuple = EPS_GRID
    distortion_grid: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.0)
    seed: int = 0


def _acc(p, x, y, x_adv) -> float:
    return 100.0 * attacks.robust_accuracy(p, x, y, x_adv)


def _delta_item(item, name, ref, alt, max_delta, **extra) -> ChecklistItem:
    delta = ref - alt
    return ChecklistItem(item, name, delta <= max_delta, {"reference": ref, "alternative": alt, "delta": delta, **extra})


def evaluate_checklist(model: Params, baseline_model: Params, ds: Dataset, pset: PerturbationSet,
                       cfg: ChecklistConfig = ChecklistConfig(), surrogate: Params | None = None) -> ChecklistReport:
    """Run the battery on ``model``. ``baseline_model`` is a standard-trained reference;
    ``surrogate`` (default: the baseline) crafts the semi-black-box examples."""
    if pset.p != attacks.INF:
        raise ValueError("the battery is defined for l-inf budgets")
    x, y = ds.inputs, ds.labels
    eps, s = pset.epsilon, cfg.seed
    ref_cfg = attacks.preset("train-pgd", eps)
    x_ref = attacks.pgd(model, x, y, pset, ref_cfg, attacks.child_seed(s, 0))
    ref = _acc(model, x, y, x_ref)
    report = ChecklistReport(eps, len(ds))
    add = report.items.append

    # 1: PGD at least as strong as FGSM
    fg = _acc(model, x, y, attacks.fgsm(model, x, y, pset))
    add(ChecklistItem(1, "pgd_not_weaker_than_fgsm", ref <= fg, {"pgd": ref, "fgsm": fg}))

    # 2: an unbounded budget (the whole pixel box) drives accuracy to zero
    unb = PerturbationSet(attacks.INF, 1.0, True)
    acc_unb = _acc(model, x, y, attacks.pgd(model, x, y, unb, attacks.preset("train-pgd", 1.0), attacks.child_seed(s, 2)))
    add(ChecklistItem(2, "unbounded_attack_zero", acc_unb == 0.0, {"accuracy": acc_unb}))

    # 3: random start vs none
    alt = _acc(model, x, y, attacks.pgd(model, x, y, pset, replace(ref_cfg, random_start=False), attacks.child_seed(s, 3)))
    add(_delta_item(3, "random_start", ref, alt, cfg.max_delta))

    # 4: many restarts
    alt = _acc(model, x, y, attacks.pgd(model, x, y, pset, replace(ref_cfg, restarts=cfg.restarts), attacks.child_seed(s, 4)))
    add(_delta_item(4, "restarts", ref, alt, cfg.max_delta, restarts=cfg.restarts))

    # 5: many more steps at the training step size
    alt = _acc(model, x, y, attacks.pgd(model, x, y, pset, replace(ref_cfg, steps=cfg.long_steps), attacks.child_seed(s, 5)))
    add(_delta_item(5, "more_steps", ref, alt, cfg.max_delta, steps=cfg.long_steps))

    # 6: accuracy non-increasing in the budget
    sweep = [_acc(model, x, y, attacks.pgd(model, x, y, PerturbationSet(attacks.INF, e, pset.clamp01),
                                           attacks.preset("train-pgd", e), attacks.child_seed(s, 6, i)))
             for i, e in enumerate(cfg.eps_grid)]
    mono = all(b <= a for a, b in zip(sweep, sweep[1:]))
    add(ChecklistItem(6, "monotone_in_epsilon", mono, {"eps": list(cfg.eps_grid), "accuracy": sweep}))

    # 7: best-of-targets PGD
    alt = _acc(model, x, y, attacks.targeted_pgd(model, x, y, pset, ref_cfg, attacks.child_seed(s, 7)))
    add(_delta_item(7, "targeted", ref, alt, cfg.max_delta))

    # 8: random corners of the ball
    alt = _acc(model, x, y, attacks.brute_force_attack(model, x, y, eps, cfg.brute_samples, attacks.child_seed(s, 8),
                                                       pset.clamp01))
    add(_delta_item(8, "brute_force", ref, alt, cfg.max_delta, samples=cfg.brute_samples))

    # 9: smallest budget that zeroes accuracy, model vs baseline
    def zeroing_eps(m, tag):
        for i, e in enumerate(cfg.distortion_grid):
            ps = PerturbationSet(attacks.INF, e, pset.clamp01)
            xa = attacks.pgd(m, x, y, ps, attacks.preset("train-pgd", e), attacks.child_seed(s, 9, tag, i))
            if _acc(m, x, y, xa) == 0.0:
                return e
        return None

    zm, zb = zeroing_eps(model, 0), zeroing_eps(baseline_model, 1)
    ok9 = zm is None or (zb is not None and zm >= zb)
    add(ChecklistItem(9, "min_distortion", ok9, {"model": zm, "baseline": zb}))

    # 10: gradient-free search
    alt = _acc(model, x, y, attacks.random_search_attack(model, x, y, pset, cfg.random_queries, attacks.child_seed(s, 10)))
    add(_delta_item(10, "gradient_free", ref, alt, cfg.max_delta, queries=cfg.random_queries))

    # 11: black-box transfer from the baseline must not beat white-box
    bb = attacks.transfer_attack(baseline_model, model, x, y, pset, ref_cfg, attacks.child_seed(s, 11))
    add(_delta_item(11, "black_box", ref, 100.0 * bb["accuracy"], cfg.max_delta))

    # 12: semi-black-box transfer, reported
    src = surrogate if surrogate is not None else baseline_model
    sb = attacks.transfer_attack(src, model, x, y, pset, ref_cfg, attacks.child_seed(s, 12))
    add(_delta_item(12, "semi_black_box", ref, 100.0 * sb["accuracy"], cfg.max_delta))
    return report
