"""Loss-landscape probes: parameter-space interpolation, input-space surfaces, saliency."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import attacks
from .attacks import AttackConfig, PerturbationSet
from .tensornet import Params, batch_loss, input_loss_and_grad
from .training import inner_max

DEFAULT_PROFILE_ATTACK = "profile-pgd"


@dataclass
class LandscapeProfile:
    alphas: np.ndarray
    losses: np.ndarray
    eps_eval: float
    batch_ref: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.alphas) != len(self.losses):
            raise ValueError("alphas and losses differ in length")
        if np.any(np.diff(self.alphas) <= 0):
            raise ValueError("alphas must be strictly increasing")

    def second_differences(self) -> np.ndarray:
        return np.diff(self.losses, n=2)

    def is_convex(self, tol: float = -1e-6) -> bool:
        return bool(np.all(self.second_differences() >= tol))

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in {**self.meta, **(header or {})}.items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh)
            w.writerow(["alpha", "loss"])
            for a, l in zip(self.alphas, self.losses):
                w.writerow([repr(float(a)), repr(float(l))])


@dataclass
class InputSurface:
    adv_coefs: np.ndarray
    rand_coefs: np.ndarray
    losses: np.ndarray  # (len(adv_coefs), len(rand_coefs))
    adv_direction: np.ndarray
    rand_direction: np.ndarray
    meta: dict = field(default_factory=dict)

    def max_jump(self) -> float:
        """Largest absolute difference between grid neighbours."""
        jumps = [np.abs(np.diff(self.losses, axis=a)).max(initial=0.0) for a in (0, 1)]
        return float(max(jumps))

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in {**self.meta, **(header or {})}.items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh)
            w.writerow(["adv_coef", "rand_coef", "loss"])
            for i, a in enumerate(self.adv_coefs):
                for j, b in enumerate(self.rand_coefs):
                    w.writerow([repr(float(a)), repr(float(b)), repr(float(self.losses[i, j]))])


def adversarial_loss(p: Params, x, y, pset: PerturbationSet, acfg: AttackConfig | None, seed=0) -> float:
    """Mean worst-case loss on a batch (the clean point counts as a candidate)."""
    _, adv, _ = inner_max(p, np.atleast_2d(x), np.atleast_1d(y), pset, acfg, seed)
    return float(np.mean(adv))


def _check_pair(theta0: Params, theta1: Params):
    if theta0.arch != theta1.arch or theta0.values.shape != theta1.values.shape:
        raise ValueError("parameter vectors come from different architectures")


def interpolate_loss(theta0: Params, theta1: Params, pset: PerturbationSet, acfg: AttackConfig | None,
                     batch, n_points: int = 200, seed=0) -> LandscapeProfile:
    """Adversarial loss along (1 - a) * theta0 + a * theta1 for a on a uniform grid in [0, 1].

    Every grid point reuses the same attack seed, so the endpoints reproduce
    ``adversarial_loss`` at theta0 and theta1 exactly.
    """
    _check_pair(theta0, theta1)
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if acfg is None and pset.epsilon > 0:
        acfg = attacks.preset(DEFAULT_PROFILE_ATTACK)
    x, y = batch
    alphas = np.linspace(0.0, 1.0, n_points)
    losses = np.empty(n_points)
    for i, a in enumerate(alphas):
        if i == 0:
            p = theta0
        elif i == n_points - 1:
            p = theta1
        else:
            p = theta0.with_values((1 - a) * theta0.values + a * theta1.values)
        losses[i] = adversarial_loss(p, x, y, pset, acfg, seed)
    meta = {"eps_eval": pset.epsilon, "p": pset.p, "attack_steps": acfg.steps if acfg else 0,
            "attack_lr": acfg.lr if acfg else 0, "batch_size": len(y), "seed": seed}
    return LandscapeProfile(alphas, losses, pset.epsilon, f"n={len(y)}", meta)


def mode_connectivity_profile(theta0: Params, theta1: Params, eps_initial: float, batch,
                              n_points: int = 200, acfg: AttackConfig | None = None,
                              p: float = attacks.INF, clamp01: bool = True, seed=0) -> LandscapeProfile:
    """Interpolation profile scored at the budget the first model was trained for."""
    return interpolate_loss(theta0, theta1, PerturbationSet(p, eps_initial, clamp01), acfg, batch, n_points, seed)


def symmetric_grid(extent: float, n: int) -> np.ndarray:
    """n coefficients in [-extent, extent], exactly symmetric about 0."""
    if n < 1:
        raise ValueError("grid needs at least one point")
    if n == 1:
        return np.zeros(1)
    half = (n - 1) / 2
    return extent * ((np.arange(n) - half) / half)


def input_surface(p: Params, x, y, pset: PerturbationSet, grid_n: int = 100, seed=0,
                  extent: float | None = None, adv_direction=None, rand_direction=None) -> InputSurface:
    """Loss on the plane spanned by sign(grad_x loss) and a random +-1 pattern through x.

    Both directions have unit l-inf norm; coefficients run over
    [-extent, extent] with extent = epsilon / 2 by default. No box clamp is
    applied, so the surface is the loss of the raw network input.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    _, g = input_loss_and_grad(p, x[None], np.atleast_1d(y))
    u = np.sign(g[0]) if adv_direction is None else np.asarray(adv_direction, float)
    rng = np.random.default_rng(seed)
    v = rng.integers(0, 2, size=x.size) * 2.0 - 1.0 if rand_direction is None else np.asarray(rand_direction, float)
    ext = pset.epsilon / 2 if extent is None else extent
    a = symmetric_grid(ext, grid_n)
    b = symmetric_grid(ext, grid_n)
    losses = np.empty((grid_n, grid_n))
    for i, ai in enumerate(a):
        pts = x[None] + ai * u[None] + b[:, None] * v[None]
        losses[i] = batch_loss(p, pts, np.full(grid_n, int(np.atleast_1d(y)[0])))
    meta = {"direction_norm": "linf-unit sign vectors", "extent": ext, "grid_n": grid_n, "seed": seed}
    return InputSurface(a, b, losses, u, v, meta)


def saliency(p: Params, x, y, at_perturbed: PerturbationSet | None = None, acfg: AttackConfig | None = None,
             seed=0) -> np.ndarray:
    """Input gradient of the loss, at x or at its PGD perturbation."""
    xb = np.atleast_2d(np.asarray(x, dtype=np.float64))
    yb = np.atleast_1d(y)
    if at_perturbed is not None and at_perturbed.epsilon > 0:
        acfg = acfg or attacks.preset("train-pgd", at_perturbed.epsilon)
        xb = attacks.pgd(p, xb, yb, at_perturbed, acfg, seed)
    _, g = input_loss_and_grad(p, xb, yb)
    return g[0] if np.ndim(x) == 1 else g


def box_concentration(sal: np.ndarray, x: np.ndarray, shape=(28, 28), threshold: float = 0.1) -> float:
    """Share of the saliency l1 mass inside the bounding box of the image's ink."""
    img = np.asarray(x).reshape(shape)
    s = np.abs(np.asarray(sal)).reshape(shape)
    total = s.sum()
    rows, cols = np.nonzero(img > threshold)
    if total == 0 or rows.size == 0:
        return 0.0
    return float(s[rows.min():rows.max() + 1, cols.min():cols.max() + 1].sum() / total)


def saliency_to_csv(sal: np.ndarray, path, shape=None, header: dict | None = None):
    sal = np.asarray(sal, float)
    grid = sal.reshape(shape) if shape else sal.reshape(1, -1)
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                w.writerow([r, c, repr(float(grid[r, c]))])
