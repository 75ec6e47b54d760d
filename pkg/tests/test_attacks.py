import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustlab import attacks
from robustlab.attacks import AttackConfig, PerturbationSet, l2, linf
from robustlab.tensornet import Architecture, batch_loss, init_params


def corner_worst_loss(p, x, y, eps, clamp01=True):
    """Exhaustive enumeration of the (box-clipped) l-inf ball corners."""
    d = x.size
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=d)))
    pts = x[None] + eps * signs
    if clamp01:
        pts = np.clip(pts, 0, 1)
    return batch_loss(p, pts, np.full(len(pts), y)).max()


@pytest.fixture
def binary_linear():
    return init_params(Architecture((10, 2)), "glorot_uniform", seed=5)


def test_presets():
    assert attacks.training_steps(0.3) == 15
    assert attacks.training_steps(0.4) == 20
    assert attacks.preset("train-pgd", 0.3) == AttackConfig(15, 0.05)
    assert attacks.preset("eval-200") == AttackConfig(200, 0.05)
    assert attacks.preset("strong-pgd") == AttackConfig(1000, 0.01)
    assert attacks.preset("actual-grad") == AttackConfig(2000, 5e4, signed=False)
    assert attacks.preset("l2-eval") == AttackConfig(125, 0.1)
    with pytest.raises(KeyError):
        attacks.preset("cw")
    with pytest.raises(ValueError):
        attacks.preset("train-pgd")


def test_bad_configs():
    with pytest.raises(ValueError):
        PerturbationSet(1, 0.3)
    with pytest.raises(ValueError):
        PerturbationSet(attacks.INF, -0.1)
    with pytest.raises(ValueError):
        AttackConfig(0, 0.1)
    with pytest.raises(ValueError):
        attacks.project(np.zeros(3), PerturbationSet(0, 1))


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(0.01, 1.0), p=st.sampled_from([2, attacks.INF]), seed=st.integers(0, 10_000),
       clamp=st.booleans())
def test_pgd_stays_in_ball_and_box(eps, p, seed, clamp):
    small_net = init_params(Architecture((6, 5, 3)), seed=1)
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(4, 6))
    y = rng.integers(0, 3, size=4)
    pset = PerturbationSet(p, eps, clamp)
    x_adv = attacks.pgd(small_net, x, y, pset, AttackConfig(5, 0.2), seed)
    norms = np.abs(x_adv - x).max(1) if p == attacks.INF else np.linalg.norm(x_adv - x, axis=1)
    assert np.all(norms <= eps + 1e-9)
    if clamp:
        assert x_adv.min() >= 0 and x_adv.max() <= 1


def test_l2_projection():
    d = np.array([[3.0, 4.0], [0.3, 0.4]])
    out = attacks.project(d, l2(1.0))
    np.testing.assert_allclose(out[0], [0.6, 0.8])
    np.testing.assert_allclose(out[1], [0.3, 0.4])


def test_zero_budget_is_identity(small_net):
    x = np.random.default_rng(0).uniform(size=(3, 6))
    y = np.array([0, 1, 2])
    np.testing.assert_array_equal(attacks.pgd(small_net, x, y, linf(0.0), AttackConfig(5, 0.1)), x)
    np.testing.assert_array_equal(attacks.fgsm(small_net, x, y, linf(0.0)), x)
    np.testing.assert_array_equal(attacks.random_search_attack(small_net, x, y, linf(0.0), 10), x)
    np.testing.assert_array_equal(attacks.random_search_attack(small_net, x, y, linf(0.2), 0), x)
    bf = attacks.brute_force_attack(small_net, x, y, 0.0, 10)
    np.testing.assert_array_equal(batch_loss(small_net, bf, y), batch_loss(small_net, x, y))


def test_pgd_deterministic(small_net):
    x = np.random.default_rng(0).uniform(size=(3, 6))
    y = np.array([0, 1, 2])
    cfg = AttackConfig(7, 0.05, restarts=2)
    a = attacks.pgd(small_net, x, y, linf(0.3), cfg, seed=11)
    b = attacks.pgd(small_net, x, y, linf(0.3), cfg, seed=11)
    np.testing.assert_array_equal(a, b)


def test_single_vector_round_trip(small_net):
    x = np.full(6, 0.5)
    out = attacks.pgd(small_net, x, 1, linf(0.1), AttackConfig(3, 0.05))
    assert out.shape == (6,)


def test_fgsm_linear_closed_form(binary_linear):
    # for two classes the input gradient of the loss is proportional to w_other - w_true
    x = np.full(10, 0.5)
    w, _ = binary_linear.layers()[0]
    expected = np.clip(x + 0.2 * np.sign(w[:, 1] - w[:, 0]), 0, 1)
    np.testing.assert_allclose(attacks.fgsm(binary_linear, x, 0, linf(0.2)), expected)


def test_pgd_reaches_corner_optimum_on_linear_binary(binary_linear):
    x = np.random.default_rng(1).uniform(0.2, 0.8, size=10)
    best = corner_worst_loss(binary_linear, x, 0, 0.15)
    x_adv = attacks.pgd(binary_linear, x, 0, linf(0.15), AttackConfig(20, 0.05, random_start=False))
    assert batch_loss(binary_linear, x_adv[None], np.array([0]))[0] == pytest.approx(best, abs=1e-9)


def test_random_search_reaches_corner_optimum(binary_linear):
    x = np.random.default_rng(2).uniform(size=10)
    best = corner_worst_loss(binary_linear, x, 1, 0.2)
    x_adv = attacks.random_search_attack(binary_linear, x, 1, linf(0.2), n_queries=400, seed=0)
    assert batch_loss(binary_linear, x_adv[None], np.array([1]))[0] == pytest.approx(best, abs=1e-6)


def test_no_attack_beats_corner_oracle(binary_linear):
    rng = np.random.default_rng(3)
    x = rng.uniform(size=10)
    best = corner_worst_loss(binary_linear, x, 0, 0.25)
    cands = [attacks.pgd(binary_linear, x, 0, linf(0.25), AttackConfig(30, 0.05), seed=s) for s in range(3)]
    cands.append(attacks.brute_force_attack(binary_linear, x, 0, 0.25, 64, seed=0))
    cands.append(attacks.fgsm(binary_linear, x, 0, linf(0.25)))
    for c in cands:
        assert batch_loss(binary_linear, c[None], np.array([0]))[0] <= best + 1e-12


def test_brute_force_single_sample_deterministic(small_net):
    x = np.random.default_rng(4).uniform(size=6)
    a = attacks.brute_force_attack(small_net, x, 0, 0.3, 1, seed=9)
    b = attacks.brute_force_attack(small_net, x, 0, 0.3, 1, seed=9)
    np.testing.assert_array_equal(a, b)


def test_brute_force_never_exceeds_exhaustive(small_net):
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(5, 6))
    y = rng.integers(0, 3, size=5)
    bf = attacks.brute_force_attack(small_net, x, y, 0.3, 20, seed=1)
    got = batch_loss(small_net, bf, y)
    for i in range(5):
        assert got[i] <= max(corner_worst_loss(small_net, x[i], y[i], 0.3),
                             batch_loss(small_net, x[i:i + 1], y[i:i + 1])[0]) + 1e-12


def test_targeted_two_classes_matches_untargeted_direction(binary_linear):
    x = np.random.default_rng(6).uniform(0.2, 0.8, size=(4, 10))
    y = np.array([0, 1, 0, 1])
    cfg = AttackConfig(10, 0.05, random_start=False)
    a = attacks.targeted_pgd(binary_linear, x, y, linf(0.1), cfg)
    b = attacks.pgd(binary_linear, x, y, linf(0.1), cfg)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_restarts_never_lower_loss(small_net):
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(6, 6))
    y = rng.integers(0, 3, size=6)
    one = attacks.pgd(small_net, x, y, linf(0.2), AttackConfig(5, 0.05, restarts=1), seed=3)
    many = attacks.pgd(small_net, x, y, linf(0.2), AttackConfig(5, 0.05, restarts=4), seed=3)
    assert np.all(batch_loss(small_net, many, y) >= batch_loss(small_net, one, y) - 1e-12)


def test_unsigned_steps_follow_raw_gradient(binary_linear):
    x = np.full(10, 0.5)
    out = attacks.pgd(binary_linear, x, 0, linf(10.0, clamp01=False), AttackConfig(1, 1e-3, signed=False,
                                                                                   random_start=False))
    from robustlab.tensornet import grad_input

    np.testing.assert_allclose(out, x + 1e-3 * grad_input(binary_linear, x, 0))


def test_transfer_same_model_is_white_box(small_net):
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(10, 6))
    y = rng.integers(0, 3, size=10)
    cfg = AttackConfig(5, 0.05)
    res = attacks.transfer_attack(small_net, small_net, x, y, linf(0.2), cfg, seed=4)
    wb = attacks.pgd(small_net, x, y, linf(0.2), cfg, seed=4)
    assert res["accuracy"] == attacks.robust_accuracy(small_net, x, y, wb)
    res0 = attacks.transfer_attack(small_net, small_net, x, y, linf(0.0), cfg)
    assert res0["accuracy"] == res0["clean_accuracy"]


def test_transfer_dim_mismatch(small_net, linear_net):
    with pytest.raises(ValueError):
        attacks.transfer_attack(small_net, linear_net, np.zeros((1, 6)), [0], linf(0.1), AttackConfig(1, 0.1))


def test_robust_correct_requires_clean_correct(small_net):
    x = np.random.default_rng(9).uniform(size=(20, 6))
    pred = attacks.clean_correct(small_net, x, np.zeros(20, int))
    rc = attacks.robust_correct(small_net, x, np.zeros(20, int), x)
    np.testing.assert_array_equal(pred, rc)
