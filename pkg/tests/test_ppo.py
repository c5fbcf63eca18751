import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsma_isac.env import IsacEnv, Scenario
from rsma_isac.ppo import (ExperiencePool, Learner, PpoConfig, TrainingTrace, Transition,
                           advantage, clip_by_global_norm, clipped_objective, converged,
                           gaussian_logprob, initial, make_learner, probability_ratio,
                           surrogate_gradients, train, update)


def test_advantage_examples():
    assert advantage(2.0, 1.0, 0.5, 0.9) == pytest.approx(2.4)
    assert advantage(3.0, 123.0, 1.25, 0.0) == 1.75
    assert advantage(0.7, 4.0, 4.0, 1.0) == pytest.approx(0.7)


def test_clipped_objective_examples():
    assert clipped_objective(1.0, 0.8, 0.2) == 0.8
    assert clipped_objective(1.5, 1.0, 0.2) == pytest.approx(1.2)
    # both branches: 0.5 * -1 = -0.5 and 0.8 * -1 = -0.8; the min is the clipped one
    assert clipped_objective(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    assert clipped_objective(0.5, 1.0, 0.2) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(ratio=st.floats(0.0, 5.0), adv=st.floats(-10, 10), clip=st.floats(0.01, 0.99))
def test_clipped_objective_never_exceeds_unclipped(ratio, adv, clip):
    val = float(clipped_objective(ratio, adv, clip))
    assert val <= ratio * adv + 1e-12
    lo, hi = sorted((ratio * adv, min(max(ratio, 1 - clip), 1 + clip) * adv))
    assert val == pytest.approx(lo)


def _oracle_logpdf(a, mean, log_std):
    total = 0.0
    for ai, mi, li in zip(a, mean, log_std):
        sd = math.exp(li)
        total += math.log(math.exp(-0.5 * ((ai - mi) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)))
    return total


def _small(seed=0, **kw):
    cfg = PpoConfig(hidden=(8, 8), **kw)
    return Learner(5, 3, cfg, seed)


def test_ratio_identity_and_oracle():
    rng = np.random.default_rng(0)
    learner = _small()
    S, A = rng.normal(size=(6, 5)), rng.normal(size=(6, 3))
    assert np.all(probability_ratio(learner, learner.snapshot(), S, A) == 1.0)

    other = learner.snapshot()
    other.actor.weights[-1] += rng.normal(0, 0.3, other.actor.weights[-1].shape)
    other.log_std = other.log_std + rng.normal(0, 0.2, 3)
    got = np.log(probability_ratio(other, learner, S, A))
    want = [_oracle_logpdf(a, other.actor(s), other.log_std)
            - _oracle_logpdf(a, learner.actor(s), learner.log_std) for s, a in zip(S, A)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)


def test_ratio_grows_when_mean_moves_toward_action():
    learner = _small()
    s = np.ones(5)
    a = learner.actor(s) + 0.5
    moved = learner.snapshot()
    moved.actor.biases[-1] += 0.2
    assert probability_ratio(moved, learner, s[None], a[None])[0] > 1.0


def test_ratio_rejects_non_finite():
    learner = _small()
    broken = learner.snapshot()
    broken.log_std = np.full(3, -np.inf)
    with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
        probability_ratio(broken, learner, np.ones((1, 5)), np.ones((1, 3)))


def test_gaussian_logprob_batch_matches_rows():
    rng = np.random.default_rng(1)
    mean, a, ls = rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), rng.normal(0, 0.3, 3)
    batch = gaussian_logprob(a, mean, ls)
    for i in range(4):
        assert batch[i] == pytest.approx(_oracle_logpdf(a[i], mean[i], ls), abs=1e-12)


def _objective(learner, s, a, old_lp, adv, clip):
    ratio = np.exp(learner.logprob(s, a) - old_lp)
    return float(np.mean(clipped_objective(ratio, adv, clip)))


@pytest.mark.parametrize("adv", [1.3, -0.8])
def test_surrogate_gradient_matches_finite_differences(adv):
    rng = np.random.default_rng(2)
    learner = _small(3)
    for p in learner.actor.params:
        p[...] = rng.normal(0, 0.3, p.shape)
    s, a = rng.normal(size=(1, 5)), rng.normal(size=(1, 3))
    old_lp = learner.logprob(s, a) - 0.05     # ratio ~1.05, inside the clip window
    advs = np.array([adv])
    _, grads, g_ls, _ = surrogate_gradients(learner, s, a, old_lp, advs, 0.2)
    h = 1e-6
    for p, g in zip(learner.actor.params + [learner.log_std], grads + [g_ls]):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = _objective(learner, s, a, old_lp, advs, 0.2)
            p[i] = old - h
            down = _objective(learner, s, a, old_lp, advs, 0.2)
            p[i] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - g[i]) <= 1e-3 * max(abs(fd), abs(g[i])) + 1e-9


def test_surrogate_gradient_vanishes_when_clipped():
    learner = _small(4)
    s, a = np.ones((1, 5)), np.zeros((1, 3))
    old_lp = learner.logprob(s, a) - 1.0      # ratio e > 1 + clip
    _, grads, g_ls, ratio = surrogate_gradients(learner, s, a, old_lp, np.array([1.0]), 0.2)
    assert ratio[0] > 1.2
    assert all(np.all(g == 0) for g in grads) and np.all(g_ls == 0)


def _filled_pool(learner, n, seed=0, reward=None):
    rng = np.random.default_rng(seed)
    pool = ExperiencePool(n)
    for t in range(n):
        s, s2 = rng.normal(size=5), rng.normal(size=5)
        a, lp = learner.act(s, rng)
        r = float(rng.uniform(0, 5)) if reward is None else reward
        pool.add(Transition(s, a, lp, r, s2, False))
    return pool


def test_pool_capacity_and_clearing():
    learner = _small()
    pool = _filled_pool(learner, 4)
    assert pool.full and len(pool) == 4
    with pytest.raises(OverflowError):
        pool.add(pool.items[0])
    with pytest.raises(ValueError):
        ExperiencePool(0)
    update(learner, pool, np.random.default_rng(0), 4)
    assert len(pool) == 0


def test_update_requires_enough_transitions():
    learner = _small()
    pool = _filled_pool(learner, 3)
    with pytest.raises(ValueError):
        update(learner, pool, np.random.default_rng(0), 4)


def test_first_epoch_ratio_is_one():
    learner = _small(epochs=3)
    d = update(learner, _filled_pool(learner, 32), np.random.default_rng(0), 32)
    assert d.first_epoch_ratio == pytest.approx(1.0, abs=1e-6)


def test_zero_advantage_leaves_actor_unchanged():
    learner = _small(discount=0.0)
    before = learner.snapshot()
    pool = _filled_pool(learner, 16, reward=0.0)   # critic output starts at 0
    update(learner, pool, np.random.default_rng(0), 8)
    for p, q in zip(learner.actor.params, before.actor.params):
        assert np.array_equal(p, q)
    assert np.array_equal(learner.log_std, before.log_std)


def test_critic_loss_decreases_on_frozen_pool():
    learner = _small(epochs=5, lr_critic=1e-2, discount=0.0)
    d = update(learner, _filled_pool(learner, 32), np.random.default_rng(0), 32)
    losses = d.epoch_value_losses
    assert len(losses) == 5
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_clip_by_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    out = clip_by_global_norm(g, 1.0)
    assert math.hypot(out[0][0], out[1][0]) == pytest.approx(1.0)
    assert clip_by_global_norm(g, 10.0) is g
    assert clip_by_global_norm(g, None) is g


def test_config_validation():
    for bad in (dict(discount=1.5), dict(clip=0.0), dict(clip=1.0), dict(minibatch=0),
                dict(max_grad_norm=0.0)):
        with pytest.raises(ValueError):
            PpoConfig(**bad)


def _tiny_config(**kw):
    base = dict(episodes=2, episode_length=3, hidden=(8,), minibatch=2, epochs=2)
    base.update(kw)
    return PpoConfig(**base)


def test_train_loop_accounting():
    env = IsacEnv(Scenario())
    cfg = _tiny_config()
    trace = train(env, make_learner(env, cfg, 0), cfg, 0)
    assert len(trace) == 2
    assert trace.interactions == 6
    assert len(trace.diagnostics) == 2      # one update per full pool of 3


def test_train_is_bit_reproducible(tmp_path):
    cfg = _tiny_config(episodes=3, episode_length=10, minibatch=5)
    paths = []
    for i in range(2):
        env = IsacEnv(Scenario())
        trace = train(env, make_learner(env, cfg, 7), cfg, 7)
        paths.append(tmp_path / f"t{i}.csv")
        trace.to_csv(paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_trace_csv_roundtrip(tmp_path):
    env = IsacEnv(Scenario())
    cfg = _tiny_config()
    trace = train(env, make_learner(env, cfg, 1), cfg, 1)
    path = tmp_path / "trace.csv"
    trace.to_csv(path, policy="ppo")
    header = path.read_text().splitlines()[0]
    assert header == ("episode,mean_reward,mean_ee,mean_sum_rate,mean_echo_snr_db,"
                      "violation_fraction,policy")
    back = TrainingTrace.from_csv(path)
    assert back.mean_reward == trace.mean_reward
    assert back.violation_fraction == trace.violation_fraction


def test_trace_rewards_are_gated():
    env = IsacEnv(Scenario())
    cfg = _tiny_config(episodes=2, episode_length=20, minibatch=10)
    trace = train(env, make_learner(env, cfg, 2), cfg, 2)
    for r, v in zip(trace.mean_reward, trace.violation_fraction):
        assert r >= 0
        if v == 1.0:
            assert r == 0.0


def test_window_means():
    vals = list(range(1, 21))
    assert converged(vals) == 19.5
    assert initial(vals) == 1.5
    assert converged([4.0]) == 4.0
