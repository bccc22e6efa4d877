import math

import numpy as np
import pytest

from cmgp.agent import (
    ProgramPolicy,
    ReplayBuffer,
    RunConfig,
    constant_policy,
    evaluate_policy,
    run_episode,
    train,
)
from cmgp.envs import SimpleGoal
from cmgp.operators import OPERATOR_INDEX
from cmgp.program import Literal, Op, encode

SMALL = dict(hidden=(16, 16), batch_size=32, num_individuals=10, num_parents_mating=4, num_generations=3,
             eval_episodes=2, net_dtype="float64")


def small(**kw):
    return RunConfig(**{**SMALL, **kw})


# -- config ----------------------------------------------------------------------

def test_config_round_trip_and_validation():
    cfg = small(seed=3)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_dict({"arm": "cmgp", "learning_rate": 1.0})
    with pytest.raises(ValueError):
        RunConfig(arm="ppo")
    with pytest.raises(ValueError):
        RunConfig(total_steps=100, learning_starts=200)


# -- replay buffer -----------------------------------------------------------------

def test_replay_buffer_wraps_and_samples_without_replacement():
    buf = ReplayBuffer(2, 2, capacity=5)
    with pytest.raises(ValueError):
        buf.sample(1, np.random.default_rng(0))
    for i in range(8):
        buf.add([i, i], [0, 0], float(i), [i + 1, i + 1], i == 7)
    assert len(buf) == 5
    assert sorted(buf.rewards.tolist()) == [3, 4, 5, 6, 7]
    batch = buf.sample(10, np.random.default_rng(0))
    assert len(batch.rewards) == 5 and len(set(batch.rewards.tolist())) == 5
    assert np.array_equal(batch.next_states[:, 0], batch.states[:, 0] + 1)
    assert batch.dones[batch.rewards == 7].tolist() == [1.0]


# -- rollouts ----------------------------------------------------------------------

def test_diagonal_policy_from_far_corner_hits_forbidden_square():
    # straight down the diagonal passes (0.5, 0.5); hand rollout: three shaping
    # steps of 0.1 * sqrt(2) each, then the forbidden penalty
    env = SimpleGoal()
    ret, length = run_episode(constant_policy([-1, -1]), env, seed=0, start=(0.9, 0.9))
    assert length == 4
    assert ret == pytest.approx(10 * 3 * 0.1 * math.sqrt(2) - 10)


def test_down_left_policy_reaches_goal():
    env = SimpleGoal()
    ret, length = run_episode(constant_policy([-1, -1]), env, seed=0, start=(0.9, 0.3))
    assert length <= 10
    # shaping telescopes to 10 * start distance, plus the goal bonus
    assert ret == pytest.approx(10 * math.hypot(0.8, 0.2) + 10) and ret > 10


def test_zero_policy_returns_zero():
    mean, stderr = evaluate_policy(constant_policy([0, 0]), SimpleGoal(), episodes=5, seed=0)
    assert mean == 0.0 and stderr == 0.0
    env = SimpleGoal()
    assert run_episode(constant_policy([0, 0]), env, seed=1) == (0.0, 50)


def test_evaluate_policy_stderr():
    returns = [run_episode(constant_policy([-1, 0]), SimpleGoal(), seed=s)[0] for s in range(7)]
    mean, stderr = evaluate_policy(constant_policy([-1, 0]), SimpleGoal, episodes=7, seed=0)
    assert mean == pytest.approx(np.mean(returns))
    assert stderr == pytest.approx(np.std(returns, ddof=1) / math.sqrt(7))
    with pytest.raises(ValueError):
        evaluate_policy(constant_policy([0, 0]), episodes=0)


def test_program_policy_clips_and_averages():
    rng = np.random.default_rng(0)
    big = encode([Literal(5.0), Op(OPERATOR_INDEX["abs"])])  # |±5| = 5
    ident = encode([Op(OPERATOR_INDEX["id"])])  # x[1]
    policy = ProgramPolicy([big, ident], rng)
    states = np.array([[0.2, 0.7], [0.9, 0.1]])
    np.testing.assert_allclose(policy.raw(states), [[5.0, 0.7], [5.0, 0.1]], rtol=1e-12)
    np.testing.assert_allclose(policy.batch(states), [[1.0, 0.7], [1.0, 0.1]], rtol=1e-12)
    np.testing.assert_allclose(policy(states[0]), [1.0, 0.7], rtol=1e-12)


# -- training loops ------------------------------------------------------------------

@pytest.mark.parametrize("total,starts,freq", [(300, 100, 64), (260, 0, 128), (200, 200, 16)])
def test_cmgp_update_counts(total, starts, freq):
    res = train(small(total_steps=total, learning_starts=starts, policy_freq=freq, eval_episodes=0))
    assert res.critic_updates == total - starts
    assert res.ga_updates == (total - starts) // freq
    assert len(res.improvement_drift) == res.ga_updates
    assert len(res.ga_trace) == res.ga_updates * 2 * (3 + 1)
    assert res.interactions == total
    assert res.evolve_env_steps == [0] * res.ga_updates
    assert all(d <= 1.0 for d in res.improvement_drift)


def test_cmgp_is_reproducible():
    a = train(small(total_steps=200, learning_starts=50, policy_freq=50))
    b = train(small(total_steps=200, learning_starts=50, policy_freq=50))
    assert a.eval_mean == b.eval_mean
    assert all(np.array_equal(x, y) for x, y in zip(a.programs, b.programs))
    assert a.episodes == b.episodes
    c = train(small(total_steps=200, learning_starts=50, policy_freq=50, seed=2))
    assert c.episodes != a.episodes


def test_td3_actor_updates_every_second_critic_update():
    res = train(small(arm="td3", total_steps=150, learning_starts=50))
    assert res.critic_updates == 100 and res.actor_updates == 50
    assert res.programs is None and res.actor is not None
    assert res.eval_mean is not None


def test_gp_respects_interaction_budget():
    res = train(small(arm="gp", total_steps=1500, learning_starts=100, policy_freq=128, eval_episodes=0))
    assert res.ga_updates >= 1
    assert 1500 <= res.interactions <= 1500 + 50
    assert res.critic_updates == 0 and res.critics is None
    steps = [s for s, _ in res.episodes]
    assert steps == sorted(steps)
