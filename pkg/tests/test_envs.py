import math

import numpy as np
import pytest

from cmgp.envs import Box, SimpleGoal, make_env


def test_shaping_reward_example():
    env = SimpleGoal()
    env.set_position(0.5, 0.8)
    obs, reward, terminated, truncated = env.step([-1.0, -1.0])
    assert obs == pytest.approx([0.4, 0.7])
    want = 10 * (math.hypot(0.4, 0.7) - math.hypot(0.3, 0.6))
    assert reward == pytest.approx(want) and reward == pytest.approx(1.3541, abs=1e-4)
    assert not terminated and not truncated


def test_forbidden_square_ends_episode():
    env = SimpleGoal()
    env.set_position(0.35, 0.5)
    _, reward, terminated, _ = env.step([1.0, 0.0])
    assert reward == -10.0 and terminated
    with pytest.raises(RuntimeError):
        env.step([0.0, 0.0])


def test_forbidden_boundary_is_open():
    env = SimpleGoal()
    env.set_position(0.3, 0.5)
    _, reward, terminated, _ = env.step([1.0, 0.0])  # lands on x = 0.4 exactly
    assert not terminated and reward != -10.0


def test_goal_adds_bonus():
    env = SimpleGoal()
    env.set_position(0.15, 0.12)
    _, reward, terminated, _ = env.step([-1.0, -1.0])
    old = math.hypot(0.05, 0.02)
    assert terminated and reward == pytest.approx(10 * old + 10)


def test_walls_clamp_without_penalty():
    env = SimpleGoal()
    env.set_position(0.95, 0.02)
    obs, reward, _, _ = env.step([1.0, -1.0])
    assert obs.tolist() == [1.0, 0.0]
    assert reward == pytest.approx(10 * (0.85 - 0.9))


def test_actions_are_clipped():
    a, b = SimpleGoal(), SimpleGoal()
    a.set_position(0.8, 0.8)
    b.set_position(0.8, 0.8)
    assert np.array_equal(a.step([5.0, -7.0]).observation, b.step([1.0, -1.0]).observation)


def test_truncation_after_max_steps():
    env = SimpleGoal()
    env.reset(seed=0)
    env.set_position(0.9, 0.9)
    flags = []
    for _ in range(50):
        _, _, terminated, truncated = env.step([0.0, 0.0])
        flags.append((terminated, truncated))
    assert flags[-1] == (False, True) and not any(t for _, t in flags[:-1])
    assert env.total_steps == 50


def test_resets_avoid_goal_and_forbidden():
    env = SimpleGoal(seed=0)
    starts = np.array([env.reset() for _ in range(10_000)])
    assert not np.any((starts[:, 0] < 0.1) & (starts[:, 1] < 0.1))
    inside = np.all((starts >= 0.4) & (starts <= 0.6), axis=1)
    assert not inside.any()
    assert starts.min() >= 0 and starts.max() <= 1


def test_seeded_reset_is_reproducible():
    a, b = SimpleGoal(), SimpleGoal()
    assert np.array_equal(a.reset(seed=5), b.reset(seed=5))
    rng = np.random.default_rng(0)
    for _ in range(20):
        act = rng.uniform(-1, 1, 2)
        ra, rb = a.step(act), b.step(act)
        assert np.array_equal(ra.observation, rb.observation) and ra.reward == rb.reward
        if ra.terminated or ra.truncated:
            break


def test_origin_distance_mode():
    env = SimpleGoal(distance="origin")
    env.set_position(0.5, 0.8)
    _, reward, _, _ = env.step([-1.0, -1.0])
    assert reward == pytest.approx(10 * (math.hypot(0.5, 0.8) - math.hypot(0.4, 0.7)))
    with pytest.raises(ValueError):
        SimpleGoal(distance="manhattan")


def test_spaces_and_factory():
    env = make_env("SimpleGoal", max_steps=7)
    assert env.max_steps == 7
    assert env.observation_space == Box(0.0, 1.0, (2,))
    assert env.action_space.contains([1.0, -1.0]) and not env.action_space.contains([1.1, 0.0])
    assert env.action_space.contains(env.action_space.sample(np.random.default_rng(0)))
    with pytest.raises(ValueError):
        make_env("Pendulum")
