"""SimpleGoal: continuous 2-D navigation towards a corner goal square."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Box:
    low: float
    high: float
    shape: tuple[int, ...]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, self.shape)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return x.shape == self.shape and bool(np.all((x >= self.low) & (x <= self.high)))


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool

    def __iter__(self):
        return iter((self.observation, self.reward, self.terminated, self.truncated))


class SimpleGoal:
    """Agent at (x, y) in the unit square moves by 0.1 * action per step.

    Shaping reward is 10 * (old distance - new distance) to the goal square
    ``x < 0.1, y < 0.1``. Reaching the goal adds 10 and ends the episode;
    entering the open square (0.4, 0.6)^2 ends it with reward -10. Episodes are
    truncated after ``max_steps``. Walls clamp the position without penalty.

    ``distance="region"`` measures distance to the nearest point of the goal
    square, ``distance="origin"`` to (0, 0).
    """

    goal = 0.1
    forbidden = (0.4, 0.6)
    step_scale = 0.1
    observation_space = Box(0.0, 1.0, (2,))
    action_space = Box(-1.0, 1.0, (2,))

    def __init__(self, max_steps: int = 50, distance: str = "region", seed: Optional[int] = None):
        if distance not in ("region", "origin"):
            raise ValueError(f"unknown distance mode {distance!r}")
        self.max_steps = max_steps
        self.distance_mode = distance
        self.rng = np.random.default_rng(seed)
        self.x = 0.0
        self.y = 0.0
        self.steps = 0
        self.total_steps = 0  # every step() call over the lifetime of the instance
        self.needs_reset = True

    # geometry
    def distance(self, x: float, y: float) -> float:
        if self.distance_mode == "origin":
            return math.hypot(x, y)
        return math.hypot(max(x - self.goal, 0.0), max(y - self.goal, 0.0))

    def in_goal(self, x: float, y: float) -> bool:
        return x < self.goal and y < self.goal

    def in_forbidden(self, x: float, y: float) -> bool:
        lo, hi = self.forbidden
        return lo < x < hi and lo < y < hi

    def _start_excluded(self, x: float, y: float) -> bool:
        lo, hi = self.forbidden
        return self.in_goal(x, y) or (lo <= x <= hi and lo <= y <= hi)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        while True:
            x, y = self.rng.random(2)
            if not self._start_excluded(x, y):
                break
        self.x, self.y = float(x), float(y)
        self.steps = 0
        self.needs_reset = False
        return self.position

    def set_position(self, x: float, y: float) -> np.ndarray:
        """Place the agent explicitly (for tests and hand rollouts)."""
        self.x, self.y = float(x), float(y)
        self.steps = 0
        self.needs_reset = False
        return self.position

    def step(self, action) -> StepResult:
        if self.needs_reset:
            raise RuntimeError("call reset() before step()")
        a0 = min(max(float(action[0]), -1.0), 1.0)
        a1 = min(max(float(action[1]), -1.0), 1.0)
        old = self.distance(self.x, self.y)
        self.x = min(max(self.x + self.step_scale * a0, 0.0), 1.0)
        self.y = min(max(self.y + self.step_scale * a1, 0.0), 1.0)
        self.steps += 1
        self.total_steps += 1
        reward = 10.0 * (old - self.distance(self.x, self.y))
        terminated = False
        if self.in_goal(self.x, self.y):
            reward += 10.0
            terminated = True
        elif self.in_forbidden(self.x, self.y):
            reward = -10.0
            terminated = True
        truncated = not terminated and self.steps >= self.max_steps
        self.needs_reset = terminated or truncated
        return StepResult(self.position, reward, terminated, truncated)


def make_env(name: str = "SimpleGoal", **kwargs) -> SimpleGoal:
    if name != "SimpleGoal":
        raise ValueError(f"unknown environment {name!r}")
    return SimpleGoal(**kwargs)
