"""Twin critics and critic-guided action improvement."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .neural import MLP, Adam, soft_update

Policy = Callable[[np.ndarray], np.ndarray]


@dataclass
class TD3Config:
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    hidden: tuple[int, ...] = (256, 256)
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    target_freq: int = 2
    dtype: str = "float64"


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class TwinCritics:
    """Two Q networks over ``state ++ action`` plus lagged target copies."""

    def __init__(self, state_dim: int, action_dim: int, rng: np.random.Generator,
                 config: TD3Config | None = None, low: float = -1.0, high: float = 1.0):
        self.config = config or TD3Config()
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.low, self.high = low, high
        sizes = [state_dim + action_dim, *self.config.hidden, 1]
        self.q_a = MLP(sizes, rng, dtype=self.config.dtype)
        self.q_b = MLP(sizes, rng, dtype=self.config.dtype)
        self.target_a = self.q_a.copy()
        self.target_b = self.q_b.copy()
        self.opt_a = Adam(self.q_a.params, lr=self.config.lr)
        self.opt_b = Adam(self.q_b.params, lr=self.config.lr)
        self.updates = 0

    def q_values(self, states, actions, target: bool = False) -> tuple[np.ndarray, np.ndarray]:
        x = np.hstack([states, actions])
        a, b = (self.target_a, self.target_b) if target else (self.q_a, self.q_b)
        return a(x)[:, 0].astype(np.float64), b(x)[:, 0].astype(np.float64)

    def targets(self, batch: Batch, policy: Policy, rng: np.random.Generator) -> np.ndarray:
        cfg = self.config
        next_actions = np.asarray(policy(batch.next_states), dtype=np.float64)
        noise = np.clip(rng.normal(0.0, cfg.policy_noise, next_actions.shape), -cfg.noise_clip, cfg.noise_clip)
        next_actions = np.clip(next_actions + noise, self.low, self.high)
        qa, qb = self.q_values(batch.next_states, next_actions, target=True)
        return batch.rewards + cfg.gamma * (1.0 - batch.dones) * np.minimum(qa, qb)

    def update(self, batch: Batch, policy: Policy, rng: np.random.Generator) -> dict:
        """One TD step on both critics; targets follow every ``target_freq`` updates."""
        y = self.targets(batch, policy, rng)
        x = np.hstack([batch.states, batch.actions])
        n = len(y)
        losses = {}
        for name, net, opt in (("q_a", self.q_a, self.opt_a), ("q_b", self.q_b, self.opt_b)):
            out, cache = net.forward(x)
            err = out[:, 0] - y
            losses[name] = float(np.mean(err ** 2))
            grads, _ = net.backward(cache, (2.0 / n) * err[:, None])
            opt.step(net.params, grads)
        self.updates += 1
        if self.updates % self.config.target_freq == 0:
            self.soft_update(self.config.tau)
        return losses

    def soft_update(self, tau: float) -> None:
        soft_update(self.target_a, self.q_a, tau)
        soft_update(self.target_b, self.q_b, tau)

    def mean_q(self, states, actions) -> np.ndarray:
        qa, qb = self.q_values(states, actions)
        return 0.5 * (qa + qb)

    def action_gradient(self, states, actions) -> np.ndarray:
        """Per-sample d/da of (Q_A + Q_B) / 2.

        This is the gradient of the batch-mean critic value scaled by the batch
        size, so a sample's step does not depend on how many others share the batch.
        """
        x = np.hstack([states, actions])
        grad = np.zeros_like(x)
        ones = np.full((len(x), 1), 0.5)
        for net in (self.q_a, self.q_b):
            _, cache = net.forward(x)
            grad += net.backward(cache, ones)[1]
        return grad[:, self.state_dim:].astype(np.float64)

    def state_dict(self) -> dict:
        return {
            "q_a": self.q_a.to_dict(),
            "q_b": self.q_b.to_dict(),
            "target_a": self.target_a.to_dict(),
            "target_b": self.target_b.to_dict(),
        }

    def load_state_dict(self, data: dict) -> None:
        self.q_a = MLP.from_dict(data["q_a"])
        self.q_b = MLP.from_dict(data["q_b"])
        self.target_a = MLP.from_dict(data["target_a"])
        self.target_b = MLP.from_dict(data["target_b"])
        self.opt_a = Adam(self.q_a.params, lr=self.config.lr)
        self.opt_b = Adam(self.q_b.params, lr=self.config.lr)


@dataclass
class ImprovementBatch:
    states: np.ndarray
    initial: np.ndarray
    improved: np.ndarray
    drift: np.ndarray  # per-sample L1 distance improved - initial
    frozen: np.ndarray  # samples stopped by the trust region or the guard
    steps: int


def improved_actions(
    grad_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    states: np.ndarray,
    initial: np.ndarray,
    value_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    n_steps: int = 50,
    step_size: float = 1.0,
    max_l1: float = 1.0,
    low: float | None = None,
    high: float | None = None,
) -> ImprovementBatch:
    """Gradient ascent on the critics starting from the programs' actions.

    Each sample moves by ``step_size * grad`` per iteration until a step would
    take it more than ``max_l1`` (L1) away from where it started; it then stays
    at its last accepted value. With ``value_fn`` given, a step that lowers the
    sample's value is rejected and the sample is frozen as well. ``low``/``high``
    clip every candidate to the action box.
    """
    states = np.asarray(states, dtype=np.float64)
    start = np.asarray(initial, dtype=np.float64)
    if low is not None or high is not None:
        start = np.clip(start, low, high)
    current = start.copy()
    active = np.ones(len(current), dtype=bool)
    value = value_fn(states, current) if value_fn is not None else None
    steps = 0
    for _ in range(n_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        cand = current[idx] + step_size * grad_fn(states[idx], current[idx])
        if low is not None or high is not None:
            cand = np.clip(cand, low, high)
        ok = np.abs(cand - start[idx]).sum(axis=1) <= max_l1
        if value_fn is not None:
            new_value = value_fn(states[idx], cand)
            ok &= new_value >= value[idx]
            value[idx[ok]] = new_value[ok]
        current[idx[ok]] = cand[ok]
        active[idx[~ok]] = False
        steps += 1
    drift = np.abs(current - start).sum(axis=1)
    return ImprovementBatch(states, start, current, drift, ~active, steps)


def critic_improved_actions(critics: TwinCritics, states, initial, n_steps: int = 50, step_size: float = 1.0,
                            max_l1: float = 1.0, guard: bool = True, clip: bool = True) -> ImprovementBatch:
    return improved_actions(
        critics.action_gradient,
        states,
        initial,
        value_fn=critics.mean_q if guard else None,
        n_steps=n_steps,
        step_size=step_size,
        max_l1=max_l1,
        low=critics.low if clip else None,
        high=critics.high if clip else None,
    )
