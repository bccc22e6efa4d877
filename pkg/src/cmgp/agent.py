"""Training loops: critic-moderated GP, plain TD3 and rollout-based GP."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .envs import SimpleGoal, make_env
from .evolution import EvolutionConfig, Population, critic_fitness_fn, evolve, init_population
from .neural import MLP, Adam, soft_update
from .program import evaluate_population
from .td3 import Batch, TD3Config, TwinCritics, critic_improved_actions

log = logging.getLogger(__name__)

ARMS = ("cmgp", "td3", "gp")


@dataclass
class RunConfig:
    arm: str = "cmgp"
    env: str = "SimpleGoal"
    distance: str = "region"
    seed: int = 1
    total_steps: int = 15000
    learning_starts: int = 2000
    policy_freq: int = 128
    batch_size: int = 256
    buffer_size: int = 100_000
    exploration_noise: float = 0.1
    explore: bool = True
    # critics
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    hidden: tuple[int, ...] = (256, 256)
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    target_freq: int = 2
    td3_policy_freq: int = 2
    net_dtype: str = "float32"
    # programs
    num_genes: int = 5
    num_individuals: int = 50
    num_generations: int = 20
    num_parents_mating: int = 20
    mutation_probability: float = 0.1
    mutation_min: float = -10.0
    mutation_max: float = 10.0
    n_samples: int = 10
    improve_steps: int = 50
    improve_step_size: float = 1.0
    trust_region: float = 1.0
    monotonic_guard: bool = True
    clip_improved: bool = True
    # evaluation
    eval_episodes: int = 20
    eval_seed: int = 10_000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.arm not in ARMS:
            raise ValueError(f"arm must be one of {ARMS}, got {self.arm!r}")
        if self.total_steps <= 0 or self.batch_size <= 0 or self.policy_freq <= 0:
            raise ValueError("total_steps, batch_size and policy_freq must be positive")
        if not 0 <= self.learning_starts <= self.total_steps:
            raise ValueError("learning_starts must lie in [0, total_steps]")
        self.evolution_config()

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            num_genes=self.num_genes,
            num_individuals=self.num_individuals,
            num_generations=self.num_generations,
            num_parents_mating=self.num_parents_mating,
            mutation_probability=self.mutation_probability,
            mutation_min=self.mutation_min,
            mutation_max=self.mutation_max,
        )

    def td3_config(self, target_freq: Optional[int] = None) -> TD3Config:
        return TD3Config(
            gamma=self.gamma,
            tau=self.tau,
            lr=self.lr,
            hidden=self.hidden,
            policy_noise=self.policy_noise,
            noise_clip=self.noise_clip,
            target_freq=target_freq or self.target_freq,
            dtype=self.net_dtype,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


class ReplayBuffer:
    def __init__(self, state_dim: int, action_dim: int, capacity: int = 100_000):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(self.size, size=min(n, self.size), replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx])


# -- policies --------------------------------------------------------------------

class ProgramPolicy:
    """One genome per action dimension; outputs are averaged stochastic runs."""

    def __init__(self, genomes, rng: np.random.Generator, n_samples: int = 10, low: float = -1.0, high: float = 1.0):
        self.genomes = [np.asarray(g, dtype=np.float64) for g in genomes]
        self.rng = rng
        self.n_samples = n_samples
        self.low, self.high = low, high

    def raw(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        cols = [evaluate_population(g[None, :], states, self.rng, self.n_samples)[0][0] for g in self.genomes]
        return np.stack(cols, axis=1)

    def batch(self, states: np.ndarray) -> np.ndarray:
        return np.clip(self.raw(states), self.low, self.high)

    def __call__(self, obs) -> np.ndarray:
        return self.batch(np.asarray(obs)[None, :])[0]


class ActorPolicy:
    def __init__(self, net: MLP):
        self.net = net

    def batch(self, states: np.ndarray) -> np.ndarray:
        return self.net(np.atleast_2d(states)).astype(np.float64)

    def __call__(self, obs) -> np.ndarray:
        return self.batch(np.asarray(obs)[None, :])[0]


def constant_policy(action) -> Callable:
    action = np.asarray(action, dtype=np.float64)
    return lambda obs: action


def run_episode(policy: Callable, env: SimpleGoal, seed: Optional[int] = None, start=None) -> tuple[float, int]:
    obs = env.reset(seed=seed)
    if start is not None:
        obs = env.set_position(*start)
    total, length = 0.0, 0
    while True:
        obs, reward, terminated, truncated = env.step(policy(obs))
        total += reward
        length += 1
        if terminated or truncated:
            return total, length


def evaluate_policy(policy: Callable, env: SimpleGoal | Callable[[], SimpleGoal] | None = None,
                    episodes: int = 20, seed: int = 0) -> tuple[float, float]:
    """Mean and standard error of episode returns, reseeding the env per episode."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if env is None:
        env = SimpleGoal()
    elif callable(env) and not isinstance(env, SimpleGoal):
        env = env()
    returns = np.array([run_episode(policy, env, seed=seed + i)[0] for i in range(episodes)])
    stderr = returns.std(ddof=1) / np.sqrt(episodes) if episodes > 1 else 0.0
    return float(returns.mean()), float(stderr)


# -- results ---------------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    episodes: list[tuple[int, float]] = field(default_factory=list)  # (env interactions, return)
    ga_trace: list[dict] = field(default_factory=list)
    programs: Optional[list[np.ndarray]] = None
    actor: Optional[MLP] = None
    critics: Optional[TwinCritics] = None
    improvement_drift: list[float] = field(default_factory=list)  # max drift of each improvement call
    evolve_env_steps: list[int] = field(default_factory=list)  # env steps taken during each critic-fitness evolve
    ga_updates: int = 0
    critic_updates: int = 0
    actor_updates: int = 0
    interactions: int = 0
    eval_mean: Optional[float] = None
    eval_stderr: Optional[float] = None

    def policy(self, seed: int = 0) -> Callable:
        if self.programs is not None:
            return ProgramPolicy(self.programs, np.random.default_rng(seed), self.config.n_samples)
        return ActorPolicy(self.actor)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _finish(result: RunResult) -> RunResult:
    cfg = result.config
    if cfg.eval_episodes > 0:
        env = make_env(cfg.env, distance=cfg.distance)
        result.eval_mean, result.eval_stderr = evaluate_policy(
            result.policy(cfg.eval_seed), env, cfg.eval_episodes, cfg.eval_seed
        )
        log.info("%s seed %d: eval %.3f +- %.3f", cfg.arm, cfg.seed, result.eval_mean, result.eval_stderr)
    return result


def _explore(action, cfg: RunConfig, rng, env: SimpleGoal) -> np.ndarray:
    if cfg.explore and cfg.exploration_noise > 0:
        scale = (env.action_space.high - env.action_space.low) / 2.0
        action = action + rng.normal(0.0, cfg.exploration_noise * scale, action.shape)
    return np.clip(action, env.action_space.low, env.action_space.high)


# -- CM-GP -----------------------------------------------------------------------

def train_cmgp(config: RunConfig) -> RunResult:
    """Programs as the actor, improved by evolution against critic-improved actions."""
    cfg = config
    env_rng, act_rng, net_rng, train_rng, ga_rng, prog_rng = _streams(cfg.seed, 6)
    env = make_env(cfg.env, distance=cfg.distance)
    state_dim, action_dim = env.observation_space.shape[0], env.action_space.shape[0]
    evo_cfg = cfg.evolution_config()
    critics = TwinCritics(state_dim, action_dim, net_rng, cfg.td3_config(),
                          env.action_space.low, env.action_space.high)
    populations: list[Population] = [init_population(evo_cfg, ga_rng) for _ in range(action_dim)]
    programs = ProgramPolicy([p.genomes[0] for p in populations], prog_rng, cfg.n_samples)
    buffer = ReplayBuffer(state_dim, action_dim, cfg.buffer_size)
    result = RunResult(cfg, critics=critics)

    obs = env.reset(seed=int(env_rng.integers(2**31)))
    ep_return = 0.0
    for step in range(cfg.total_steps):
        if step < cfg.learning_starts:
            action = env.action_space.sample(act_rng)
        else:
            action = _explore(programs(obs), cfg, act_rng, env)
        next_obs, reward, terminated, truncated = env.step(action)
        buffer.add(obs, action, reward, next_obs, terminated)
        ep_return += reward
        if terminated or truncated:
            result.episodes.append((env.total_steps, ep_return))
            obs, ep_return = env.reset(), 0.0
        else:
            obs = next_obs

        if step < cfg.learning_starts:
            continue
        critics.update(buffer.sample(cfg.batch_size, train_rng), programs.batch, train_rng)
        result.critic_updates += 1
        if result.critic_updates % cfg.policy_freq:
            continue

        # program update from critic-improved actions
        states = buffer.sample(cfg.batch_size, train_rng).states
        improvement = critic_improved_actions(
            critics, states, programs.raw(states),
            n_steps=cfg.improve_steps, step_size=cfg.improve_step_size, max_l1=cfg.trust_region,
            guard=cfg.monotonic_guard, clip=cfg.clip_improved,
        )
        max_drift = float(improvement.drift.max())
        assert max_drift <= cfg.trust_region, f"trust region violated: {max_drift}"
        result.improvement_drift.append(max_drift)

        before = env.total_steps
        for d in range(action_dim):
            fitness_fn = critic_fitness_fn(states, improvement.improved[:, d], ga_rng, cfg.n_samples)
            evolved = evolve(populations[d], fitness_fn, evo_cfg, ga_rng)
            populations[d] = evolved.population
            programs.genomes[d] = evolved.best
            result.ga_trace += [
                {"update": result.ga_updates, "dimension": d, "generation": g, "best_fitness": f,
                 "env_steps": env.total_steps}
                for g, f in enumerate(evolved.trace)
            ]
        result.evolve_env_steps.append(env.total_steps - before)
        assert env.total_steps == before, "critic fitness must not interact with the environment"
        result.ga_updates += 1
        if result.ga_updates % 10 == 0:
            recent = [r for _, r in result.episodes[-20:]]
            log.info("cmgp step %d update %d: recent return %.2f", step + 1, result.ga_updates,
                     float(np.mean(recent)) if recent else float("nan"))

    result.programs = [g.copy() for g in programs.genomes]
    result.interactions = env.total_steps
    return _finish(result)


# -- TD3 ---------------------------------------------------------------------------

def train_td3(config: RunConfig) -> RunResult:
    """Reference TD3 with a neural actor (tanh output on the [-1, 1] action box)."""
    cfg = config
    env_rng, act_rng, net_rng, train_rng = _streams(cfg.seed, 4)
    env = make_env(cfg.env, distance=cfg.distance)
    state_dim, action_dim = env.observation_space.shape[0], env.action_space.shape[0]
    critics = TwinCritics(state_dim, action_dim, net_rng, cfg.td3_config(cfg.td3_policy_freq),
                          env.action_space.low, env.action_space.high)
    actor = MLP([state_dim, *cfg.hidden, action_dim], net_rng, output="tanh", dtype=cfg.net_dtype)
    target_actor = actor.copy()
    actor_opt = Adam(actor.params, lr=cfg.lr)
    buffer = ReplayBuffer(state_dim, action_dim, cfg.buffer_size)
    result = RunResult(cfg, actor=actor, critics=critics)

    obs = env.reset(seed=int(env_rng.integers(2**31)))
    ep_return = 0.0
    for step in range(cfg.total_steps):
        if step < cfg.learning_starts:
            action = env.action_space.sample(act_rng)
        else:
            action = _explore(actor(obs[None, :])[0].astype(np.float64), cfg, act_rng, env)
        next_obs, reward, terminated, truncated = env.step(action)
        buffer.add(obs, action, reward, next_obs, terminated)
        ep_return += reward
        if terminated or truncated:
            result.episodes.append((env.total_steps, ep_return))
            obs, ep_return = env.reset(), 0.0
        else:
            obs = next_obs

        if step < cfg.learning_starts:
            continue
        batch = buffer.sample(cfg.batch_size, train_rng)
        critics.update(batch, target_actor, train_rng)
        result.critic_updates += 1
        if result.critic_updates % cfg.td3_policy_freq:
            continue

        # ascend mean Q_A(s, actor(s))
        acts, actor_cache = actor.forward(batch.states)
        x = np.hstack([batch.states, acts])
        _, q_cache = critics.q_a.forward(x)
        n = len(x)
        _, dq_dx = critics.q_a.backward(q_cache, np.full((n, 1), -1.0 / n))
        grads, _ = actor.backward(actor_cache, dq_dx[:, state_dim:])
        actor_opt.step(actor.params, grads)
        soft_update(target_actor, actor, cfg.tau)
        result.actor_updates += 1

    result.interactions = env.total_steps
    return _finish(result)


# -- rollout GP --------------------------------------------------------------------

def train_gp(config: RunConfig) -> RunResult:
    """Evolution with one-episode returns as fitness; every rollout step counts.

    ``total_steps`` bounds all environment interactions (acting plus fitness
    rollouts); an episode already running when the budget runs out is finished,
    so the total can exceed it by at most one episode. Populations are evolved
    one action dimension at a time, each candidate paired with the current
    best programs of the other dimensions.
    """
    cfg = config
    env_rng, act_rng, ga_rng, prog_rng, roll_rng = _streams(cfg.seed, 5)
    env = make_env(cfg.env, distance=cfg.distance)
    rollout_env = make_env(cfg.env, distance=cfg.distance, seed=int(roll_rng.integers(2**31)))
    action_dim = env.action_space.shape[0]
    evo_cfg = cfg.evolution_config()
    populations = [init_population(evo_cfg, ga_rng) for _ in range(action_dim)]
    programs = ProgramPolicy([p.genomes[0] for p in populations], prog_rng, cfg.n_samples)
    result = RunResult(cfg)

    def interactions() -> int:
        return env.total_steps + rollout_env.total_steps

    def budget_spent() -> bool:
        return interactions() >= cfg.total_steps

    def episode_fitness(d: int) -> Callable[[np.ndarray], np.ndarray]:
        def fn(genomes: np.ndarray) -> np.ndarray:
            out = np.full(len(genomes), -np.inf)  # left unscored once the budget runs out
            for i, g in enumerate(genomes):
                if budget_spent():
                    break
                trial = list(programs.genomes)
                trial[d] = g
                policy = ProgramPolicy(trial, prog_rng, cfg.n_samples)
                out[i] = run_episode(policy, rollout_env)[0]
            return out
        return fn

    obs = env.reset(seed=int(env_rng.integers(2**31)))
    ep_return = 0.0
    acting_steps = 0
    while not budget_spent():
        if acting_steps < cfg.learning_starts:
            action = env.action_space.sample(act_rng)
        else:
            action = programs(obs)
        next_obs, reward, terminated, truncated = env.step(action)
        acting_steps += 1
        ep_return += reward
        if terminated or truncated:
            result.episodes.append((interactions(), ep_return))
            obs, ep_return = env.reset(), 0.0
        else:
            obs = next_obs

        if acting_steps < cfg.learning_starts or (acting_steps - cfg.learning_starts) % cfg.policy_freq:
            continue
        start = interactions()
        for d in range(action_dim):
            if budget_spent():
                break
            evolved = evolve(populations[d], episode_fitness(d), evo_cfg, ga_rng, should_stop=budget_spent)
            populations[d] = evolved.population
            if np.isfinite(evolved.best_fitness):
                programs.genomes[d] = evolved.best
            result.ga_trace += [
                {"update": result.ga_updates, "dimension": d, "generation": g, "best_fitness": f,
                 "env_steps": interactions()}
                for g, f in enumerate(evolved.trace)
            ]
        result.ga_updates += 1
        log.info("gp update %d used %d interactions (total %d)", result.ga_updates, interactions() - start,
                 interactions())

    result.programs = [g.copy() for g in programs.genomes]
    result.interactions = interactions()
    return _finish(result)


TRAINERS = {"cmgp": train_cmgp, "td3": train_td3, "gp": train_gp}


def train(config: RunConfig) -> RunResult:
    return TRAINERS[config.arm](config)
