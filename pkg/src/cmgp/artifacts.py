"""Run directories on disk: atomic writers, run export and program loading."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agent import RunConfig, RunResult
from .envs import make_env
from .expression import Constant, Expr, evaluate_expression, parse_listing, render_listing, to_expression, walk
from .neural import save_networks
from .program import NUM_SAMPLES, InvalidProgramError, evaluate_population

RETURNS_FILE = "returns.csv"
CONFIG_FILE = "config.json"
PROGRAM_FILE = "program.json"


def atomic_write_text(path, text: str) -> None:
    """Write to a sibling temp file and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, data) -> None:
    atomic_write_text(path, json.dumps(data, indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def save_run(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    write_json(out / CONFIG_FILE, cfg.to_dict())
    write_csv(out / RETURNS_FILE, ["step", "episode_return"], [(s, repr(r)) for s, r in result.episodes])
    keys = ["update", "dimension", "generation", "best_fitness", "env_steps"]
    write_csv(out / "ga_trace.csv", keys, [[row[k] for k in keys] for row in result.ga_trace])
    if result.programs is not None:
        state_dim = make_env(cfg.env).observation_space.shape[0]
        write_json(out / PROGRAM_FILE, {"state_dim": state_dim, "genomes": [g.tolist() for g in result.programs]})
        atomic_write_text(out / "programs.txt", genome_listing(result.programs, state_dim) + "\n")
    if result.critics is not None:
        _save_nets(out / "critics.json", **{
            "q_a": result.critics.q_a, "q_b": result.critics.q_b,
            "target_a": result.critics.target_a, "target_b": result.critics.target_b,
        })
    if result.actor is not None:
        _save_nets(out / "actor.json", actor=result.actor)
    write_json(out / "eval.json", {
        "arm": cfg.arm,
        "seed": cfg.seed,
        "eval_mean": result.eval_mean,
        "eval_stderr": result.eval_stderr,
        "eval_episodes": cfg.eval_episodes,
        "interactions": result.interactions,
        "ga_updates": result.ga_updates,
        "critic_updates": result.critic_updates,
        "actor_updates": result.actor_updates,
        "max_improvement_drift": max(result.improvement_drift, default=0.0),
        "evolve_env_steps": int(sum(result.evolve_env_steps)),
        "improvement_drift": [float(d) for d in result.improvement_drift],
        "evolve_env_steps_per_update": [int(n) for n in result.evolve_env_steps],
    })
    return out


def genome_listing(genomes, state_dim: int) -> str:
    lines = []
    for i, g in enumerate(genomes):
        try:
            lines.append(render_listing([to_expression(g, state_dim)]).replace("a[0]", f"a[{i}]", 1))
        except InvalidProgramError as exc:
            lines.append(f"a[{i}] = <invalid: {exc}>")
    return "\n".join(lines)


def _save_nets(path: Path, **nets) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        save_networks(tmp, **nets)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(run_dir) -> RunConfig:
    with open(Path(run_dir) / CONFIG_FILE) as f:
        return RunConfig.from_dict(json.load(f))


def load_returns(run_dir) -> np.ndarray:
    """``(n, 2)`` array of (env step, episode return)."""
    rows = read_csv(Path(run_dir) / RETURNS_FILE)
    if not rows:
        return np.zeros((0, 2))
    return np.array([[float(r["step"]), float(r["episode_return"])] for r in rows])


# -- programs ------------------------------------------------------------------------

@dataclass
class ProgramArtifact:
    """Either genomes (exact stochastic programs) or parsed listing trees."""

    expressions: list[Expr]
    genomes: Optional[list[np.ndarray]] = None
    state_dim: int = 2

    def listing(self) -> str:
        return render_listing(self.expressions)

    def actions(self, states: np.ndarray, rng: np.random.Generator, n_samples: int = NUM_SAMPLES) -> np.ndarray:
        """Unclipped mean program outputs, shape ``(len(states), n_programs)``."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if self.genomes is not None:
            cols = [evaluate_population(g[None, :], states, rng, n_samples)[0][0] for g in self.genomes]
            return np.stack(cols, axis=1)
        out = np.empty((len(states), len(self.expressions)))
        for j, expr in enumerate(self.expressions):
            slots = sorted({n.slot for n in walk(expr) if isinstance(n, Constant) and not n.sign_fixed})
            for i, s in enumerate(states):
                if not slots:
                    out[i, j] = evaluate_expression(expr, s)
                    continue
                signs = rng.choice([-1.0, 1.0], size=(n_samples, len(slots)))
                out[i, j] = np.mean([evaluate_expression(expr, s, dict(zip(slots, row))) for row in signs])
        return out


def load_program(path) -> ProgramArtifact:
    """Load from a run directory, a ``program.json`` or an ``a[i] = ...`` listing."""
    path = Path(path)
    if path.is_dir():
        path = path / PROGRAM_FILE
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        state_dim = int(data.get("state_dim", 2))
        genomes = [np.asarray(g, dtype=np.float64) for g in data["genomes"]]
        if not genomes or any(g.ndim != 1 or g.size == 0 for g in genomes):
            raise ValueError(f"{path}: genomes must be non-empty lists of numbers")
        return ProgramArtifact([to_expression(g, state_dim) for g in genomes], genomes, state_dim)
    return ProgramArtifact(parse_listing(text))
