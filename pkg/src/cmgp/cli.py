"""Command-line front end.

    cmgp train --arm cmgp --steps 15000 --seed 1 --out runs/cmgp-1
    cmgp eval --run runs/cmgp-1
    cmgp plot-arrows --program runs/cmgp-1 --grid 20 --out arrows.svg
    cmgp show-program --program runs/cmgp-1
    cmgp simplify --program runs/cmgp-1 --domain 0 1
    cmgp compare --runs runs/* --out curves.csv

Exit codes: 0 ok, 1 runtime error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import artifacts
from .agent import ARMS, ActorPolicy, ProgramPolicy, RunConfig, evaluate_policy, train
from .envs import SimpleGoal, make_env
from .expression import ParseError, render_listing
from .neural import load_networks
from .program import InvalidProgramError
from .simplify import simplify

log = logging.getLogger("cmgp")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- train / eval --------------------------------------------------------------------

def build_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    for key, value in (("arm", args.arm), ("total_steps", args.steps), ("seed", args.seed),
                       ("learning_starts", args.learning_starts), ("eval_episodes", args.eval_episodes)):
        if value is not None:
            data[key] = value
    if "learning_starts" not in data and "total_steps" in data:
        data["learning_starts"] = min(RunConfig.learning_starts, int(data["total_steps"]))
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc


def cmd_train(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "train.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger("cmgp").addHandler(handler)
    try:
        log.info("config %s", json.dumps(cfg.to_dict(), sort_keys=True))
        result = train(cfg)
        artifacts.save_run(result, out)
    finally:
        logging.getLogger("cmgp").removeHandler(handler)
        handler.close()
    print(json.dumps({"out": str(out), "eval_mean": result.eval_mean, "eval_stderr": result.eval_stderr,
                      "interactions": result.interactions, "ga_updates": result.ga_updates}))
    return EXIT_OK


def cmd_eval(args) -> int:
    run = Path(args.run)
    cfg = artifacts.load_config(run) if (run / artifacts.CONFIG_FILE).exists() else RunConfig()
    if (run / artifacts.PROGRAM_FILE).exists():
        prog = artifacts.load_program(run)
        policy = ProgramPolicy(prog.genomes, np.random.default_rng(args.seed), cfg.n_samples)
    elif (run / "actor.json").exists():
        policy = ActorPolicy(load_networks(run / "actor.json")["actor"])
    else:
        raise FileNotFoundError(f"{run} holds neither {artifacts.PROGRAM_FILE} nor actor.json")
    env = make_env(cfg.env, distance=cfg.distance)
    mean, stderr = evaluate_policy(policy, env, args.episodes, args.seed)
    print(json.dumps({"run": str(run), "episodes": args.episodes, "mean": mean, "stderr": stderr}))
    return EXIT_OK


# -- programs ------------------------------------------------------------------------

def arrow_rows(program: artifacts.ProgramArtifact, grid: int, rng: np.random.Generator) -> np.ndarray:
    """``(grid*grid, 4)`` rows of x, y, dx, dy over cell centres of the unit square."""
    centres = (np.arange(grid) + 0.5) / grid
    xs, ys = np.meshgrid(centres, centres, indexing="xy")
    states = np.column_stack([xs.ravel(), ys.ravel()])
    actions = np.clip(program.actions(states, rng), -1.0, 1.0)
    if actions.shape[1] < 2:
        raise ValueError("arrow plots need a program for each of the two action dimensions")
    step = SimpleGoal.step_scale
    return np.column_stack([states, step * actions[:, 0], step * actions[:, 1]])


def arrows_svg(rows: np.ndarray, size: int = 400) -> str:
    """Unit square drawn with y up; goal square green, forbidden square red."""
    def px(x):
        return x * size

    def py(y):
        return (1.0 - y) * size

    g = SimpleGoal.goal
    lo, hi = SimpleGoal.forbidden
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        '<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
        '<path d="M0,0 L6,3 L0,6 z" fill="black"/></marker></defs>',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black"/>',
        f'<rect class="goal" x="{px(0):.2f}" y="{py(g):.2f}" width="{px(g):.2f}" height="{px(g):.2f}" fill="green"/>',
        f'<rect class="forbidden" x="{px(lo):.2f}" y="{py(hi):.2f}" width="{px(hi - lo):.2f}" '
        f'height="{px(hi - lo):.2f}" fill="red"/>',
    ]
    for x, y, dx, dy in rows:
        if dx == 0.0 and dy == 0.0:
            continue
        parts.append(f'<line x1="{px(x):.2f}" y1="{py(y):.2f}" x2="{px(x + dx):.2f}" y2="{py(y + dy):.2f}" '
                     'stroke="black" stroke-width="1" marker-end="url(#head)"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _load_program(path) -> artifacts.ProgramArtifact:
    try:
        return artifacts.load_program(path)
    except (OSError, ValueError, KeyError, InvalidProgramError) as exc:
        raise RuntimeError(f"cannot load program {path}: {exc}") from exc


def cmd_plot_arrows(args) -> int:
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    program = _load_program(args.program)
    rows = arrow_rows(program, args.grid, np.random.default_rng(args.seed))
    out = Path(args.out)
    if out.suffix.lower() == ".svg":
        artifacts.atomic_write_text(out, arrows_svg(rows))
    else:
        artifacts.write_csv(out, ["x", "y", "dx", "dy"], [[repr(float(v)) for v in r] for r in rows])
    print(f"wrote {len(rows)} arrows to {out}")
    return EXIT_OK


def cmd_show_program(args) -> int:
    print(_load_program(args.program).listing())
    return EXIT_OK


def cmd_simplify(args) -> int:
    lo, hi = args.domain
    if not lo <= hi:
        raise UsageError("--domain needs lo <= hi")
    program = _load_program(args.program)
    simplified = [simplify(e, (lo, hi), program.state_dim) for e in program.expressions]
    if args.show_raw:
        print(program.listing())
        print()
    print(render_listing(simplified))
    return EXIT_OK


# -- compare -------------------------------------------------------------------------

def learning_curve(returns: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Mean return of episodes ending in each ``(edge - bin, edge]`` window.

    Empty windows repeat the previous value (NaN before the first episode).
    """
    out = np.full(len(edges), np.nan)
    prev = np.nan
    lower = 0.0
    for i, edge in enumerate(edges):
        mask = (returns[:, 0] > lower) & (returns[:, 0] <= edge)
        if mask.any():
            prev = float(returns[mask, 1].mean())
        out[i] = prev
        lower = edge
    return out


def compare_runs(run_dirs, bin_size: int) -> list[tuple[int, float, float, str]]:
    groups: dict[str, list[np.ndarray]] = defaultdict(list)
    for run in run_dirs:
        cfg = artifacts.load_config(run)
        groups[cfg.arm].append(artifacts.load_returns(run))
    counts = {arm: len(v) for arm, v in groups.items()}
    if len(set(counts.values())) > 1:
        log.warning("arms have different numbers of runs: %s", counts)
    rows = []
    for arm in sorted(groups):
        runs = groups[arm]
        last = min((r[-1, 0] if len(r) else 0.0) for r in runs)
        edges = np.arange(bin_size, last + bin_size, bin_size, dtype=float)
        curves = np.array([learning_curve(r, edges) for r in runs])
        for j, edge in enumerate(edges):
            col = curves[:, j]
            col = col[~np.isnan(col)]
            if not len(col):
                continue
            stderr = float(col.std(ddof=1) / np.sqrt(len(col))) if len(col) > 1 else 0.0
            rows.append((int(edge), float(col.mean()), stderr, arm))
    return rows


def cmd_compare(args) -> int:
    if args.bin < 1:
        raise UsageError("--bin must be positive")
    rows = compare_runs(args.runs, args.bin)
    artifacts.write_csv(args.out, ["step", "mean", "stderr", "arm"], [(s, repr(m), repr(e), a) for s, m, e, a in rows])
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmgp", description="Critic-moderated evolution of programmatic policies.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training arm and write a run directory")
    p.add_argument("--arm", choices=ARMS)
    p.add_argument("--steps", type=int, help="environment steps (interaction budget for gp)")
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-starts", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--config", help="flat JSON file of RunConfig fields; flags override it")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate the policy saved in a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=10_000)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("plot-arrows", help="action field of a program pair on a grid")
    p.add_argument("--program", required=True, help="run dir, program.json or a[i] = ... listing")
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help=".csv (x, y, dx, dy) or .svg")
    p.set_defaults(fn=cmd_plot_arrows)

    p = sub.add_parser("show-program", help="print a program listing")
    p.add_argument("--program", required=True)
    p.set_defaults(fn=cmd_show_program)

    p = sub.add_parser("simplify", help="print the listing after constant propagation")
    p.add_argument("--program", required=True)
    p.add_argument("--domain", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--show-raw", action="store_true")
    p.set_defaults(fn=cmd_simplify)

    p = sub.add_parser("compare", help="aggregate learning curves per arm")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bin", type=int, default=500, help="env steps per curve point")
    p.set_defaults(fn=cmd_compare)
    return parser


def _configure_logging(verbose: bool) -> None:
    root = logging.getLogger("cmgp")
    root.setLevel(logging.INFO)
    root.propagate = False
    for h in [h for h in root.handlers if getattr(h, "_cmgp_console", False)]:
        root.removeHandler(h)
    console = logging.StreamHandler(sys.stderr)
    console._cmgp_console = True
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"cmgp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InvalidProgramError) as exc:
        print(f"cmgp {args.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"cmgp {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
