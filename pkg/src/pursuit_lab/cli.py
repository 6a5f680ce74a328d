"""Command-line entry points: validate, train, eval, render.

Exit codes: 0 success, 1 domain violation (invalid config, failed check),
2 usage or IO error. Every long-running command writes a run manifest into
its output directory before any heavy computation; rerunning a command with
the same arguments and --deterministic reproduces its outputs byte for byte.
The PURSUIT_LAB_DIR environment variable provides the default asset root for
zoo checkpoints.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__, config, evalkit, population, render, rl, sim, teammate
from .seeding import substream

ALGOS = ("sp", "pbt", "mappo", "hola", "hola-nog", "naht-d", "naht-d-nodec")


def _load_env(spec: str) -> config.EnvConfig:
    if spec in config.BUILTIN_ENV_NAMES:
        return config.builtin_env(spec)
    with open(spec, "r", encoding="utf-8") as fh:
        return config.parse_config(fh.read())


def _write_manifest(out_dir: str, command: str, args: argparse.Namespace, env_cfg=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "argv": getattr(args, "_argv", sys.argv[1:]),
        "tool_version": __version__,
        "seed": getattr(args, "seed", None),
        "deterministic": getattr(args, "deterministic", False),
        "jobs": getattr(args, "jobs", 1),
        "out_dir": out_dir,
    }
    if env_cfg is not None:
        text = config.serialize_config(env_cfg)
        manifest["env"] = env_cfg.task.task_name
        manifest["config_sha256"] = hashlib.sha256(text.encode("utf-8")).hexdigest()
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = config.parse_config(text, validate=False)
    except config.ConfigError as exc:
        print(f"parse error:\n{exc}", file=sys.stderr)
        return 2
    violations = config.validate_config(cfg)
    for v in violations:
        print(v)
    return 1 if violations else 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _teammate_pool(refs: str, env_cfg, deterministic_nets: bool = False):
    pool = []
    for ref in refs.split(","):
        ref = ref.strip()
        if ref:
            pool.append(evalkit.resolve_policy(ref, env_cfg, deterministic=deterministic_nets))
    return pool


def cmd_train(args) -> int:
    if args.algo not in ALGOS:
        print(f"unknown algo {args.algo!r}; choose from {ALGOS}", file=sys.stderr)
        return 2
    try:
        env_cfg = _load_env(args.env)
    except (OSError, config.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except config.InvalidConfigError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return 1

    jobs = 1 if args.deterministic else args.jobs
    cfg = rl.PpoConfig(total_steps=args.steps)
    out = args.out
    _write_manifest(out, "train", args, env_cfg)

    if args.algo == "sp":
        result = rl.ippo_selfplay_train(cfg, env_cfg, args.seed, out_dir=out)
        rl.write_metrics_csv(os.path.join(out, "metrics.csv"), result.metrics)
    elif args.algo == "pbt":
        result = rl.pbt_train(args.pop_size, cfg, env_cfg, args.seed, out_dir=out)
        for i, member in enumerate(result.members):
            rl.write_metrics_csv(os.path.join(out, f"metrics_member{i}.csv"), member.metrics)
    elif args.algo == "mappo":
        pool = _teammate_pool(args.teammates, env_cfg) if env_cfg.players.num_unctrl > 0 else None
        result = rl.mappo_train(cfg, env_cfg, args.seed, teammate_pool=pool, out_dir=out)
        rl.write_metrics_csv(os.path.join(out, "metrics.csv"), result.metrics)
    elif args.algo in ("hola", "hola-nog"):
        _, reports = population.hola_train(
            cfg,
            env_cfg,
            args.seed,
            generations=args.generations,
            gen_budget=args.steps,
            sp_budget=args.init_sp_steps,
            uniform_rho=args.algo == "hola-nog",
            out_dir=out,
        )
        for report in reports:
            rl.write_metrics_csv(
                os.path.join(out, f"metrics_gen{report.generation:03d}.csv"), report.metrics
            )
    else:  # naht-d / naht-d-nodec
        pool = _teammate_pool(args.teammates, env_cfg)
        if env_cfg.players.num_unctrl < 1:
            print("naht-d needs uncontrolled teammate slots in the env config", file=sys.stderr)
            return 1
        result = teammate.naht_d_train(
            cfg,
            env_cfg,
            pool,
            args.seed,
            no_decoder=args.algo == "naht-d-nodec",
            out_dir=out,
        )
        rl.write_metrics_csv(os.path.join(out, "metrics.csv"), result.metrics)
    del jobs
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _zoo_assets(root: str | None) -> evalkit.ZooAssets:
    root = root or os.environ.get("PURSUIT_LAB_DIR", "")
    checkpoints = []
    if root and os.path.isdir(root):
        for name in sorted(os.listdir(root)):
            if name.endswith(".zip"):
                checkpoints.append(os.path.join(root, name))
    return evalkit.ZooAssets(sp_checkpoints=checkpoints)


def cmd_eval(args) -> int:
    if args.zoo not in (1, 2, 3):
        print(f"unknown zoo {args.zoo}; choose 1, 2, or 3", file=sys.stderr)
        return 2
    try:
        env_cfg = _load_env(args.env)
    except (OSError, config.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        zoo = evalkit.build_zoo(f"zoo{args.zoo}", _zoo_assets(args.zoo_assets))
        jobs = 1 if args.deterministic else args.jobs
        report, _records = evalkit.run_evaluation(
            list(args.ckpt),
            zoo,
            env_cfg,
            n_episodes=args.episodes,
            seed=args.seed,
            jobs=jobs,
        )
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.report, exist_ok=True)
    _write_manifest(args.report, "eval", args, env_cfg)
    with open(os.path.join(args.report, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    report.write_csv(os.path.join(args.report, "report.csv"))
    print(
        f"SUC {report.suc:.2f}%  COL {report.col}  "
        f"AST {report.ast if report.ast is not None else 'n/a'}  REW {report.rew:.2f}"
    )
    return 0


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    try:
        records = sim.load_trajectory(args.log)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return 2
    if not records:
        print("error: empty trajectory log", file=sys.stderr)
        return 2
    try:
        if args.env:
            env_cfg = _load_env(args.env)
        elif "env" in records[0]:
            env_cfg = config.parse_config(json.dumps(records[0]["env"]))
        else:
            print("error: log has no embedded env; pass --env", file=sys.stderr)
            return 2
        svg = render.render_episode(records, env_cfg)
    except (config.ConfigError, config.InvalidConfigError, KeyError) as exc:
        print(f"error: malformed log: {exc}", file=sys.stderr)
        return 2
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pursuit-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate an environment config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=cmd_validate)

    p_train = sub.add_parser("train", help="train a policy")
    p_train.add_argument("--algo", required=True)
    p_train.add_argument("--env", required=True, help="built-in name or config path")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--steps", type=int, default=1_000_000)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--pop-size", type=int, default=4)
    p_train.add_argument("--generations", type=int, default=5)
    p_train.add_argument("--init-sp-steps", type=int, default=50_000, help="self-play budget for the initial hola population")
    p_train.add_argument("--teammates", default="greedy", help="comma-separated policy refs for uncontrolled slots")
    p_train.add_argument("--deterministic", action="store_true")
    p_train.add_argument("--jobs", type=int, default=1)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate checkpoints against an unseen zoo")
    p_eval.add_argument("--ckpt", nargs="+", required=True, help="learner policy refs (paths or scripted ids)")
    p_eval.add_argument("--zoo", type=int, required=True)
    p_eval.add_argument("--env", required=True)
    p_eval.add_argument("--episodes", type=int, default=evalkit.DEFAULT_EPISODES)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--zoo-assets", default=None, help="directory of self-play checkpoints (default $PURSUIT_LAB_DIR)")
    p_eval.add_argument("--deterministic", action="store_true")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.set_defaults(fn=cmd_eval)

    p_render = sub.add_parser("render", help="render a trajectory log to SVG")
    p_render.add_argument("--log", required=True)
    p_render.add_argument("--out", required=True)
    p_render.add_argument("--env", default=None, help="override the env embedded in the log")
    p_render.set_defaults(fn=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._argv = list(argv) if argv is not None else sys.argv[1:]
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
