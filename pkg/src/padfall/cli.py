"""Command-line entry point: ``padfall <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure, 4 a bench
soft check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from padfall.config import RunConfig, load_config, recipe_path, reference_config
from padfall.errors import ConfigError, PadfallError, UsageError
from padfall.scenarios import SCENARIO_NAMES

log = logging.getLogger("padfall")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SOFT_CHECK = 0, 2, 3, 4
BUILTIN_CONTROLLERS = ("ekf-baseline", "scripted-oracle", "zero")


class SoftCheckFailed(PadfallError):
    pass


def _config(args) -> RunConfig:
    path = args.config
    if path is None and getattr(args, "recipe", None):
        path = recipe_path(args.recipe)
    overrides = list(args.set)
    if getattr(args, "workers", None) is not None:
        overrides.append(f"workers={args.workers}")
    return load_config(path, overrides)


def _out(cfg: RunConfig, args, leaf: str) -> Path:
    return Path(args.out) if getattr(args, "out", None) else Path(cfg.output_dir) / leaf


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def make_controller(ref: str, cfg: RunConfig):
    """``ekf-baseline``, ``scripted-oracle``, ``zero`` or a checkpoint path."""
    from padfall.baseline import EkfPidBaseline
    from padfall.evaluation import NetworkPolicy, ScriptedOracle, ZeroPolicy
    from padfall.td3 import read_policy

    if ref == "ekf-baseline":
        return EkfPidBaseline.from_config(cfg.baseline)
    if ref == "scripted-oracle":
        return ScriptedOracle()
    if ref == "zero":
        return ZeroPolicy()
    path = Path(ref)
    if not path.exists():
        raise ConfigError(f"controller {ref!r} is neither a checkpoint nor one of {', '.join(BUILTIN_CONTROLLERS)}")
    params, spec = read_policy(path)
    return NetworkPolicy(params, spec)


def _check_scenarios(names) -> list:
    bad = [n for n in names if n not in SCENARIO_NAMES]
    if bad:
        raise ConfigError(f"unknown scenario(s) {', '.join(bad)}; valid: {', '.join(SCENARIO_NAMES)}")
    return list(names)


def _run_suite(cfg: RunConfig, controller, names, episodes):
    from padfall.evaluation import run_episodes

    out = {}
    for name in names:
        scenario = cfg.scenario(name, episodes)
        out[name] = run_episodes(controller, scenario, range(scenario.episodes), env_factory=cfg.env_factory(),
                                 workers=cfg.workers)
    return out


def _write_records(per_scenario: dict, root: Path) -> None:
    from padfall.evaluation import write_episode_csv

    for name, records in per_scenario.items():
        folder = root / name
        folder.mkdir(parents=True, exist_ok=True)
        for rec in records:
            write_episode_csv(rec, folder / f"episode_{rec.episode_index:03d}.csv")


# -- commands --------------------------------------------------------------------

def cmd_gen_config(args) -> int:
    cfg = load_config(recipe_path(args.recipe)) if args.recipe else RunConfig()
    text = reference_config(cfg)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    from padfall.td3 import train

    cfg = _config(args)
    steps = cfg.train.total_steps if args.steps is None else args.steps
    seed = cfg.master_seed if args.seed is None else args.seed
    if steps < 0:
        raise ConfigError("--steps must be >= 0")
    out = _out(cfg, args, "train")
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "config.yaml", reference_config(cfg))
    digest = cfg.digest()
    result = train(cfg.env_factory(), cfg.train_scenario(), cfg.td3, steps, seed, out_dir=out,
                   workers=cfg.workers, progress=args.verbose, digest=digest)
    manifest = {
        "config_hash": digest,
        "seed": seed,
        "steps": result.steps,
        "episodes": result.episodes,
        "outputs": {
            "config": "config.yaml",
            "training_log": "training_log.csv",
            "final_checkpoint": "final",
            "checkpoints": sorted(p.name for p in (out / "checkpoints").glob("step_*")),
        },
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if result.log:
        last = result.log[-1]
        print(f"step {last['step']}: eval reward {last['mean_eval_reward']:.3f}, "
              f"success {last['eval_success_rate']:.2f}")
    print(f"checkpoint written to {out / 'final'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from padfall.evaluation import aggregate_report, format_rate

    cfg = _config(args)
    names = _check_scenarios(args.scenarios or cfg.scenarios.names)
    controller = make_controller(args.controller, cfg)
    results = _run_suite(cfg, controller, names, args.episodes)
    label = _label(args.controller)
    out = _out(cfg, args, f"eval/{label}")
    _write_records(results, out / "records")
    metrics = aggregate_report({label: results}, out, plots=not args.no_plots)
    for name in names:
        landing = metrics[label][name]["landing"]
        precision = landing["precision_cm"]
        mean = "N/A" if precision is None else f"{precision['mean']:.2f} cm"
        print(f"{name:14s} success {format_rate(landing['success_rate']):>7s}  precision {mean}")
    return EXIT_OK


def _label(ref: str) -> str:
    if ref in BUILTIN_CONTROLLERS:
        return ref
    path = Path(ref)
    return "policy-" + (path.parent.name + "-" + path.stem if path.suffix else path.name)


def cmd_bench(args) -> int:
    from padfall.evaluation import aggregate_report, format_rate

    cfg = _config(args)
    names = _check_scenarios(args.scenarios or cfg.scenarios.names)
    left_label, right_label = f"agent:{_label(args.agent)}", f"baseline:{_label(args.baseline)}"
    results = {
        left_label: _run_suite(cfg, make_controller(args.agent, cfg), names, args.episodes),
        right_label: _run_suite(cfg, make_controller(args.baseline, cfg), names, args.episodes),
    }
    out = _out(cfg, args, "bench")
    metrics = aggregate_report(results, out, plots=not args.no_plots)
    for name in names:
        cells = [format_rate(metrics[c][name]["landing"]["success_rate"]) for c in results]
        print(f"{name:14s} {left_label} {cells[0]:>7s}   {right_label} {cells[1]:>7s}")
    if "LMPL" in names:
        agent = metrics[left_label]["LMPL"]["landing"]["success_rate"]
        base = metrics[right_label]["LMPL"]["landing"]["success_rate"]
        if agent < base:
            raise SoftCheckFailed(f"soft check failed: agent LMPL success {format_rate(agent)} "
                                  f"< baseline {format_rate(base)}")
        print(f"soft check passed: agent LMPL success {format_rate(agent)} >= baseline {format_rate(base)}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from padfall.evaluation import read_episode_csv, trajectory_plot
    from padfall.reward import export_reward_landscape

    cfg = _config(args)
    root = Path(args.records_dir)
    files = sorted(root.rglob("*.csv")) if root.is_dir() else []
    records = []
    for path in files:
        try:
            records.append(read_episode_csv(path))
        except (KeyError, ValueError, IndexError):
            continue  # tables and other CSVs that are not episode records
    if not records:
        log.warning("no episode records under %s; nothing to plot", root)
        return EXIT_OK
    out = Path(args.out) if args.out else root / "plots"
    out.mkdir(parents=True, exist_ok=True)
    grouped: dict = {}
    for rec in records:
        grouped.setdefault(rec.scenario, []).append(rec)
    for name in sorted(grouped):
        recs = grouped[name]
        _write_text(out / f"trajectories_{name}.svg", trajectory_plot(recs, name))
        for rec in recs:
            _write_text(out / f"trajectory_{name}_{rec.episode_index:03d}.svg",
                        trajectory_plot([rec], f"{name} episode {rec.episode_index}"))
    export_reward_landscape(cfg.reward, out / "reward_landscape.csv", svg_path=out / "reward_landscape.svg")
    print(f"{len(records)} record(s) rendered to {out}")
    return EXIT_OK


def cmd_landscape(args) -> int:
    from padfall.reward import export_reward_landscape

    cfg = _config(args)
    if args.resolution < 2:
        raise ConfigError("--resolution must be >= 2")
    out = _out(cfg, args, "landscape")
    out.mkdir(parents=True, exist_ok=True)
    stem = f"reward_landscape_{args.plane}"
    export_reward_landscape(cfg.reward, out / f"{stem}.csv", extent=args.extent, resolution=args.resolution,
                            plane=args.plane, svg_path=out / f"{stem}.svg")
    print(f"landscape written to {out / stem}.csv")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _common(p, workers=True):
    p.add_argument("--config", metavar="PATH", help="YAML run configuration (defaults when omitted)")
    p.add_argument("--recipe", metavar="NAME", help="bundled configuration used when --config is omitted (e.g. desk)")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="dotted-key override, e.g. td3.batch_size=64 (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: <output_dir>/<command>)")
    if workers:
        p.add_argument("--workers", type=int, metavar="N", help="worker processes; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padfall", description="Quadrotor moving-platform landing lab.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-config", help="print the commented reference configuration")
    p.add_argument("--out", metavar="PATH", help="write to PATH instead of stdout")
    p.add_argument("--recipe", metavar="NAME", help="render a bundled recipe (e.g. desk) instead of the defaults")
    p.set_defaults(func=cmd_gen_config)

    p = sub.add_parser("train", help="train a TD3 agent")
    _common(p)
    p.add_argument("--steps", type=int, metavar="N", help="decision steps (overrides train.total_steps)")
    p.add_argument("--seed", type=int, metavar="N", help="master seed (overrides master_seed)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one controller on named scenarios")
    p.add_argument("controller", help=f"checkpoint directory or .pfw file, or one of {', '.join(BUILTIN_CONTROLLERS)}")
    p.add_argument("scenarios", nargs="*", metavar="SCENARIO",
                   help=f"scenario names (default: scenarios.names); valid: {', '.join(SCENARIO_NAMES)}")
    _common(p)
    p.add_argument("--episodes", type=int, metavar="N", help="episodes per scenario (overrides scenarios.episodes)")
    p.add_argument("--no-plots", action="store_true", help="skip the SVG trajectory plots")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare a policy against the baseline on identical seeded suites")
    _common(p)
    p.add_argument("--agent", required=True, metavar="REF", help="checkpoint path or built-in controller")
    p.add_argument("--baseline", default="ekf-baseline", metavar="REF", help="comparison controller")
    p.add_argument("--scenarios", nargs="+", metavar="SCENARIO", help="scenario names (default: scenarios.names)")
    p.add_argument("--episodes", type=int, metavar="N", help="episodes per scenario")
    p.add_argument("--no-plots", action="store_true", help="skip the SVG trajectory plots")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="render SVG figures from stored episode records")
    p.add_argument("records_dir", help="directory searched recursively for episode CSVs")
    _common(p, workers=False)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("landscape", help="export the reward landscape as CSV and SVG")
    _common(p, workers=False)
    p.add_argument("--plane", choices=("xy", "xz"), default="xy", help="grid plane through the pad center")
    p.add_argument("--extent", type=float, default=2.5, metavar="M", help="half width of the grid, m")
    p.add_argument("--resolution", type=int, default=101, metavar="N", help="grid points per side")
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if getattr(args, "episodes", None) is not None and args.episodes < 1:
        print("error: --episodes must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except SoftCheckFailed as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOFT_CHECK
    except (ConfigError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PadfallError, ArithmeticError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
