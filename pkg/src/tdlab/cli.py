"""Command-line entry point: environment generation, sweeps, verification,
and figure-data export.

Environment files are JSON with the envelope fields `format` (tdlab-mrp),
`version` (1), and the payload keys `k`, `b`, `sigma`, `gamma`, `P`,
`r_mean`, `terminal_states`, `initial`, `name`, plus the `manifest` that
produced the file. Config files passed via --config use the same envelope
with format tdlab-config and flag names as keys; explicit command-line
flags take precedence over config-file values. The environment variable
TDLAB_SEED, when set, overrides any seed.

Every emitted artifact embeds its manifest (a JSON object holding the
tool version, the subcommand, and every parameter including the master
seed); feeding that manifest back through --config reproduces the
artifact byte for byte. CSV outputs carry the manifest as a leading
`# manifest=` comment line followed by the documented header row.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__
from .core import ConfigError
from .envs import generate_mrp, mrp_from_dict, mrp_to_dict
from .harness import (
    SweepConfig,
    paper_alpha_grid,
    paper_lambda_grid,
    resolve_env,
    run_sweep,
    sweep_to_csv,
)
from .figures import (
    mrp_best_lambda_curves,
    one_state_step_size_curve,
    random_walk_learning_curves,
    table_to_csv,
    two_state_asymptote_curves,
)
from . import verify as verify_suites

CONFIG_FORMAT = "tdlab-config"


def _manifest(command: str, params: dict) -> dict:
    return {"tool": "tdlab", "version": __version__, "command": command, "params": params}


def _manifest_line(manifest: dict) -> str:
    return "# manifest=" + json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") == CONFIG_FORMAT:
        return data.get("params", {k: v for k, v in data.items() if k not in ("format", "version")})
    if data.get("command") is not None and "params" in data:
        return data["params"]  # a bare manifest replays too
    raise ConfigError(f"{path} is not a tdlab-config file or manifest")


def _apply_config_defaults(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Config file values fill in flags the user did not set explicitly."""
    if not getattr(args, "config", None):
        return
    overrides = _load_config_file(args.config)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)


def _resolve_seed(seed: int) -> int:
    env = os.environ.get("TDLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"TDLAB_SEED must be an integer, got {env!r}") from exc
    return seed


def _parse_variants(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def cmd_gen_mrp(args: argparse.Namespace) -> int:
    if args.b > args.k:
        raise ConfigError("branching factor exceeds states")
    seed = _resolve_seed(args.seed)
    mrp = generate_mrp(k=args.k, b=args.b, sigma=args.sigma, gamma=args.gamma, seed=seed)
    payload = mrp_to_dict(mrp)
    payload["manifest"] = _manifest("gen-mrp", {
        "k": args.k, "b": args.b, "sigma": args.sigma, "gamma": args.gamma, "seed": seed,
    })
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    checksum = hashlib.sha256(text.encode()).hexdigest()
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    print(
        f"gen-mrp: k={args.k} b={args.b} sigma={args.sigma:g} gamma={args.gamma:g} "
        f"seed={seed} sha256={checksum[:16]}",
        file=sys.stderr,
    )
    return 0


def _load_env_argument(task: str, gamma: float, env_seed: int):
    if task.startswith("file:"):
        with open(task[5:]) as fh:
            return mrp_from_dict(json.load(fh))
    return resolve_env(task, gamma, env_seed)


def cmd_sweep(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    if args.paper_grid:
        alphas, lambdas = paper_alpha_grid(), paper_lambda_grid()
    else:
        if not args.alphas or not args.lambdas:
            raise ConfigError("pass --paper-grid or both --alphas and --lambdas")
        alphas, lambdas = _parse_grid(args.alphas), _parse_grid(args.lambdas)
    config = SweepConfig(
        env=args.task,
        representation=args.repr,
        variants=_parse_variants(args.variants),
        alphas=alphas,
        lambdas=lambdas,
        steps=args.steps,
        runs=args.runs,
        master_seed=seed,
        gamma=args.gamma,
        weighting=args.weighting,
    )
    mrp = _load_env_argument(args.task, args.gamma, config.resolved_env_seed())
    result = run_sweep(config, mrp=mrp, workers=args.workers)
    manifest = _manifest("sweep", {
        "task": args.task, "repr": args.repr, "variants": args.variants,
        "paper_grid": args.paper_grid, "alphas": args.alphas, "lambdas": args.lambdas,
        "steps": args.steps, "runs": args.runs, "seed": seed, "gamma": args.gamma,
        "weighting": args.weighting,
    })
    _write_text(args.out, _manifest_line(manifest) + sweep_to_csv(result))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    checks = verify_suites.run_suite(args.suite, trials=args.trials, seed=seed)
    failures = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
        failures += 0 if check.passed else 1
    print(f"verify {args.suite}: {len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 1


def cmd_figures(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    if args.figure == 1:
        table = random_walk_learning_curves(seed=seed)
    elif args.figure == 2:
        table = one_state_step_size_curve(runs=args.runs, seed=seed)
    elif args.figure == 3:
        table = two_state_asymptote_curves()
    elif args.figure == 4:
        table = mrp_best_lambda_curves(
            runs=args.runs, steps=args.steps, master_seed=seed, workers=args.workers
        )
    else:
        raise ConfigError(f"unknown figure id {args.figure}")
    manifest = _manifest("figures", {
        "figure": args.figure, "runs": args.runs, "steps": args.steps, "seed": seed,
    })
    _write_text(args.out, _manifest_line(manifest) + table_to_csv(table))
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, dict]]:
    """The CLI parser plus each subcommand's flag defaults (for --config merging)."""
    parser = argparse.ArgumentParser(
        prog="tdlab",
        description="TD(lambda) family benchmarks: generate environments, run sweeps, "
        "verify exactness properties, export figure data.",
    )
    parser.add_argument("--version", action="version", version=f"tdlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-mrp", help="generate a random MRP environment file")
    g.add_argument("--k", type=int, required=True, help="number of states")
    g.add_argument("--b", type=int, required=True, help="branching factor")
    g.add_argument("--sigma", type=float, required=True, help="reward standard deviation")
    g.add_argument("--gamma", type=float, default=0.99)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.set_defaults(func=cmd_gen_mrp)

    s = sub.add_parser("sweep", help="parameter scan over (variant, alpha, lambda)")
    s.add_argument("--task", default="mrp(10,3,0.1)",
                   help="canonical name, mrp(k,b,sigma), or file:PATH")
    s.add_argument("--repr", default="tabular",
                   choices=["tabular", "binary", "random-normalized"])
    s.add_argument("--variants", default="accumulate,replace,true-online")
    s.add_argument("--paper-grid", action="store_true",
                   help="use the benchmark alpha/lambda grids")
    s.add_argument("--alphas", default=None, help="space- or comma-separated step-sizes")
    s.add_argument("--lambdas", default=None, help="space- or comma-separated trace decays")
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gamma", type=float, default=0.99)
    s.add_argument("--weighting", default="stationary", choices=["stationary", "uniform"])
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=None, help="output CSV (default: stdout)")
    s.add_argument("--config", default=None, help="JSON config/manifest file")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run exactness and property check suites")
    v.add_argument("--suite", required=True,
                   choices=["equivalence", "theorem1", "closed-forms", "propositions", "all"])
    v.add_argument("--trials", type=int, default=100, help="randomized equivalence trials")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("figures", help="emit the data behind a benchmark figure")
    f.add_argument("--figure", type=int, required=True, choices=[1, 2, 3, 4])
    f.add_argument("--runs", type=int, default=None)
    f.add_argument("--steps", type=int, default=100)
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--out", default=None, help="output CSV (default: stdout)")
    f.set_defaults(func=cmd_figures)

    defaults = {
        name: {a.dest: a.default for a in p._actions}
        for name, p in (("gen-mrp", g), ("sweep", s), ("verify", v), ("figures", f))
    }
    return parser, defaults


def main(argv: list[str] | None = None) -> int:
    parser, defaults = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_defaults(args, defaults[args.command])
        if args.command == "figures" and args.runs is None:
            args.runs = 200 if args.figure == 2 else 50
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
