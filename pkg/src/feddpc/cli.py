"""Command-line entry point.

Subcommands:

* ``run``      -- execute one experiment config, write metrics.csv,
  summary.json, and resolved_config.json into its output directory.
* ``compare``  -- run several configs that differ only in strategy and
  emit a one-row-per-config comparison.csv.
* ``sweep``    -- grid-search lambda and/or the server learning rate and
  emit sweep.csv.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

The per-round wall_ms column in metrics.csv is intentionally left empty:
metrics.csv is byte-reproducible across reruns and worker-pool sizes, and
wall-clock timing is not. Measured timing is kept in memory and surfaced
as avg_round_wall_ms in comparison.csv.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .orchestrator import RunResult, grid_search, run

METRICS_HEADER = "round,avg_train_loss,test_loss,test_accuracy,wall_ms"
COMPARISON_HEADER = "name,best_accuracy,best_round,avg_round_wall_ms"
SWEEP_HEADER = "lambda,lr,best_accuracy,best_round"


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(value)


def write_metrics_csv(path: str, result: RunResult) -> None:
    lines = [METRICS_HEADER]
    for m in result.per_round:
        lines.append(f"{m.round},{_fmt(m.avg_train_loss)},{_fmt(m.test_loss)},{_fmt(m.test_accuracy)},")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_summary_json(path: str, result: RunResult, resolved: dict) -> None:
    summary = {
        "best_accuracy": result.best_accuracy,
        "best_round": result.best_round,
        "rounds": resolved["rounds"],
        "strategy": resolved["strategy"]["kind"],
        "lambda": resolved["strategy"]["lambda"],
        "seed": resolved["run_seed"],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")


def _execute(resolved: dict) -> RunResult:
    train, test = cfgmod.load_datasets(resolved)
    run_cfg = cfgmod.build_run_config(resolved, train)
    out_dir = resolved["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    result = run(run_cfg, train, test)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), result)
    write_summary_json(os.path.join(out_dir, "summary.json"), result, resolved)
    with open(os.path.join(out_dir, "resolved_config.json"), "w", encoding="utf-8") as f:
        json.dump(resolved, f, indent=2)
        f.write("\n")
    return result


def cmd_run(args: argparse.Namespace) -> int:
    raw = cfgmod.apply_overrides(cfgmod.load_config(args.config), args.set or [])
    resolved = cfgmod.resolve(raw)
    result = _execute(resolved)
    print(
        f"{resolved['name']}: best_accuracy={result.best_accuracy:.4f} "
        f"at round {result.best_round}/{resolved['rounds']} -> {resolved['output_dir']}"
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.configs) < 2:
        raise ConfigError("compare needs at least two configs")
    resolved_all = [cfgmod.resolve(cfgmod.load_config(path)) for path in args.configs]
    _check_fairness(resolved_all, args.configs)
    rows = []
    for resolved in resolved_all:
        result = _execute(resolved)
        wall = float(np.mean([m.wall_ms for m in result.per_round]))
        rows.append(f"{resolved['name']},{result.best_accuracy!r},{result.best_round},{wall!r}")
        print(f"{resolved['name']}: best_accuracy={result.best_accuracy:.4f} at round {result.best_round}")
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join([COMPARISON_HEADER] + rows) + "\n")
    print(f"wrote {args.out}")
    return 0


def _check_fairness(resolved_all: list[dict], paths: list[str]) -> None:
    reference = resolved_all[0]
    for resolved, path in zip(resolved_all[1:], paths[1:]):
        for field in cfgmod.FAIRNESS_FIELDS:
            if resolved[field] != reference[field]:
                raise ConfigError(
                    f"compare requires identical {field!r} across configs: "
                    f"{paths[0]} has {reference[field]!r}, {path} has {resolved[field]!r}"
                )


def _parse_grid(text: str | None, flag: str) -> list[float] | None:
    if text is None:
        return None
    values = [item for item in text.split(",") if item.strip()]
    if not values:
        raise ConfigError(f"{flag} is empty")
    try:
        return [float(item) for item in values]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def cmd_sweep(args: argparse.Namespace) -> int:
    raw = cfgmod.apply_overrides(cfgmod.load_config(args.config), args.set or [])
    resolved = cfgmod.resolve(raw)
    lambdas = _parse_grid(args.lambda_grid, "--lambda-grid")
    lrs = _parse_grid(args.lr_grid, "--lr-grid")
    if lambdas is None and lrs is None:
        raise ConfigError("sweep needs --lambda-grid and/or --lr-grid")
    if lambdas is None:
        lambdas = [resolved["strategy"]["lambda"]]
    if lrs is None:
        lrs = [resolved["server_lr"]]

    train, test = cfgmod.load_datasets(resolved)
    base = cfgmod.build_run_config(resolved, train)
    rows = grid_search(base, train, test, lambdas, lrs)

    out_dir = resolved["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    lines = [SWEEP_HEADER]
    for row in rows:
        if row["error"] is not None:
            print(f"cell lambda={row['lambda']} lr={row['lr']} failed: {row['error']}", file=sys.stderr)
            lines.append(f"{row['lambda']!r},{row['lr']!r},,")
        else:
            lines.append(
                f"{row['lambda']!r},{row['lr']!r},{row['best_accuracy']!r},{row['best_round']}"
            )
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(rows)} cells)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feddpc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a JSON config file")
    p_run.add_argument("--set", action="append", metavar="KEY.PATH=VALUE", help="override a config value")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs and tabulate them")
    p_cmp.add_argument("configs", nargs="+", help="config files differing only in strategy")
    p_cmp.add_argument("--out", default="comparison.csv", help="comparison CSV path")
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="grid-search lambda / server lr")
    p_sweep.add_argument("config", help="base config file")
    p_sweep.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated lambda values")
    p_sweep.add_argument("--lr-grid", dest="lr_grid", help="comma-separated server lr values")
    p_sweep.add_argument("--set", action="append", metavar="KEY.PATH=VALUE", help="override a config value")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
