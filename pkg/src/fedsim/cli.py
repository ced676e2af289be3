"""Experiment runner CLI.

Verbs:
  run      one experiment -> rounds.csv, per_client.csv, bias.csv,
           final_model.bin, config.echo.json, meta.json
  sweep    a grid over one axis (p_min | num_clients | rho) x strategies
           x seeds -> per-cell run directories + sweep_summary.csv
  shapley  the staleness contribution experiment -> shapley.csv
  report   recompute stats.csv / ttest.csv from existing run directories

Exit codes: 0 success, 1 runtime failure, 2 invalid config, 3 unwritable
output location.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import accuracy_stats, paired_t_test, staleness_contribution_experiment
from .csvio import read_rows, write_rows
from .engine import ExperimentConfig, run_experiment
from .errors import ConfigurationError, FedsimError
from .models import ModelSpec
from .strategies import CutoffSchedule

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_MODEL_KEYS = {"kind", "input_dim", "num_classes", "hidden_dim", "weight_decay"}
_CUTOFF_KEYS = {"kind", "t0", "b", "c"}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _typed(value, types, path: str):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigurationError(f"{path}: expected {types}, got bool")
    if not isinstance(value, types):
        raise ConfigurationError(f"{path}: expected {types}, got {type(value).__name__}")
    return value


def config_from_dict(raw: dict, path: str = "config") -> ExperimentConfig:
    """Validate a JSON-style dict and materialize defaults."""
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected an object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)

    if "model" in kwargs:
        m = _typed(kwargs["model"], dict, f"{path}.model")
        bad = set(m) - _MODEL_KEYS
        if bad:
            raise ConfigurationError(f"{path}.model: unknown keys {sorted(bad)}")
        try:
            kwargs["model"] = ModelSpec(**m)
        except (ConfigurationError, TypeError) as exc:
            raise ConfigurationError(f"{path}.model: {exc}") from None
    if "cutoff" in kwargs:
        g = _typed(kwargs["cutoff"], dict, f"{path}.cutoff")
        bad = set(g) - _CUTOFF_KEYS
        if bad:
            raise ConfigurationError(f"{path}.cutoff: unknown keys {sorted(bad)}")
        try:
            kwargs["cutoff"] = CutoffSchedule(**g)
        except (ConfigurationError, TypeError) as exc:
            raise ConfigurationError(f"{path}.cutoff: {exc}") from None
    for key in ("availability", "dataset"):
        if key in kwargs:
            _typed(kwargs[key], dict, f"{path}.{key}")

    int_fields = {
        "num_clients", "rounds", "local_steps", "batch_size", "seed",
        "eval_every", "classes_per_client",
    }
    float_fields = {"eta0", "lr_a", "rho", "psi_max", "p_min", "test_fraction", "server_lr"}
    for key, value in kwargs.items():
        if key in int_fields:
            _typed(value, int, f"{path}.{key}")
        elif key in float_fields:
            kwargs[key] = float(_typed(value, (int, float), f"{path}.{key}"))
        elif key in ("strategy", "lr_schedule"):
            _typed(value, str, f"{path}.{key}")
        elif key == "s_cap" and value is not None:
            _typed(value, int, f"{path}.{key}")
        elif key == "force_round1_full":
            _typed(value, bool, f"{path}.{key}")

    try:
        config = ExperimentConfig(**kwargs)
        config.validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}.{exc}") from None
    return config


def config_to_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["model"] = dataclasses.asdict(config.model)
    d["cutoff"] = dataclasses.asdict(config.cutoff)
    return d


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw, path=str(path))


def _git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_model_bin(path, w: np.ndarray) -> None:
    """Length-prefixed little-endian float64 vector."""
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(w)))
        f.write(np.asarray(w, dtype="<f8").tobytes())


def read_model_bin(path) -> np.ndarray:
    with open(path, "rb") as f:
        (n,) = struct.unpack("<Q", f.read(8))
        return np.frombuffer(f.read(), dtype="<f8")[:n].copy()


def _write_run_dir(result, out_dir: Path) -> None:
    # wall_time stays out of rounds.csv so reruns are byte-identical
    write_rows(
        out_dir / "rounds.csv",
        ["round", "global_train_loss", "global_test_accuracy", "n_t", "participating"],
        [
            (r.round, r.global_train_loss, r.global_test_accuracy, r.n_t,
             " ".join(str(c) for c in r.participating))
            for r in result.records
        ],
    )
    client_rows = list(enumerate(result.per_client_accuracy))
    write_rows(out_dir / "per_client.csv", ["client", "accuracy"],
               [(c, float(a)) for c, a in client_rows])
    write_rows(out_dir / "bias.csv", ["client", "accuracy"],
               [(c, float(a)) for c, a in client_rows])
    write_model_bin(out_dir / "final_model.bin", result.final_w)
    with open(out_dir / "config.echo.json", "w") as f:
        json.dump(config_to_dict(result.config), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out_dir / "meta.json", "w") as f:
        json.dump(
            {
                "seed": result.config.seed,
                "version": __version__,
                "git_hash": _git_hash(),
                # the full config rides along so meta.json alone reproduces the run
                "config": config_to_dict(result.config),
            },
            f, indent=2, sort_keys=True,
        )
        f.write("\n")


def _prepare_out_dir(path_str: str) -> Path:
    out = Path(path_str)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PermissionError(f"{out}: not writable ({exc})") from None
    return out


def run_command(config: ExperimentConfig, out_dir, quiet: bool = False) -> int:
    out = _prepare_out_dir(out_dir)
    result = run_experiment(config)
    _write_run_dir(result, out)
    if not quiet:
        last = result.records[-1]
        print(
            f"{config.strategy}: {config.rounds} rounds, "
            f"final loss {last.global_train_loss:.4f}, "
            f"final accuracy {last.global_test_accuracy:.4f} -> {out}"
        )
    return EXIT_OK


def parse_sweep(path) -> dict:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected an object")
    unknown = set(raw) - {"base", "axis", "values", "strategies", "seeds"}
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    axis = raw.get("axis")
    if axis == "N":
        axis = "num_clients"
    if axis not in ("p_min", "num_clients", "rho"):
        raise ConfigurationError(f"{path}.axis: must be p_min, num_clients (N), or rho")
    values = raw.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigurationError(f"{path}.values: must be a nonempty list")
    strategies = raw.get("strategies", ["fedar"])
    if not isinstance(strategies, list) or not strategies:
        raise ConfigurationError(f"{path}.strategies: must be a nonempty list")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigurationError(f"{path}.seeds: must be a list of integers")
    base = config_from_dict(raw.get("base", {}), path=f"{path}.base")
    return {"base": base, "axis": axis, "values": values,
            "strategies": strategies, "seeds": seeds}


def sweep_command(sweep: dict, out_dir, quiet: bool = False) -> int:
    out = _prepare_out_dir(out_dir)
    axis, base = sweep["axis"], sweep["base"]
    summary = []
    any_failed = False
    for value in sweep["values"]:
        for strategy in sweep["strategies"]:
            finals = []
            failed = 0
            for seed in sweep["seeds"]:
                cell_dir = out / f"{axis}-{value}" / strategy / f"seed-{seed}"
                try:
                    overrides = {axis: value, "strategy": strategy, "seed": seed}
                    config = dataclasses.replace(base, **overrides)
                    config.validate()
                    cell_dir.mkdir(parents=True, exist_ok=True)
                    result = run_experiment(config)
                    _write_run_dir(result, cell_dir)
                    last = result.records[-1]
                    finals.append((last.global_train_loss, last.global_test_accuracy))
                except FedsimError as exc:
                    failed += 1
                    any_failed = True
                    print(f"cell {axis}={value} {strategy} seed={seed} failed: {exc}",
                          file=sys.stderr)
            mean_loss = float(np.mean([f[0] for f in finals])) if finals else float("nan")
            mean_acc = float(np.mean([f[1] for f in finals])) if finals else float("nan")
            # the axis value is echoed as the literal used in directory names
            summary.append((axis, str(value), strategy, len(finals), failed, mean_loss, mean_acc))
            if not quiet:
                print(f"{axis}={value} {strategy}: mean final loss {mean_loss:.4f}, "
                      f"mean final accuracy {mean_acc:.4f} ({failed} failed)")
    write_rows(
        out / "sweep_summary.csv",
        ["axis", "value", "strategy", "seeds_ok", "seeds_failed",
         "mean_final_train_loss", "mean_final_test_accuracy"],
        summary,
    )
    return EXIT_RUNTIME if any_failed else EXIT_OK


def shapley_command(config: ExperimentConfig, out_dir, levels, quiet: bool = False) -> int:
    out = _prepare_out_dir(out_dir)
    reports = staleness_contribution_experiment(config, levels)
    rows = []
    for level in levels:
        report = reports[int(level)]
        for client in range(config.num_clients):
            rows.append(
                (int(level), client, float(report.values[client]), float(report.percents[client]))
            )
    write_rows(out / "shapley.csv", ["level", "client", "phi", "percent"], rows)
    if not quiet:
        for level in levels:
            pct = reports[int(level)].percents
            label = "fresh" if level == 0 else f"stale {level}"
            print(f"{label}: client 0 contribution {pct[0]:.2f}%")
    return EXIT_OK


def _load_run(run_dir: Path):
    with open(run_dir / "config.echo.json") as f:
        strategy = json.load(f)["strategy"]
    _, client_rows = read_rows(run_dir / "per_client.csv")
    acc = np.array([float(row[1]) for row in client_rows])
    _, round_rows = read_rows(run_dir / "rounds.csv")
    series = {int(row[0]): float(row[2]) for row in round_rows}
    return strategy, acc, series


def report_command(run_dirs, out_dir, quiet: bool = False) -> int:
    out = _prepare_out_dir(out_dir)
    runs = [(_load_run(Path(d)), Path(d).name) for d in run_dirs]
    stats_rows = []
    for (strategy, acc, _), _name in runs:
        s = accuracy_stats(acc)
        stats_rows.append((strategy, s.mean, s.variance, s.worst10_mean, s.best10_mean))
    write_rows(out / "stats.csv",
               ["strategy", "mean", "var", "worst10", "best10"], stats_rows)

    ttest_rows = []
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            (strat_a, _, series_a), _ = runs[i]
            (strat_b, _, series_b), _ = runs[j]
            shared = sorted(set(series_a) & set(series_b))
            if len(shared) < 2:
                continue
            result = paired_t_test(
                [series_a[r] for r in shared], [series_b[r] for r in shared]
            )
            ttest_rows.append((strat_a, strat_b, result.t, result.p))
    write_rows(out / "ttest.csv", ["strategy_a", "strategy_b", "t", "p"], ttest_rows)
    if not quiet:
        print(f"report over {len(runs)} runs -> {out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsim", description="Deterministic federated-learning simulator."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--strategy", default=None, help="override config strategy")
    p_run.add_argument("--quiet", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--config", required=True, help="JSON sweep spec")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--quiet", action="store_true")

    p_shap = sub.add_parser("shapley", help="staleness contribution experiment")
    p_shap.add_argument("--config", required=True, help="JSON experiment config")
    p_shap.add_argument("--out", required=True)
    p_shap.add_argument("--levels", default="0,1,2,3,4,5,6",
                        help="comma-separated stale-round levels (0 = fresh)")
    p_shap.add_argument("--seed", type=int, default=None)
    p_shap.add_argument("--quiet", action="store_true")

    p_rep = sub.add_parser("report", help="stats and t-tests over run directories")
    p_rep.add_argument("run_dirs", nargs="+", help="existing run directories")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            config = parse_config(args.config)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            if args.strategy is not None:
                config = dataclasses.replace(config, strategy=args.strategy)
                config.validate()
            return run_command(config, args.out, quiet=args.quiet)
        if args.verb == "sweep":
            return sweep_command(parse_sweep(args.config), args.out, quiet=args.quiet)
        if args.verb == "shapley":
            config = parse_config(args.config)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            levels = [int(x) for x in args.levels.split(",") if x.strip()]
            return shapley_command(config, args.out, levels, quiet=args.quiet)
        if args.verb == "report":
            return report_command(args.run_dirs, args.out, quiet=args.quiet)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PermissionError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FedsimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError("unreachable verb")


if __name__ == "__main__":
    sys.exit(main())
