"""Command-line entry point: ``goldpan {simulate,sweep-noise,sweep-concentration,calibrate}``.

Exit codes: 0 success, 2 usage/config error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .calibration import CalibrationError, estimate_profiles, read_trial_log, save_profiles
from .simulation import (
    DEFAULT_ALPHAS,
    DEFAULT_SIGMAS,
    EnvironmentSpec,
    Stopping,
    run_experiment,
    sweep_concentration,
    sweep_noise,
)
from .strategies import StrategyKind

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
CSV_COLUMNS = ["strategy", "iteration", "mean_accuracy", "std_error", "mean_entropy"]

DEFAULT_STRATEGIES = {
    "simulate": ["GoldPanning", "HungarianIG", "PSC"],
    "sweep-noise": ["GoldPanning"],
    "sweep-concentration": ["GoldPanning", "PSC"],
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n_items: int = 50
    detector_source: str = "uniform"
    alpha: float | None = None
    detector_file: str | None = None
    k: int | None = None
    noise_sigma: float = 0.0
    seed: int | None = None
    strategies: list = field(default_factory=lambda: list(DEFAULT_STRATEGIES["simulate"]))
    iterations: int = 20
    runs: int = 2000
    output_path: str = "results.csv"
    parallelism: int = 1
    delta: float | None = None
    epsilon: float | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        need(is_int(self.n_items) and self.n_items >= 1, "n_items", "must be an integer >= 1")
        need(is_int(self.iterations) and self.iterations >= 1, "iterations", "must be an integer >= 1")
        need(is_int(self.runs) and self.runs >= 1, "runs", "must be an integer >= 1")
        need(is_int(self.parallelism) and self.parallelism >= 1, "parallelism", "must be an integer >= 1")
        need(self.seed is None or (is_int(self.seed) and 0 <= self.seed < 2**64), "seed",
             "must be an unsigned 64-bit integer")
        need(isinstance(self.strategies, list) and self.strategies, "strategies", "must be a non-empty list")
        for s in self.strategies:
            try:
                StrategyKind.parse(s)
            except ValueError as exc:
                raise ConfigError(f"strategies: {exc}") from None
        need(isinstance(self.noise_sigma, (int, float)) and self.noise_sigma >= 0, "noise_sigma", "must be >= 0")
        try:
            self.environment()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def environment(self) -> EnvironmentSpec:
        return EnvironmentSpec(n_items=self.n_items, detector_source=self.detector_source, alpha=self.alpha,
                               detector_file=self.detector_file, k=self.k,
                               noise_sigma=float(self.noise_sigma), seed=self.seed or 0)

    def stopping(self):
        if self.delta is None and self.epsilon is None:
            return None
        return Stopping(self.delta, self.epsilon)


def _parse_list(text, conv):
    try:
        return [conv(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse list {text!r}") from None


def _seed_arg(text):
    if text == "random":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--seed takes an unsigned 64-bit integer or 'random'") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("--seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goldpan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("simulate", "Monte Carlo strategy comparison"),
                            ("sweep-noise", "GP accuracy under noisy detector estimates"),
                            ("sweep-concentration", "GP vs PSC across Beta(alpha, alpha) detector pools")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON file with flat ExperimentConfig keys")
        p.add_argument("--out", type=Path, help="CSV output path; a .json sidecar is written next to it")
        p.add_argument("--seed", type=_seed_arg, help="master seed (u64) or 'random'")
        p.add_argument("--runs", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--n-items", type=int)
        p.add_argument("--strategies", type=lambda s: _parse_list(s, str))
        p.add_argument("--parallelism", type=int)
        p.add_argument("--detector-file", type=Path)
        if name == "sweep-noise":
            p.add_argument("--sigmas", type=lambda s: _parse_list(s, float), default=list(DEFAULT_SIGMAS))
        if name == "sweep-concentration":
            p.add_argument("--alphas", type=lambda s: _parse_list(s, float), default=list(DEFAULT_ALPHAS))

    p = sub.add_parser("calibrate", help="estimate per-position TPR/FPR from a JSONL trial log")
    p.add_argument("log", type=Path, help="trial log (JSON lines)")
    p.add_argument("--out", type=Path, required=True, help="profile file to write (JSON)")
    p.add_argument("--smoothing", action="store_true", help="add-one smoothing of the raw ratios")
    return parser


def resolve_config(args) -> ExperimentConfig:
    raw = {"strategies": list(DEFAULT_STRATEGIES[args.command])}
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        if "command" in loaded and isinstance(loaded.get("config"), dict):
            # a sidecar from a previous run
            loaded = loaded["config"]
        raw.update(loaded)
    overrides = {"runs": args.runs, "iterations": args.iterations, "n_items": args.n_items,
                 "strategies": args.strategies, "parallelism": args.parallelism,
                 "output_path": str(args.out) if args.out else None}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.detector_file is not None:
        raw["detector_source"] = "file"
        raw["detector_file"] = str(args.detector_file)
    if args.seed == "random":
        raw["seed"] = secrets.randbits(64)
    elif args.seed is not None:
        raw["seed"] = args.seed
    if raw.get("seed") is None:
        raise ConfigError("seed: required; pass --seed N (or --seed random) or set 'seed' in the config")
    return ExperimentConfig.from_dict(raw)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_results(path: Path, blocks, lead: str | None = None) -> None:
    """``blocks`` is a list of ``(lead_value, AggregateResult)``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(([lead] if lead else []) + CSV_COLUMNS)
        for value, agg in blocks:
            for strategy, it, acc, se, ent in agg.rows():
                row = [strategy, it, _fmt(acc), _fmt(se), _fmt(ent)]
                writer.writerow(([_fmt(value)] if lead else []) + row)


def write_sidecar(csv_path: Path, cfg: ExperimentConfig, command: str, extra=None) -> Path:
    side = csv_path.with_suffix(".json")
    doc = {"command": command, "version": __version__, "config": asdict(cfg), **(extra or {})}
    side.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return side


def _experiment_kwargs(cfg):
    return dict(iterations=cfg.iterations, runs=cfg.runs, master_seed=cfg.seed,
                parallelism=cfg.parallelism, stopping=cfg.stopping())


def cmd_simulate(cfg: ExperimentConfig) -> Path:
    agg = run_experiment(cfg.environment(), cfg.strategies, **_experiment_kwargs(cfg))
    out = Path(cfg.output_path)
    write_results(out, [(None, agg)])
    write_sidecar(out, cfg, "simulate")
    return out


def cmd_sweep_noise(cfg: ExperimentConfig, sigmas) -> Path:
    if any(s < 0 for s in sigmas) or not sigmas:
        raise ConfigError("sigmas: need a non-empty list of values >= 0")
    res = sweep_noise(cfg.environment(), sigmas, cfg.strategies, **_experiment_kwargs(cfg))
    out = Path(cfg.output_path)
    write_results(out, list(res.items()), lead="sigma")
    write_sidecar(out, cfg, "sweep-noise", {"sigmas": list(res)})
    return out


def cmd_sweep_concentration(cfg: ExperimentConfig, alphas) -> Path:
    if any(a <= 0 for a in alphas) or not alphas:
        raise ConfigError("alphas: need a non-empty list of values > 0")
    res = sweep_concentration(cfg.environment(), alphas, cfg.strategies, **_experiment_kwargs(cfg))
    out = Path(cfg.output_path)
    write_results(out, list(res.items()), lead="alpha")
    write_sidecar(out, cfg, "sweep-concentration", {"alphas": list(res)})
    return out


def cmd_calibrate(log_path, out_path, smoothing=False, stream=None) -> Path:
    stream = stream or sys.stdout
    records = read_trial_log(log_path)
    if not records:
        raise CalibrationError("trial log is empty")
    profile = estimate_profiles(records, smoothing=smoothing)
    save_profiles(profile, out_path)
    print(f"{'position':>8}  {'tpr':>8}  {'fpr':>8}  {'diag':>8}", file=stream)
    for p in profile.positions:
        cells = [("   undef" if v is None else f"{v:8.4f}") for v in (p.tpr, p.fpr, p.diagnosticity)]
        print(f"{p.position:>8}  " + "  ".join(cells), file=stream)
    return Path(out_path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "calibrate":
            cmd_calibrate(args.log, args.out, args.smoothing)
            return EXIT_OK
        cfg = resolve_config(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "sweep-noise":
            cmd_sweep_noise(cfg, args.sigmas)
        else:
            cmd_sweep_concentration(cfg, args.alphas)
    except (ConfigError, CalibrationError) as exc:
        print(f"goldpan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"goldpan: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
