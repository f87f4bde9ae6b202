"""Command-line driver.

    magres characterize --config device.toml --out results/
    magres run          --config eq.toml --seed 7 --out results/
    magres sweep        --config mg.toml --param n_nodes --values 10 50 200 400 --jobs 4

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 task failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import (
    CharacterizeConfig,
    dump_config,
    load_characterize,
    load_spec,
    round_sig,
    spec_hash,
    spec_to_dict,
)
from .device import characterize_transfer, format_g9
from .errors import ConfigError, MagresError
from .reservoir import ReservoirConfig
from .rng import RngState
from .tasks import ChannelParams, ExperimentReport, ExperimentSpec, MGParams, primary_metric, run_experiment

log = logging.getLogger("magres")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_TASK = 0, 2, 3, 4


@dataclass
class RunManifest:
    spec_hash: str
    toolkit_version: str
    seed: int
    wall_time: float
    outputs: list

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        _write_json(path, asdict(self))
        return path


def _write_json(path: Path, data) -> None:
    text = json.dumps(round_sig(data), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_g9(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_columns(path: Path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_cell(v) for v in row])


def write_report(report: ExperimentReport, out_dir: Path, fmt: str = "json",
                 spec_digest: Optional[str] = None) -> list:
    """Write the JSON report (always), optional CSV metrics and the trace CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    metrics = dict(report.metrics)
    if spec_digest:
        metrics["spec_hash"] = spec_digest
    metrics["toolkit_version"] = __version__
    _write_json(out_dir / "report.json", metrics)
    written.append("report.json")
    if fmt == "csv":
        name, blocks = primary_metric(report)
        _write_columns(out_dir / "report.csv", ["n_nodes", "metric", "median", "iqr", "n_seeds"],
                       [[int(n) for n in blocks], [name] * len(blocks),
                        [float(b["median"]) for b in blocks.values()],
                        [float(b["iqr"]) for b in blocks.values()],
                        [len(b["values"]) for b in blocks.values()]])
        written.append("report.csv")
    for name, (header, columns) in report.traces.items():
        _write_columns(out_dir / f"{name}.csv", header, columns)
        written.append(f"{name}.csv")
    return written


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_characterize(config_path, out_dir, seed: Optional[int] = None, fmt: str = "csv") -> int:
    """Monte-Carlo ASN transfer sweep -> ``transfer.csv``."""
    t0 = time.perf_counter()
    cfg: CharacterizeConfig = load_characterize(config_path, seed)
    table = characterize_transfer(cfg.neuron, cfg.v_min, cfg.v_max, cfg.n_points,
                                  cfg.samples_per_point, RngState(cfg.seed, ("characterize",)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "transfer.csv")
    written = ["transfer.csv"]
    if fmt == "json":
        _write_json(out / "transfer.json", table.as_dict())
        written.append("transfer.json")
    RunManifest(spec_hash(cfg.as_dict()), __version__, cfg.seed, time.perf_counter() - t0, written).write(out)
    return EXIT_OK


def cmd_run(config_path, out_dir, seed: Optional[int] = None, fmt: str = "json") -> int:
    """Run the experiment declared in the config."""
    t0 = time.perf_counter()
    spec = load_spec(config_path, seed)
    digest = spec_hash(spec.as_dict())
    report = run_experiment(spec)
    out = Path(out_dir)
    written = write_report(report, out, fmt, digest)
    (out / "config.toml").write_text(_dump_spec(spec), encoding="utf-8")
    written.append("config.toml")
    RunManifest(digest, __version__, spec.seed, time.perf_counter() - t0, written).write(out)
    return EXIT_OK


def _dump_spec(spec: ExperimentSpec) -> str:
    return dump_config(spec_to_dict(spec))


_SECTIONS = {
    "experiment": ("train_len", "test_len", "replicates", "transient", "target_delay", "symbol_levels", "seed"),
    "reservoir": tuple(f.name for f in fields(ReservoirConfig) if f.name != "seed"),
    "ridge": ("lambda",),
    "task": tuple(f.name for f in fields(MGParams)) + tuple(f.name for f in fields(ChannelParams)),
}


def apply_parameter(spec: ExperimentSpec, name: str, value: float) -> ExperimentSpec:
    """Return ``spec`` with the numeric field ``name`` (optionally ``section.field``) set."""
    section, _, key = name.rpartition(".")
    sections = [section] if section else list(_SECTIONS)
    for sec in sections:
        if key not in _SECTIONS.get(sec, ()):
            continue
        if sec == "experiment":
            target, attr = spec, key
        elif sec == "reservoir":
            target, attr = spec.reservoir, key
        elif sec == "ridge":
            target, attr = spec.ridge, "lam"
        else:
            target, attr = spec.task_params, key
            if not hasattr(target, attr):
                continue
        current = getattr(target, attr)
        if isinstance(current, bool) or not isinstance(current, (int, float)):
            raise ConfigError(f"parameter {name!r} is not numeric")
        if isinstance(current, int):
            if float(value) != int(value):
                raise ConfigError(f"parameter {name!r} needs an integer value, got {value}")
            value = int(value)
        else:
            value = float(value)
        try:
            new = replace(target, **{attr: value})
            if sec == "experiment":
                out = new
            elif sec == "reservoir":
                out = replace(spec, reservoir=new)
            elif sec == "ridge":
                out = replace(spec, ridge=new)
            else:
                out = replace(spec, task_params=new)
        except (MagresError, ValueError) as exc:
            raise ConfigError(f"invalid value {value} for {name!r}: {exc}") from exc
        if key == "n_nodes":
            out = replace(out, sizes=None)
        return out
    raise ConfigError(f"unknown sweep parameter {name!r}")


def _sweep_job(spec: ExperimentSpec, out_dir: str) -> dict:
    report = run_experiment(spec)
    write_report(report, Path(out_dir), "json", spec_hash(spec.as_dict()))
    name, blocks = primary_metric(report)
    return {"metric": name, "blocks": blocks}


def _fmt_value(v: float) -> str:
    return format_g9(v) if not float(v).is_integer() else str(int(v))


def cmd_sweep(config_path, parameter: str, values: Sequence[float], out_dir, seed: Optional[int] = None,
              jobs: int = 1, fmt: str = "csv") -> int:
    """One experiment per value; aggregate median and IQR over seeds into ``sweep.csv``."""
    t0 = time.perf_counter()
    base = load_spec(config_path, seed)
    if not values:
        raise ConfigError("sweep needs at least one value")
    specs = [apply_parameter(base, parameter, v) for v in values]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dirs = [f"{parameter}={_fmt_value(v)}" for v in values]
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, specs, [str(out / d) for d in dirs]))
    else:
        results = [_sweep_job(s, str(out / d)) for s, d in zip(specs, dirs)]

    rows = []
    for v, res in zip(values, results):
        for n, block in res["blocks"].items():
            rows.append((float(v), int(n), res["metric"], block["median"], block["iqr"], len(block["values"])))
    header = ["value", "n_nodes", "metric", "median", "iqr", "n_seeds"]
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for v, n, metric, med, iqr, k in rows:
            w.writerow([_fmt_value(v), n, metric, format_g9(med), format_g9(iqr), k])
    written = ["sweep.csv"]
    if fmt == "json":
        _write_json(out / "sweep.json", {"parameter": parameter, "rows": [dict(zip(header, r)) for r in rows]})
        written.append("sweep.json")
    for d, res in zip(dirs, results):
        written.append(f"{d}/report.json")
        written += sorted(f"{d}/{p.name}" for p in (out / d).glob("*.csv"))
    digest = spec_hash({"base": base.as_dict(), "parameter": parameter, "values": [float(v) for v in values]})
    RunManifest(digest, __version__, base.seed, time.perf_counter() - t0, written).write(out)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magres", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"magres {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML configuration file")
    common.add_argument("--seed", type=_seed, default=None, help="top-level seed (fallback: $MAGRES_SEED)")
    common.add_argument("--out", default="magres_out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel jobs for sweeps")
    common.add_argument("--format", choices=("json", "csv"), default=None, dest="fmt")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("characterize", parents=[common], help="ASN transfer-curve sweep")
    sub.add_parser("run", parents=[common], help="run one experiment")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one numeric parameter")
    sw.add_argument("--param", required=True, help="field name, optionally section-qualified")
    sw.add_argument("--values", required=True, nargs="+", type=float)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "characterize":
            return cmd_characterize(args.config, args.out, args.seed, args.fmt or "csv")
        if args.command == "run":
            return cmd_run(args.config, args.out, args.seed, args.fmt or "json")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return cmd_sweep(args.config, args.param, args.values, args.out, args.seed,
                         args.jobs, args.fmt or "csv")
    except ConfigError as exc:
        print(f"magres: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"magres: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MagresError, ArithmeticError, ValueError) as exc:
        print(f"magres: task failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TASK


if __name__ == "__main__":
    sys.exit(main())
