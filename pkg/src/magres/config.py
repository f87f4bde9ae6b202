"""TOML experiment configuration.

Sections: ``[experiment]``, ``[reservoir]``, ``[ridge]``, ``[task]`` for the
two tasks, and ``[device]`` plus ``[characterize]`` for the neuron transfer
sweep. Missing keys fall back to the task defaults of
:func:`magres.tasks.default_spec`; unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Optional

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .device import NeuronParams
from .errors import ConfigError, MagresError
from .reservoir import ReservoirConfig
from .tasks import ChannelParams, ExperimentSpec, MGParams, default_spec
from .training import RidgeConfig

SEED_ENV = "MAGRES_SEED"

_EXPERIMENT_KEYS = ("task", "seed", "train_len", "test_len", "replicates", "sizes", "horizons",
                    "transient", "target_delay", "symbol_levels")


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _check_keys(section: str, given: dict, allowed) -> None:
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _field_names(cls) -> list:
    return [f.name for f in fields(cls)]


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int]) -> int:
    """CLI flag, then config file, then ``$MAGRES_SEED``, then 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ConfigError(f"${SEED_ENV} is not an integer: {env!r}") from exc
    return 0


def spec_from_dict(raw: dict, seed: Optional[int] = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from parsed TOML."""
    _check_keys("top level", raw, ("experiment", "reservoir", "ridge", "task", "device", "characterize"))
    exp = dict(raw.get("experiment", {}))
    _check_keys("experiment", exp, _EXPERIMENT_KEYS)
    task = exp.get("task")
    if task is None:
        raise ConfigError("[experiment] task is required")
    try:
        base = default_spec(task)
        res = dict(raw.get("reservoir", {}))
        _check_keys("reservoir", res, [n for n in _field_names(ReservoirConfig) if n != "seed"])
        ridge = dict(raw.get("ridge", {}))
        _check_keys("ridge", ridge, ("lambda", "feature_mode"))
        if "lambda" in ridge:
            ridge["lam"] = ridge.pop("lambda")
        tp = dict(raw.get("task", {}))
        tp_cls = type(base.task_params)
        _check_keys("task", tp, _field_names(tp_cls))

        kwargs = {k: exp[k] for k in _EXPERIMENT_KEYS if k in exp and k not in ("task", "seed")}
        return replace(
            base,
            reservoir=replace(base.reservoir, **res),
            ridge=replace(base.ridge, **ridge),
            task_params=replace(base.task_params, **tp),
            seed=resolve_seed(seed, exp.get("seed")),
            **kwargs,
        )
    except ConfigError:
        raise
    except (MagresError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_spec(path, seed: Optional[int] = None) -> ExperimentSpec:
    return spec_from_dict(read_toml(path), seed)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Config-file representation; ``spec_from_dict(spec_to_dict(s)) == s``."""
    exp = {"task": spec.task, "seed": spec.seed, "train_len": spec.train_len,
           "test_len": spec.test_len, "replicates": spec.replicates,
           "horizons": list(spec.horizons), "transient": spec.transient,
           "target_delay": spec.target_delay, "symbol_levels": spec.symbol_levels}
    if spec.sizes:
        exp["sizes"] = list(spec.sizes)
    res = spec.reservoir.as_dict()
    res.pop("seed")
    return {
        "experiment": exp,
        "reservoir": res,
        "ridge": {"lambda": spec.ridge.lam, "feature_mode": spec.ridge.feature_mode},
        "task": spec.task_params.as_dict(),
    }


def dump_config(data: dict) -> str:
    return tomli_w.dumps(data)


def spec_hash(spec_dict: dict) -> str:
    canonical = json.dumps(spec_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class CharacterizeConfig:
    neuron: NeuronParams
    v_min: float
    v_max: float
    n_points: int = 41
    samples_per_point: int = 10000
    seed: int = 0

    def as_dict(self) -> dict:
        return {"device": asdict(self.neuron),
                "characterize": {"v_min": self.v_min, "v_max": self.v_max, "n_points": self.n_points,
                                 "samples_per_point": self.samples_per_point, "seed": self.seed}}


def characterize_from_dict(raw: dict, seed: Optional[int] = None) -> CharacterizeConfig:
    _check_keys("top level", raw, ("device", "characterize", "experiment", "reservoir", "ridge", "task"))
    dev = dict(raw.get("device", {}))
    _check_keys("device", dev, _field_names(NeuronParams))
    ch = dict(raw.get("characterize", {}))
    _check_keys("characterize", ch, ("v_min", "v_max", "n_points", "samples_per_point", "seed"))
    try:
        neuron = NeuronParams(**dev)
        span = 3.0 / neuron.beta
        return CharacterizeConfig(
            neuron=neuron,
            v_min=float(ch.get("v_min", -span)),
            v_max=float(ch.get("v_max", span)),
            n_points=int(ch.get("n_points", 41)),
            samples_per_point=int(ch.get("samples_per_point", 10000)),
            seed=resolve_seed(seed, ch.get("seed")),
        )
    except (MagresError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid device configuration: {exc}") from exc


def load_characterize(path, seed: Optional[int] = None) -> CharacterizeConfig:
    return characterize_from_dict(read_toml(path), seed)


def round_sig(obj: Any, digits: int = 9) -> Any:
    """Recursively round floats to ``digits`` significant digits for output."""
    if isinstance(obj, float):
        return float(format(obj, f".{digits}g"))
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    return obj
