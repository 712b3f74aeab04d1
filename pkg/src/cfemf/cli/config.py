"""Experiment configuration: an INI file with typed, validated sections.

Sections and keys::

    [experiment]  policies, direction, beamformer, trials, seed, evaluation,
                  out, workers, samples, unfold, e2e_model, unfolded_model, dataset
    [system]      any SystemConfig field, plus ap_power_dbm, ue_power_dbm,
                  pilot_power_dbm; sar_limits as "b:E, b:E"
    [solver]      any SolverConfig field
    [train]       any TrainConfig field, plus model (e2e | unfolded), stages,
                  floor_dbm

Unknown sections or keys raise :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources

from ..experiments import parse_policy
from ..ml.models import TrainConfig
from ..optimizer import SolverConfig
from ..pipeline import SMALL_PRESET
from ..scenario import SystemConfig, dbm_to_watt

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "default_config_text",
           "PRESET_RUN_DEFAULTS"]

# run-size defaults that come with each preset
PRESET_RUN_DEFAULTS = {"small": {"trials": 50, "samples": 2000},
                       "paper": {"trials": 100, "samples": 100_000}}

_DBM_ALIASES = {"ap_power_dbm": "ap_power_budget", "ue_power_dbm": "ue_power_budget",
                "pilot_power_dbm": "pilot_power"}


class ConfigError(ValueError):
    """Invalid configuration; the CLI exits with status 2."""


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    policies: tuple = ("upc", "fpc-fair", "fpc-opp", "opc-maximin")
    direction: str = "dl"
    beamformer: str = "cb"
    trials: int = 10
    seed: int = 0
    evaluation: str = "estimated"
    out: str = "out"
    workers: int = 1
    samples: int = 100
    unfold: bool = False
    e2e_model: str = ""
    unfolded_model: str = ""
    dataset: str = ""
    model: str = "e2e"
    stages: int = 3
    floor_dbm: float = -80.0
    batch_size_set: bool = False

    def validate(self):
        if self.direction not in ("dl", "ul"):
            raise ConfigError(f"direction must be dl or ul, got {self.direction!r}")
        if self.beamformer not in ("cb", "rzf"):
            raise ConfigError(f"beamformer must be cb or rzf, got {self.beamformer!r}")
        if self.evaluation not in ("estimated", "true"):
            raise ConfigError(f"evaluation must be estimated or true, got {self.evaluation!r}")
        if self.model not in ("e2e", "unfolded"):
            raise ConfigError(f"model must be e2e or unfolded, got {self.model!r}")
        for name in ("trials", "samples"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.workers < 1 or self.stages < 1:
            raise ConfigError("workers and stages must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in self.policies:
            try:
                parse_policy(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return self

    def train_config(self):
        """Training schedule; the batch size defaults to 256 (DL) or 64 (UL)."""
        if self.batch_size_set:
            return self.train
        return dataclasses.replace(self.train, batch_size=256 if self.direction == "dl" else 64)


def default_config_text():
    return resources.files("cfemf").joinpath("data/default.cfg").read_text()


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(text, annotation, default):
    text = text.strip()
    ann = str(annotation)
    if "None" in ann and text.lower() in ("", "none", "auto"):
        return None
    if isinstance(default, bool) or ann == "bool":
        return _parse_bool(text)
    if isinstance(default, int) or ann.startswith("int"):
        return int(text)
    if isinstance(default, float) or ann.startswith("float"):
        return float(text)
    if isinstance(default, tuple):
        items = [item.strip() for item in text.split(",") if item.strip()]
        if default and isinstance(default[0], int):
            return tuple(int(i) for i in items)
        return tuple(items)
    return text


def _section_values(section, cls, extra=()):
    known = {f.name: f for f in dataclasses.fields(cls)}
    values, extras = {}, {}
    for key, raw in section.items():
        if key in extra:
            extras[key] = raw
            continue
        if key not in known:
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        f = known[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        try:
            values[key] = _parse_value(raw, f.type, default)
        except ValueError as exc:
            raise ConfigError(f"[{section.name}] {key}: {exc}") from None
    return values, extras


def _parse_sar(text):
    pairs = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            b, e = item.split(":")
            pairs.append((float(b), float(e)))
        except ValueError:
            raise ConfigError(f"[system] sar_limits: bad pair {item.strip()!r}") from None
    return tuple(pairs)


def load_config(path=None, preset=None, overrides=None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from the shipped defaults, an optional
    file, an optional preset and command-line overrides (in that order)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(default_config_text(), source="default.cfg")
    if path is not None:
        try:
            with open(path) as fh:
                user = configparser.ConfigParser(interpolation=None)
                user.optionxform = str
                user.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for name in user.sections():
            if name not in ("experiment", "system", "solver", "train"):
                raise ConfigError(f"unknown section [{name}]")
            if not parser.has_section(name):
                parser.add_section(name)
            for key, value in user.items(name):
                parser.set(name, key, value)

    sys_section = parser["system"] if parser.has_section("system") else {}
    sys_values, sys_extra = _section_values(
        sys_section, SystemConfig, extra=("ap_power_dbm", "ue_power_dbm", "pilot_power_dbm",
                                          "sar_limits"))
    for alias, target in _DBM_ALIASES.items():
        if alias in sys_extra:
            try:
                sys_values[target] = float(dbm_to_watt(float(sys_extra[alias])))
            except ValueError:
                raise ConfigError(f"[system] {alias}: not a number") from None
    if "sar_limits" in sys_extra:
        sys_values["sar_limits"] = _parse_sar(sys_extra["sar_limits"])

    exp_values, _ = _section_values(parser["experiment"], ExperimentConfig) \
        if parser.has_section("experiment") else ({}, {})
    for bad in ("system", "solver", "train", "model", "stages", "floor_dbm", "batch_size_set"):
        if bad in exp_values:
            raise ConfigError(f"[experiment] unknown key {bad!r}")
    solver_values, _ = _section_values(parser["solver"], SolverConfig) \
        if parser.has_section("solver") else ({}, {})
    train_section = parser["train"] if parser.has_section("train") else {}
    train_values, train_extra = _section_values(train_section, TrainConfig,
                                                extra=("model", "stages", "floor_dbm"))

    run = {}
    if preset is not None:
        if preset not in PRESET_RUN_DEFAULTS:
            raise ConfigError(f"unknown preset {preset!r}")
        if preset == "small":
            sys_values.update(SMALL_PRESET)
        else:
            for key in SMALL_PRESET:
                sys_values.pop(key, None)
        run.update(PRESET_RUN_DEFAULTS[preset])
    exp_values.update(run)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    exp_values.update(overrides)

    try:
        system = SystemConfig(**sys_values)
        solver = SolverConfig(**solver_values)
        train = TrainConfig(**train_values)
        cfg = ExperimentConfig(
            system=system, solver=solver, train=train,
            batch_size_set="batch_size" in train_values,
            model=train_extra.get("model", "e2e").strip(),
            stages=int(train_extra.get("stages", 3)),
            floor_dbm=float(train_extra.get("floor_dbm", -80.0)),
            **exp_values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()
