"""Experiment configuration files.

Configs are YAML mappings carrying ``version: 1``. Every section is optional
and falls back to the defaults below; unknown keys are rejected. Example::

    version: 1
    scenario: federated          # or: centralized
    seed: 7                      # master seed; all other seeds derive from it
    output_dir: runs/fl
    data:
      source: synthetic          # or: csv
      synthetic: {d: 216, n_classes: 7, n_per_class: 143, separation: 3.0, n_records: 1000}
      test_fraction: 0.3
    model: {preset: medium}      # or: {hidden: [[128, relu], [64, relu]]}
    train: {epochs: 3, batch_size: 100, learning_rate: 0.001, optimizer: adam}
    attack:
      target_label: 0
      poison_fraction: 0.1
      surrogate_epochs: 1
      ga: {population_size: 30, generations: 20, k: 8}
    federated: {n_clients: 10, participation_fraction: 1.0, rounds: 10,
                malicious_fraction: 0.1, attack_start_round: 4}
    plots: true

``attack.train`` defaults to the ``train`` section, so attackers train like
everyone else unless told otherwise.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from . import gattack, nn
from .data import MOORE_CLASSES
from .fedsim import FLConfig
from .seeding import derive

CONFIG_VERSION = 1
OUTPUT_ENV = "FEDTRIGGER_OUTPUT_DIR"
SCENARIOS = ("centralized", "federated")


class ConfigError(ValueError):
    """Carries every problem found in a config, one ``path: message`` per entry."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class SyntheticSpec:
    d: int = 216
    n_classes: int = 7
    n_per_class: int = 143
    separation: float = 3.0
    n_records: int | None = None


@dataclass(frozen=True)
class CsvSpec:
    path: str = ""
    label_column: str | int = -1
    header: bool = True
    class_whitelist: tuple[str, ...] | None = MOORE_CLASSES


@dataclass(frozen=True)
class DataSpec:
    source: str = "synthetic"
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    csv: CsvSpec | None = None
    test_fraction: float = 0.3
    normalize: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "centralized"
    seed: int = 0
    output_dir: str = "runs/out"
    data: DataSpec = field(default_factory=DataSpec)
    arch_preset: str | None = "medium"
    hidden: tuple[tuple[int, str], ...] | None = None
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    attack: gattack.MaliciousClientConfig = field(default_factory=gattack.MaliciousClientConfig)
    federated: FLConfig = field(default_factory=FLConfig)
    plots: bool = True

    def arch(self, input_dim: int, n_classes: int) -> nn.ModelArch:
        if self.hidden is not None:
            return nn.ModelArch(input_dim, self.hidden, n_classes)
        return nn.ModelArch.preset(self.arch_preset or "medium", input_dim, n_classes)

    def sub_seed(self, *tags) -> int:
        return derive(self.seed, *tags)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


def _build(cls, raw, path, errors, overrides=None):
    """Instantiate dataclass ``cls`` from a mapping, recording problems under ``path``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errors.append(f"{path}: expected a mapping")
        return None
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            errors.append(f"{path}.{key}: unknown key")
    kw = {k: v for k, v in raw.items() if k in known}
    kw.update(overrides or {})
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        errors.append(f"{path}: {exc}")
        return None


def _check_field(cond, path, msg, errors):
    if not cond:
        errors.append(f"{path}: {msg}")


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a loaded YAML mapping; raises :class:`ConfigError` listing all problems."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])
    top = {
        "version", "scenario", "seed", "output_dir", "data", "model", "train",
        "attack", "federated", "plots",
    }
    for key in raw:
        if key not in top:
            errors.append(f"{key}: unknown key")
    if raw.get("version") != CONFIG_VERSION:
        errors.append(f"version: must be {CONFIG_VERSION} (got {raw.get('version')!r})")
    scenario = raw.get("scenario", "centralized")
    _check_field(scenario in SCENARIOS, "scenario", f"must be one of {SCENARIOS}", errors)
    seed = raw.get("seed", 0)
    _check_field(isinstance(seed, int), "seed", "must be an integer", errors)

    data_raw = dict(raw.get("data") or {})
    synth = _build(SyntheticSpec, data_raw.pop("synthetic", None), "data.synthetic", errors)
    csv_spec = None
    if "csv" in data_raw:
        csv_raw = dict(data_raw.pop("csv") or {})
        if "class_whitelist" in csv_raw and csv_raw["class_whitelist"] is not None:
            csv_raw["class_whitelist"] = tuple(csv_raw["class_whitelist"])
        csv_spec = _build(CsvSpec, csv_raw, "data.csv", errors)
    data = _build(DataSpec, data_raw, "data", errors, {"synthetic": synth, "csv": csv_spec})
    if data is not None:
        _check_field(data.source in ("synthetic", "csv"), "data.source",
                     "must be 'synthetic' or 'csv'", errors)
        _check_field(0.0 < data.test_fraction < 1.0, "data.test_fraction",
                     f"must be in (0, 1) (got {data.test_fraction})", errors)
        if data.source == "csv":
            _check_field(csv_spec is not None and bool(csv_spec.path), "data.csv.path",
                         "required when data.source is csv", errors)
    if synth is not None:
        _check_field(synth.d >= 1, "data.synthetic.d", "must be >= 1", errors)
        _check_field(synth.n_classes >= 2, "data.synthetic.n_classes", "must be >= 2", errors)
        _check_field(synth.n_per_class >= 1, "data.synthetic.n_per_class", "must be >= 1", errors)
        _check_field(synth.separation >= 0, "data.synthetic.separation", "must be >= 0", errors)

    model = dict(raw.get("model") or {})
    for key in model:
        if key not in ("preset", "hidden"):
            errors.append(f"model.{key}: unknown key")
    preset = model.get("preset", "medium" if "hidden" not in model else None)
    hidden = None
    if "hidden" in model:
        try:
            hidden = tuple((int(w), str(a)) for w, a in model["hidden"])
            nn.ModelArch(1, hidden, 2)
        except (TypeError, ValueError) as exc:
            errors.append(f"model.hidden: {exc}")
    elif preset not in nn.PRESETS:
        errors.append(f"model.preset: must be one of {sorted(nn.PRESETS)} (got {preset!r})")

    train = _build(nn.TrainConfig, raw.get("train"), "train", errors)

    attack_raw = dict(raw.get("attack") or {})
    ga = _build(gattack.GAConfig, attack_raw.pop("ga", None), "attack.ga", errors)
    atrain_raw = attack_raw.pop("train", None)
    atrain = train
    if atrain_raw is not None:
        atrain = _build(nn.TrainConfig, atrain_raw, "attack.train", errors)
    pf = attack_raw.get("poison_fraction", 0.1)
    if not (isinstance(pf, (int, float)) and 0.0 < pf <= 0.5):
        errors.append(f"attack.poison_fraction: must be in (0, 0.5], the poisoning cap (got {pf})")
    attack = None
    if ga is not None and atrain is not None:
        attack = _build(gattack.MaliciousClientConfig, attack_raw, "attack", errors,
                        {"ga": ga, "train": atrain})

    fed_raw = dict(raw.get("federated") or {})
    c = fed_raw.get("participation_fraction", 1.0)
    if not (isinstance(c, (int, float)) and 0.0 < c <= 1.0):
        errors.append(f"federated.participation_fraction: must be in (0, 1] (got {c})")
    federated = None
    if train is not None:
        federated = _build(FLConfig, fed_raw, "federated", errors, {"local": train})
    if attack is not None and synth is not None and data is not None and data.source == "synthetic":
        _check_field(attack.target_label < synth.n_classes, "attack.target_label",
                     f"must be < n_classes ({synth.n_classes})", errors)
        if ga is not None:
            _check_field(ga.k <= synth.d, "attack.ga.k", f"must be <= d ({synth.d})", errors)

    if errors:
        # a bad value reported by both the early check and the dataclass is noise
        raise ConfigError(list(dict.fromkeys(errors)))
    return ExperimentConfig(
        scenario=scenario,
        seed=seed,
        output_dir=str(raw.get("output_dir", "runs/out")),
        data=data,
        arch_preset=preset,
        hidden=hidden,
        train=train,
        attack=attack,
        federated=replace(federated, seed=derive(seed, "federated")),
        plots=bool(raw.get("plots", True)),
    )


def load_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: invalid YAML: {exc}"]) from None
    return parse_config(raw)


def validate(path) -> list[str]:
    """All problems with the config at ``path``; empty when it is valid."""
    try:
        load_config(path)
    except ConfigError as exc:
        return exc.errors
    except OSError as exc:
        return [f"<file>: {exc}"]
    return []
