"""Experiment configuration: a YAML file with nested sections.

Every key has a default; :func:`resolve` returns the fully materialized
mapping, which is echoed into each output together with its hash.

Layout::

    seed: 42
    task: regression               # or classification
    algorithms: [linear, rf_regression]
    folds: 5
    output_dir: results
    data:
      source: synthetic            # or csv
      synthetic:                   # default: five sites sized like the national cohort
        n_features: 51
        noise_sd: 1.4
        class_threshold: null      # null picks the task default
        sites:                     # null keeps the default layout
          - {id: "1", n: 2415, mean_shift: [], target_shift: 0.0}
      csv:
        path: data.csv
        site_column: site
        features: [{name: age, kind: continuous, bounds: [18, 100]}]
        target: {name: outcome, kind: binary}
    federation: {trees_per_client: 20, thresholds: 32}
    model: {n_trees: 100, max_depth: null, min_samples_leaf: 5,
            features_per_split: sqrt, ridge_jitter: 1.0e-8}
    subsample: {fractions: [0.75, 0.5, 0.25, 0.1]}
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .dataset import (
    FeatureSpec,
    Schema,
    SiteSpec,
    SiteTable,
    SynthSpec,
    default_synth_spec,
    generate_synthetic,
    load_csv,
    synthetic_schema,
)
from .errors import ConfigError, InvalidConfig
from .evaluation import ALGORITHMS
from .federation import FedConfig
from .models import TrainConfig

SUBSAMPLE_FRACTIONS = (0.75, 0.5, 0.25, 0.1)

DEFAULTS = {
    "seed": 42,
    "task": "regression",
    "algorithms": None,
    "folds": 5,
    "output_dir": "results",
    "data": {
        "source": "synthetic",
        "synthetic": {"n_features": 51, "noise_sd": 1.4, "class_threshold": None, "sites": None,
                      "heterogeneous": True},
        "csv": {"path": None, "site_column": "site", "features": [], "target": None},
    },
    "federation": {"trees_per_client": 20, "thresholds": 32},
    "model": {"n_trees": 100, "max_depth": None, "min_samples_leaf": 5, "features_per_split": "sqrt",
              "ridge_jitter": 1e-8},
    "subsample": {"fractions": list(SUBSAMPLE_FRACTIONS)},
}

_DEFAULT_ALGORITHMS = {"regression": ["linear", "rf_regression"], "classification": ["rf_classification"]}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise InvalidConfig(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfig(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def resolve(raw: dict | None = None, *, seed: int | None = None, output_dir: str | None = None) -> dict:
    """Defaults merged with ``raw`` and the command-line overrides, then validated."""
    if raw is not None and not isinstance(raw, dict):
        raise InvalidConfig("config file must hold a mapping at the top level")
    cfg = _merge(DEFAULTS, raw or {})
    if seed is not None:
        cfg["seed"] = seed
    if output_dir is not None:
        cfg["output_dir"] = output_dir
    if cfg["algorithms"] is None:
        cfg["algorithms"] = list(_DEFAULT_ALGORITHMS.get(cfg["task"], []))
    if cfg["data"]["source"] == "synthetic":
        syn = cfg["data"]["synthetic"]
        if syn["sites"] is None:
            spec = default_synth_spec(cfg["task"] if cfg["task"] in _DEFAULT_ALGORITHMS else "regression",
                                      n_features=int(syn["n_features"]), heterogeneous=bool(syn["heterogeneous"]))
            syn["sites"] = [{"id": s.site_id, "n": s.n, "mean_shift": list(s.mean_shift),
                             "target_shift": s.target_shift} for s in spec.sites]
            if syn["class_threshold"] is None:
                syn["class_threshold"] = spec.class_threshold
        elif syn["class_threshold"] is None:
            syn["class_threshold"] = 0.0
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise InvalidConfig("seed must be a non-negative integer")
    if cfg["task"] not in _DEFAULT_ALGORITHMS:
        raise InvalidConfig(f"task must be regression or classification, got {cfg['task']!r}")
    if not isinstance(cfg["folds"], int) or cfg["folds"] < 2:
        raise InvalidConfig(f"folds must be an integer >= 2, got {cfg['folds']!r}")
    algorithms = cfg["algorithms"]
    if not isinstance(algorithms, list) or not algorithms:
        raise InvalidConfig("algorithms must be a non-empty list")
    for name in algorithms:
        if name not in ALGORITHMS:
            raise InvalidConfig(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
        if ALGORITHMS[name][0] != cfg["task"]:
            raise InvalidConfig(f"algorithm {name!r} does not fit task {cfg['task']!r}")
    if len(set(algorithms)) != len(algorithms):
        raise InvalidConfig("algorithms must not repeat")
    source = cfg["data"]["source"]
    if source not in ("synthetic", "csv"):
        raise InvalidConfig(f"data.source must be synthetic or csv, got {source!r}")
    if source == "csv":
        csv_cfg = cfg["data"]["csv"]
        if not csv_cfg["path"]:
            raise InvalidConfig("data.csv.path is required")
        if not csv_cfg["features"] or not csv_cfg["target"]:
            raise InvalidConfig("data.csv needs features and target")
    fractions = cfg["subsample"]["fractions"]
    if not isinstance(fractions, list):
        raise InvalidConfig("subsample.fractions must be a list")
    for f in fractions:
        if f not in SUBSAMPLE_FRACTIONS:
            raise InvalidConfig(f"subsample fraction {f!r} is not one of {SUBSAMPLE_FRACTIONS}")
    # constructing the typed configs surfaces their own checks
    train_config(cfg)
    fed_config(cfg)
    schema(cfg)


def load(path, *, seed: int | None = None, output_dir: str | None = None) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"config {path} is not valid YAML: {exc}") from exc
    return resolve(raw, seed=seed, output_dir=output_dir)


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """SHA-256 of everything that affects results; where they are written does not."""
    relevant = {k: v for k, v in cfg.items() if k != "output_dir"}
    return hashlib.sha256(canonical_json(relevant).encode()).hexdigest()


def to_yaml(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def _typed(factory, what: str, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"invalid {what}: {exc}") from exc


def train_config(cfg: dict) -> TrainConfig:
    return _typed(TrainConfig, "model section", seed=cfg["seed"], **cfg["model"])


def fed_config(cfg: dict) -> FedConfig:
    algorithm = ALGORITHMS[cfg["algorithms"][0]][1]
    return _typed(FedConfig, "federation section", algorithm=algorithm, model=train_config(cfg), seed=cfg["seed"],
                  **cfg["federation"])


def _feature(entry, what: str) -> FeatureSpec:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict):
        raise InvalidConfig(f"{what} must be a name or a mapping")
    bounds = entry.get("bounds")
    return _typed(FeatureSpec, what, name=entry.get("name"), kind=entry.get("kind", "continuous"),
                  bounds=tuple(bounds) if bounds is not None else None)


def schema(cfg: dict) -> Schema:
    data = cfg["data"]
    if data["source"] == "synthetic":
        return _typed(synthetic_schema, "synthetic schema", n_features=int(data["synthetic"]["n_features"]),
                      task=cfg["task"])
    csv_cfg = data["csv"]
    features = tuple(_feature(f, "feature") for f in csv_cfg["features"])
    return _typed(Schema, "schema", features=features, target=_feature(csv_cfg["target"], "target"), task=cfg["task"])


def synth_spec(cfg: dict) -> SynthSpec:
    syn = cfg["data"]["synthetic"]
    try:
        sites = tuple(SiteSpec(str(s["id"]), int(s["n"]), tuple(float(v) for v in s.get("mean_shift", ())),
                               float(s.get("target_shift", 0.0))) for s in syn["sites"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"invalid synthetic site entry: {exc}") from exc
    return _typed(SynthSpec, "synthetic section", sites=sites, schema=schema(cfg), noise_sd=float(syn["noise_sd"]),
                  seed=cfg["seed"], class_threshold=float(syn["class_threshold"]))


@dataclass
class LoadedData:
    tables: list[SiteTable]
    schema: Schema
    dropped: int = 0


def load_data(cfg: dict) -> LoadedData:
    data = cfg["data"]
    if data["source"] == "synthetic":
        spec = synth_spec(cfg)
        return LoadedData(generate_synthetic(spec), spec.schema)
    sch = schema(cfg)
    tables = load_csv(data["csv"]["path"], sch, data["csv"]["site_column"])
    return LoadedData(list(tables), sch, tables.dropped)
