"""Experiment configuration.

Sketch-size constants are never hard-coded in library code; they live in
the versioned ``defaults.json`` shipped with the package and can be
overridden per run from a user config JSON.  Unknown keys anywhere in a
config document are an error.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources

EXPERIMENTS = (
    "embed-l2",
    "embed-lp",
    "embed-relu",
    "embed-hinge",
    "recover",
    "lasso",
    "sampling-fail",
    "support-sweep",
    "calibrate-stable",
)


@dataclass(frozen=True)
class SketchConstants:
    """Empirically pinned sketch-size multipliers (see defaults.json)."""

    C_gauss: float
    C_med: float
    C_relu_m1: float
    C_hinge_m2: float
    C_A: float
    C_B: float
    C_L: float
    C_pq: float

    @staticmethod
    def from_dict(doc: dict) -> "SketchConstants":
        _reject_unknown(doc, {f.name for f in dataclasses.fields(SketchConstants)}, "constants")
        return SketchConstants(**doc)


@dataclass
class ExperimentConfig:
    experiment: str
    master_seed: int = 20260823
    trials: int = 100
    n: int = 0
    d: int = 0
    k: int = 0
    eps: float = 0.0
    p: float = 1.0
    lam: float = 0.1
    delta: float = 0.05
    mu: float = 2.0
    decay: float = 0.9
    loss: str = "logistic"
    tol: float = 1e-10
    samples: int = 1_000_000
    p_grid: list = field(default_factory=list)
    m_grid: list = field(default_factory=list)
    success_threshold: float = 0.9
    constants: SketchConstants = None

    def as_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["constants"] = dataclasses.asdict(self.constants)
        return doc


def _reject_unknown(doc: dict, allowed, where: str):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ValueError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def _defaults() -> dict:
    text = resources.files("sketchreg").joinpath("defaults.json").read_text()
    return json.loads(text)


def default_constants() -> SketchConstants:
    return SketchConstants.from_dict(_defaults()["constants"])


_CFG_FIELDS = None


def _cfg_fields():
    global _CFG_FIELDS
    if _CFG_FIELDS is None:
        _CFG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
    return _CFG_FIELDS


def default_config(experiment: str) -> ExperimentConfig:
    """The pinned defaults for one experiment."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    base = _defaults()
    exp = dict(base["experiments"].get(experiment, {}))
    _reject_unknown(exp, _cfg_fields() - {"experiment", "constants"}, f"defaults[{experiment}]")
    return ExperimentConfig(
        experiment=experiment, constants=SketchConstants.from_dict(base["constants"]), **exp
    )


def config_from_dict(doc: dict, experiment: str) -> ExperimentConfig:
    """Merge a user config document over the experiment defaults.

    The document may override any ExperimentConfig field and/or a nested
    ``constants`` table; unknown keys raise ValueError.
    """
    cfg = default_config(experiment)
    _reject_unknown(doc, _cfg_fields(), "config")
    if "experiment" in doc and doc["experiment"] != experiment:
        raise ValueError(
            f"config is for experiment {doc['experiment']!r}, not {experiment!r}"
        )
    consts = doc.get("constants")
    if consts is not None:
        merged = dataclasses.asdict(cfg.constants)
        _reject_unknown(consts, merged, "constants")
        merged.update(consts)
        cfg.constants = SketchConstants.from_dict(merged)
    for key, val in doc.items():
        if key in ("experiment", "constants"):
            continue
        setattr(cfg, key, val)
    return cfg


def load_config(path: str, experiment: str) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh), experiment)
