"""Experiment configuration and built-in named presets.

The preset hyperparameters are frozen (no search at run time): network and
modulation hidden sizes, optimizer, learning rate, batch size and epochs per
dataset/task.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from .degrade import DegradeSpec
from .errors import ConfigError
from .training import TrainConfig

TASKS = ("simulate", "classify", "classify-reliability", "impute", "classify-full-obs")

CLASSIFIER_MODELS = ("mfcl", "dnn-mean", "dnn-hotdeck", "dnn-mean+flags",
                     "dnn-hotdeck+flags")
FULL_OBS_MODELS = ("mfcl", "mfcl-augment", "dnn-mean", "dnn-mean+flags")
IMPUTER_MODELS = ("mfcl-ae", "ae")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    dataset: dict = field(default_factory=dict)  # {"kind": "bc"|"csv"|"simulation", ...}
    models: tuple[str, ...] = ()
    network: tuple[int, ...] = ()        # main-net hidden sizes
    modulation: tuple[int, ...] = ()     # modulation-net hidden sizes
    train: TrainConfig = field(default_factory=TrainConfig)
    degrade: tuple[DegradeSpec, ...] = ()
    bootstrap_folds: int = 1000
    seed: int = 0
    out: str = "runs/out"
    test_fraction: float = 0.2           # 80:20 final split; 70:10:20 when tuning

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.bootstrap_folds < 2:
            raise ConfigError("bootstrap_folds must be >= 2")

    def to_doc(self) -> dict:
        return {
            "task": self.task,
            "dataset": self.dataset,
            "models": list(self.models),
            "network": list(self.network),
            "modulation": list(self.modulation),
            "train": self.train.to_doc(),
            "degrade": [d.to_doc() for d in self.degrade],
            "bootstrap_folds": self.bootstrap_folds,
            "seed": self.seed,
            "out": self.out,
            "test_fraction": self.test_fraction,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExperimentConfig":
        return cls(
            task=doc["task"],
            dataset=doc.get("dataset", {}),
            models=tuple(doc.get("models", ())),
            network=tuple(doc.get("network", ())),
            modulation=tuple(doc.get("modulation", ())),
            train=TrainConfig.from_doc(doc.get("train", {})),
            degrade=tuple(DegradeSpec.from_doc(d) for d in doc.get("degrade", ())),
            bootstrap_folds=doc.get("bootstrap_folds", 1000),
            seed=doc.get("seed", 0),
            out=doc.get("out", "runs/out"),
            test_fraction=doc.get("test_fraction", 0.2),
        )


def _sgd(lr: float, epochs: int = 50) -> TrainConfig:
    return TrainConfig(batch_size=64, epochs=epochs, optimizer="sgd",
                       learning_rate=lr, momentum=0.9, mod_weight_decay=0.03)


# Frozen per-dataset classifier settings: (hidden sizes, modulation hidden
# sizes, training parameters). Hidden activation ReLU, output sigmoid; the
# modulated layer always sits at hidden layer 1.
CLASSIFIER_SETTINGS = {
    "actfast-mortality": {"network": (8, 4), "modulation": (8, 8, 8), "train": _sgd(0.001)},
    "actfast-aki": {"network": (8, 4), "modulation": (16, 16, 16), "train": _sgd(0.001)},
    "actfast-heart-attack": {"network": (8, 4), "modulation": (16, 16, 16), "train": _sgd(0.001)},
    "breast-cancer": {"network": (4, 2), "modulation": (8, 8), "train": _sgd(0.03)},
    "oasis": {"network": (4, 2), "modulation": (4, 4), "train": _sgd(0.01, epochs=1000)},
    "copd": {"network": (4, 2), "modulation": (8, 4), "train": _sgd(0.03)},
}

# Autoencoder imputation settings (hidden 10-5-10, ReLU hidden, linear output).
IMPUTER_SETTINGS = {
    "network": (10, 5, 10),
    "modulation": (8, 8, 8),
    "train": TrainConfig(batch_size=64, epochs=30, optimizer="adam",
                         learning_rate=0.01, betas=(0.9, 0.999),
                         mod_weight_decay=0.003),
}

IMPUTATION_TRAIN_MASK_RATE = 0.25
IMPUTATION_TEST_REMOVAL = 0.10

STANDARD_LEVELS = (0.2, 0.4, 0.6, 0.8)


def standard_test_degrades(feature_removal_k: int = 5) -> tuple[DegradeSpec, ...]:
    specs = [DegradeSpec("none")]
    specs += [DegradeSpec("random", level) for level in STANDARD_LEVELS]
    specs += [DegradeSpec("top-quantile", level) for level in STANDARD_LEVELS]
    specs.append(DegradeSpec("feature-removal", feature_removal_k))
    return tuple(specs)


def _bc_classify() -> ExperimentConfig:
    s = CLASSIFIER_SETTINGS["breast-cancer"]
    return ExperimentConfig(
        task="classify", dataset={"kind": "bc"}, models=CLASSIFIER_MODELS,
        network=s["network"], modulation=s["modulation"], train=s["train"],
        degrade=(DegradeSpec("train-quartile", 0.25),) + standard_test_degrades(),
        out="runs/bc-classify")


def _bc_reliability() -> ExperimentConfig:
    s = CLASSIFIER_SETTINGS["breast-cancer"]
    return ExperimentConfig(
        task="classify-reliability", dataset={"kind": "bc"},
        models=("mfcl", "dnn-mean", "dnn-mean+flags"),
        network=s["network"], modulation=s["modulation"], train=s["train"],
        degrade=(DegradeSpec("none"),), out="runs/bc-reliability")


def _bc_impute() -> ExperimentConfig:
    s = IMPUTER_SETTINGS
    return ExperimentConfig(
        task="impute", dataset={"kind": "bc"}, models=IMPUTER_MODELS,
        network=s["network"], modulation=s["modulation"], train=s["train"],
        degrade=(DegradeSpec("train-quartile", 0.25),
                 DegradeSpec("random", IMPUTATION_TEST_REMOVAL),
                 DegradeSpec("top-quantile", IMPUTATION_TEST_REMOVAL)),
        out="runs/bc-impute")


def _bc_full_obs() -> ExperimentConfig:
    s = CLASSIFIER_SETTINGS["breast-cancer"]
    return ExperimentConfig(
        task="classify-full-obs", dataset={"kind": "bc"}, models=FULL_OBS_MODELS,
        network=s["network"], modulation=s["modulation"], train=s["train"],
        degrade=standard_test_degrades(), out="runs/bc-full-obs")


def _simulation() -> ExperimentConfig:
    return ExperimentConfig(
        task="simulate", dataset={"kind": "simulation", "n": 1000},
        models=("mfcl",), network=(), modulation=(8, 8),
        train=TrainConfig(batch_size=64, epochs=300, optimizer="sgd",
                          learning_rate=0.1, momentum=0.9),
        degrade=(), out="runs/simulation")


PRESETS = {
    "simulation": _simulation,
    "bc-classify": _bc_classify,
    "bc-reliability": _bc_reliability,
    "bc-impute": _bc_impute,
    "bc-full-obs": _bc_full_obs,
}


def load_config(source: str) -> ExperimentConfig:
    """Load a config from a preset name or a JSON file path."""
    if source in PRESETS:
        return PRESETS[source]()
    if not os.path.exists(source):
        raise ConfigError(f"config file not found: {source}")
    with open(source) as fh:
        return ExperimentConfig.from_doc(json.load(fh))


def with_overrides(cfg: ExperimentConfig, seed: int | None = None,
                   out: str | None = None) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out is not None:
        cfg = replace(cfg, out=out)
    return cfg
