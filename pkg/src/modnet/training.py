"""Mini-batch gradient training for the layer stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyMaskError, TrainingDivergenceError
from .layers import (NetworkSpec, flatten_params, network_backward,
                     network_forward, unflatten_params)
from .numeric import loss, make_optimizer


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 50
    optimizer: str = "sgd"           # "sgd" (with momentum) | "adam"
    learning_rate: float = 0.001
    momentum: float = 0.9
    betas: tuple[float, float] = (0.9, 0.999)
    mod_weight_decay: float = 0.01   # L2 on modulation-net parameters only
    seed: int | None = None          # overrides the derived child seed when set

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch size and epochs must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.mod_weight_decay < 0:
            raise ConfigError("mod_weight_decay must be non-negative")

    def to_doc(self) -> dict:
        return {"batch_size": self.batch_size, "epochs": self.epochs,
                "optimizer": self.optimizer, "learning_rate": self.learning_rate,
                "momentum": self.momentum, "betas": list(self.betas),
                "mod_weight_decay": self.mod_weight_decay, "seed": self.seed}

    @classmethod
    def from_doc(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "betas" in doc:
            doc["betas"] = tuple(doc["betas"])
        return cls(**doc)


def _apply_mod_weight_decay(params: list[dict], grads: list[dict], wd: float) -> None:
    """Shrink the modulation net toward constant-output behavior.

    Without this the weight generator readily overfits the training-time flag
    distribution and degrades badly on unseen missingness patterns.
    """
    for p, g in zip(params, grads):
        if "mod" in p:
            g["mod"] = [(gW + wd * pW, gb + wd * pb)
                        for (gW, gb), (pW, pb) in zip(g["mod"], p["mod"])]


def train(spec: NetworkSpec, params: list[dict], n: int, cfg: TrainConfig,
          rng: np.random.Generator, batch_fn, loss_kind: str = "bce") -> list[dict]:
    """Generic epoch/mini-batch loop.

    ``batch_fn(idx, rng) -> (X, M, target, loss_mask)`` assembles each batch;
    M and loss_mask may be None. Batches whose masked loss selects no cells
    are skipped. Raises TrainingDivergenceError when the loss goes non-finite.
    """
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate, cfg.momentum, cfg.betas)
    current = params
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            X, M, target, loss_mask = batch_fn(idx, rng)
            Y, caches = network_forward(spec, current, X, M)
            try:
                value, dY = loss(loss_kind, Y, target, loss_mask)
            except EmptyMaskError:
                continue
            if not np.isfinite(value):
                raise TrainingDivergenceError(epoch)
            grads, _ = network_backward(spec, current, caches, dY)
            if cfg.mod_weight_decay:
                _apply_mod_weight_decay(current, grads, cfg.mod_weight_decay)
            flat = opt.step(flatten_params(current), flatten_params(grads))
            current = unflatten_params(current, flat)
    return current


def classification_batch_fn(X: np.ndarray, M: np.ndarray | None, y: np.ndarray):
    """Batch assembler for a fixed design matrix and binary labels."""
    target = y.reshape(-1, 1)

    def batch_fn(idx, rng):
        return X[idx], None if M is None else M[idx], target[idx], None

    return batch_fn


def train_classifier(spec, params, X, y, M, cfg: TrainConfig,
                     rng: np.random.Generator) -> list[dict]:
    return train(spec, params, len(y), cfg, rng,
                 classification_batch_fn(X, M, y), loss_kind="bce")
