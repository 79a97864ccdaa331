"""Seeded injectors for test-time and training-time missingness paradigms.

All injectors only flip observed cells to missing, never the reverse, and by
default touch only the rows of the requested split.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import TabularDataset
from .errors import ConfigError

PARADIGMS = ("random", "top-quantile", "feature-removal", "train-quartile",
             "augment-random", "none")


@dataclass(frozen=True)
class DegradeSpec:
    paradigm: str
    level: float = 0.0          # fraction for random/quantile, count for feature-removal
    features: tuple[str, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise ConfigError(f"unknown degradation paradigm {self.paradigm!r}")

    def to_doc(self) -> dict:
        doc = {"paradigm": self.paradigm, "level": self.level, "seed": self.seed}
        if self.features is not None:
            doc["features"] = list(self.features)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "DegradeSpec":
        return cls(paradigm=doc["paradigm"], level=doc.get("level", 0.0),
                   features=tuple(doc["features"]) if "features" in doc else None,
                   seed=doc.get("seed", 0))


def _mark_missing(ds: TabularDataset, extra: np.ndarray) -> TabularDataset:
    """Mask additional cells; values become NaN, reliability becomes 1."""
    mask = np.maximum(ds.mask, extra)
    X = np.where(mask == 1, np.nan, ds.X)
    reliability = ds.reliability
    if reliability is not None:
        reliability = np.where(mask == 1, 1.0, reliability)
    return replace(ds, X=X, mask=mask, reliability=reliability)


def inject_random(ds: TabularDataset, level: float, seed,
                  split: str = "test") -> TabularDataset:
    """Mark each observed cell of the split missing with probability ``level``."""
    if not (0.0 <= level < 1.0):
        raise ConfigError(f"random level must be in [0,1), got {level}")
    rng = np.random.default_rng(seed)
    rows = ds.rows(split)
    extra = np.zeros_like(ds.mask)
    draws = rng.random((len(rows), ds.d))
    hit = (draws < level) & (ds.mask[rows] == 0)
    extra[rows] = hit.astype(np.float64)
    return _mark_missing(ds, extra)


def inject_top_quantile(ds: TabularDataset, level: float,
                        split: str = "test") -> TabularDataset:
    """Per feature, mask the ceil(level * observed) largest observed values.

    Deterministic; ties are broken by row order (earlier rows removed first).
    """
    if not (0.0 < level < 1.0):
        raise ConfigError(f"quantile level must be in (0,1), got {level}")
    rows = ds.rows(split)
    extra = np.zeros_like(ds.mask)
    for j in range(ds.d):
        obs = rows[ds.mask[rows, j] == 0]
        if len(obs) == 0:
            continue
        k = int(np.ceil(level * len(obs)))
        order = np.lexsort((obs, -ds.X[obs, j]))
        extra[obs[order[:k]], j] = 1.0
    return _mark_missing(ds, extra)


def inject_feature_removal(ds: TabularDataset, k: int,
                           ordering) -> list[TabularDataset]:
    """Datasets with features ordering[0..i] fully masked, for i = 1..k.

    ``ordering`` is either an explicit list of feature names/indices or an
    integer seed for a uniform shuffle of all features.
    """
    if k > ds.d:
        raise ConfigError(f"cannot remove {k} of {ds.d} features")
    if isinstance(ordering, (int, np.integer)):
        rng = np.random.default_rng(int(ordering))
        order = list(rng.permutation(ds.d))
    else:
        order = [o if isinstance(o, (int, np.integer)) else ds.feature_names.index(o)
                 for o in ordering]
    out = []
    extra = np.zeros_like(ds.mask)
    for i in range(k):
        extra[:, order[i]] = 1.0
        out.append(_mark_missing(ds, extra))
    return out


def inject_train_quartile(ds: TabularDataset, level: float = 0.25) -> TabularDataset:
    """Training-time variant of top-quantile removal, applied to the train split."""
    return inject_top_quantile(ds, level, split="train")


def augment_with_random_missingness(ds: TabularDataset, level: float,
                                    seed) -> TabularDataset:
    """Concatenate ds with a copy degraded by random missingness at ``level``.

    Rows double; labels and split tags are preserved row-for-row in the copy.
    """
    degraded = ds if level == 0.0 else inject_random(ds, level, seed, split="train")
    reliability = None
    if ds.reliability is not None:
        reliability = np.concatenate([ds.reliability, degraded.reliability])
    return replace(
        ds,
        X=np.concatenate([ds.X, degraded.X]),
        mask=np.concatenate([ds.mask, degraded.mask]),
        y=np.concatenate([ds.y, degraded.y]),
        split=np.concatenate([ds.split, degraded.split]),
        reliability=reliability,
    )


def apply_degrade(ds: TabularDataset, spec: DegradeSpec) -> TabularDataset:
    """Apply a single-dataset degradation spec (test-split paradigms + none)."""
    if spec.paradigm == "none":
        return ds
    if spec.paradigm == "random":
        return inject_random(ds, spec.level, spec.seed)
    if spec.paradigm == "top-quantile":
        return inject_top_quantile(ds, spec.level)
    if spec.paradigm == "train-quartile":
        return inject_train_quartile(ds, spec.level or 0.25)
    if spec.paradigm == "augment-random":
        return augment_with_random_missingness(ds, spec.level, spec.seed)
    raise ConfigError(f"{spec.paradigm!r} does not map to a single degraded dataset")
