"""Tabular datasets: ingestion, normalization, imputation, synthetic generators.

Missing cells are carried as NaN in the raw feature matrix alongside an
explicit mask (1 = missing). ``normalize`` produces a finite matrix where
missing cells are exactly 0, i.e. mean imputation in normalized space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ImputationError, IngestionError


@dataclass(frozen=True)
class TabularDataset:
    feature_names: tuple[str, ...]
    X: np.ndarray           # (n, d) float64, NaN where missing pre-normalization
    mask: np.ndarray        # (n, d) float64 in {0,1}, 1 = missing
    y: np.ndarray           # (n,) float64 in {0,1}
    split: np.ndarray       # (n,) unicode, "train" or "test"
    reliability: np.ndarray | None = None  # (n, d) in [0,1], 1 = missing

    def __post_init__(self):
        n, d = self.X.shape
        if self.mask.shape != (n, d) or self.y.shape != (n,) or self.split.shape != (n,):
            raise ConfigError("dataset field shapes are inconsistent")
        if self.reliability is not None and self.reliability.shape != (n, d):
            raise ConfigError("reliability shape mismatch")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def rows(self, which: str) -> np.ndarray:
        return np.where(self.split == which)[0]

    def subset(self, idx: np.ndarray) -> "TabularDataset":
        return replace(
            self, X=self.X[idx], mask=self.mask[idx], y=self.y[idx],
            split=self.split[idx],
            reliability=None if self.reliability is None else self.reliability[idx])

    def effective_reliability(self) -> np.ndarray:
        """Reliability values, defaulting to the mask when absent."""
        if self.reliability is not None:
            return self.reliability
        return self.mask.astype(np.float64)


def make_dataset(X, mask, y, split=None, feature_names=None, reliability=None) -> TabularDataset:
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if split is None:
        split = np.full(n, "train")
    if feature_names is None:
        feature_names = tuple(f"x{j + 1}" for j in range(d))
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ConfigError("labels must be binary 0/1")
    if reliability is not None:
        reliability = np.asarray(reliability, dtype=np.float64)
        if np.any(reliability[mask == 1] != 1.0):
            raise ConfigError("reliability must be 1 wherever the mask is 1")
    return TabularDataset(tuple(feature_names), X, mask, y, np.asarray(split), reliability)


def load_csv(path) -> TabularDataset:
    """Load a dataset from CSV.

    Header required; the label column is named ``label``; empty cells mean
    missing; optional per-feature reliability columns are named
    ``<feature>__rel`` and must lie in [0,1].
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file")
        if "label" not in header:
            raise IngestionError(f"{path}: no 'label' column in header")
        label_col = header.index("label")
        rel_cols = {name[: -len("__rel")]: i for i, name in enumerate(header)
                    if name.endswith("__rel")}
        feat_cols = [(name, i) for i, name in enumerate(header)
                     if i != label_col and not name.endswith("__rel")]
        names = [name for name, _ in feat_cols]
        for fname in rel_cols:
            if fname not in names:
                raise IngestionError(f"{path}: reliability column for unknown feature {fname!r}")
        X_rows, rel_rows, y_rows = [], [], []
        for r, row in enumerate(reader, start=2):
            xs, rels = [], []
            for name, i in feat_cols:
                cell = row[i].strip() if i < len(row) else ""
                if cell == "":
                    xs.append(np.nan)
                else:
                    try:
                        xs.append(float(cell))
                    except ValueError:
                        raise IngestionError(
                            f"{path}: row {r}, column {name!r}: unparseable float {cell!r}")
                if name in rel_cols:
                    rcell = row[rel_cols[name]].strip()
                    rel = 1.0 if rcell == "" else float(rcell)
                    if not (0.0 <= rel <= 1.0):
                        raise IngestionError(
                            f"{path}: row {r}, column {name!r}: reliability {rel} outside [0,1]")
                    rels.append(rel)
            cell = row[label_col].strip()
            try:
                y = float(cell)
            except ValueError:
                raise IngestionError(f"{path}: row {r}: unparseable label {cell!r}")
            X_rows.append(xs)
            y_rows.append(y)
            if rel_cols:
                rel_rows.append(rels)
        X = np.array(X_rows, dtype=np.float64)
        mask = np.isnan(X).astype(np.float64)
        reliability = None
        if rel_cols:
            # reliability columns cover a subset of features; default to mask elsewhere
            reliability = mask.astype(np.float64).copy()
            rel_feature_idx = [names.index(f) for f in rel_cols]
            rel_arr = np.array(rel_rows, dtype=np.float64)
            for k, j in enumerate(rel_feature_idx):
                reliability[:, j] = rel_arr[:, k]
            if np.any(reliability[mask == 1] != 1.0):
                raise IngestionError(f"{path}: reliability must be 1 for missing cells")
        return make_dataset(X, mask, np.array(y_rows), feature_names=names,
                            reliability=reliability)


def save_csv(path, ds: TabularDataset) -> None:
    """Inverse of load_csv (reliability columns written when present)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(ds.feature_names)
        if ds.reliability is not None:
            header += [f"{n}__rel" for n in ds.feature_names]
        header.append("label")
        writer.writerow(header)
        for i in range(ds.n):
            row = ["" if ds.mask[i, j] == 1 else repr(float(ds.X[i, j]))
                   for j in range(ds.d)]
            if ds.reliability is not None:
                row += [repr(float(ds.reliability[i, j])) for j in range(ds.d)]
            row.append(repr(float(ds.y[i])))
            writer.writerow(row)


def assign_split(ds: TabularDataset, test_fraction: float, seed) -> TabularDataset:
    """Random train/test split tags, seeded."""
    rng = np.random.default_rng(seed)
    n_test = int(round(test_fraction * ds.n))
    perm = rng.permutation(ds.n)
    split = np.full(ds.n, "train")
    split[perm[:n_test]] = "test"
    return replace(ds, split=split)


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray  # per feature, observed train cells only
    sd: np.ndarray    # population sd

    def to_doc(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_doc(cls, doc: dict) -> "NormalizationStats":
        return cls(np.array(doc["mean"]), np.array(doc["sd"]))


def fit_stats(ds: TabularDataset) -> NormalizationStats:
    """Per-feature mean/population-sd over observed training cells only."""
    train = ds.rows("train")
    if len(train) == 0:
        raise ConfigError("cannot fit normalization stats without a train split")
    means = np.empty(ds.d)
    sds = np.empty(ds.d)
    for j in range(ds.d):
        obs = ds.X[train, j][ds.mask[train, j] == 0]
        if len(obs) == 0:
            raise ConfigError(f"feature {ds.feature_names[j]!r} has no observed train cells")
        means[j] = obs.mean()
        sds[j] = obs.std()  # population sd (ddof=0)
        if sds[j] <= 0:
            raise ConfigError(f"feature {ds.feature_names[j]!r} is constant on the train split")
    return NormalizationStats(means, sds)


def normalize(ds: TabularDataset, stats: NormalizationStats | None = None
              ) -> tuple[TabularDataset, NormalizationStats]:
    """Z-score observed cells with train-split stats; missing cells become 0."""
    if stats is None:
        stats = fit_stats(ds)
    Z = (ds.X - stats.mean) / stats.sd
    Z = np.where(ds.mask == 1, 0.0, Z)
    return replace(ds, X=Z), stats


def hotdeck_impute(ds: TabularDataset, seed,
                   donor_ds: TabularDataset | None = None) -> TabularDataset:
    """Replace each missing cell by a uniformly drawn observed train value.

    Donors come from ``donor_ds`` (default: ds itself) so that test-time
    imputation can reuse training donors. Observed cells are bit-unchanged and
    the mask is preserved to keep the original missingness record.
    """
    source = donor_ds if donor_ds is not None else ds
    train = source.rows("train")
    rng = np.random.default_rng(seed)
    X = ds.X.copy()
    for j in range(ds.d):
        donors = source.X[train, j][source.mask[train, j] == 0]
        holes = np.where(ds.mask[:, j] == 1)[0]
        if len(holes) == 0:
            continue
        if len(donors) == 0:
            raise ImputationError(
                f"feature {ds.feature_names[j]!r} has no observed train donors")
        X[holes, j] = donors[rng.integers(0, len(donors), size=len(holes))]
    return replace(ds, X=X)


def build_modulation_signal(ds_normalized: TabularDataset,
                            use_reliability: bool = False) -> np.ndarray:
    """Per-row [flags-or-reliability (d) || imputed normalized features (d)]."""
    if use_reliability:
        first = ds_normalized.effective_reliability()
    else:
        first = ds_normalized.mask.astype(np.float64)
    return np.concatenate([first, ds_normalized.X], axis=1)


def generate_simulation(n: int, seed) -> TabularDataset:
    """Two standard-normal inputs with missingness-dependent labels.

    y = 1 when x1 is removed (which happens exactly when x2 > 0.5), else
    y = 1 iff x1 + x2 > 0. Labels are computed before any removal; x1 is then
    masked whenever x2 > 0.5 and an additional 5% of x2 cells are masked
    uniformly at random.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    y = np.where(x2 > 0.5, 1.0, (x1 + x2 > 0).astype(np.float64))
    mask = np.zeros((n, 2))
    mask[x2 > 0.5, 0] = 1.0
    mask[rng.random(n) < 0.05, 1] = 1.0
    X = np.column_stack([x1, x2])
    X = np.where(mask == 1, np.nan, X)
    return make_dataset(X, mask, y, feature_names=("x1", "x2"))


def add_reliability_noise(ds: TabularDataset, seed) -> TabularDataset:
    """Add per-cell Gaussian noise with sd uniform in 1..10 feature sds.

    Records reliability = (s - 1) / 9: the least-noisy cells score 0.0, the
    noisiest approach 1.0 (the value that also flags missing cells). Requires
    a fully observed dataset.
    """
    if np.any(ds.mask == 1):
        raise ConfigError("reliability noise requires a fully observed dataset")
    rng = np.random.default_rng(seed)
    train = ds.rows("train")
    feature_sd = ds.X[train].std(axis=0)
    s = rng.uniform(1.0, 10.0, size=ds.X.shape)
    noise = rng.standard_normal(ds.X.shape) * s * feature_sd
    reliability = (s - 1.0) / 9.0
    return replace(ds, X=ds.X + noise, reliability=reliability)


def load_breast_cancer_dataset() -> TabularDataset:
    """Wisconsin breast cancer data, first ten (mean) features, benign = 1."""
    from sklearn.datasets import load_breast_cancer

    raw = load_breast_cancer()
    X = raw.data[:, :10].astype(np.float64)
    y = raw.target.astype(np.float64)
    names = [n.replace(" ", "_") for n in raw.feature_names[:10]]
    return make_dataset(X, np.zeros_like(X), y, feature_names=names)
