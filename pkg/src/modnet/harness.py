"""Experiment runners: simulation, classification, reliability, imputation,
fully-observable training, plus report emission.

A single master seed derives per-purpose child seeds (split, init, batching,
degradation, bootstrap, ...) through numpy SeedSequence keys, so e.g. changing
the bootstrap fold count never perturbs training.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np
from scipy import stats as sps

from . import evalstats
from .configs import (CLASSIFIER_MODELS, FULL_OBS_MODELS, IMPUTER_MODELS,
                      IMPUTATION_TRAIN_MASK_RATE, ExperimentConfig)
from .data import (TabularDataset, assign_split, build_modulation_signal,
                   fit_stats, generate_simulation, hotdeck_impute, load_csv,
                   load_breast_cancer_dataset, normalize, add_reliability_noise)
from .degrade import (DegradeSpec, augment_with_random_missingness,
                      inject_feature_removal, inject_random,
                      inject_top_quantile, inject_train_quartile)
from .errors import ConfigError, DegenerateVarianceError
from .layers import (LayerSpec, NetworkSpec, init_params, mlp_spec,
                     network_forward, save_params, weight_delta_table)
from .training import TrainConfig, train, train_classifier

# child-seed purpose keys
SPLIT, DATA, INIT, BATCH, DEGRADE, BOOTSTRAP, HOTDECK, NOISE, ORDER, AUGMENT = range(10)

GRID_SIZE = 41
GRID_RANGE = (-2.0, 2.0)


def child_sequence(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), *[int(k) for k in key]])


def child_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(child_sequence(master, *key))


def child_seed(master: int, *key: int) -> int:
    return int(child_sequence(master, *key).generate_state(1)[0])


# -- dataset loading ----------------------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> TabularDataset:
    kind = cfg.dataset.get("kind")
    if kind == "bc":
        ds = load_breast_cancer_dataset()
    elif kind == "csv":
        path = cfg.dataset.get("path")
        if not path:
            raise ConfigError("csv dataset requires a 'path'")
        ds = load_csv(path)
    elif kind == "simulation":
        ds = generate_simulation(int(cfg.dataset.get("n", 1000)),
                                 child_sequence(cfg.seed, DATA))
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    return assign_split(ds, cfg.test_fraction, child_sequence(cfg.seed, SPLIT))


# -- per-model input preparation ---------------------------------------------

FLAG_INPUT_MODELS = ("dnn-mean+flags", "dnn-hotdeck+flags")
HOTDECK_MODELS = ("dnn-hotdeck", "dnn-hotdeck+flags")
MFCL_MODELS = ("mfcl", "mfcl-augment", "mfcl-ae")


def model_input_dim(model: str, d: int) -> int:
    return 2 * d if model in FLAG_INPUT_MODELS else d


def build_classifier_spec(model: str, d: int, hidden, modulation) -> NetworkSpec:
    dims = (model_input_dim(model, d), *hidden, 1)
    if model in MFCL_MODELS:
        return mlp_spec(dims, out_act="sigmoid", first_layer="mfcl",
                        mod_hidden=modulation, mod_input_dim=2 * d)
    return mlp_spec(dims, out_act="sigmoid")


def build_autoencoder_spec(model: str, d: int, hidden, modulation) -> NetworkSpec:
    dims = (d, *hidden, d)
    if model in MFCL_MODELS:
        return mlp_spec(dims, out_act="linear", first_layer="mfcl",
                        mod_hidden=modulation, mod_input_dim=2 * d)
    return mlp_spec(dims, out_act="linear")


def prepare_inputs(model: str, ds: TabularDataset, stats, donor_ds, hotdeck_seed,
                   use_reliability: bool = False):
    """Per-model design matrix X and modulating batch M (None for plain nets)."""
    ds_n, _ = normalize(ds, stats)
    flags = ds.effective_reliability() if use_reliability else ds.mask.astype(float)
    if model in HOTDECK_MODELS:
        filled = hotdeck_impute(ds, hotdeck_seed, donor_ds=donor_ds)
        Xf = (filled.X - stats.mean) / stats.sd
    else:
        Xf = ds_n.X
    if model in MFCL_MODELS:
        return Xf, np.concatenate([flags, Xf], axis=1)
    if model in FLAG_INPUT_MODELS:
        return np.concatenate([flags, Xf], axis=1), None
    return Xf, None


# -- report helpers -----------------------------------------------------------

def _cond_key(paradigm: str, level) -> dict:
    return {"paradigm": paradigm, "level": float(level)}


def _metric_block(models, bres: evalstats.BootstrapResult) -> dict:
    block = {"models": {}}
    for i, m in enumerate(models):
        block["models"][m] = {"point": float(bres.point[i]),
                              "ci_lo": float(bres.ci_lo[i]),
                              "ci_hi": float(bres.ci_hi[i])}
    if len(models) >= 2:
        try:
            F, df1, df2, p = evalstats.rm_anova(bres.fold_matrix)
            block["anova"] = {"F": F, "df1": df1, "df2": df2, "p": p}
        except DegenerateVarianceError:
            block["anova"] = {"degenerate": True}
        block["pairwise"] = [
            {"a": models[r.i], "b": models[r.j], "t": r.t, "df": r.df,
             "p_raw": r.p_raw, "p_adjusted": r.p_adjusted,
             "degenerate": r.degenerate}
            for r in evalstats.paired_ttests_fdr(bres.fold_matrix)]
    block["redraws"] = bres.redraws
    return block


def write_report(outdir: str, report: dict) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_report_csv(report, os.path.join(outdir, "report.csv"))


def write_report_csv(report: dict, path: str) -> None:
    """Long-format summary: model, paradigm, level, metric, value, ci_lo, ci_hi."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "paradigm", "level", "metric", "value",
                         "ci_lo", "ci_hi"])
        for cond in report.get("conditions", []):
            for metric, block in sorted(cond["metrics"].items()):
                for model, vals in sorted(block["models"].items()):
                    writer.writerow([model, cond["paradigm"], cond["level"],
                                     metric, vals["point"], vals["ci_lo"],
                                     vals["ci_hi"]])


def export_weight_delta(path: str, spec: NetworkSpec, params, d: int) -> None:
    """Percentage weight change when each feature in turn is flagged missing,
    relative to the no-missingness modulating input."""
    layer = spec.layers[0]
    baseline = np.zeros(layer.mod_input_dim)
    probes = []
    for j in range(d):
        m = np.zeros(layer.mod_input_dim)
        m[j] = 1.0
        probes.append(m)
    table = weight_delta_table(layer, params[0], baseline, probes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["missing_feature"] + [f"w{k}" for k in range(table.shape[1])])
        for j in range(d):
            writer.writerow([j] + [("" if np.isnan(v) else repr(float(v)))
                                   for v in table[j]])


# -- degradation conditions ---------------------------------------------------

def _train_side(spec: DegradeSpec) -> bool:
    return spec.paradigm in ("train-quartile", "augment-random")


def build_conditions(cfg: ExperimentConfig, ds_test: TabularDataset):
    """Expand the config's test-side degrade specs into evaluation conditions.

    Returns a list of (paradigm, level, degraded test dataset).
    """
    conditions = []
    for ci, spec in enumerate(s for s in cfg.degrade if not _train_side(s)):
        seed = spec.seed if spec.seed else child_seed(cfg.seed, DEGRADE, ci)
        if spec.paradigm == "none":
            conditions.append(("none", 0.0, ds_test))
        elif spec.paradigm == "random":
            conditions.append(("random", spec.level,
                               inject_random(ds_test, spec.level, seed)))
        elif spec.paradigm == "top-quantile":
            conditions.append(("top-quantile", spec.level,
                               inject_top_quantile(ds_test, spec.level)))
        elif spec.paradigm == "feature-removal":
            k = int(spec.level)
            ordering = spec.features if spec.features is not None else seed
            for i, sub in enumerate(inject_feature_removal(ds_test, k, ordering)):
                conditions.append(("feature-removal", i + 1, sub))
        else:
            raise ConfigError(f"unsupported test paradigm {spec.paradigm!r}")
    return conditions


# -- classification family ----------------------------------------------------

def _check_roster(models, allowed, task):
    for m in models:
        if m not in allowed:
            raise ConfigError(f"model {m!r} is not valid for task {task!r}")
    if not models:
        raise ConfigError("empty model roster")


def run_classification(cfg: ExperimentConfig, use_reliability: bool = False,
                       require_fully_observed: bool = False) -> dict:
    allowed = set(CLASSIFIER_MODELS) | set(FULL_OBS_MODELS)
    _check_roster(cfg.models, allowed, cfg.task)
    raw = load_dataset(cfg)

    if require_fully_observed and np.any(raw.mask == 1):
        raise ConfigError("this task requires a dataset without organic missingness")
    if use_reliability:
        if raw.reliability is None:
            if np.any(raw.mask == 1):
                raise ConfigError("reliability task needs reliability values "
                                  "or a fully observed dataset to add noise to")
            raw = add_reliability_noise(raw, child_sequence(cfg.seed, NOISE))

    ds = raw
    for spec in cfg.degrade:
        if spec.paradigm == "train-quartile":
            ds = inject_train_quartile(ds, spec.level or 0.25)

    stats = fit_stats(ds)
    ds_train = ds.subset(ds.rows("train"))
    ds_test = ds.subset(ds.rows("test"))

    trained = {}
    for mi, model in enumerate(cfg.models):
        train_ds = ds_train
        if model == "mfcl-augment":
            train_ds = augment_with_random_missingness(
                ds_train, 0.2, child_sequence(cfg.seed, AUGMENT, mi))
        X, M = prepare_inputs(model, train_ds, stats, ds_train,
                              child_sequence(cfg.seed, HOTDECK, mi),
                              use_reliability)
        spec = build_classifier_spec(model, ds.d, cfg.network, cfg.modulation)
        params = init_params(spec, child_rng(cfg.seed, INIT, mi))
        batch_rng = (child_rng(cfg.seed, BATCH, mi) if cfg.train.seed is None
                     else np.random.default_rng([cfg.train.seed, mi]))
        params = train_classifier(spec, params, X, train_ds.y, M, cfg.train,
                                  batch_rng)
        trained[model] = (spec, params)

    conditions = build_conditions(cfg, ds_test)
    models = list(cfg.models)
    report = {"task": cfg.task, "seed": cfg.seed, "models": models,
              "config": cfg.to_doc(), "conditions": []}
    for ci, (paradigm, level, cond_ds) in enumerate(conditions):
        cond = _cond_key(paradigm, level)
        cond["metrics"] = {}
        outputs = []
        for mi, model in enumerate(models):
            spec, params = trained[model]
            X, M = prepare_inputs(model, cond_ds, stats, ds_train,
                                  child_sequence(cfg.seed, HOTDECK, mi, ci + 1),
                                  use_reliability)
            Y, _ = network_forward(spec, params, X, M)
            outputs.append(Y.ravel())
        for metric_i, (name, fn) in enumerate(
                (("auroc", evalstats.auroc), ("auprc", evalstats.auprc))):
            bres = evalstats.paired_bootstrap(
                outputs, cond_ds.y, fn, cfg.bootstrap_folds,
                child_seed(cfg.seed, BOOTSTRAP, ci, metric_i))
            cond["metrics"][name] = _metric_block(models, bres)
        report["conditions"].append(cond)

    _write_classification_outputs(cfg, report, trained, ds.d)
    return report


def _write_classification_outputs(cfg, report, trained, d):
    outdir = cfg.out
    os.makedirs(os.path.join(outdir, "params"), exist_ok=True)
    write_report(outdir, report)
    for model, (spec, params) in trained.items():
        save_params(os.path.join(outdir, "params", f"{model}.json"), spec, params)
        if spec.has_mfcl:
            export_weight_delta(
                os.path.join(outdir, f"weights_delta_{model}.csv"), spec, params, d)


def run_reliability(cfg: ExperimentConfig) -> dict:
    return run_classification(cfg, use_reliability=True)


def run_full_observable(cfg: ExperimentConfig) -> dict:
    _check_roster(cfg.models, FULL_OBS_MODELS, cfg.task)
    return run_classification(cfg, require_fully_observed=True)


# -- imputation ---------------------------------------------------------------

def _autoencoder_batch_fn(Xn, mask, mfcl: bool, rate: float):
    def batch_fn(idx, rng):
        X0 = Xn[idx]
        mb = mask[idx]
        art = ((rng.random(X0.shape) < rate) & (mb == 0)).astype(np.float64)
        Xb = np.where(art == 1, 0.0, X0)
        M = None
        if mfcl:
            M = np.concatenate([np.maximum(mb, art), Xb], axis=1)
        return Xb, M, X0, art

    return batch_fn


def _masked_mse_metric(outputs: np.ndarray, labels: np.ndarray) -> float:
    """outputs rows are (sum squared error, removed-cell count) per sample."""
    total = outputs[:, 1].sum()
    if total == 0:
        raise evalstats.MetricError("masked-mse undefined: no removed cells in resample")
    return float(outputs[:, 0].sum() / total)


def run_imputation(cfg: ExperimentConfig) -> dict:
    _check_roster(cfg.models, IMPUTER_MODELS, cfg.task)
    raw = load_dataset(cfg)
    # Train-split quartile removal stands in for organically value-dependent
    # missingness: it is what lets a flag-aware imputer learn that a flagged
    # neighbor implies a high-valued row.
    for spec in cfg.degrade:
        if spec.paradigm == "train-quartile":
            raw = inject_train_quartile(raw, spec.level or 0.25)
    stats = fit_stats(raw)
    ds_train = raw.subset(raw.rows("train"))
    ds_test = raw.subset(raw.rows("test"))
    Xn_train, _ = normalize(ds_train, stats)

    trained = {}
    for mi, model in enumerate(cfg.models):
        spec = build_autoencoder_spec(model, raw.d, cfg.network, cfg.modulation)
        params = init_params(spec, child_rng(cfg.seed, INIT, mi))
        batch_rng = (child_rng(cfg.seed, BATCH, mi) if cfg.train.seed is None
                     else np.random.default_rng([cfg.train.seed, mi]))
        params = train(spec, params, ds_train.n, cfg.train, batch_rng,
                       _autoencoder_batch_fn(Xn_train.X, ds_train.mask,
                                             model in MFCL_MODELS,
                                             IMPUTATION_TRAIN_MASK_RATE),
                       loss_kind="masked-mse")
        trained[model] = (spec, params)

    target_n, _ = normalize(ds_test, stats)
    conditions = build_conditions(cfg, ds_test)
    models = list(cfg.models)
    report = {"task": cfg.task, "seed": cfg.seed, "models": models,
              "config": cfg.to_doc(), "conditions": []}
    for ci, (paradigm, level, cond_ds) in enumerate(conditions):
        removed = np.maximum(cond_ds.mask - ds_test.mask, 0.0)
        cond = _cond_key(paradigm, level)
        cond["removed_cells"] = int(removed.sum())
        outputs = []
        for model in models:
            spec, params = trained[model]
            Xn, _ = normalize(cond_ds, stats)
            M = None
            if spec.has_mfcl:
                M = np.concatenate([cond_ds.mask, Xn.X], axis=1)
            pred, _ = network_forward(spec, params, Xn.X, M)
            err = (pred - target_n.X) * removed
            sse = np.sum(err * err, axis=1)
            cnt = removed.sum(axis=1)
            outputs.append(np.column_stack([sse, cnt]))
        bres = evalstats.paired_bootstrap(
            outputs, cond_ds.y, _masked_mse_metric, cfg.bootstrap_folds,
            child_seed(cfg.seed, BOOTSTRAP, ci, 0))
        cond["metrics"] = {"masked-mse": _metric_block(models, bres)}
        report["conditions"].append(cond)

    _write_classification_outputs(cfg, report, trained, raw.d)
    return report


# -- simulation ---------------------------------------------------------------

def _simulation_spec(cfg: ExperimentConfig) -> NetworkSpec:
    # single modulated logistic unit: no hidden layers in the main path
    return NetworkSpec((LayerSpec("mfcl", 2, 1, "sigmoid",
                                  mod_hidden=tuple(cfg.modulation),
                                  mod_input_dim=4),))


def simulation_grid() -> np.ndarray:
    g = np.linspace(GRID_RANGE[0], GRID_RANGE[1], GRID_SIZE)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _surface_outputs(spec, params, stats, grid, missing: int | None) -> np.ndarray:
    Z = (grid - stats.mean) / stats.sd
    flags = np.zeros_like(Z)
    if missing is not None:
        Z = Z.copy()
        Z[:, missing] = 0.0
        flags[:, missing] = 1.0
    M = np.concatenate([flags, Z], axis=1)
    Y, _ = network_forward(spec, params, Z, M)
    return Y.ravel()


def run_simulation(cfg: ExperimentConfig) -> dict:
    ds = load_dataset(cfg)
    stats = fit_stats(ds)
    ds_train = ds.subset(ds.rows("train"))
    ds_test = ds.subset(ds.rows("test"))
    spec = _simulation_spec(cfg)
    params = init_params(spec, child_rng(cfg.seed, INIT, 0))
    Xtr, _ = normalize(ds_train, stats)
    M = build_modulation_signal(Xtr)
    batch_rng = (child_rng(cfg.seed, BATCH, 0) if cfg.train.seed is None
                 else np.random.default_rng([cfg.train.seed]))
    params = train_classifier(spec, params, Xtr.X, ds_train.y, M, cfg.train,
                              batch_rng)

    Xte, _ = normalize(ds_test, stats)
    scores, _ = network_forward(spec, params, Xte.X, build_modulation_signal(Xte))
    accuracy = float(np.mean((scores.ravel() > 0.5) == (ds_test.y == 1)))

    grid = simulation_grid()
    surfaces = {
        "both_observed": _surface_outputs(spec, params, stats, grid, None),
        "x1_missing": _surface_outputs(spec, params, stats, grid, 0),
        "x2_missing": _surface_outputs(spec, params, stats, grid, 1),
    }

    both = surfaces["both_observed"]
    rho_both = float(sps.spearmanr(both, grid.sum(axis=1)).statistic)
    x1m = surfaces["x1_missing"]
    gap = float(x1m[grid[:, 1] > 0.5].mean() - x1m[grid[:, 1] < 0.5].mean())
    x2m = surfaces["x2_missing"]
    rho_x1 = float(sps.spearmanr(x2m, grid[:, 0]).statistic)

    report = {"task": "simulate", "seed": cfg.seed, "config": cfg.to_doc(),
              "test_accuracy": accuracy,
              "surface_stats": {
                  "both_observed_spearman_sum": rho_both,
                  "x1_missing_gap": gap,
                  "x2_missing_spearman_x1": rho_x1,
              }}

    outdir = cfg.out
    os.makedirs(os.path.join(outdir, "surfaces"), exist_ok=True)
    os.makedirs(os.path.join(outdir, "params"), exist_ok=True)
    for name, values in surfaces.items():
        with open(os.path.join(outdir, "surfaces", f"{name}.csv"), "w",
                  newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "output"])
            for (x1, x2), v in zip(grid, values):
                writer.writerow([repr(float(x1)), repr(float(x2)), repr(float(v))])
    save_params(os.path.join(outdir, "params", "mfcl.json"), spec, params)
    export_weight_delta(os.path.join(outdir, "weights_delta_mfcl.csv"),
                        spec, params, ds.d)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


RUNNERS = {
    "simulate": run_simulation,
    "classify": run_classification,
    "classify-reliability": run_reliability,
    "impute": run_imputation,
    "classify-full-obs": run_full_observable,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.task not in RUNNERS:
        raise ConfigError(f"unknown task {cfg.task!r}")
    return RUNNERS[cfg.task](cfg)
