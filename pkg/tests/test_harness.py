import json
import os
from dataclasses import replace

import numpy as np
import pytest

from modnet.cli import main as cli_main
from modnet.configs import ExperimentConfig, load_config
from modnet.data import load_csv, make_dataset, save_csv
from modnet.degrade import DegradeSpec
from modnet.errors import ConfigError
from modnet.harness import (BATCH, BOOTSTRAP, INIT, build_autoencoder_spec,
                            build_classifier_spec, build_conditions, child_seed,
                            load_dataset, model_input_dim, prepare_inputs,
                            run_classification, run_full_observable,
                            run_simulation, simulation_grid, write_report_csv)
from modnet.training import TrainConfig


# -- seed derivation ----------------------------------------------------------

def test_child_seed_deterministic_and_purpose_separated():
    assert child_seed(7, INIT, 0) == child_seed(7, INIT, 0)
    assert child_seed(7, INIT, 0) != child_seed(7, INIT, 1)
    assert child_seed(7, INIT, 0) != child_seed(7, BATCH, 0)
    assert child_seed(7, INIT, 0) != child_seed(8, INIT, 0)
    # changing the bootstrap key leaves training keys untouched by construction
    assert child_seed(7, BOOTSTRAP, 3) != child_seed(7, BOOTSTRAP, 4)


# -- model wiring -------------------------------------------------------------

def test_model_input_dims():
    assert model_input_dim("mfcl", 10) == 10
    assert model_input_dim("dnn-mean", 10) == 10
    assert model_input_dim("dnn-mean+flags", 10) == 20
    assert model_input_dim("dnn-hotdeck+flags", 10) == 20


def test_classifier_spec_shapes():
    spec = build_classifier_spec("mfcl", 10, (4, 2), (8, 8))
    assert spec.has_mfcl
    assert spec.in_dim == 10 and spec.out_dim == 1
    assert spec.layers[0].mod_input_dim == 20
    plain = build_classifier_spec("dnn-mean+flags", 10, (4, 2), (8, 8))
    assert not plain.has_mfcl
    assert plain.in_dim == 20


def test_autoencoder_spec_shapes():
    spec = build_autoencoder_spec("mfcl-ae", 10, (10, 5, 10), (8, 8, 8))
    assert spec.in_dim == 10 and spec.out_dim == 10
    assert spec.layers[-1].activation == "linear"
    assert [l.activation for l in spec.layers[:-1]] == ["relu"] * 3


def _bc_splits():
    cfg = load_config("bc-classify")
    ds = load_dataset(replace(cfg, seed=0))
    from modnet.data import fit_stats
    stats = fit_stats(ds)
    train = ds.subset(ds.rows("train"))
    test = ds.subset(ds.rows("test"))
    return train, test, stats


def test_prepare_inputs_per_model_family():
    train, test, stats = _bc_splits()
    X, M = prepare_inputs("mfcl", test, stats, train, 0)
    assert X.shape == (test.n, 10) and M.shape == (test.n, 20)
    X, M = prepare_inputs("dnn-mean", test, stats, train, 0)
    assert X.shape == (test.n, 10) and M is None
    X, M = prepare_inputs("dnn-mean+flags", test, stats, train, 0)
    assert X.shape == (test.n, 20) and M is None
    X, M = prepare_inputs("dnn-hotdeck", test, stats, train, 0)
    assert X.shape == (test.n, 10) and M is None
    assert np.all(np.isfinite(X))


# -- condition expansion ------------------------------------------------------

def test_build_conditions_expands_standard_suite():
    cfg = load_config("bc-classify")
    _, test, _ = _bc_splits()
    conds = build_conditions(replace(cfg, seed=0), test)
    paradigms = [c[0] for c in conds]
    # none + 4 random + 4 top-quantile + 5 cumulative feature removals
    assert paradigms.count("none") == 1
    assert paradigms.count("random") == 4
    assert paradigms.count("top-quantile") == 4
    assert paradigms.count("feature-removal") == 5
    # the undegraded condition is the test set itself, bit-for-bit
    none_ds = [c[2] for c in conds if c[0] == "none"][0]
    assert none_ds is test


def test_build_conditions_deterministic_given_seed():
    cfg = load_config("bc-classify")
    _, test, _ = _bc_splits()
    a = build_conditions(replace(cfg, seed=5), test)
    b = build_conditions(replace(cfg, seed=5), test)
    for (pa, la, da), (pb, lb, db) in zip(a, b):
        assert pa == pb and la == lb
        assert np.array_equal(da.mask, db.mask)


# -- runners ------------------------------------------------------------------

def _tiny_classify_cfg(tmp_path, seed=0):
    cfg = load_config("bc-classify")
    return replace(
        cfg, seed=seed, out=str(tmp_path / "run"), bootstrap_folds=10,
        models=("mfcl", "dnn-mean"),
        train=replace(cfg.train, epochs=2),
        degrade=(DegradeSpec("train-quartile", 0.25), DegradeSpec("none"),
                 DegradeSpec("random", 0.4)))


def test_run_classification_report_layout(tmp_path):
    cfg = _tiny_classify_cfg(tmp_path)
    report = run_classification(cfg)
    assert [c["paradigm"] for c in report["conditions"]] == ["none", "random"]
    for cond in report["conditions"]:
        for metric in ("auroc", "auprc"):
            block = cond["metrics"][metric]
            assert set(block["models"]) == {"mfcl", "dnn-mean"}
            for vals in block["models"].values():
                assert vals["ci_lo"] <= vals["ci_hi"]
            assert len(block["pairwise"]) == 1
    outdir = cfg.out
    assert os.path.exists(os.path.join(outdir, "report.json"))
    assert os.path.exists(os.path.join(outdir, "report.csv"))
    assert os.path.exists(os.path.join(outdir, "params", "mfcl.json"))
    assert os.path.exists(os.path.join(outdir, "params", "dnn-mean.json"))
    assert os.path.exists(os.path.join(outdir, "weights_delta_mfcl.csv"))


def test_run_classification_rejects_unknown_model(tmp_path):
    cfg = replace(_tiny_classify_cfg(tmp_path), models=("mfcl", "xgboost"))
    with pytest.raises(ConfigError):
        run_classification(cfg)


def test_full_observable_rejects_organic_missingness(tmp_path):
    cfg = load_config("bc-full-obs")
    cfg = replace(cfg, dataset={"kind": "simulation", "n": 200}, seed=0,
                  out=str(tmp_path / "fo"))
    with pytest.raises(ConfigError):
        run_full_observable(cfg)


def test_run_simulation_outputs(tmp_path):
    cfg = replace(load_config("simulation"), seed=0, out=str(tmp_path / "sim"))
    report = run_simulation(cfg)
    assert 0.0 <= report["test_accuracy"] <= 1.0
    grid = simulation_grid()
    assert grid.shape == (41 * 41, 2)
    for name in ("both_observed", "x1_missing", "x2_missing"):
        path = os.path.join(cfg.out, "surfaces", f"{name}.csv")
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert len(lines) == 41 * 41 + 1   # header + full grid
    assert os.path.exists(os.path.join(cfg.out, "params", "mfcl.json"))
    assert os.path.exists(os.path.join(cfg.out, "report.json"))


def test_simulation_reruns_are_byte_identical(tmp_path):
    cfg = replace(load_config("simulation"), seed=3, out=str(tmp_path / "sim"))
    blobs = []
    for _ in range(2):
        run_simulation(cfg)
        with open(os.path.join(cfg.out, "report.json"), "rb") as fh:
            blobs.append(fh.read())
    assert blobs[0] == blobs[1]


def test_report_csv_long_format(tmp_path):
    report = {"conditions": [{
        "paradigm": "random", "level": 0.2,
        "metrics": {"auroc": {"models": {
            "mfcl": {"point": 0.9, "ci_lo": 0.8, "ci_hi": 0.95}}}}}]}
    path = tmp_path / "r.csv"
    write_report_csv(report, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "model,paradigm,level,metric,value,ci_lo,ci_hi"
    assert lines[1].startswith("mfcl,random,0.2,auroc,0.9")


# -- cli ----------------------------------------------------------------------

def _toy_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 3))
    ds = make_dataset(X, np.zeros_like(X), rng.integers(0, 2, 30).astype(float))
    path = tmp_path / "toy.csv"
    save_csv(path, ds)
    return path


def test_cli_degrade_roundtrip(tmp_path, capsys):
    src = _toy_csv(tmp_path)
    out = tmp_path / "degraded.csv"
    rc = cli_main(["degrade", "--input", str(src), "--paradigm", "random",
                   "--level", "0.5", "--seed", "1", "--out", str(out)])
    assert rc == 0
    back = load_csv(out)
    assert back.mask.sum() > 0


def test_cli_degrade_top_quantile_deterministic(tmp_path):
    src = _toy_csv(tmp_path)
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        rc = cli_main(["degrade", "--input", str(src), "--paradigm",
                       "top-quantile", "--level", "0.2", "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_cli_missing_config_exits_1(capsys):
    rc = cli_main(["classify", "--config", "does/not/exist.json"])
    assert rc == 1
    assert "does/not/exist.json" in capsys.readouterr().err


def test_cli_task_mismatch_exits_1(tmp_path, capsys):
    cfg = load_config("simulation")
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg.to_doc()))
    rc = cli_main(["classify", "--config", str(path)])
    assert rc == 1


def test_cli_unknown_arguments_exit_1(capsys):
    assert cli_main(["degrade", "--bogus"]) == 1


def test_cli_simulate_and_report(tmp_path, capsys):
    out = tmp_path / "sim"
    rc = cli_main(["simulate", "--seed", "2", "--out", str(out)])
    assert rc == 0
    rc = cli_main(["report", "--input", str(tmp_path / "missing.json"),
                   "--out", str(tmp_path / "r.csv")])
    assert rc == 1


def test_cli_report_renders_csv(tmp_path):
    cfg = _tiny_classify_cfg(tmp_path)
    run_classification(cfg)
    out_csv = tmp_path / "again.csv"
    rc = cli_main(["report", "--input", os.path.join(cfg.out, "report.json"),
                   "--out", str(out_csv)])
    assert rc == 0
    assert out_csv.read_text().splitlines()[0].startswith("model,paradigm")
