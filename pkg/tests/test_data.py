import numpy as np
import pytest

from modnet.data import (NormalizationStats, TabularDataset,
                         add_reliability_noise, assign_split,
                         build_modulation_signal, fit_stats,
                         generate_simulation, hotdeck_impute,
                         load_breast_cancer_dataset, load_csv, make_dataset,
                         normalize, save_csv)
from modnet.errors import ConfigError, ImputationError, IngestionError


def _toy(split=None):
    X = np.array([[1.0, 10.0],
                  [2.0, np.nan],
                  [3.0, 30.0],
                  [np.nan, 40.0]])
    mask = np.isnan(X).astype(float)
    y = np.array([0.0, 1.0, 0.0, 1.0])
    return make_dataset(X, mask, y, split=split)


# -- construction -------------------------------------------------------------

def test_make_dataset_defaults():
    ds = _toy()
    assert ds.n == 4 and ds.d == 2
    assert ds.feature_names == ("x1", "x2")
    assert np.all(ds.split == "train")


def test_make_dataset_rejects_nonbinary_labels():
    with pytest.raises(ConfigError):
        make_dataset(np.zeros((2, 1)), np.zeros((2, 1)), np.array([0.0, 2.0]))


def test_make_dataset_reliability_must_flag_missing():
    X = np.array([[np.nan, 1.0]])
    mask = np.array([[1.0, 0.0]])
    with pytest.raises(ConfigError):
        make_dataset(X, mask, np.array([1.0]), reliability=np.array([[0.5, 0.0]]))


def test_effective_reliability_defaults_to_mask():
    ds = _toy()
    assert np.array_equal(ds.effective_reliability(), ds.mask)


# -- csv ----------------------------------------------------------------------

def test_csv_roundtrip_with_missing(tmp_path):
    ds = _toy()
    path = tmp_path / "toy.csv"
    save_csv(path, ds)
    back = load_csv(path)
    assert back.feature_names == ds.feature_names
    assert np.array_equal(back.mask, ds.mask)
    assert np.array_equal(back.y, ds.y)
    obs = ds.mask == 0
    assert np.array_equal(back.X[obs], ds.X[obs])


def test_csv_roundtrip_with_reliability(tmp_path):
    X = np.array([[1.0, 2.0], [np.nan, 4.0]])
    mask = np.isnan(X).astype(float)
    rel = np.array([[0.25, 0.0], [1.0, 0.5]])
    ds = make_dataset(X, mask, np.array([0.0, 1.0]), reliability=rel)
    path = tmp_path / "rel.csv"
    save_csv(path, ds)
    back = load_csv(path)
    assert np.array_equal(back.reliability, rel)


def test_csv_errors_carry_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,label\n1.0,oops,0\n")
    with pytest.raises(IngestionError, match="row 2.*'b'"):
        load_csv(path)


def test_csv_requires_label_column(tmp_path):
    path = tmp_path / "nolabel.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(IngestionError, match="label"):
        load_csv(path)


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(IngestionError):
        load_csv(path)


def test_csv_reliability_range_checked(tmp_path):
    path = tmp_path / "rel.csv"
    path.write_text("a,a__rel,label\n1.0,1.5,0\n")
    with pytest.raises(IngestionError, match=r"\[0,1\]"):
        load_csv(path)


def test_csv_reliability_for_unknown_feature(tmp_path):
    path = tmp_path / "rel.csv"
    path.write_text("a,zz__rel,label\n1.0,0.5,0\n")
    with pytest.raises(IngestionError, match="unknown feature"):
        load_csv(path)


# -- split & normalization ----------------------------------------------------

def test_assign_split_fraction_and_determinism():
    ds = make_dataset(np.random.default_rng(0).standard_normal((100, 3)),
                      np.zeros((100, 3)), np.zeros(100))
    s1 = assign_split(ds, 0.2, 42)
    s2 = assign_split(ds, 0.2, 42)
    assert (s1.split == "test").sum() == 20
    assert np.array_equal(s1.split, s2.split)
    assert not np.array_equal(s1.split, assign_split(ds, 0.2, 43).split)


def test_fit_stats_hand_oracle():
    ds = _toy()
    stats = fit_stats(ds)
    assert stats.mean[0] == pytest.approx(2.0)   # mean of 1,2,3
    assert stats.sd[0] == pytest.approx(np.sqrt(2.0 / 3.0))  # population sd
    assert stats.mean[1] == pytest.approx(80.0 / 3.0)


def test_fit_stats_constant_feature_rejected():
    X = np.array([[1.0, 5.0], [2.0, 5.0]])
    ds = make_dataset(X, np.zeros_like(X), np.array([0.0, 1.0]))
    with pytest.raises(ConfigError, match="constant"):
        fit_stats(ds)


def test_fit_stats_requires_train_rows():
    ds = _toy(split=np.full(4, "test"))
    with pytest.raises(ConfigError):
        fit_stats(ds)


def test_normalize_zero_imputes_missing():
    ds = _toy()
    dsn, stats = normalize(ds)
    assert np.all(dsn.X[ds.mask == 1] == 0.0)
    obs0 = dsn.X[ds.mask[:, 0] == 0, 0]
    assert obs0.mean() == pytest.approx(0.0, abs=1e-12)
    assert obs0.std() == pytest.approx(1.0)
    # round-trip through the stats document
    stats2 = NormalizationStats.from_doc(stats.to_doc())
    assert np.array_equal(stats2.mean, stats.mean)


# -- hot deck -----------------------------------------------------------------

def test_hotdeck_fills_from_train_donors_only():
    split = np.array(["train", "train", "train", "test"])
    ds = _toy(split=split)
    filled = hotdeck_impute(ds, seed=5)
    donors_f0 = {1.0, 2.0, 3.0}
    assert filled.X[3, 0] in donors_f0
    # observed cells bit-unchanged, mask preserved
    obs = ds.mask == 0
    assert np.array_equal(filled.X[obs], ds.X[obs])
    assert np.array_equal(filled.mask, ds.mask)


def test_hotdeck_deterministic_and_donor_ds():
    split = np.array(["train", "train", "train", "test"])
    ds = _toy(split=split)
    a = hotdeck_impute(ds, seed=5)
    b = hotdeck_impute(ds, seed=5)
    assert np.array_equal(a.X, b.X)
    test_only = ds.subset(ds.rows("test"))
    c = hotdeck_impute(test_only, seed=5, donor_ds=ds)
    assert c.X[0, 0] in {1.0, 2.0, 3.0}


def test_hotdeck_without_donors_raises():
    X = np.array([[np.nan], [np.nan]])
    ds = make_dataset(X, np.isnan(X).astype(float), np.array([0.0, 1.0]))
    with pytest.raises(ImputationError):
        hotdeck_impute(ds, seed=0)


# -- modulation signal --------------------------------------------------------

def test_modulation_signal_layout():
    ds = _toy()
    dsn, _ = normalize(ds)
    M = build_modulation_signal(dsn)
    assert M.shape == (4, 4)
    assert np.array_equal(M[:, :2], ds.mask)
    assert np.array_equal(M[:, 2:], dsn.X)


def test_modulation_signal_uses_reliability_when_asked():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    rel = np.array([[0.3, 0.0], [0.9, 0.1]])
    ds = make_dataset(X, np.zeros_like(X), np.array([0.0, 1.0]), reliability=rel)
    dsn, _ = normalize(ds)
    M = build_modulation_signal(dsn, use_reliability=True)
    assert np.array_equal(M[:, :2], rel)


# -- generators ---------------------------------------------------------------

def test_simulation_label_and_missingness_rules():
    ds = generate_simulation(5000, seed=0)
    x2_obs = ds.mask[:, 1] == 0
    # x1 is removed exactly when x2 > 0.5 (checkable where x2 is observed)
    assert np.array_equal(ds.mask[x2_obs, 0] == 1, ds.X[x2_obs, 1] > 0.5)
    # whenever x1 is removed the label is 1
    assert np.all(ds.y[ds.mask[:, 0] == 1] == 1.0)
    # otherwise the label follows the sum rule
    both = (ds.mask[:, 0] == 0) & (ds.mask[:, 1] == 0)
    assert np.array_equal(ds.y[both] == 1.0,
                          ds.X[both, 0] + ds.X[both, 1] > 0)
    # about 5% of x2 is removed
    assert abs(ds.mask[:, 1].mean() - 0.05) < 0.01


def test_simulation_seeded_and_validated():
    a = generate_simulation(50, seed=3)
    b = generate_simulation(50, seed=3)
    assert np.array_equal(a.mask, b.mask)
    with pytest.raises(ConfigError):
        generate_simulation(0, seed=0)


def test_reliability_noise_properties():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 3))
    ds = make_dataset(X, np.zeros_like(X), np.zeros(200))
    noisy = add_reliability_noise(ds, seed=1)
    assert noisy.reliability.shape == X.shape
    assert np.all((noisy.reliability >= 0) & (noisy.reliability < 1))
    # low-reliability cells carry more noise on average
    err = np.abs(noisy.X - X)
    lo = err[noisy.reliability < 0.2].mean()
    hi = err[noisy.reliability > 0.8].mean()
    assert hi > 2 * lo


def test_reliability_noise_needs_fully_observed():
    ds = _toy()
    with pytest.raises(ConfigError):
        add_reliability_noise(ds, seed=0)


def test_breast_cancer_dataset_shape_and_prevalence():
    ds = load_breast_cancer_dataset()
    assert ds.n == 569 and ds.d == 10
    assert np.all(ds.mask == 0)
    assert ds.y.mean() == pytest.approx(0.627, abs=0.001)
