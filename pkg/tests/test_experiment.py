"""Experiment harness tests: CSV ingestion, one-hot encoding, withholding,
partitioning, grid structure, determinism, and record emission."""
import pathlib

import numpy as np
import pandas as pd
import pytest

from fedsurv.experiment import (
    Dataset,
    ExperimentConfig,
    RunRecord,
    load_survival_csv,
    make_folds,
    one_hot,
    partition_clients,
    read_records_csv,
    records_to_frame,
    round_half_up,
    run_experiment,
    run_mccv,
    withhold_features,
    write_records_csv,
)
from fedsurv.forest import ForestParams
from fedsurv.tree import TreeParams

FIXTURE = pathlib.Path(__file__).resolve().parents[1] / "src" / "fedsurv" / "data" / "gbsg2.csv"


# --- loading ----------------------------------------------------------------

def test_bundled_fixture_shape():
    ds = load_survival_csv(FIXTURE)
    assert ds.n == 686
    assert list(ds.X.columns) == ["horTh", "age", "menostat", "tsize",
                                  "tgrade", "pnodes", "progrec", "estrec"]
    assert int(ds.event.sum()) == 299
    assert sorted(ds.categorical) == ["horTh", "menostat", "tgrade"]
    assert np.all(ds.time > 0)
    assert ds.rejected_rows == []


def test_negative_time_rows_rejected_and_reported(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,time,event\n1.0,5,1\n2.0,-3,0\n3.0,8,1\n")
    ds = load_survival_csv(p)
    assert ds.n == 2
    assert ds.rejected_rows == [1]


def test_header_only_file_errors(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("x,time,event\n")
    with pytest.raises(ValueError, match="empty dataset"):
        load_survival_csv(p)


def test_missing_columns_and_bad_event(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("x,time\n1.0,5\n")
    with pytest.raises(ValueError, match="missing column"):
        load_survival_csv(p)
    p.write_text("x,time,event\n1.0,5,maybe\n")
    with pytest.raises(ValueError, match="not boolean"):
        load_survival_csv(p)


# --- one-hot ----------------------------------------------------------------

def test_one_hot_all_levels_no_drop():
    X = pd.DataFrame({"tgrade": ["I", "II", "III", "II"], "age": [40, 50, 60, 70]})
    enc, levels = one_hot(X, ["tgrade"])
    assert list(enc.columns) == ["tgrade=I", "tgrade=II", "tgrade=III", "age"]
    assert enc["tgrade=II"].tolist() == [0.0, 1.0, 0.0, 1.0]
    assert levels == {"tgrade": ["I", "II", "III"]}


def test_one_hot_binary_keeps_both_levels():
    X = pd.DataFrame({"horTh": ["no", "yes", "no"]})
    enc, _ = one_hot(X, ["horTh"])
    assert list(enc.columns) == ["horTh=no", "horTh=yes"]


def test_one_hot_numeric_passthrough():
    X = pd.DataFrame({"a": [1, 2], "b": [3.5, 4.5]})
    enc, levels = one_hot(X, [])
    assert enc["a"].tolist() == [1.0, 2.0]
    assert levels == {}


def test_one_hot_unseen_level_all_zero():
    X = pd.DataFrame({"g": ["a", "b"]})
    _, levels = one_hot(X, ["g"])
    enc, _ = one_hot(pd.DataFrame({"g": ["c"]}), ["g"], levels=levels)
    assert enc.iloc[0].tolist() == [0.0, 0.0]


# --- withholding ------------------------------------------------------------

def test_round_half_up():
    assert round_half_up(2.8) == 3
    assert round_half_up(2.5) == 3
    assert round_half_up(0.35) == 0
    assert round_half_up(0.5) == 1


def test_withhold_three_of_eight():
    feats = [f"f{i}" for i in range(8)]
    retained = withhold_features(feats, 0.35, np.random.default_rng(0))
    assert len(retained) == 5
    assert retained == [f for f in feats if f in retained]  # order preserved


def test_withhold_zero_fraction_keeps_all():
    feats = ["a", "b"]
    assert withhold_features(feats, 0.0, np.random.default_rng(0)) == feats


def test_withhold_single_feature_drops_none():
    assert withhold_features(["only"], 0.35, np.random.default_rng(0)) == ["only"]


def test_withhold_validation():
    with pytest.raises(ValueError, match="fraction"):
        withhold_features(["a"], 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError, match="no features left"):
        withhold_features(["a"], 0.6, np.random.default_rng(0))


# --- partitioning -----------------------------------------------------------

def test_partition_sizes_686_by_10():
    parts = partition_clients(686, 10, np.random.default_rng(0))
    sizes = sorted(len(p) for p in parts)
    assert sizes == [68] * 4 + [69] * 6


def test_partition_single_client():
    parts = partition_clients(20, 1, np.random.default_rng(0))
    assert len(parts) == 1
    assert parts[0].tolist() == list(range(20))


def test_partition_disjoint_and_covering():
    for seed in range(5):
        parts = partition_clients(101, 7, np.random.default_rng(seed))
        joined = np.concatenate(parts)
        assert len(joined) == 101
        assert len(np.unique(joined)) == 101
    with pytest.raises(ValueError, match="too few rows"):
        partition_clients(3, 4, np.random.default_rng(0))


def test_make_folds_balanced():
    folds = make_folds(23, 5, np.random.default_rng(1))
    counts = np.bincount(folds, minlength=5)
    assert sorted(counts.tolist()) == [4, 4, 5, 5, 5]
    with pytest.raises(ValueError, match="too few rows"):
        make_folds(3, 5, np.random.default_rng(0))


# --- experiment grid --------------------------------------------------------

def small_config(**kw):
    forest = ForestParams(n_estimators=4,
                          tree=TreeParams(min_samples_split=4, min_samples_leaf=2))
    defaults = dict(n_clients=4, n_site_splits=2, n_folds=2, forest=forest, seed=3)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


@pytest.fixture(scope="module")
def small_dataset():
    ds = load_survival_csv(FIXTURE)
    keep = np.arange(0, 686, 3)  # 229 rows for speed
    return Dataset(X=ds.X.iloc[keep].reset_index(drop=True), time=ds.time[keep],
                   event=ds.event[keep], categorical=ds.categorical)


@pytest.fixture(scope="module")
def small_records(small_dataset):
    return run_experiment(small_config(), small_dataset)


def test_grid_record_counts(small_records):
    frame = records_to_frame(small_records)
    counts = frame.groupby("configuration").size()
    full = 2 * 2 * 4  # site splits x folds x clients
    assert counts["Local"] == full
    assert counts["Centralized-SRF"] == full
    assert counts["Centralized"] == full
    for k in (2, 3, 4):
        assert counts[f"Fed({k})"] == 2 * 2 * k  # participating clients only
    assert set(counts.index) == {"Local", "Fed(2)", "Fed(3)", "Fed(4)",
                                 "Centralized-SRF", "Centralized"}


def test_same_seed_reproduces_records(small_dataset, small_records):
    again = run_experiment(small_config(), small_dataset)
    assert records_to_frame(again).equals(records_to_frame(small_records))


def test_parallel_site_splits_match_serial(small_dataset, small_records):
    par = run_experiment(small_config(n_jobs=2), small_dataset)
    assert records_to_frame(par).equals(records_to_frame(small_records))


def test_different_seed_changes_records(small_dataset, small_records):
    other = run_experiment(small_config(seed=4), small_dataset)
    assert not records_to_frame(other).equals(records_to_frame(small_records))


def test_test_folds_align_across_configurations(small_records):
    frame = records_to_frame(small_records)
    key = ["site_split", "fold", "client"]
    base = frame[frame["configuration"] == "Centralized-SRF"].set_index(key)
    for config in ("Local", "Centralized", "Fed(4)"):
        other = frame[frame["configuration"] == config].set_index(key)
        joined = base.join(other, rsuffix="_o", how="inner")
        assert len(joined) == len(other)
        # identical test rows -> identical test-set sizes and pair counts
        assert (joined["n_test"] == joined["n_test_o"]).all()
        assert (joined["n_comparable_pairs"] == joined["n_comparable_pairs_o"]).all()


def test_run_mccv_produces_one_record_per_round(small_dataset):
    cfg = small_config(mccv_rounds=5, mccv_test_fraction=0.3)
    records = run_mccv(cfg, small_dataset)
    assert len(records) == 5
    assert {r.configuration for r in records} == {"MCCV-Centralized"}
    again = run_mccv(cfg, small_dataset)
    assert records_to_frame(again).equals(records_to_frame(records))


def test_invalid_grid_rejected(small_dataset):
    with pytest.raises(ValueError, match="invalid experiment grid"):
        run_experiment(small_config(n_clients=0), small_dataset)


# --- records CSV ------------------------------------------------------------

def test_records_csv_roundtrip(tmp_path, small_records):
    path = tmp_path / "records.csv"
    write_records_csv(small_records, path)
    frame = read_records_csv(path)
    assert len(frame) == len(small_records)
    direct = records_to_frame(small_records)
    assert np.allclose(frame["c_index"].to_numpy(), direct["c_index"].to_numpy(),
                       equal_nan=True)


def test_records_csv_byte_stable(tmp_path, small_records):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_records_csv(small_records, a)
    write_records_csv(small_records, b)
    assert a.read_bytes() == b.read_bytes()


def test_excluded_record_written_with_empty_c_index(tmp_path):
    records = [RunRecord("Local", 0, 0, 0, None, 5, 0, 1),
               RunRecord("Local", 0, 0, 1, 0.625, 5, 6, 1)]
    path = tmp_path / "r.csv"
    write_records_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[1] == "Local,0,0,0,,5,0,1"
    frame = read_records_csv(path)
    assert np.isnan(frame["c_index"].iloc[0])


def test_read_records_csv_requires_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("configuration,c_index\nLocal,0.6\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_records_csv(p)
