"""CLI smoke tests via click's test runner on a reduced grid."""
import pathlib

import numpy as np
import pandas as pd
from click.testing import CliRunner

from fedsurv.cli import main
from fedsurv.experiment import load_survival_csv

FIXTURE = pathlib.Path(__file__).resolve().parents[1] / "src" / "fedsurv" / "data" / "gbsg2.csv"

SMALL_TOML = """
[experiment]
n_clients = 3
n_site_splits = 1
n_folds = 2
seed = 5

[forest]
n_estimators = 4
min_samples_split = 4
min_samples_leaf = 2
"""


def write_small_data(path, n=120):
    ds = load_survival_csv(FIXTURE)
    keep = np.arange(n)
    df = ds.X.iloc[keep].copy()
    df["time"] = ds.time[keep].astype(int)
    df["event"] = ds.event[keep].astype(int)
    df.to_csv(path, index=False)


def test_simulate_then_report(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(SMALL_TOML)
    data = tmp_path / "data.csv"
    write_small_data(data)
    out = tmp_path / "results"
    runner = CliRunner()
    res = runner.invoke(main, ["simulate", "--config", str(cfg),
                               "--data", str(data), "--out", str(out)])
    assert res.exit_code == 0, res.output
    records = out / "records.csv"
    assert records.exists()
    assert "wrote" in res.output

    res = runner.invoke(main, ["report", "--records", str(records),
                               "--out", str(tmp_path / "report")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "report" / "summary.csv").exists()
    assert (tmp_path / "report" / "paired_tests.csv").exists()
    summary = pd.read_csv(tmp_path / "report" / "summary.csv")
    assert "Local" in set(summary["configuration"])


def test_simulate_seed_override_changes_output(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(SMALL_TOML)
    data = tmp_path / "data.csv"
    write_small_data(data)
    runner = CliRunner()
    outputs = []
    for seed, out in (("5", "a"), ("5", "b"), ("6", "c")):
        res = runner.invoke(main, ["simulate", "--config", str(cfg),
                                   "--data", str(data), "--out", str(tmp_path / out),
                                   "--seed", seed])
        assert res.exit_code == 0, res.output
        outputs.append((tmp_path / out / "records.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0] != outputs[2]


def test_simulate_mccv_mode(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(SMALL_TOML.replace("seed = 5", "seed = 5\nmccv_rounds = 3"))
    data = tmp_path / "data.csv"
    write_small_data(data)
    runner = CliRunner()
    res = runner.invoke(main, ["simulate", "--config", str(cfg),
                               "--data", str(data), "--out", str(tmp_path / "m"),
                               "--mccv"])
    assert res.exit_code == 0, res.output
    records = pd.read_csv(tmp_path / "m" / "records.csv")
    assert len(records) == 3
    assert set(records["configuration"]) == {"MCCV-Centralized"}


def test_bad_hostport_rejected():
    runner = CliRunner()
    res = runner.invoke(main, ["coordinator", "--listen", "nope",
                               "--roster", __file__])
    assert res.exit_code != 0
    assert "host:port" in res.output
