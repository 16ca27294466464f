"""Report tests: per-configuration summaries, paired deltas and tests, and
file emission."""
import numpy as np
import pandas as pd
import pytest

from fedsurv.report import (
    default_comparisons,
    paired_deltas,
    paired_test_table,
    summarize,
    write_report,
)


def make_records(rows):
    return pd.DataFrame(rows, columns=["configuration", "site_split", "fold",
                                       "client", "c_index"])


def grid_records(values_by_config):
    rows = []
    for config, values in values_by_config.items():
        i = 0
        for s in range(len(values) // 2):
            for f in range(2):
                rows.append((config, s, f, 0, values[i]))
                i += 1
    return make_records(rows)


def test_summarize_constant_config():
    records = grid_records({"Local": [0.6, 0.6, 0.6, 0.6]})
    out = summarize(records)
    assert out.loc[0, "mean"] == pytest.approx(0.6)
    assert out.loc[0, "sd"] == 0.0
    assert out.loc[0, "n"] == 4
    assert out.loc[0, "n_excluded"] == 0


def test_summarize_orders_by_ascending_mean():
    records = grid_records({"B": [0.7, 0.7], "A": [0.5, 0.5], "C": [0.6, 0.6]})
    out = summarize(records)
    assert out["configuration"].tolist() == ["A", "C", "B"]


def test_summarize_quartiles_and_whiskers():
    values = [0.1, 0.4, 0.45, 0.5, 0.55, 0.6, 2.0]  # 0.1 and 2.0 are outliers
    records = make_records([("X", 0, 0, i, v) for i, v in enumerate(values)])
    out = summarize(records)
    q1, q3 = np.percentile(values, [25, 75])
    assert out.loc[0, "q1"] == pytest.approx(q1)
    assert out.loc[0, "median"] == pytest.approx(0.5)
    iqr = q3 - q1
    assert out.loc[0, "whisker_low"] == pytest.approx(0.4)  # 0.1 is below q1-1.5*iqr
    assert out.loc[0, "whisker_high"] <= q3 + 1.5 * iqr


def test_summarize_counts_excluded():
    records = make_records([("X", 0, 0, 0, 0.6), ("X", 0, 0, 1, np.nan)])
    out = summarize(records)
    assert out.loc[0, "n"] == 1
    assert out.loc[0, "n_excluded"] == 1


def test_summarize_errors():
    with pytest.raises(ValueError, match="no records"):
        summarize(make_records([]))
    with pytest.raises(ValueError, match="no usable records"):
        summarize(make_records([("X", 0, 0, 0, np.nan)]))


def test_paired_deltas_hand_fixture():
    rows = [("A", 0, 0, 0, 0.5), ("A", 0, 1, 0, 0.6),
            ("B", 0, 0, 0, 0.55), ("B", 0, 1, 0, 0.58)]
    deltas = paired_deltas(make_records(rows), "A", "B")
    assert sorted(np.round(deltas, 10).tolist()) == [-0.02, 0.05]


def test_paired_deltas_drop_excluded_pairs():
    rows = [("A", 0, 0, 0, 0.5), ("A", 0, 1, 0, 0.6),
            ("B", 0, 0, 0, np.nan), ("B", 0, 1, 0, 0.7)]
    deltas = paired_deltas(make_records(rows), "A", "B")
    assert deltas.tolist() == [pytest.approx(0.1)]
    with pytest.raises(ValueError, match="no paired records"):
        paired_deltas(make_records(rows), "A", "missing")


def test_paired_test_table_matches_hand_computation():
    rng = np.random.default_rng(5)
    n = 30
    a_vals = rng.uniform(0.5, 0.7, size=n)
    shift = rng.normal(0.03, 0.01, size=n)
    rows = [("A", 0, i, 0, a_vals[i]) for i in range(n)]
    rows += [("B", 0, i, 0, a_vals[i] + shift[i]) for i in range(n)]
    table = paired_test_table(make_records(rows), [("A", "B")])
    assert table.loc[0, "n_pairs"] == n
    assert table.loc[0, "mean_delta"] == pytest.approx(shift.mean())
    assert table.loc[0, "median_delta"] == pytest.approx(np.median(shift))
    assert table.loc[0, "wilcoxon_p"] < 1e-4
    assert table.loc[0, "paired_t_p"] < 1e-6


def test_default_comparisons_pick_largest_fed():
    records = make_records([(c, 0, 0, 0, 0.6) for c in
                            ["Local", "Fed(2)", "Fed(7)", "Centralized-SRF"]])
    assert default_comparisons(records) == [
        ("Local", "Fed(7)"), ("Fed(7)", "Centralized-SRF"),
        ("Local", "Centralized-SRF")]
    assert default_comparisons(make_records([("Local", 0, 0, 0, 0.6)])) == []


def test_write_report_emits_files(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for config, mu in [("Local", 0.6), ("Fed(3)", 0.64), ("Centralized-SRF", 0.65)]:
        for i in range(20):
            rows.append((config, 0, i, 0, mu + rng.normal(0, 0.02)))
    tables = write_report(make_records(rows), tmp_path, svg=True)
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "paired_tests.csv").exists()
    svg = (tmp_path / "boxplot.svg").read_text()
    assert "<svg" in svg
    assert len(tables["summary"]) == 3
    assert len(tables["paired_tests"]) == 3
