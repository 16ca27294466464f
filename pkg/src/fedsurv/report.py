"""Summaries over run records: per-configuration statistics, paired tests,
CSV emission, and an optional SVG boxplot."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import pandas as pd

from fedsurv.stats import paired_t, wilcoxon_signed_rank

PAIR_KEYS = ["site_split", "fold", "client"]


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """Per-configuration mean, sd, quartiles, and 1.5*IQR whiskers, ordered
    by ascending mean C-index. Excluded records (no comparable pairs) are
    dropped from the statistics but counted."""
    if records.empty:
        raise ValueError("no records")
    rows = []
    for config, group in records.groupby("configuration"):
        vals = group["c_index"].dropna().to_numpy()
        n_excluded = int(group["c_index"].isna().sum())
        if vals.size == 0:
            raise ValueError(f"configuration {config!r} has no usable records")
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        iqr = q3 - q1
        lo_candidates = vals[vals >= q1 - 1.5 * iqr]
        hi_candidates = vals[vals <= q3 + 1.5 * iqr]
        rows.append({
            "configuration": config,
            "n": vals.size,
            "n_excluded": n_excluded,
            "mean": vals.mean(),
            "sd": vals.std(ddof=1) if vals.size > 1 else 0.0,
            "q1": q1, "median": med, "q3": q3,
            "whisker_low": lo_candidates.min(),
            "whisker_high": hi_candidates.max(),
        })
    out = pd.DataFrame(rows).sort_values("mean", kind="stable").reset_index(drop=True)
    return out


def paired_deltas(records: pd.DataFrame, config_a: str, config_b: str) -> np.ndarray:
    """Per-(site split, fold, client) deltas b - a, dropping any pair where
    either side was excluded."""
    a = records[records["configuration"] == config_a].set_index(PAIR_KEYS)["c_index"]
    b = records[records["configuration"] == config_b].set_index(PAIR_KEYS)["c_index"]
    joined = pd.concat({"a": a, "b": b}, axis=1, join="inner").dropna()
    if joined.empty:
        raise ValueError(f"no paired records for {config_a!r} vs {config_b!r}")
    return (joined["b"] - joined["a"]).to_numpy()


def paired_test_table(records: pd.DataFrame, comparisons: Sequence[tuple]) -> pd.DataFrame:
    rows = []
    for config_a, config_b in comparisons:
        deltas = paired_deltas(records, config_a, config_b)
        rows.append({
            "from": config_a, "to": config_b, "n_pairs": deltas.size,
            "mean_delta": float(deltas.mean()),
            "median_delta": float(np.median(deltas)),
            "wilcoxon_p": wilcoxon_signed_rank(deltas),
            "paired_t_p": paired_t(deltas),
        })
    return pd.DataFrame(rows)


def default_comparisons(records: pd.DataFrame) -> list:
    """(Local -> Fed(K)), (Fed(K) -> Centralized-SRF), (Local -> Centralized-SRF)
    with K the largest federated client count present."""
    fed = sorted(
        (int(c[4:-1]) for c in records["configuration"].unique()
         if c.startswith("Fed(")),
        reverse=True)
    if not fed:
        return []
    top = f"Fed({fed[0]})"
    return [("Local", top), (top, "Centralized-SRF"), ("Local", "Centralized-SRF")]


def write_report(records: pd.DataFrame, out_dir, svg: bool = False) -> dict:
    """Emit summary.csv and paired_tests.csv (plus boxplot.svg on request)
    into ``out_dir``; returns the produced tables."""
    import pathlib

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(records)
    summary.to_csv(out_dir / "summary.csv", index=False)
    comparisons = default_comparisons(records)
    tests = paired_test_table(records, comparisons) if comparisons else pd.DataFrame()
    tests.to_csv(out_dir / "paired_tests.csv", index=False)
    if svg:
        write_boxplot_svg(records, summary, out_dir / "boxplot.svg")
    return {"summary": summary, "paired_tests": tests}


def write_boxplot_svg(records: pd.DataFrame, summary: pd.DataFrame, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = list(summary["configuration"])
    data = [records.loc[records["configuration"] == c, "c_index"].dropna().to_numpy()
            for c in order]
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(order)), 4.5))
    ax.boxplot(data, tick_labels=order, whis=1.5)
    for i, row in summary.iterrows():
        ax.annotate(f"{row['mean']:.3f}±{row['sd']:.3f}",
                    (i + 1, row["whisker_high"]), textcoords="offset points",
                    xytext=(0, 6), ha="center", fontsize=8)
    ax.axhline(0.5, linestyle=":", color="grey")  # chance discrimination
    ax.set_ylabel("C-index")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
