"""Experiment driver: CSV ingestion, feature-withholding simulation across
clients, cross-validated training of the reference configurations, and
record emission.

Configurations produced by :func:`run_experiment`:

* ``Local`` - per-site forest on the site's retained features.
* ``Fed(k)`` for k=2..K - the first k sites' local models federated under
  the configured update strategy, each participating site evaluated on its
  own test fold.
* ``Centralized-SRF`` - one forest on the concatenated training folds over
  the union of post-withholding features, grown with missing-aware splits
  for the values each site never collected.
* ``Centralized`` - one forest on the unwithheld cohort with the same
  train/test rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from fedsurv.federation import LocalModel, federate
from fedsurv.forest import Forest, ForestParams, fit_forest, forest_risk
from fedsurv.schema import align_table, make_schema, merge_schemas
from fedsurv.survival import concordance_index, n_comparable_pairs
from fedsurv.tree import TreeParams

TRUE_STRINGS = {"1", "true", "yes", "t", "y"}
FALSE_STRINGS = {"0", "false", "no", "f", "n"}


@dataclass
class Dataset:
    X: pd.DataFrame  # raw covariates, pre one-hot
    time: np.ndarray
    event: np.ndarray
    categorical: list
    rejected_rows: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.X)


@dataclass
class ExperimentConfig:
    n_clients: int = 10
    withhold_fraction: float = 0.35
    n_site_splits: int = 5
    n_folds: int = 5
    forest: ForestParams = field(default_factory=ForestParams)
    update_method: str = "constant"
    update_weighting: str = "equal"
    seed: int = 0
    n_jobs: Optional[int] = None
    # Monte-Carlo cross-validation mode (single pooled model, repeated splits)
    mccv_rounds: int = 50
    mccv_test_fraction: float = 0.3


@dataclass
class RunRecord:
    configuration: str
    site_split: int
    fold: int
    client: int
    c_index: Optional[float]  # None when no pair was comparable
    n_test: int
    n_comparable_pairs: int
    seed: int

    @property
    def excluded(self) -> bool:
        return self.c_index is None


def _parse_event(value) -> bool:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, float, np.integer, np.floating)):
        if value in (0, 1):
            return bool(value)
        raise ValueError(f"event value {value!r} is not boolean")
    s = str(value).strip().lower()
    if s in TRUE_STRINGS:
        return True
    if s in FALSE_STRINGS:
        return False
    raise ValueError(f"event value {value!r} is not boolean")


def load_survival_csv(path, time_column: str = "time", event_column: str = "event",
                      categorical: Optional[Sequence[str]] = None) -> Dataset:
    """Load a survival table; rows with missing or nonpositive time are
    rejected and reported on the returned dataset."""
    df = pd.read_csv(path)
    if df.empty:
        raise ValueError("empty dataset")
    for col in (time_column, event_column):
        if col not in df.columns:
            raise ValueError(f"missing column: {col!r}")
    time = pd.to_numeric(df[time_column], errors="coerce")
    bad = time.isna() | (time <= 0)
    rejected = list(df.index[bad])
    df = df.loc[~bad]
    if df.empty:
        raise ValueError("empty dataset")
    event = np.array([_parse_event(v) for v in df[event_column]], dtype=bool)
    X = df.drop(columns=[time_column, event_column]).reset_index(drop=True)
    if categorical is None:
        categorical = [c for c in X.columns if not pd.api.types.is_numeric_dtype(X[c])]
    else:
        categorical = list(categorical)
        unknown = [c for c in categorical if c not in X.columns]
        if unknown:
            raise ValueError(f"categorical columns not in table: {unknown}")
    return Dataset(X=X, time=time.loc[~bad].to_numpy(dtype=np.float64),
                   event=event, categorical=categorical, rejected_rows=rejected)


def one_hot(X: pd.DataFrame, categorical: Sequence[str],
            levels: Optional[Dict[str, list]] = None) -> tuple[pd.DataFrame, dict]:
    """Expand each categorical column of L levels into L ``col=level``
    indicators (no reference level dropped); numeric columns pass through.
    Values outside the fixed ``levels`` yield all-zero indicators."""
    levels = dict(levels) if levels else {}
    out = {}
    for col in X.columns:
        if col in categorical:
            lv = levels.setdefault(col, sorted(X[col].astype(str).unique()))
            for level in lv:
                out[f"{col}={level}"] = (X[col].astype(str) == level).astype(np.float64)
        else:
            out[col] = X[col].astype(np.float64)
    return pd.DataFrame(out, index=X.index), levels


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def withhold_features(features: Sequence[str], fraction: float,
                      rng: np.random.Generator) -> list:
    """Drop round-half-up(fraction * count) features uniformly without
    replacement; returns the retained list in original order."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("withhold fraction must be in [0, 1)")
    features = list(features)
    k = round_half_up(fraction * len(features))
    dropped = set(rng.choice(len(features), size=k, replace=False).tolist())
    retained = [f for i, f in enumerate(features) if i not in dropped]
    if not retained:
        raise ValueError("no features left")
    return retained


def partition_clients(n: int, n_clients: int, rng: np.random.Generator) -> list:
    """Disjoint covering client row sets with sizes differing by at most 1."""
    if n < n_clients:
        raise ValueError("too few rows to partition")
    perm = rng.permutation(n)
    base, rem = divmod(n, n_clients)
    sizes = [base + 1 if c < rem else base for c in range(n_clients)]
    out = []
    start = 0
    for size in sizes:
        out.append(np.sort(perm[start:start + size]))
        start += size
    return out


def make_folds(n_rows: int, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Per-row fold ids, uniform with sizes differing by at most 1."""
    if n_rows < n_folds:
        raise ValueError("too few rows for the requested folds")
    perm = rng.permutation(n_rows)
    folds = np.empty(n_rows, dtype=np.int64)
    base, rem = divmod(n_rows, n_folds)
    start = 0
    for f in range(n_folds):
        size = base + 1 if f < rem else base
        folds[perm[start:start + size]] = f
        start += size
    return folds


def _evaluate(trees, table: pd.DataFrame, time: np.ndarray, event: np.ndarray):
    """(c_index or None, n_comparable_pairs) on one test fold."""
    pairs = n_comparable_pairs((time, event))
    if pairs == 0:
        return None, 0
    risks = forest_risk(trees, table)
    return concordance_index(risks, (time, event)), pairs


def _run_site_split(config: ExperimentConfig, dataset: Dataset,
                    centralized_table: pd.DataFrame, s: int,
                    split_ss: np.random.SeedSequence) -> list:
    K = config.n_clients
    part_ss, withhold_ss, fold_ss, run_ss = split_ss.spawn(4)
    client_rows = partition_clients(dataset.n, K, np.random.default_rng(part_ss))

    features = list(dataset.X.columns)
    withhold_children = withhold_ss.spawn(K)
    retained = [withhold_features(features, config.withhold_fraction,
                                  np.random.default_rng(withhold_children[c]))
                for c in range(K)]

    # per-client one-hot on the client's full local rows, then schema merge
    client_tables = []
    schemas = {}
    for c in range(K):
        local = dataset.X.iloc[client_rows[c]][retained[c]]
        encoded, _ = one_hot(local, dataset.categorical)
        client_tables.append(encoded)
        schemas[f"c{c}"] = make_schema(list(encoded.columns))
    fed_schema = merge_schemas(schemas)
    union = list(fed_schema.canonical_columns)

    # one shared table over the union space, indexed by cohort row
    srf_table = pd.DataFrame(np.nan, index=np.arange(dataset.n), columns=union, dtype=np.float64)
    client_features = []
    for c in range(K):
        aligned = align_table(client_tables[c], fed_schema, f"c{c}")
        aligned.index = client_rows[c]
        srf_table.loc[client_rows[c], :] = aligned
        client_features.append(list(client_tables[c].columns))

    fold_children = fold_ss.spawn(K)
    fold_of_row = np.empty(dataset.n, dtype=np.int64)
    for c in range(K):
        fold_of_row[client_rows[c]] = make_folds(len(client_rows[c]), config.n_folds,
                                                 np.random.default_rng(fold_children[c]))

    records: list[RunRecord] = []
    fold_run_ss = run_ss.spawn(config.n_folds)
    for f in range(config.n_folds):
        seeds = fold_run_ss[f].spawn(K + 3)
        test_mask = fold_of_row == f
        train_rows = np.flatnonzero(~test_mask)

        # per-client local forests (shared by Local and Fed(k))
        local_models = []
        for c in range(K):
            rows = client_rows[c]
            tr = rows[~test_mask[rows]]
            te = rows[test_mask[rows]]
            forest = fit_forest(srf_table.loc[tr], (dataset.time[tr], dataset.event[tr]),
                                config.forest, available_features=client_features[c],
                                seed=seeds[c], origin_site=f"c{c}")
            local_models.append((c, tr, te, forest))
            ci, pairs = _evaluate(forest.trees, srf_table.loc[te],
                                  dataset.time[te], dataset.event[te])
            records.append(RunRecord("Local", s, f, c, ci, len(te), pairs, config.seed))

        # federated configurations over nested client subsets; one shared
        # federation seed per fold gives common random numbers across k, so
        # Fed(k) vs Fed(k+1) differences reflect the added client rather
        # than resampling noise
        for k in range(2, K + 1):
            models = [LocalModel(forest=forest, site_id=f"c{c}",
                                 site_features=frozenset(client_features[c]),
                                 train_size=len(tr),
                                 update_method=config.update_method,
                                 update_weighting=config.update_weighting)
                      for c, tr, te, forest in local_models[:k]]
            fed = federate(models, seed=seeds[K + 2])
            for c, tr, te, _ in local_models[:k]:
                ci, pairs = _evaluate(fed[f"c{c}"].active_set, srf_table.loc[te],
                                      dataset.time[te], dataset.event[te])
                records.append(RunRecord(f"Fed({k})", s, f, c, ci, len(te), pairs, config.seed))

        # Centralized-SRF: pooled training rows on the union feature space;
        # missing-aware trees learn per node which child absorbs the values
        # a site never collected
        srf_params = replace(config.forest,
                             tree=replace(config.forest.tree, allow_missing=True))
        srf_forest = fit_forest(srf_table.loc[train_rows],
                                (dataset.time[train_rows], dataset.event[train_rows]),
                                srf_params, seed=seeds[K], origin_site="centralized-srf")
        for c, tr, te, _ in local_models:
            ci, pairs = _evaluate(srf_forest.trees, srf_table.loc[te],
                                  dataset.time[te], dataset.event[te])
            records.append(RunRecord("Centralized-SRF", s, f, c, ci, len(te), pairs, config.seed))

        # Centralized: unwithheld cohort, same rows
        cen_forest = fit_forest(centralized_table.iloc[train_rows],
                                (dataset.time[train_rows], dataset.event[train_rows]),
                                config.forest, seed=seeds[K + 1], origin_site="centralized")
        for c, tr, te, _ in local_models:
            ci, pairs = _evaluate(cen_forest.trees, centralized_table.iloc[te],
                                  dataset.time[te], dataset.event[te])
            records.append(RunRecord("Centralized", s, f, c, ci, len(te), pairs, config.seed))
    return records


def run_experiment(config: ExperimentConfig, dataset: Dataset) -> list:
    """Run the full (site split x fold x client x configuration) grid.

    Deterministic for a fixed master seed: every rng stream is pre-derived,
    and site splits may run in parallel without changing any record.
    """
    if config.n_clients < 1 or config.n_folds < 1 or config.n_site_splits < 1:
        raise ValueError("invalid experiment grid")
    centralized_table, _ = one_hot(dataset.X, dataset.categorical)
    split_seeds = np.random.SeedSequence(config.seed).spawn(config.n_site_splits)
    n_jobs = config.n_jobs or 1
    if n_jobs == 1:
        chunks = [_run_site_split(config, dataset, centralized_table, s, split_seeds[s])
                  for s in range(config.n_site_splits)]
    else:
        chunks = Parallel(n_jobs=n_jobs)(
            delayed(_run_site_split)(config, dataset, centralized_table, s, split_seeds[s])
            for s in range(config.n_site_splits))
    return [r for chunk in chunks for r in chunk]


def run_mccv(config: ExperimentConfig, dataset: Dataset) -> list:
    """Monte-Carlo cross-validation of the pooled model: repeated random
    train/test splits (default 50 rounds at 70/30), one record per round."""
    table, _ = one_hot(dataset.X, dataset.categorical)
    round_seeds = np.random.SeedSequence(config.seed).spawn(config.mccv_rounds)
    records = []
    for r, ss in enumerate(round_seeds):
        split_ss, fit_ss = ss.spawn(2)
        rng = np.random.default_rng(split_ss)
        perm = rng.permutation(dataset.n)
        n_test = max(1, int(config.mccv_test_fraction * dataset.n))
        te = np.sort(perm[:n_test])
        tr = np.sort(perm[n_test:])
        forest = fit_forest(table.iloc[tr], (dataset.time[tr], dataset.event[tr]),
                            config.forest, seed=fit_ss, origin_site="mccv")
        ci, pairs = _evaluate(forest.trees, table.iloc[te],
                              dataset.time[te], dataset.event[te])
        records.append(RunRecord("MCCV-Centralized", r, 0, 0, ci, len(te), pairs, config.seed))
    return records


RECORD_COLUMNS = ["configuration", "site_split", "fold", "client", "c_index",
                  "n_test", "n_comparable_pairs", "seed"]


def records_to_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    return pd.DataFrame([{
        "configuration": r.configuration, "site_split": r.site_split,
        "fold": r.fold, "client": r.client,
        "c_index": np.nan if r.c_index is None else r.c_index,
        "n_test": r.n_test, "n_comparable_pairs": r.n_comparable_pairs,
        "seed": r.seed,
    } for r in records], columns=RECORD_COLUMNS)


def write_records_csv(records: Sequence[RunRecord], path) -> None:
    """Byte-stable CSV emission: fixed column order, shortest round-trip
    float rendering, excluded records keep an empty c_index field."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for r in records:
            ci = "" if r.c_index is None else repr(float(r.c_index))
            fh.write(f"{r.configuration},{r.site_split},{r.fold},{r.client},"
                     f"{ci},{r.n_test},{r.n_comparable_pairs},{r.seed}\n")


def read_records_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in RECORD_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"records file missing columns: {missing}")
    return df
