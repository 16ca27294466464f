"""Random survival forest: bootstrap ensemble of survival trees.

Per-tree RNG streams are spawned up front from the master seed, so fitting
in parallel is byte-identical to fitting serially.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from fedsurv.survival import concordance_index, outcome_arrays
from fedsurv.tree import (
    SurvivalTree,
    TreeParams,
    fit_tree,
    tree_from_doc,
    tree_risk_matrix,
    tree_to_doc,
)


@dataclass
class ForestParams:
    n_estimators: int = 100
    bootstrap: bool = True
    max_samples: Optional[object] = None  # int, fraction in (0,1], or None = n
    oob_score: bool = False
    n_jobs: Optional[int] = None
    random_state: Optional[int] = None
    low_memory: bool = False
    tree: TreeParams = field(default_factory=TreeParams)

    def validate(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.tree.validate()

    def resolve_max_samples(self, n: int) -> int:
        if self.max_samples is None:
            return n
        if isinstance(self.max_samples, float):
            if not 0.0 < self.max_samples <= 1.0:
                raise ValueError("max_samples fraction must be in (0, 1]")
            return max(1, int(self.max_samples * n))
        m = int(self.max_samples)
        if not 1 <= m <= n:
            raise ValueError("max_samples must be in [1, n]")
        return m


@dataclass
class Forest:
    trees: list
    params: ForestParams
    feature_order: list
    train_size: int
    oob_c_index: Optional[float] = None
    in_bag: Optional[np.ndarray] = None  # (n_estimators, n) bool, only with oob_score


def _as_table(X, feature_names=None):
    if isinstance(X, pd.DataFrame):
        return np.asarray(X, dtype=np.float64), [str(c) for c in X.columns]
    if feature_names is None:
        raise ValueError("feature_names is required when X is not a DataFrame")
    return np.asarray(X, dtype=np.float64), list(feature_names)


def _fit_one(X_avail, times, events, params: ForestParams, available_features,
             seed_seq, n_samples, origin_site):
    rng = np.random.default_rng(seed_seq)
    n = times.size
    if params.bootstrap:
        idx = rng.integers(0, n, size=n_samples)
    else:
        idx = np.arange(n)
    tree = fit_tree(X_avail[idx], (times[idx], events[idx]), params.tree,
                    available_features, rng, origin_site=origin_site,
                    store_survival=not params.low_memory)
    in_bag = None
    if params.oob_score:
        in_bag = np.zeros(n, dtype=bool)
        in_bag[idx] = True
    return tree, in_bag


def fit_forest(X, outcomes, params: ForestParams, available_features=None,
               seed=None, origin_site: str = "local", feature_names=None) -> Forest:
    """Fit ``n_estimators`` trees on bootstrap resamples of the local data.

    ``X`` is a DataFrame (or array plus ``feature_names``) over the full
    canonical feature order; trees only ever split on ``available_features``
    (defaults to all columns), which must be free of missing values.
    """
    params.validate()
    values, order = _as_table(X, feature_names)
    times, events = outcome_arrays(outcomes)
    if values.shape[0] != times.size:
        raise ValueError("X and outcomes must have equal length")
    if available_features is None:
        available_features = list(order)
    available_features = list(available_features)
    missing = [f for f in available_features if f not in order]
    if missing:
        raise ValueError(f"available features not in table: {missing}")
    cols = [order.index(f) for f in available_features]
    X_avail = np.ascontiguousarray(values[:, cols])
    if seed is None:
        seed = params.random_state
    n_samples = params.resolve_max_samples(times.size)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(params.n_estimators)

    n_jobs = params.n_jobs or 1
    if n_jobs == 1:
        fitted = [_fit_one(X_avail, times, events, params, available_features,
                           ss, n_samples, origin_site) for ss in children]
    else:
        fitted = Parallel(n_jobs=n_jobs)(
            delayed(_fit_one)(X_avail, times, events, params, available_features,
                              ss, n_samples, origin_site)
            for ss in children)
    trees = [t for t, _ in fitted]
    in_bag = np.array([b for _, b in fitted]) if params.oob_score else None
    forest = Forest(trees=trees, params=params, feature_order=list(order),
                    train_size=int(times.size), in_bag=in_bag)
    if params.oob_score:
        forest.oob_c_index = oob_c_index(forest, X, outcomes, feature_names=feature_names)
    return forest


def forest_risk(trees_or_forest, X, feature_names=None) -> np.ndarray:
    """Mean per-row risk over an ensemble (order-invariant)."""
    trees = trees_or_forest.trees if isinstance(trees_or_forest, Forest) else list(trees_or_forest)
    if not trees:
        raise ValueError("empty ensemble")
    values, order = _as_table(X, feature_names)
    col_index = {name: i for i, name in enumerate(order)}
    total = np.zeros(values.shape[0], dtype=np.float64)
    for tree in trees:
        total += tree_risk_matrix(tree, values, col_index)
    return total / len(trees)


def oob_c_index(forest: Forest, X, outcomes, feature_names=None) -> float:
    """Out-of-bag C-index: per-row mean risk over trees whose bootstrap
    missed the row; rows in-bag everywhere are excluded."""
    if not forest.params.bootstrap:
        raise ValueError("OOB requires bootstrap")
    if forest.in_bag is None:
        raise ValueError("OOB requires stored in-bag masks (oob_score=True)")
    values, order = _as_table(X, feature_names)
    times, events = outcome_arrays(outcomes)
    col_index = {name: i for i, name in enumerate(order)}
    total = np.zeros(values.shape[0], dtype=np.float64)
    counts = np.zeros(values.shape[0], dtype=np.int64)
    for t, tree in enumerate(forest.trees):
        oob = ~forest.in_bag[t]
        if not oob.any():
            continue
        total[oob] += tree_risk_matrix(tree, values[oob], col_index)
        counts[oob] += 1
    keep = counts > 0
    if not keep.any():
        raise ValueError("no OOB rows")
    risks = total[keep] / counts[keep]
    return concordance_index(risks, (times[keep], events[keep]))


def forest_to_doc(forest: Forest) -> dict:
    p = forest.params
    return {
        "params": {
            "n_estimators": p.n_estimators,
            "bootstrap": p.bootstrap,
            "max_samples": p.max_samples,
            "oob_score": p.oob_score,
            "low_memory": p.low_memory,
            "max_depth": p.tree.max_depth,
            "min_samples_split": p.tree.min_samples_split,
            "min_samples_leaf": p.tree.min_samples_leaf,
            "max_features": p.tree.max_features,
            "allow_missing": p.tree.allow_missing,
        },
        "feature_order": list(forest.feature_order),
        "train_size": forest.train_size,
        "trees": [tree_to_doc(t) for t in forest.trees],
    }


def forest_from_doc(doc: dict) -> Forest:
    p = doc["params"]
    params = ForestParams(
        n_estimators=p["n_estimators"], bootstrap=p["bootstrap"],
        max_samples=p["max_samples"], oob_score=p["oob_score"],
        low_memory=p["low_memory"],
        tree=TreeParams(max_depth=p["max_depth"],
                        min_samples_split=p["min_samples_split"],
                        min_samples_leaf=p["min_samples_leaf"],
                        max_features=p["max_features"],
                        allow_missing=p.get("allow_missing", False)),
    )
    trees = [tree_from_doc(t) for t in doc["trees"]]
    return Forest(trees=trees, params=params, feature_order=list(doc["feature_order"]),
                  train_size=int(doc["train_size"]))
