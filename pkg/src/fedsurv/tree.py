"""Single survival tree: log-rank splitting, step-function leaves, routing.

A fitted tree stores a node array (internal nodes reference children by
index, leaves carry the node's Nelson-Aalen / Kaplan-Meier estimates on its
own event-time grid). Per-sample risk is the sum of the routed leaf's
cumulative hazard over that grid.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from fedsurv._split import best_split
from fedsurv.survival import (
    km_na_from_arrays,
    logrank_statistic,
    outcome_arrays,
    risk_table_from_arrays,
)


class IncompatibleRowError(ValueError):
    """A row lacks a value for a split feature. After compatibility
    filtering this must never happen; it signals a federation bug."""


@dataclass
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 6
    min_samples_leaf: int = 3
    max_features: object = "sqrt"
    # Opt-in NaN handling for pooled reference models: split statistics are
    # computed on complete cases and each internal node learns which child
    # receives missing values. Site-local fits keep the default (reject NaN).
    allow_missing: bool = False

    def validate(self):
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")


@dataclass
class TreeNode:
    # internal node fields
    feature: Optional[str] = None
    threshold: Optional[float] = None
    left: Optional[int] = None
    right: Optional[int] = None
    missing_left: Optional[bool] = None  # side for NaN values; None = reject NaN
    # leaf fields
    leaf_times: Optional[np.ndarray] = None
    chf_values: Optional[np.ndarray] = None
    surv_values: Optional[np.ndarray] = None
    n_node_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class SurvivalTree:
    nodes: list
    split_features: frozenset
    origin_site: str
    train_size: int


def n_candidate_features(n_features: int, rule) -> int:
    """Resolve a max_features rule ("sqrt", "log2", int, fraction) to a count."""
    if rule is None or rule == "all":
        return n_features
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, bool):
        raise ValueError(f"invalid max_features rule: {rule!r}")
    if isinstance(rule, int):
        if rule < 1:
            raise ValueError("max_features int must be >= 1")
        return min(rule, n_features)
    if isinstance(rule, float):
        if not 0.0 < rule <= 1.0:
            raise ValueError("max_features fraction must be in (0, 1]")
        return max(1, int(rule * n_features))
    raise ValueError(f"invalid max_features rule: {rule!r}")


def _missing_side(times, events, left_idx, right_idx, miss_idx) -> bool:
    """Pick the child that receives missing values: the assignment whose
    two-group log-rank separation is larger (ties go left)."""
    with_left = np.concatenate([left_idx, miss_idx])
    with_right = np.concatenate([right_idx, miss_idx])

    def stat(a, b):
        try:
            return logrank_statistic((times[a], events[a]), (times[b], events[b]))
        except ValueError:
            return -np.inf

    return stat(with_left, right_idx) >= stat(left_idx, with_right)


def fit_tree(X, outcomes, params: TreeParams, available_features: Sequence[str],
             rng: np.random.Generator, origin_site: str = "local",
             store_survival: bool = True) -> SurvivalTree:
    """Grow one survival tree by recursive log-rank splitting.

    ``X`` holds one column per entry of ``available_features``; missing
    values are rejected unless ``allow_missing`` is set, in which case
    split statistics use complete cases and each internal node records
    which child receives NaN. Candidate features are drawn per node without
    replacement; thresholds are midpoints between consecutive distinct
    sorted values; a split is admissible when both children keep at least
    ``min_samples_leaf`` samples. Ties break to the lowest feature index,
    then the smallest threshold, so a fixed ``rng`` is bit-reproducible.
    """
    params.validate()
    available_features = list(available_features)
    if not available_features:
        raise ValueError("no usable features")
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != len(available_features):
        raise ValueError("X must have one column per available feature")
    times, events = outcome_arrays(outcomes)
    if X.shape[0] != times.size:
        raise ValueError("X and outcomes must have equal length")
    if times.size == 0:
        raise ValueError("empty cohort")
    if not params.allow_missing and np.isnan(X).any():
        raise ValueError("X contains missing values in available features")
    events_u8 = events.astype(np.uint8)
    n_features = len(available_features)
    k_candidates = n_candidate_features(n_features, params.max_features)

    nodes: list[TreeNode] = []
    used: set[str] = set()

    def make_leaf(idx: np.ndarray) -> int:
        grid, chf, surv = km_na_from_arrays(times[idx], events[idx])
        nodes.append(TreeNode(
            leaf_times=grid, chf_values=chf,
            surv_values=surv if store_survival else None,
            n_node_samples=int(idx.size),
        ))
        return len(nodes) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        n_node = idx.size
        t_node = times[idx]
        e_node = events[idx]
        homogeneous = bool(np.all(t_node == t_node[0]) and np.all(e_node == e_node[0]))
        if (n_node < params.min_samples_split
                or (params.max_depth is not None and depth >= params.max_depth)
                or homogeneous):
            return make_leaf(idx)
        table = risk_table_from_arrays(t_node, e_node)
        if table.event_times.size == 0:
            # no events: every split statistic is 0
            return make_leaf(idx)
        if k_candidates >= n_features:
            candidates = np.arange(n_features)
        else:
            candidates = np.sort(rng.choice(n_features, size=k_candidates, replace=False))
        e8 = events_u8[idx]
        best_stat = 0.0
        best_feature = -1
        best_threshold = 0.0
        for f in candidates:
            v = X[idx, f]
            if params.allow_missing:
                complete = ~np.isnan(v)
                if complete.sum() < 2 * params.min_samples_leaf:
                    continue
                sub = idx[complete]
                sub_table = risk_table_from_arrays(times[sub], events[sub])
                if sub_table.event_times.size == 0:
                    continue
                v_sub = v[complete]
                order = np.argsort(v_sub, kind="stable")
                stat, thr, ok = best_split(
                    np.ascontiguousarray(v_sub[order]),
                    np.ascontiguousarray(times[sub][order]),
                    np.ascontiguousarray(events_u8[sub][order]),
                    sub_table.event_times, sub_table.at_risk, sub_table.events,
                    params.min_samples_leaf,
                )
            else:
                order = np.argsort(v, kind="stable")
                stat, thr, ok = best_split(
                    np.ascontiguousarray(v[order]),
                    np.ascontiguousarray(t_node[order]),
                    np.ascontiguousarray(e8[order]),
                    table.event_times, table.at_risk, table.events,
                    params.min_samples_leaf,
                )
            if ok and stat > best_stat:
                best_stat = stat
                best_feature = int(f)
                best_threshold = thr
        if best_feature < 0 or best_stat <= 0.0:
            return make_leaf(idx)
        col = X[idx, best_feature]
        left_mask = col <= best_threshold
        right_mask = col > best_threshold
        missing_left = None
        if params.allow_missing:
            miss_mask = np.isnan(col)
            if miss_mask.any():
                missing_left = _missing_side(times, events, idx[left_mask],
                                             idx[right_mask], idx[miss_mask])
                if missing_left:
                    left_mask |= miss_mask
                else:
                    right_mask |= miss_mask
            else:
                # no missing here during training: route prediction-time NaN
                # to the larger child
                missing_left = bool(left_mask.sum() >= right_mask.sum())
        node_id = len(nodes)
        nodes.append(TreeNode(feature=available_features[best_feature],
                              threshold=best_threshold, missing_left=missing_left,
                              n_node_samples=int(n_node)))
        used.add(available_features[best_feature])
        nodes[node_id].left = build(idx[left_mask], depth + 1)
        nodes[node_id].right = build(idx[right_mask], depth + 1)
        return node_id

    build(np.arange(times.size), 0)
    return SurvivalTree(nodes=nodes, split_features=frozenset(used),
                        origin_site=origin_site, train_size=int(times.size))


def _route(tree: SurvivalTree, value_of) -> TreeNode:
    node = tree.nodes[0]
    while not node.is_leaf:
        v = value_of(node.feature)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            if node.missing_left is None:
                raise IncompatibleRowError(
                    f"incompatible row: missing value for split feature "
                    f"{node.feature!r} (tree from site {tree.origin_site!r})")
            node = tree.nodes[node.left if node.missing_left else node.right]
        else:
            node = tree.nodes[node.left if v <= node.threshold else node.right]
    return node


def _leaf_for_row(tree: SurvivalTree, row) -> TreeNode:
    if isinstance(row, Mapping):
        def value_of(name):
            v = row.get(name)
            return float(v) if v is not None else None
    else:
        raise TypeError("row must be a feature-name mapping")
    return _route(tree, value_of)


def tree_risk(tree: SurvivalTree, row) -> float:
    """Risk of one row: sum of the routed leaf's CHF over its own grid.
    Missing values at missing-aware nodes marginalize over both children."""
    if not isinstance(row, Mapping):
        raise TypeError("row must be a feature-name mapping")

    def value_at(name):
        v = row.get(name)
        return float("nan") if v is None else float(v)

    return _node_risk(tree.nodes, 0, value_at, tree.origin_site)


def tree_chf(tree: SurvivalTree, row):
    """Cumulative hazard step function of the routed leaf."""
    from fedsurv.survival import StepFunction

    leaf = _leaf_for_row(tree, row)
    return StepFunction(leaf.leaf_times, leaf.chf_values, 0.0)


def tree_survival(tree: SurvivalTree, row):
    """Survival step function of the routed leaf."""
    from fedsurv.survival import StepFunction

    leaf = _leaf_for_row(tree, row)
    if leaf.surv_values is None:
        raise ValueError("survival function unavailable (fitted with low_memory)")
    return StepFunction(leaf.leaf_times, leaf.surv_values, 1.0)


def _node_risk(nodes, node_id: int, value_at, origin_site: str) -> float:
    """Risk of one row under the subtree at ``node_id``; a missing value at
    a missing-aware node follows the side learned during fitting."""
    node = nodes[node_id]
    while not node.is_leaf:
        v = value_at(node.feature)
        if math.isnan(v):
            if node.missing_left is None:
                raise IncompatibleRowError(
                    f"incompatible row: missing value for split feature "
                    f"{node.feature!r} (tree from site {origin_site!r})")
            node = nodes[node.left if node.missing_left else node.right]
        else:
            node = nodes[node.left if v <= node.threshold else node.right]
    return float(node.chf_values.sum())


def tree_risk_matrix(tree: SurvivalTree, X: np.ndarray, col_index: Mapping[str, int]) -> np.ndarray:
    """Per-row risks for a matrix whose columns are named by ``col_index``."""
    for name in tree.split_features:
        if name not in col_index:
            raise IncompatibleRowError(
                f"incompatible row: feature {name!r} absent "
                f"(tree from site {tree.origin_site!r})")
    out = np.empty(X.shape[0], dtype=np.float64)
    nodes = tree.nodes
    for i in range(X.shape[0]):
        row = X[i]
        out[i] = _node_risk(nodes, 0, lambda name: row[col_index[name]],
                            tree.origin_site)
    return out


# --- canonical serialization ------------------------------------------------

def canonical_json(doc) -> bytes:
    """Stable byte serialization: sorted keys, no whitespace, shortest
    round-trip float rendering."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def tree_to_doc(tree: SurvivalTree) -> dict:
    nodes = []
    for i, node in enumerate(tree.nodes):
        if node.is_leaf:
            entry = {
                "id": i, "leaf": True,
                "times": [float(t) for t in node.leaf_times],
                "chf": [float(v) for v in node.chf_values],
                "n": node.n_node_samples,
            }
            if node.surv_values is not None:
                entry["surv"] = [float(v) for v in node.surv_values]
        else:
            entry = {"id": i, "feature": node.feature, "threshold": float(node.threshold),
                     "left": node.left, "right": node.right, "n": node.n_node_samples}
            if node.missing_left is not None:
                entry["missing_left"] = node.missing_left
        nodes.append(entry)
    return {"origin_site": tree.origin_site, "train_size": tree.train_size, "nodes": nodes}


def tree_from_doc(doc: dict) -> SurvivalTree:
    """Rebuild and validate a tree document.

    Checks node ids, child references, proper-binary-tree shape rooted at
    node 0, and leaf monotonicity; ``split_features`` is recomputed from
    the internal nodes, never trusted from the document.
    """
    raw_nodes = doc["nodes"]
    if not raw_nodes:
        raise ValueError("invalid tree document: empty node list")
    nodes: list[TreeNode] = []
    for i, entry in enumerate(raw_nodes):
        if entry.get("id") != i:
            raise ValueError("invalid tree document: node ids must be dense and ordered")
        if entry.get("leaf"):
            times = np.asarray(entry["times"], dtype=np.float64)
            chf = np.asarray(entry["chf"], dtype=np.float64)
            surv = np.asarray(entry["surv"], dtype=np.float64) if "surv" in entry else None
            if times.size != chf.size or (surv is not None and surv.size != times.size):
                raise ValueError("invalid tree document: leaf array length mismatch")
            if times.size and np.any(np.diff(times) <= 0):
                raise ValueError("invalid tree document: leaf times must increase")
            if chf.size and np.any(np.diff(chf) < 0):
                raise ValueError("invalid tree document: leaf CHF must be non-decreasing")
            if surv is not None and surv.size and (
                    np.any(np.diff(surv) > 0) or surv.min() < 0 or surv.max() > 1):
                raise ValueError("invalid tree document: leaf survival must be non-increasing in [0,1]")
            nodes.append(TreeNode(leaf_times=times, chf_values=chf, surv_values=surv,
                                  n_node_samples=int(entry["n"])))
        else:
            missing_left = entry.get("missing_left")
            if missing_left is not None and not isinstance(missing_left, bool):
                raise ValueError("invalid tree document: missing_left must be a boolean")
            nodes.append(TreeNode(feature=entry["feature"], threshold=float(entry["threshold"]),
                                  left=int(entry["left"]), right=int(entry["right"]),
                                  missing_left=missing_left,
                                  n_node_samples=int(entry.get("n", 0))))
    # shape check: every node reachable exactly once from the root
    seen = set()
    stack = [0]
    while stack:
        i = stack.pop()
        if i in seen or not 0 <= i < len(nodes):
            raise ValueError("invalid tree document: malformed node graph")
        seen.add(i)
        node = nodes[i]
        if not node.is_leaf:
            stack.extend([node.left, node.right])
    if seen != set(range(len(nodes))):
        raise ValueError("invalid tree document: unreachable nodes")
    used = frozenset(n.feature for n in nodes if not n.is_leaf)
    return SurvivalTree(nodes=nodes, split_features=used,
                        origin_site=doc["origin_site"], train_size=int(doc["train_size"]))
