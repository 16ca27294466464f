"""Tree federation: pool local forests, filter by feature compatibility,
and integrate received trees at each site under an update strategy.

Only model artifacts move through the pool: trees plus their origin site
and training-set size. No covariates, times, or event indicators.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from fedsurv.forest import Forest


@dataclass
class LocalModel:
    forest: Forest
    site_id: str
    site_features: frozenset
    train_size: int
    update_method: str = "all"
    update_weighting: str = "equal"
    federated_trees: list = field(default_factory=list)
    active_set: Optional[list] = None

    def predict_trees(self) -> list:
        return self.active_set if self.active_set is not None else self.forest.trees


@dataclass
class FederatedPool:
    trees: list
    site_features: dict  # site_id -> frozenset of canonical names
    site_sizes: dict  # site_id -> train size


@dataclass(frozen=True)
class IntegrationPlan:
    """Which local trees survive and which received trees join the active
    set; index lists keep pool order so integration is reproducible."""

    kept_local_indices: tuple
    kept_received_indices: tuple


def pool_models(models: Sequence[LocalModel]) -> FederatedPool:
    """Concatenate all sites' trees with provenance metadata."""
    if not models:
        raise ValueError("no models to pool")
    order = models[0].forest.feature_order
    for m in models[1:]:
        if m.forest.feature_order != order:
            raise ValueError("unaligned models: feature_order differs across sites")
    ids = [m.site_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate site ids")
    trees = [t for m in models for t in m.forest.trees]
    return FederatedPool(
        trees=trees,
        site_features={m.site_id: frozenset(m.site_features) for m in models},
        site_sizes={m.site_id: m.train_size for m in models},
    )


def compatible_trees(pool: FederatedPool, target_site_id: str) -> list:
    """Trees from other sites whose split features all exist at the target.
    A no-split tree is compatible with every site."""
    if target_site_id not in pool.site_features:
        raise ValueError(f"unknown site: {target_site_id!r}")
    features = pool.site_features[target_site_id]
    return [t for t in pool.trees
            if t.origin_site != target_site_id and t.split_features <= features]


def plan_integration(model: LocalModel, received: Sequence,
                     rng: np.random.Generator) -> IntegrationPlan:
    """Select the active set for one site.

    ``all`` keeps every local tree and every received tree. ``constant``
    samples exactly ``n_estimators`` trees without replacement from the
    combined local+received pool, weighting each tree equally or by its
    origin site's training-set size (exponential-keys sampling, so a seeded
    rng is fully deterministic). A pool no larger than ``n_estimators`` is
    kept whole.
    """
    for t in received:
        if not t.split_features <= model.site_features:
            raise ValueError(
                f"received tree from {t.origin_site!r} is incompatible with "
                f"site {model.site_id!r} (federation bug)")
    n_local = len(model.forest.trees)
    n_received = len(received)
    if model.update_method == "all":
        return IntegrationPlan(tuple(range(n_local)), tuple(range(n_received)))
    if model.update_method != "constant":
        raise ValueError(f"unknown update method: {model.update_method!r}")
    n_keep = model.forest.params.n_estimators
    pool_size = n_local + n_received
    if pool_size <= n_keep:
        return IntegrationPlan(tuple(range(n_local)), tuple(range(n_received)))
    if model.update_weighting == "equal":
        weights = np.ones(pool_size)
    elif model.update_weighting == "site_size":
        weights = np.array([float(t.train_size)
                            for t in list(model.forest.trees) + list(received)])
    else:
        raise ValueError(f"unknown update weighting: {model.update_weighting!r}")
    # Efraimidis-Spirakis: key = u^(1/w); the n_keep largest keys win.
    keys = rng.random(pool_size) ** (1.0 / weights)
    chosen = np.sort(np.argsort(-keys, kind="stable")[:n_keep])
    local_idx = tuple(int(i) for i in chosen if i < n_local)
    received_idx = tuple(int(i) - n_local for i in chosen if i >= n_local)
    return IntegrationPlan(local_idx, received_idx)


def apply_plan(model: LocalModel, received: Sequence, plan: IntegrationPlan) -> LocalModel:
    active = [model.forest.trees[i] for i in plan.kept_local_indices]
    active += [received[i] for i in plan.kept_received_indices]
    return replace(model, federated_trees=list(received), active_set=active)


def integrate(model: LocalModel, received: Sequence, rng: np.random.Generator) -> LocalModel:
    """Populate ``active_set`` from local plus received trees."""
    return apply_plan(model, received, plan_integration(model, received, rng))


def site_rng_streams(models: Sequence[LocalModel], seed) -> dict:
    """Per-site child RNGs derived from the master seed in sorted site-id
    order, independent of the order models are supplied in."""
    ordered = sorted(m.site_id for m in models)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(ordered))
    return {site: np.random.default_rng(ss) for site, ss in zip(ordered, children)}


def federate(models: Sequence[LocalModel], seed=None) -> Dict[str, LocalModel]:
    """One federation round: pool, filter per site, integrate."""
    pool = pool_models(models)
    rngs = site_rng_streams(models, seed)
    out = {}
    for model in models:
        received = compatible_trees(pool, model.site_id)
        out[model.site_id] = integrate(model, received, rngs[model.site_id])
    return out
