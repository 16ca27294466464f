"""TOML experiment configuration.

Two tables: ``[experiment]`` mirrors ExperimentConfig and ``[forest]``
mirrors ForestParams (tree keys inline). Every key is optional; defaults
match the reference setup (10 clients, 35% withholding, 5x5 grid,
constant/equal updates, 100-tree forests).
"""
from __future__ import annotations

import sys

from fedsurv.experiment import ExperimentConfig
from fedsurv.forest import ForestParams
from fedsurv.tree import TreeParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENT_KEYS = {"n_clients", "withhold_fraction", "n_site_splits", "n_folds",
                   "update_method", "update_weighting", "seed", "n_jobs",
                   "mccv_rounds", "mccv_test_fraction"}
FOREST_KEYS = {"n_estimators", "bootstrap", "max_samples", "oob_score",
               "random_state", "low_memory", "n_jobs"}
TREE_KEYS = {"max_depth", "min_samples_split", "min_samples_leaf", "max_features"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    exp = dict(raw.get("experiment", {}))
    forest = dict(raw.get("forest", {}))
    unknown = (set(exp) - EXPERIMENT_KEYS) | (set(forest) - FOREST_KEYS - TREE_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    tree = TreeParams(**{k: v for k, v in forest.items() if k in TREE_KEYS})
    fp = ForestParams(tree=tree, **{k: v for k, v in forest.items() if k in FOREST_KEYS})
    return ExperimentConfig(forest=fp, **exp)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))
