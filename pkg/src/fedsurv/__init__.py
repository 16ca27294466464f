"""Federated random survival forests for sites with partially overlapping
feature sets: censoring-aware estimators, log-rank survival trees, schema
harmonization, compatibility-filtered tree exchange, and an experiment
harness with a wire protocol for networked rounds."""

from fedsurv._split import BACKEND as split_backend
from fedsurv.federation import LocalModel, federate
from fedsurv.forest import Forest, ForestParams, fit_forest, forest_risk
from fedsurv.schema import DatasetSchema, FederatedSchema, align_table, make_schema, merge_schemas
from fedsurv.survival import (
    StepFunction,
    SurvivalOutcome,
    build_risk_table,
    concordance_index,
    kaplan_meier,
    logrank_statistic,
    nelson_aalen,
)
from fedsurv.tree import SurvivalTree, TreeParams, fit_tree, tree_chf, tree_risk

__version__ = "0.1.0"

__all__ = [
    "split_backend",
    "LocalModel", "federate",
    "Forest", "ForestParams", "fit_forest", "forest_risk",
    "DatasetSchema", "FederatedSchema", "align_table", "make_schema", "merge_schemas",
    "StepFunction", "SurvivalOutcome", "build_risk_table", "concordance_index",
    "kaplan_meier", "logrank_statistic", "nelson_aalen",
    "SurvivalTree", "TreeParams", "fit_tree", "tree_chf", "tree_risk",
]
