"""Feature-space harmonization across sites.

Each site declares its local column names plus a map to canonical names;
the coordinator merges those into a federated schema covering the union of
all canonical names (optionally anonymized, optionally with reserved
placeholder columns), and each site reindexes its table into that space
with all-missing stub columns for features it never collected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class DatasetSchema:
    columns: tuple
    column_map: dict  # local name -> canonical name

    @property
    def canonical_names(self) -> list:
        return [self.column_map[c] for c in self.columns if c in self.column_map]


@dataclass(frozen=True)
class FederatedSchema:
    canonical_columns: tuple
    per_client_map: dict  # client id -> {local name -> canonical name}
    anonymized: bool = False
    extra_column_prefix: str = "extra_"
    name_permutation_seed: Optional[int] = None


def make_schema(columns: Sequence[str], column_map: Optional[Dict[str, str]] = None,
                closure: bool = True) -> DatasetSchema:
    """Build a local schema; with ``closure`` every unmapped column gets an
    identity entry, and ``column_map=None`` means all names are already
    canonical."""
    columns = [str(c) for c in columns]
    if not columns:
        raise ValueError("columns must be non-empty")
    if len(set(columns)) != len(columns):
        raise ValueError("duplicate local columns")
    cmap = dict(column_map) if column_map else {}
    unknown = [k for k in cmap if k not in columns]
    if unknown:
        raise ValueError(f"column_map keys not in columns: {unknown}")
    if closure:
        for c in columns:
            cmap.setdefault(c, c)
    targets = [cmap[c] for c in columns if c in cmap]
    if len(set(targets)) != len(targets):
        raise ValueError("two local columns map to the same canonical name")
    return DatasetSchema(columns=tuple(columns), column_map=cmap)


def merge_schemas(schemas: Dict[str, DatasetSchema], anonymize: bool = False,
                  extra_columns: int = 0, extra_column_prefix: str = "extra_",
                  random_state: Optional[int] = None) -> FederatedSchema:
    """Merge per-client schemas into the sorted union of canonical names.

    ``extra_columns`` reserves placeholder names ``prefix0..prefix{k-1}``
    for late-joining clients; ``anonymize`` renames every canonical feature
    to ``feature_i`` under a seeded permutation, composing each client's
    map through the rename.
    """
    if not schemas:
        raise ValueError("at least one schema is required")
    if extra_columns < 0:
        raise ValueError("extra_columns must be >= 0")
    union = sorted({name for s in schemas.values() for name in s.canonical_names})
    per_client = {cid: dict(s.column_map) for cid, s in schemas.items()}
    if extra_columns > 0 and any(name.startswith(extra_column_prefix) for name in union):
        raise ValueError(
            f"extra column prefix {extra_column_prefix!r} conflicts with an existing feature name")
    if anonymize:
        rng = np.random.default_rng(random_state)
        perm = rng.permutation(len(union))
        rename = {old: f"feature_{perm[i]}" for i, old in enumerate(union)}
        union = sorted(rename.values())
        per_client = {cid: {local: rename[canon] for local, canon in m.items()}
                      for cid, m in per_client.items()}
    placeholders = [f"{extra_column_prefix}{i}" for i in range(extra_columns)]
    return FederatedSchema(canonical_columns=tuple(union + placeholders),
                           per_client_map=per_client, anonymized=anonymize,
                           extra_column_prefix=extra_column_prefix,
                           name_permutation_seed=random_state)


def align_table(table: pd.DataFrame, federated: FederatedSchema, client_id: str) -> pd.DataFrame:
    """Rename a local table to canonical names and reindex it to the full
    federated column order; locally absent columns become all-NaN stubs.
    Values and row order are preserved bit-exactly."""
    if client_id not in federated.per_client_map:
        raise ValueError(f"unknown client: {client_id!r}")
    cmap = federated.per_client_map[client_id]
    unknown = [c for c in table.columns if c not in cmap]
    if unknown:
        raise ValueError(f"column not in schema: {unknown}")
    renamed = table.rename(columns=cmap)
    return renamed.reindex(columns=list(federated.canonical_columns))


def available_features(table: pd.DataFrame) -> list:
    """Columns of an aligned table that are not all-missing stubs."""
    return [c for c in table.columns if not table[c].isna().all()]


# --- document formats (wire / disk) ----------------------------------------

def schema_to_doc(schema: DatasetSchema) -> dict:
    return {"columns": list(schema.columns), "column_map": dict(schema.column_map),
            "closure": True}


def schema_from_doc(doc: dict) -> DatasetSchema:
    return make_schema(doc["columns"], doc.get("column_map") or None,
                       closure=doc.get("closure", True))


def federated_schema_to_doc(schema: FederatedSchema) -> dict:
    return {
        "canonical_columns": list(schema.canonical_columns),
        "per_client_map": {cid: dict(m) for cid, m in schema.per_client_map.items()},
        "anonymized": schema.anonymized,
        "extra_column_prefix": schema.extra_column_prefix,
    }


def federated_schema_from_doc(doc: dict) -> FederatedSchema:
    return FederatedSchema(
        canonical_columns=tuple(doc["canonical_columns"]),
        per_client_map={cid: dict(m) for cid, m in doc["per_client_map"].items()},
        anonymized=bool(doc.get("anonymized", False)),
        extra_column_prefix=doc.get("extra_column_prefix", "extra_"),
    )
