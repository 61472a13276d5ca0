"""First-stage filter: threshold the IG and RF rankings and merge them."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

from .tabular import Schema

DEFAULT_IG_THRESHOLD = 0.25
DEFAULT_RF_THRESHOLD = 0.02


def _as_mapping(scores) -> dict[str, float]:
    """Accept a {name: score} mapping or a ranking of IgScore/RfScore records."""
    if isinstance(scores, Mapping):
        return {k: float(v) for k, v in scores.items()}
    out = {}
    for s in scores:
        value = s.normalized if hasattr(s, "normalized") else s.mdi
        out[s.feature] = float(value)
    return out


def apply_threshold(scores, tau: float) -> set[str]:
    """Features whose score is strictly greater than ``tau``."""
    if not math.isfinite(tau):
        raise ValueError(f"threshold must be finite, got {tau}")
    return {f for f, v in _as_mapping(scores).items() if v > tau}


@dataclass(frozen=True)
class FeatureSubset:
    retained: tuple[str, ...]
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.retained)

    def __iter__(self):
        return iter(self.retained)

    def to_json(self) -> str:
        return json.dumps({"retained": list(self.retained), "provenance": self.provenance},
                          indent=2, sort_keys=True)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def read_json(cls, path) -> "FeatureSubset":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(tuple(d["retained"]), d.get("provenance", {}))


def _ordered(names: Iterable[str], schema: Schema) -> list[str]:
    names = set(names)
    return [n for n in schema.feature_names if n in names]


def combine(ig_set, rf_set, schema: Schema, how: str = "union",
            ig_threshold=None, rf_threshold=None) -> FeatureSubset:
    """Merge two numeric survivor sets (``union`` or ``intersection``) and
    append every categorical feature."""
    numeric = set(schema.numeric_names)
    ig_set, rf_set = set(ig_set), set(rf_set)
    stray = (ig_set | rf_set) - numeric
    if stray:
        raise ValueError(f"non-numeric features in survivor sets: {sorted(stray)}")
    if how == "union":
        merged = ig_set | rf_set
    elif how == "intersection":
        merged = ig_set & rf_set
    else:
        raise ValueError(f"unknown combination {how!r}")
    cats = schema.categorical_names
    provenance = {
        "ig_threshold": ig_threshold,
        "rf_threshold": rf_threshold,
        "ig_survivors": _ordered(ig_set, schema),
        "rf_survivors": _ordered(rf_set, schema),
        "common": _ordered(ig_set & rf_set, schema),
        "combination": how,
        ("union_size" if how == "union" else "intersection_size"): len(merged),
        "categorical_appended": list(cats),
    }
    return FeatureSubset(tuple(_ordered(merged | set(cats), schema)), provenance)


def union_with_categoricals(ig_set, rf_set, schema: Schema, ig_threshold=None,
                            rf_threshold=None) -> FeatureSubset:
    return combine(ig_set, rf_set, schema, "union", ig_threshold, rf_threshold)


def igrf_filter(ig_scores, rf_scores, schema: Schema, ig_threshold=DEFAULT_IG_THRESHOLD,
                rf_threshold=DEFAULT_RF_THRESHOLD, how="union") -> FeatureSubset:
    """Threshold both rankings and merge the survivors with the categoricals."""
    return combine(apply_threshold(ig_scores, ig_threshold),
                   apply_threshold(rf_scores, rf_threshold),
                   schema, how, ig_threshold, rf_threshold)


def provenance_report(subset: FeatureSubset) -> dict:
    return {"retained": list(subset.retained), **asdict(subset)["provenance"]}
