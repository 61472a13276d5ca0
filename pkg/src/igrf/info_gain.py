"""Information-gain ranking of numeric features.

Continuous features are discretized with equal-frequency bins before the
entropy terms are evaluated; all entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tabular import Table


def entropy(class_counts) -> float:
    """Shannon entropy (bits) of a class-count vector; empty classes add 0."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if counts.size == 0 or total <= 0:
        raise ValueError("entropy needs at least one positive count")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def conditional_entropy(joint_counts) -> float:
    """H(Y|X) from a (bins x classes) count matrix; empty bins contribute 0."""
    joint = np.asarray(joint_counts, dtype=np.float64)
    if joint.ndim != 2:
        raise ValueError("joint counts must be a 2-D bins x classes matrix")
    total = joint.sum()
    if total <= 0:
        raise ValueError("conditional entropy needs a positive total count")
    h = 0.0
    for row in joint:
        n = row.sum()
        if n > 0:
            h += (n / total) * entropy(row)
    return h


@dataclass(frozen=True)
class Discretizer:
    """Equal-frequency binning.

    Interior edges are the ``i/bin_count`` quantiles (inverted-CDF, so every
    edge is an observed value); repeated edges collapse.  A value ``x`` falls
    in bin ``i`` when ``edges[i-1] < x <= edges[i]``.
    """

    bin_count: int = 10
    strategy: str = "equal_frequency"

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValueError("bin_count must be positive")
        if self.strategy != "equal_frequency":
            raise ValueError(f"unsupported strategy {self.strategy!r}")

    def edges(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0 or self.bin_count == 1:
            return np.zeros(0)
        qs = np.arange(1, self.bin_count) / self.bin_count
        return np.unique(np.quantile(values, qs, method="inverted_cdf"))

    def bins(self, values, edges=None) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if edges is None:
            edges = self.edges(values)
        return np.searchsorted(edges, values, side="left")


def joint_counts(bins, labels, n_classes=None) -> np.ndarray:
    bins = np.asarray(bins, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if n_classes is None else n_classes
    m = int(bins.max()) + 1
    out = np.zeros((m, k), dtype=np.int64)
    np.add.at(out, (bins, labels), 1)
    return out


def information_gain(feature, labels, d: Discretizer | None = None, n_classes=None) -> float:
    """Raw IG in bits, clamped to the valid range [0, H(Y)]."""
    feature = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if feature.shape != labels.shape:
        raise ValueError(f"length mismatch: {feature.shape} vs {labels.shape}")
    if feature.size == 0:
        raise ValueError("information gain of an empty sequence")
    d = d or Discretizer()
    joint = joint_counts(d.bins(feature), labels, n_classes)
    h = entropy(joint.sum(axis=0))
    ig = h - conditional_entropy(joint)
    return min(max(ig, 0.0), h)


@dataclass(frozen=True)
class IgScore:
    feature: str
    raw_ig: float
    normalized: float


def normalize_minmax(raw) -> np.ndarray:
    """Min-max rescale to [0, 1]; identical scores all map to 1.0."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        return raw
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        return np.ones_like(raw)
    return (raw - lo) / (hi - lo)


def rank_ig(t: Table, d: Discretizer | None = None) -> list[IgScore]:
    """Score each numeric column of ``t``; sorted by descending score.

    Categorical columns are not scored.  Ties keep schema order.
    """
    names = t.schema.numeric_names
    if not names:
        raise ValueError("table has no numeric features to rank")
    d = d or Discretizer()
    raw = [information_gain(t.numeric[:, j], t.labels, d, t.schema.n_classes)
           for j in range(len(names))]
    norm = normalize_minmax(raw)
    order = sorted(range(len(names)), key=lambda j: (-raw[j], j))
    return [IgScore(names[j], float(raw[j]), float(norm[j])) for j in order]


def write_ranking_csv(scores: list[IgScore], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature,raw_ig,normalized\n")
        for s in scores:
            fh.write(f"{s.feature},{s.raw_ig!r},{s.normalized!r}\n")
