"""Second-stage wrapper: patience-bounded recursive feature elimination.

Each iteration tries removing every remaining feature, scores each candidate
subset by the mean validation accuracy over a list of seeds, and drops the
feature whose removal scores best.  The best subset seen so far (starting
with the full initial set) is returned.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import asdict, dataclass, field
from typing import Iterable, Protocol, Sequence

from joblib import Parallel, delayed

from .errors import EvaluatorError, IgrfError
from .mlp import MlpConfig, accuracy, fit
from .tabular import EncodedMatrix

DEFAULT_SEEDS = tuple(range(2022, 2032))
DEFAULT_PATIENCE = 5


class Evaluator(Protocol):
    def score(self, subset: Sequence[str], seed: int) -> float:
        """Validation accuracy in [0, 1] of a model using only ``subset``."""


def evaluate_elimination(ev: Evaluator, subset: Sequence[str], seeds: Sequence[int]) -> float:
    """Mean score of ``subset`` across ``seeds``."""
    subset = list(subset)
    seeds = list(seeds)
    if not subset:
        raise ValueError("cannot evaluate an empty feature subset")
    if not seeds:
        raise ValueError("need at least one seed")
    scores = []
    for seed in seeds:
        try:
            scores.append(float(ev.score(subset, seed)))
        except IgrfError as exc:
            if isinstance(exc, EvaluatorError):
                raise
            raise EvaluatorError(f"evaluator failed: {exc}", seed=seed, subset=subset) from exc
        except Exception as exc:
            raise EvaluatorError(f"evaluator failed: {exc!r}", seed=seed, subset=subset) from exc
    # exact rational mean: one rounding, independent of seed order
    return float(sum(map(Fraction, scores)) / len(scores))


@dataclass
class RfeIteration:
    candidate_scores: dict
    removed: str
    local_best: float
    improved: bool
    patience_remaining: int


@dataclass
class RfeTrace:
    init_features: list
    initial_score: float = math.nan
    iterations: list = field(default_factory=list)
    best_performance: float = -math.inf
    selected_features: list = field(default_factory=list)
    rm_list: list = field(default_factory=list)
    patience_remaining: int = 0
    evaluator_calls: int = 0
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class CountingEvaluator:
    """Wraps an evaluator and counts ``score`` calls."""

    def __init__(self, inner: Evaluator):
        self.inner = inner
        self.calls = 0

    def score(self, subset, seed):
        self.calls += 1
        return self.inner.score(subset, seed)


def rfe(ev: Evaluator, init_features: Iterable[str], p: int = DEFAULT_PATIENCE,
        seeds: Sequence[int] = DEFAULT_SEEDS, n_jobs: int = 1):
    """Run the elimination; returns ``(selected_features, trace)``.

    The global best starts as the score of ``init_features`` itself.  A local
    best strictly above it becomes the new global best and resets the
    patience to ``p``; otherwise patience drops by one.  Elimination stops at
    zero patience or when a single feature is left.  Equal candidate scores go
    to the feature listed first in ``init_features``.
    """
    keep = list(dict.fromkeys(init_features))
    if not keep:
        raise ValueError("init_features is empty")
    if p < 1:
        raise ValueError("patience must be a positive integer")
    seeds = list(seeds)
    counter = CountingEvaluator(ev)
    trace = RfeTrace(init_features=list(keep))

    best = evaluate_elimination(counter, keep, seeds)
    trace.initial_score = best
    trace.best_performance = best
    trace.selected_features = list(keep)
    patience = p

    while patience > 0 and len(keep) > 1:
        candidates = [[f for f in keep if f != drop] for drop in keep]
        if n_jobs == 1:
            scores = [evaluate_elimination(counter, c, seeds) for c in candidates]
        else:
            scores = Parallel(n_jobs=n_jobs)(
                delayed(evaluate_elimination)(ev, c, seeds) for c in candidates)
            counter.calls += len(candidates) * len(seeds)
        performance = dict(zip(keep, scores))
        max_key = keep[0]
        for f in keep[1:]:
            if performance[f] > performance[max_key]:
                max_key = f
        local = performance[max_key]
        keep.remove(max_key)
        trace.rm_list.append(max_key)
        improved = local > best
        if improved:
            best = local
            trace.best_performance = best
            trace.selected_features = list(keep)
            patience = p
        else:
            patience -= 1
        trace.iterations.append(RfeIteration(performance, max_key, local, improved, patience))

    trace.patience_remaining = patience
    trace.evaluator_calls = counter.calls
    trace.stop_reason = "patience exhausted" if patience == 0 else "single feature left"
    return list(trace.selected_features), trace


def max_evaluator_calls(n: int, n_seeds: int) -> int:
    """Upper bound on ``score`` calls made by :func:`rfe` for ``n`` features:
    one baseline evaluation plus ``n + (n-1) + ... + 2`` candidates."""
    return n_seeds * n * (n + 1) // 2


class MlpEvaluator:
    """Production evaluator: train the MLP on the subset, score validation accuracy.

    ``epochs`` overrides ``config.max_epochs`` (the ``--rfe-epochs`` budget).
    """

    def __init__(self, train: EncodedMatrix, val: EncodedMatrix,
                 config: MlpConfig = MlpConfig(), epochs: int | None = None):
        self.train = train
        self.val = val
        self.config = config
        self.epochs = epochs

    def score(self, subset, seed):
        cfg = self.config
        overrides = {"seed": int(seed)}
        if self.epochs is not None:
            overrides["max_epochs"] = int(self.epochs)
        cfg = MlpConfig(**{**asdict(cfg), **overrides})
        # column order is fixed by the matrix, so subset order cannot matter
        tr = self.train.select(subset)
        va = self.val.select(subset)
        model = fit(cfg, tr, va)
        return accuracy(model, va)


class StubEvaluator:
    """Closed-form evaluators for testing and the ``--evaluator stub:...`` hook.

    ``kind`` is one of:

    ``constant:<value>``       every subset scores ``value``
    ``size:<divisor>``         score = |subset| / divisor
    ``peak:<f1,f2,...>``       score = 1 - 0.1 * |subset symmetric-difference peak|
    ``monotone``               score = |subset| / |largest subset seen|, so every
                               removal strictly lowers the score
    """

    def __init__(self, spec: str, universe: Sequence[str] = ()):
        self.spec = spec
        kind, _, arg = spec.partition(":")
        self.kind = kind
        self.universe = list(universe)
        if kind == "constant":
            self.value = float(arg)
        elif kind == "size":
            self.divisor = float(arg)
        elif kind == "peak":
            self.peak = {a.strip() for a in arg.split(",") if a.strip()}
        elif kind == "monotone":
            pass
        else:
            raise ValueError(f"unknown stub evaluator {spec!r}")

    def score(self, subset, seed):
        s = set(subset)
        if self.kind == "constant":
            return self.value
        if self.kind == "size":
            return len(s) / self.divisor
        if self.kind == "peak":
            return 1.0 - 0.1 * len(s ^ self.peak)
        return len(s) / max(len(self.universe), len(s), 1)
