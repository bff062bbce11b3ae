"""Test-phase machinery: posterior labeling, dynamic next-event
prediction, imbalance-aware metrics and paired-difference confidence
intervals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import t as student_t

from .errors import ParameterError
from .markov import log_likelihood_matrix, predict_next, sufficient_stats
from .mixture import MixtureModel
from .traces import Alphabet, Trace


def label_trace(model: MixtureModel, trace: Trace) -> tuple[int, np.ndarray]:
    """Maximum-posterior component for a trace, plus the posterior vector.

    Ties break to the lowest component index.
    """
    stats = sufficient_stats([trace], model.alphabet.size)
    initials, transitions = model.component_arrays()
    ll = log_likelihood_matrix(initials, transitions, stats, model.score_initial)[0]
    with np.errstate(divide="ignore"):
        scores = ll + np.log(model.weights)
    posterior = np.exp(scores - logsumexp(scores))
    return int(np.argmax(scores)), posterior


def label_dataset(model: MixtureModel, data) -> np.ndarray:
    """Hard maximum-posterior labels for every trace of a dataset."""
    stats = sufficient_stats(list(data.traces), model.alphabet.size)
    initials, transitions = model.component_arrays()
    ll = log_likelihood_matrix(initials, transitions, stats, model.score_initial)
    with np.errstate(divide="ignore"):
        scores = ll + np.log(model.weights)[None, :]
    return scores.argmax(axis=1)


@dataclass(frozen=True)
class PredictionRecord:
    """Per-trace dynamic predictions: one (position, true, predicted)
    triple for every position 2..l (the first event is never predicted)."""

    trace_id: str
    assigned_cluster: int
    steps: tuple[tuple[int, int, int], ...]

    @property
    def n_predictions(self) -> int:
        return len(self.steps)

    @property
    def n_correct(self) -> int:
        return sum(1 for _, true, pred in self.steps if true == pred)


def predict_trace(model: MixtureModel, trace: Trace) -> PredictionRecord:
    """Label the trace, then predict each next event from the observed
    current one under the assigned component's chain."""
    if trace.length < 2:
        raise ParameterError(f"trace {trace.trace_id!r} is too short to predict")
    cluster, _ = label_trace(model, trace)
    chain = model.components[cluster]
    ev = trace.events
    steps = tuple(
        (pos + 2, ev[pos + 1], predict_next(chain, ev[pos]))
        for pos in range(trace.length - 1)
    )
    return PredictionRecord(trace.trace_id, cluster, steps)


@dataclass(frozen=True)
class MetricsReport:
    macro_acc_t: float  # percent
    micro_acc: float
    precision_wt: float
    recall_wt: float
    f1_wt: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    per_class_support: tuple[int, ...]
    confusion: np.ndarray  # confusion[true][pred]
    class_count: int
    class_weights: tuple[float, ...]
    n_traces: int
    n_predictions: int

    def to_dict(self) -> dict:
        return {
            "macro_acc_t": self.macro_acc_t,
            "micro_acc": self.micro_acc,
            "precision_wt": self.precision_wt,
            "recall_wt": self.recall_wt,
            "f1_wt": self.f1_wt,
            "per_class": {
                "precision": list(self.per_class_precision),
                "recall": list(self.per_class_recall),
                "f1": list(self.per_class_f1),
                "support": list(self.per_class_support),
            },
            "confusion": self.confusion.tolist(),
            "class_count": self.class_count,
            "class_weights": list(self.class_weights),
            "n_traces": self.n_traces,
            "n_predictions": self.n_predictions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compute_metrics(
    records: list[PredictionRecord],
    alphabet: Alphabet,
    eq4_denominator: str = "predictions",
) -> MetricsReport:
    """Accuracy, weighted precision/recall/F1 and the confusion matrix.

    Per-trace accuracy divides by the number of predictions made (l-1);
    set ``eq4_denominator='length'`` to divide by the full trace length
    instead.  Undefined per-class ratios (0/0) count as 0, class weights
    are true-class support ratios over all predicted positions.
    """
    if not records:
        raise ParameterError("cannot compute metrics from zero records")
    if eq4_denominator not in ("predictions", "length"):
        raise ParameterError("eq4_denominator must be 'predictions' or 'length'")
    m = alphabet.size
    confusion = np.zeros((m, m), dtype=int)
    per_trace_acc = []
    for rec in records:
        for _, true, pred in rec.steps:
            confusion[true, pred] += 1
        denom = rec.n_predictions if eq4_denominator == "predictions" else rec.n_predictions + 1
        per_trace_acc.append(rec.n_correct / denom)

    total = int(confusion.sum())
    correct = int(np.trace(confusion))
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    tp = np.diag(confusion)

    def safe_div(num, den):
        num = np.asarray(num, dtype=float)
        den = np.asarray(den, dtype=float)
        out = np.zeros_like(num)
        mask = den > 0
        out[mask] = num[mask] / den[mask]
        return out

    precision = safe_div(tp, predicted)
    recall = safe_div(tp, support)
    f1 = safe_div(2 * precision * recall, precision + recall)
    class_weights = support / total

    micro = correct / total
    return MetricsReport(
        macro_acc_t=100.0 * float(np.mean(per_trace_acc)),
        micro_acc=100.0 * micro,
        precision_wt=100.0 * float(precision @ class_weights),
        recall_wt=100.0 * float(recall @ class_weights),
        f1_wt=100.0 * float(f1 @ class_weights),
        per_class_precision=tuple(precision),
        per_class_recall=tuple(recall),
        per_class_f1=tuple(f1),
        per_class_support=tuple(int(s) for s in support),
        confusion=confusion,
        class_count=m,
        class_weights=tuple(class_weights),
        n_traces=len(records),
        n_predictions=total,
    )


@dataclass(frozen=True)
class PairedCI:
    """Two-sided Student-t confidence interval for a paired difference."""

    metric: str
    differences: tuple[float, ...]
    diff_mean: float
    diff_sd: float  # sample SD, n-1 denominator
    level: float
    interval: tuple[float, float]

    @property
    def significant(self) -> bool:
        lo, hi = self.interval
        return lo > 0 or hi < 0


def paired_interval(
    diff_mean: float, diff_sd: float, n: int, level: float = 0.95
) -> tuple[float, float]:
    """mean +/- t_{(1+level)/2, n-1} * sd / sqrt(n)."""
    if n < 2:
        raise ParameterError("need at least 2 paired observations")
    q = float(student_t.ppf((1 + level) / 2, df=n - 1))
    half = q * diff_sd / math.sqrt(n)
    return (diff_mean - half, diff_mean + half)


def paired_ci(
    per_fold_a: list[float],
    per_fold_b: list[float],
    level: float = 0.95,
    metric: str = "",
) -> PairedCI:
    """Paired-difference CI between two methods evaluated on the same folds."""
    a = np.asarray(per_fold_a, dtype=float)
    b = np.asarray(per_fold_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("paired metric lists must have equal length")
    if len(a) < 2:
        raise ParameterError("need at least 2 folds for a paired CI")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    return PairedCI(
        metric=metric,
        differences=tuple(d),
        diff_mean=mean,
        diff_sd=sd,
        level=level,
        interval=paired_interval(mean, sd, len(d), level),
    )
