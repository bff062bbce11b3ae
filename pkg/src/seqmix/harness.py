"""Experiment orchestration: student-level cross-validation, baseline and
mixture strategies on shared folds, synthetic-data generation and cluster
recovery scoring."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, ParameterError
from .evaluation import MetricsReport, PairedCI, compute_metrics, paired_ci, predict_trace
from .markov import MarkovChain, chain_to_dot, fit_chain
from .mixture import (
    DEFAULT_ALPHA,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    MixtureModel,
    fit_mixture,
    mixture_to_json,
)
from .traces import Alphabet, Dataset, Trace

METRIC_NAMES = ("macro_acc_t", "micro_acc", "precision_wt", "recall_wt", "f1_wt", "iterations")


# --- fold assignment ---------------------------------------------------------


@dataclass(frozen=True)
class FoldAssignment:
    n_folds: int
    by_student: dict[str, int]
    seed: int

    def fold_of(self, trace: Trace) -> int:
        return self.by_student[trace.student_id]

    def split(self, data: Dataset, fold: int) -> tuple[list[Trace], list[Trace]]:
        train = [t for t in data.traces if self.fold_of(t) != fold]
        test = [t for t in data.traces if self.fold_of(t) == fold]
        return train, test


def assign_folds(data: Dataset, n_folds: int, seed: int = 0) -> FoldAssignment:
    """Shuffle students and deal them round-robin into folds, so every
    student's traces land on exactly one side of each split."""
    students = data.students
    if n_folds > len(students):
        raise ParameterError(f"{n_folds} folds but only {len(students)} students")
    order = list(students)
    np.random.default_rng(seed).shuffle(order)
    return FoldAssignment(n_folds, {s: i % n_folds for i, s in enumerate(order)}, seed)


# --- baseline ----------------------------------------------------------------


def run_baseline(train: list[Trace], alphabet: Alphabet, alpha: float = DEFAULT_ALPHA) -> MarkovChain:
    """Single unweighted chain over all training traces (the no-mixture reference)."""
    if not train:
        raise EstimationError("baseline needs a nonempty training set")
    return fit_chain(train, alphabet, alpha=alpha)


def baseline_as_mixture(
    train: list[Trace], alphabet: Alphabet, alpha: float = DEFAULT_ALPHA, score_initial: bool = True
) -> MixtureModel:
    chain = run_baseline(train, alphabet, alpha)
    return MixtureModel(
        alphabet,
        np.array([1.0]),
        (chain,),
        train_log_likelihood=float("nan"),
        iterations=0,
        init_strategy="baseline",
        alpha=alpha,
        score_initial=score_initial,
    )


# --- synthetic oracle --------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted mixture used as the correctness oracle."""

    alphabet: Alphabet
    weights: np.ndarray
    components: tuple[MarkovChain, ...]
    n_traces: int
    min_length: int = 2
    max_length: int = 39
    length_law: str = "uniform"
    seed: int = 0
    traces_per_student: int = 1

    def __post_init__(self):
        if self.min_length < 2:
            raise ParameterError("traces shorter than 2 events are not representable")
        if self.max_length < self.min_length:
            raise ParameterError("max_length must be >= min_length")
        if self.length_law != "uniform":
            raise ParameterError("only the uniform length law is implemented")
        # the planted mixture must itself be a valid model
        MixtureModel(self.alphabet, self.weights, self.components)

    def as_mixture(self) -> MixtureModel:
        return MixtureModel(
            self.alphabet, self.weights, self.components, init_strategy="oracle"
        )


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Sample traces from the planted mixture; returns the dataset and the
    true component label of every trace."""
    rng = np.random.default_rng(spec.seed)
    k = len(spec.components)
    m = spec.alphabet.size
    labels = rng.choice(k, size=spec.n_traces, p=np.asarray(spec.weights))
    lengths = rng.integers(spec.min_length, spec.max_length + 1, size=spec.n_traces)
    init_cum = np.cumsum(np.stack([c.initial for c in spec.components]), axis=1)
    trans_cum = np.cumsum(np.stack([c.transitions for c in spec.components]), axis=2)
    traces = []
    for i in range(spec.n_traces):
        j = int(labels[i])
        length = int(lengths[i])
        u = rng.random(length)
        events = [int(np.searchsorted(init_cum[j], u[0], side="right"))]
        for step in range(1, length):
            cur = events[-1]
            events.append(int(np.searchsorted(trans_cum[j, cur], u[step], side="right")))
        student = f"s{i // spec.traces_per_student:05d}"
        traces.append(Trace(student, f"{student}/t{i:05d}", tuple(events)))
    return Dataset(spec.alphabet, tuple(traces)), labels


def planted_spec(
    m: int = 6,
    k: int = 3,
    n_traces: int = 1000,
    min_length: int = 2,
    max_length: int = 39,
    seed: int = 0,
    separation: float = 0.8,
    traces_per_student: int = 1,
) -> SyntheticSpec:
    """Well-separated planted mixture: component j concentrates mass
    ``separation`` on target (i + j + 1) mod m in row i, so corresponding
    rows of different components are at least ``separation`` apart in
    total-variation distance."""
    if not (0 < separation < 1):
        raise ParameterError("separation must be in (0, 1)")
    alphabet = Alphabet(tuple(chr(ord("A") + i) for i in range(m)))
    rest = (1.0 - separation) / (m - 1)
    components = []
    for j in range(k):
        transitions = np.full((m, m), rest)
        for i in range(m):
            transitions[i, (i + j + 1) % m] = separation
        initial = np.full(m, rest)
        initial[j % m] = separation
        support = np.full(m, 1.0 / m)
        components.append(MarkovChain(alphabet, initial, transitions, support))
    weights = np.full(k, 1.0 / k)
    return SyntheticSpec(
        alphabet, weights, tuple(components), n_traces,
        min_length, max_length, "uniform", seed, traces_per_student,
    )


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two labelings, from the
    pair-counting contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("labelings must be 1-D and of equal length")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    contingency = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(contingency, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(contingency).sum()
    sum_a = comb2(contingency.sum(axis=1)).sum()
    sum_b = comb2(contingency.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


# --- experiment protocol -----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    strategies: tuple[str, ...] = ("baseline", "random", "em_em", "k_em")
    k_per_strategy: dict[str, int] = field(default_factory=dict)
    n_folds: int = 5
    alpha: float = DEFAULT_ALPHA
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    seed: int = 0
    score_initial: bool = True
    eq4_denominator: str = "predictions"
    ci_level: float = 0.95
    jobs: int = 1

    def k_for(self, strategy: str) -> int:
        if strategy == "baseline":
            return 1
        return self.k_per_strategy.get(strategy, 2)


@dataclass(frozen=True)
class FoldRun:
    strategy: str
    fold: int
    model: MixtureModel | None
    cluster_metrics: tuple[tuple[int, int, MetricsReport], ...]  # (cluster, n_test_traces, report)
    fold_metrics: dict[str, float]
    error: str | None = None


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    folds: FoldAssignment
    runs: tuple[FoldRun, ...]
    aggregates: dict[str, dict[str, tuple[float, float]]]  # strategy -> metric -> (mean, sd)
    cis: tuple[tuple[str, str, PairedCI], ...]


def _evaluate_fold(
    model: MixtureModel, test: list[Trace], config: ExperimentConfig
) -> tuple[tuple[tuple[int, int, MetricsReport], ...], dict[str, float]]:
    records = [predict_trace(model, t) for t in test]
    by_cluster: dict[int, list] = {}
    for rec in records:
        by_cluster.setdefault(rec.assigned_cluster, []).append(rec)
    cluster_metrics = []
    for cluster in sorted(by_cluster):
        recs = by_cluster[cluster]
        report = compute_metrics(recs, model.alphabet, config.eq4_denominator)
        cluster_metrics.append((cluster, len(recs), report))
    # fold-level metric: per-cluster values weighted by cluster test-trace counts
    total = sum(n for _, n, _ in cluster_metrics)
    fold_metrics = {}
    for name in METRIC_NAMES:
        if name == "iterations":
            fold_metrics[name] = float(model.iterations)
        else:
            fold_metrics[name] = sum(
                n * getattr(rep, name) for _, n, rep in cluster_metrics
            ) / total
    return tuple(cluster_metrics), fold_metrics


def _run_one(data: Dataset, folds: FoldAssignment, config: ExperimentConfig,
             strategy: str, fold: int) -> FoldRun:
    train, test = folds.split(data, fold)
    seed = config.seed + 1000 * fold + config.strategies.index(strategy)
    try:
        if strategy == "baseline":
            model = baseline_as_mixture(train, data.alphabet, config.alpha, config.score_initial)
        else:
            model = fit_mixture(
                Dataset(data.alphabet, tuple(train)),
                config.k_for(strategy),
                strategy=strategy,
                seed=seed,
                alpha=config.alpha,
                tol=config.tol,
                max_iters=config.max_iters,
                score_initial=config.score_initial,
            )
        cluster_metrics, fold_metrics = _evaluate_fold(model, test, config)
        return FoldRun(strategy, fold, model, cluster_metrics, fold_metrics)
    except Exception as exc:  # isolate per-strategy failures
        return FoldRun(strategy, fold, None, (), {}, error=f"{type(exc).__name__}: {exc}")


def run_experiment(data: Dataset, folds: FoldAssignment, config: ExperimentConfig) -> ExperimentResult:
    """Train every strategy on each train split and evaluate on the held-out
    fold; aggregate fold metrics and compute paired CIs for every strategy pair."""
    jobs = [(s, f) for s in config.strategies for f in range(folds.n_folds)]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            runs = list(pool.map(lambda sf: _run_one(data, folds, config, *sf), jobs))
    else:
        runs = [_run_one(data, folds, config, s, f) for s, f in jobs]

    per_strategy: dict[str, dict[str, list[float]]] = {
        s: {name: [] for name in METRIC_NAMES} for s in config.strategies
    }
    for run in runs:
        if run.error is None:
            for name in METRIC_NAMES:
                per_strategy[run.strategy][name].append(run.fold_metrics[name])

    aggregates = {}
    for s in config.strategies:
        aggregates[s] = {}
        for name in METRIC_NAMES:
            vals = np.array(per_strategy[s][name])
            if len(vals) == 0:
                aggregates[s][name] = (float("nan"), float("nan"))
            else:
                sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
                aggregates[s][name] = (float(vals.mean()), sd)

    cis = []
    for a, b in itertools.combinations(config.strategies, 2):
        va, vb = per_strategy[a], per_strategy[b]
        for name in METRIC_NAMES:
            if name == "iterations" and (a == "baseline" or b == "baseline"):
                continue
            if len(va[name]) == len(vb[name]) and len(va[name]) >= 2:
                cis.append((a, b, paired_ci(va[name], vb[name], config.ci_level, metric=name)))
    return ExperimentResult(config, folds, tuple(runs), aggregates, tuple(cis))


# --- results bundle ----------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def summary_csv(result: ExperimentResult) -> str:
    lines = ["strategy,fold,cluster,n_traces,macro_acc_t,micro_acc,precision_wt,recall_wt,f1_wt,iterations"]
    for run in result.runs:
        if run.error is not None:
            lines.append(f"{run.strategy},{run.fold},error,0,,,,,,")
            continue
        for cluster, n, rep in run.cluster_metrics:
            lines.append(
                f"{run.strategy},{run.fold},{cluster},{n},"
                f"{_fmt(rep.macro_acc_t)},{_fmt(rep.micro_acc)},{_fmt(rep.precision_wt)},"
                f"{_fmt(rep.recall_wt)},{_fmt(rep.f1_wt)},{run.model.iterations}"
            )
        n_total = sum(n for _, n, _ in run.cluster_metrics)
        fm = run.fold_metrics
        lines.append(
            f"{run.strategy},{run.fold},all,{n_total},"
            f"{_fmt(fm['macro_acc_t'])},{_fmt(fm['micro_acc'])},{_fmt(fm['precision_wt'])},"
            f"{_fmt(fm['recall_wt'])},{_fmt(fm['f1_wt'])},{run.model.iterations}"
        )
    for s in result.config.strategies:
        for stat, idx in (("mean", 0), ("sd", 1)):
            agg = result.aggregates[s]
            lines.append(
                f"{s},{stat},all,,"
                f"{_fmt(agg['macro_acc_t'][idx])},{_fmt(agg['micro_acc'][idx])},"
                f"{_fmt(agg['precision_wt'][idx])},{_fmt(agg['recall_wt'][idx])},"
                f"{_fmt(agg['f1_wt'][idx])},{_fmt(agg['iterations'][idx])}"
            )
    return "\n".join(lines) + "\n"


def ci_csv(result: ExperimentResult) -> str:
    lines = ["strategy_a,strategy_b,metric,diff_mean,diff_sd,level,lo,hi,significant"]
    for a, b, ci in result.cis:
        lo, hi = ci.interval
        lines.append(
            f"{a},{b},{ci.metric},{_fmt(ci.diff_mean)},{_fmt(ci.diff_sd)},"
            f"{_fmt(ci.level)},{_fmt(lo)},{_fmt(hi)},{int(ci.significant)}"
        )
    return "\n".join(lines) + "\n"


def write_bundle(result: ExperimentResult, outdir) -> list[Path]:
    """Write per-fold model and metrics JSONs, DOT files per component,
    summary.csv and ci.csv; returns the paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for run in result.runs:
        stem = f"{run.strategy}_fold{run.fold}"
        if run.error is not None:
            path = outdir / f"{stem}_error.txt"
            path.write_text(run.error + "\n")
            written.append(path)
            continue
        model_path = outdir / f"{stem}_model.json"
        model_path.write_text(mixture_to_json(run.model) + "\n")
        written.append(model_path)
        metrics_path = outdir / f"{stem}_metrics.json"
        metrics_path.write_text(
            json.dumps(
                {
                    "fold_metrics": run.fold_metrics,
                    "clusters": [
                        {"cluster": c, "n_traces": n, "metrics": rep.to_dict()}
                        for c, n, rep in run.cluster_metrics
                    ],
                },
                indent=2,
            )
            + "\n"
        )
        written.append(metrics_path)
        for j, chain in enumerate(run.model.components):
            dot_path = outdir / f"{stem}_component{j}.dot"
            dot_path.write_text(chain_to_dot(chain, title=f"{run.strategy} fold {run.fold} component {j}"))
            written.append(dot_path)
    summary_path = outdir / "summary.csv"
    summary_path.write_text(summary_csv(result))
    written.append(summary_path)
    ci_path = outdir / "ci.csv"
    ci_path.write_text(ci_csv(result))
    written.append(ci_path)
    return written
