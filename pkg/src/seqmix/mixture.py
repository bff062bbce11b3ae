"""EM for mixtures of first-order Markov chains.

Three initialization strategies are provided: plain random starts,
best-of-short-runs (em_em), and K-means seeding on proportional-count
features (k_em).  All likelihood arithmetic is in log space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import EstimationError, NumericalError, ParameterError
from .kmeans import DEFAULT_MAX_ITERS as KMEANS_MAX_ITERS
from .kmeans import DEFAULT_RESTARTS as KMEANS_RESTARTS
from .kmeans import kmeans as run_kmeans
from .markov import (
    MarkovChain,
    SufficientStats,
    chain_from_dict,
    chain_to_dict,
    fit_chain,
    fit_chain_from_stats,
    log_likelihood_matrix,
    sufficient_stats,
)
from .traces import Alphabet, Dataset, dataset_features

DEFAULT_ALPHA = 1e-3
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 500

STRATEGIES = ("random", "em_em", "k_em")

# a component whose total responsibility falls below this fraction of n
# is considered collapsed and gets re-seeded
_DEGENERATE_FRACTION = 1e-8


@dataclass(frozen=True)
class MixtureModel:
    """K weighted Markov-chain components."""

    alphabet: Alphabet
    weights: np.ndarray
    components: tuple[MarkovChain, ...]
    train_log_likelihood: float = float("nan")
    iterations: int = 0
    init_strategy: str = "random"
    converged: bool = True
    alpha: float = DEFAULT_ALPHA
    score_initial: bool = True
    seed: int | None = None
    ll_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or len(weights) != len(self.components):
            raise ValueError("one weight per component required")
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not self.components:
            raise ValueError("mixture needs at least one component")
        for c in self.components:
            if c.alphabet != self.alphabet:
                raise ValueError("all components must share the mixture alphabet")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "ll_history", tuple(self.ll_history))

    @property
    def k(self) -> int:
        return len(self.components)

    def component_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        initials = np.stack([c.initial for c in self.components])
        transitions = np.stack([c.transitions for c in self.components])
        return initials, transitions


def _score_matrix(model: MixtureModel, stats: SufficientStats) -> np.ndarray:
    """n x k matrix of log w_j + ll_j(t)."""
    initials, transitions = model.component_arrays()
    ll = log_likelihood_matrix(initials, transitions, stats, model.score_initial)
    with np.errstate(divide="ignore"):
        return ll + np.log(model.weights)[None, :]


def e_step(model: MixtureModel, data: Dataset, stats: SufficientStats | None = None):
    """Posterior responsibilities and total log-likelihood of the data."""
    if stats is None:
        stats = sufficient_stats(list(data.traces), model.alphabet.size)
    scores = _score_matrix(model, stats)
    per_trace = logsumexp(scores, axis=1)
    dead = ~np.isfinite(per_trace)
    if dead.any():
        bad = int(np.nonzero(dead)[0][0])
        raise NumericalError(
            f"trace {data.traces[bad].trace_id!r} has zero probability under every component"
        )
    resp = np.exp(scores - per_trace[:, None])
    return resp, float(per_trace.sum())


def m_step(
    resp: np.ndarray,
    data: Dataset,
    alpha: float = DEFAULT_ALPHA,
    stats: SufficientStats | None = None,
    trace_ll: np.ndarray | None = None,
) -> tuple[np.ndarray, tuple[MarkovChain, ...]]:
    """Re-estimate mixture weights and components from responsibilities.

    A component whose total responsibility collapses is re-seeded from
    the worst-fitting trace (lowest mixture log-likelihood when
    ``trace_ll`` is given, lowest peak responsibility otherwise).
    """
    n, k = resp.shape
    if stats is None:
        stats = sufficient_stats(list(data.traces), data.alphabet.size)
    resp = np.asarray(resp, dtype=float)
    totals = resp.sum(axis=0)
    collapsed = np.nonzero(totals < _DEGENERATE_FRACTION * n)[0]
    if len(collapsed):
        resp = resp.copy()
        if trace_ll is not None:
            order = np.argsort(trace_ll)
        else:
            order = np.argsort(resp.max(axis=1))
        for slot, j in enumerate(collapsed):
            worst = int(order[slot % n])
            resp[worst, :] = 0.0
            resp[worst, j] = 1.0
        totals = resp.sum(axis=0)
    weights = totals / n
    components = tuple(
        fit_chain_from_stats(stats, data.alphabet, weights=resp[:, j], alpha=alpha)
        for j in range(k)
    )
    return weights, components


def run_em(
    data: Dataset,
    init: MixtureModel,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> MixtureModel:
    """Alternate E and M steps until the log-likelihood settles.

    Stops when two consecutive log-likelihoods differ by less than
    ``tol``; a model that hits ``max_iters`` first is returned with
    ``converged=False``.
    """
    stats = sufficient_stats(list(data.traces), data.alphabet.size)
    model = init
    history: list[float] = []
    prev_ll = None
    converged = False
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        resp, ll = e_step(model, data, stats)
        history.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) < tol:
            converged = True
            break
        prev_ll = ll
        scores = _score_matrix(model, stats)
        trace_ll = logsumexp(scores, axis=1)
        weights, components = m_step(resp, data, init.alpha, stats, trace_ll)
        model = replace(model, weights=weights, components=components)
    return replace(
        model,
        train_log_likelihood=history[-1],
        iterations=iterations,
        converged=converged,
        ll_history=tuple(history),
    )


# --- initialization strategies ---------------------------------------------


def _empirical_support(stats: SufficientStats) -> np.ndarray:
    return stats.symbols.sum(axis=0) / stats.lengths.sum()


def init_random(
    data: Dataset,
    k: int,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    score_initial: bool = True,
) -> MixtureModel:
    """Equal weights; initial vectors and transition rows drawn uniformly
    from the simplex (symmetric Dirichlet(1))."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    m = data.alphabet.size
    rng = np.random.default_rng(seed)
    stats = sufficient_stats(list(data.traces), m)
    support = _empirical_support(stats)
    components = []
    for _ in range(k):
        initial = rng.dirichlet(np.ones(m))
        transitions = np.stack([rng.dirichlet(np.ones(m)) for _ in range(m)])
        components.append(MarkovChain(data.alphabet, initial, transitions, support))
    return MixtureModel(
        data.alphabet,
        np.full(k, 1.0 / k),
        tuple(components),
        init_strategy="random",
        alpha=alpha,
        score_initial=score_initial,
        seed=seed,
    )


def init_em_em(
    data: Dataset,
    k: int,
    n_starts: int = 10,
    short_iters: int = 20,
    seed: int = 0,
    short_tol: float = 1e-4,
    alpha: float = DEFAULT_ALPHA,
    score_initial: bool = True,
) -> MixtureModel:
    """Short EM runs from several random starts; the best becomes the start model."""
    if n_starts < 1:
        raise ParameterError("n_starts must be >= 1")
    best = None
    for s in range(n_starts):
        start = init_random(data, k, seed + s, alpha, score_initial)
        candidate = run_em(data, start, tol=short_tol, max_iters=short_iters)
        if best is None or candidate.train_log_likelihood > best.train_log_likelihood:
            best = candidate
    return replace(best, init_strategy="em_em", seed=seed, iterations=0, converged=True)


def init_k_em(
    data: Dataset,
    k: int,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    restarts: int = KMEANS_RESTARTS,
    max_iters: int = KMEANS_MAX_ITERS,
    score_initial: bool = True,
) -> MixtureModel:
    """Seed the mixture from K-means clusters on proportional-count features.

    One chain is fitted per cluster and mixture weights are the cluster
    trace-count proportions.
    """
    features = dataset_features(data)
    result = run_kmeans(features, k, restarts=restarts, max_iters=max_iters, seed=seed)
    counts = np.bincount(result.assignment, minlength=k)
    components = []
    for j in range(k):
        members = [t for t, c in zip(data.traces, result.assignment) if c == j]
        components.append(fit_chain(members, data.alphabet, alpha=alpha))
    weights = counts / counts.sum()
    return MixtureModel(
        data.alphabet,
        weights,
        tuple(components),
        init_strategy="k_em",
        alpha=alpha,
        score_initial=score_initial,
        seed=seed,
    )


def fit_mixture(
    data: Dataset,
    k: int,
    strategy: str = "k_em",
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    score_initial: bool = True,
    em_em_starts: int = 10,
    em_em_short_iters: int = 20,
) -> MixtureModel:
    """Initialize with the requested strategy and run EM to convergence."""
    if strategy == "random":
        init = init_random(data, k, seed, alpha, score_initial)
    elif strategy == "em_em":
        init = init_em_em(
            data, k, n_starts=em_em_starts, short_iters=em_em_short_iters,
            seed=seed, alpha=alpha, score_initial=score_initial,
        )
    elif strategy == "k_em":
        init = init_k_em(data, k, alpha=alpha, seed=seed, score_initial=score_initial)
    else:
        raise ParameterError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return run_em(data, init, tol=tol, max_iters=max_iters)


# --- model selection --------------------------------------------------------


def parameter_count(k: int, m: int) -> int:
    """Free parameters: mixture weights + initial vectors + transition rows."""
    return (k - 1) + k * (m - 1) + k * m * (m - 1)


def information_criteria(
    model: MixtureModel,
    data: Dataset,
    n_mode: str = "traces",
) -> tuple[float, float, int]:
    """(BIC, AIC, p) of a fitted mixture; lower scores are better.

    ``n_mode`` selects the BIC sample size: number of traces (default)
    or total event count.
    """
    if n_mode == "traces":
        n = data.n_traces
    elif n_mode == "events":
        n = int(sum(t.length for t in data.traces))
    else:
        raise ParameterError("n_mode must be 'traces' or 'events'")
    p = parameter_count(model.k, model.alphabet.size)
    ll = model.train_log_likelihood
    bic = -2.0 * ll + p * np.log(n)
    aic = -2.0 * ll + 2.0 * p
    return float(bic), float(aic), p


@dataclass(frozen=True)
class SelectKResult:
    k_bic: int
    k_aic: int
    table: tuple[tuple[int, float, float, float, int], ...]  # (k, bic, aic, loglik, iterations)

    @property
    def k_range_suggestion(self) -> tuple[int, int]:
        """BIC pick as minimum, AIC pick as maximum (a point when they agree)."""
        return (min(self.k_bic, self.k_aic), max(self.k_bic, self.k_aic))


def select_k_by_ic(
    data: Dataset,
    k_range,
    strategy: str = "k_em",
    seed: int = 0,
    n_mode: str = "traces",
    **fit_kwargs,
) -> SelectKResult:
    """Fit one model per k and report the BIC- and AIC-optimal choices."""
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range:
        raise ParameterError("k_range must be nonempty")
    rows = []
    for k in k_range:
        model = fit_mixture(data, k, strategy=strategy, seed=seed, **fit_kwargs)
        bic, aic, _ = information_criteria(model, data, n_mode)
        rows.append((k, bic, aic, model.train_log_likelihood, model.iterations))
    k_bic = min(rows, key=lambda r: r[1])[0]
    k_aic = min(rows, key=lambda r: r[2])[0]
    return SelectKResult(k_bic, k_aic, tuple(rows))


# --- serialization -----------------------------------------------------------


def mixture_to_dict(model: MixtureModel) -> dict:
    return {
        "strategy": model.init_strategy,
        "seed": model.seed,
        "config": {"alpha": model.alpha, "score_initial": model.score_initial},
        "alphabet": list(model.alphabet.symbols),
        "weights": model.weights.tolist(),
        "components": [chain_to_dict(c) for c in model.components],
        "train_log_likelihood": model.train_log_likelihood,
        "iterations": model.iterations,
        "converged": model.converged,
    }


def mixture_from_dict(d: dict) -> MixtureModel:
    alphabet = Alphabet(tuple(d["alphabet"]))
    return MixtureModel(
        alphabet,
        np.array(d["weights"]),
        tuple(chain_from_dict(c) for c in d["components"]),
        train_log_likelihood=d.get("train_log_likelihood", float("nan")),
        iterations=d.get("iterations", 0),
        init_strategy=d.get("strategy", "random"),
        converged=d.get("converged", True),
        alpha=d.get("config", {}).get("alpha", DEFAULT_ALPHA),
        score_initial=d.get("config", {}).get("score_initial", True),
        seed=d.get("seed"),
    )


def mixture_to_json(model: MixtureModel) -> str:
    return json.dumps(mixture_to_dict(model), indent=2)


def mixture_from_json(text: str) -> MixtureModel:
    return mixture_from_dict(json.loads(text))
