"""First-order Markov chains: estimation, scoring, prediction, figure export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError
from .traces import Alphabet, Trace

# Finite stand-in for log(0) inside vectorized likelihood matrices; any
# per-trace score below _NEG_CUTOFF is reported as -inf.
_NEG_CLAMP = -1e15
_NEG_CUTOFF = -1e13


@dataclass(frozen=True)
class MarkovChain:
    """Initial-state distribution + row-stochastic transition matrix.

    ``support`` holds each symbol's occurrence fraction in the fitting
    data (used for node sizing in figures).  ``uniform_rows`` flags rows
    that had no outgoing bigrams under alpha=0 and fell back to uniform.
    """

    alphabet: Alphabet
    initial: np.ndarray
    transitions: np.ndarray
    support: np.ndarray
    uniform_rows: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = self.alphabet.size
        initial = np.asarray(self.initial, dtype=float)
        transitions = np.asarray(self.transitions, dtype=float)
        support = np.asarray(self.support, dtype=float)
        if initial.shape != (m,) or transitions.shape != (m, m) or support.shape != (m,):
            raise ValueError("parameter shapes do not match alphabet size")
        if (initial < 0).any() or (transitions < 0).any() or (support < 0).any():
            raise ValueError("probabilities must be nonnegative")
        if abs(initial.sum() - 1.0) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        if np.abs(transitions.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("every transition row must sum to 1")
        if abs(support.sum() - 1.0) > 1e-12:
            raise ValueError("support must sum to 1")
        for arr in (initial, transitions, support):
            arr.setflags(write=False)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "uniform_rows", tuple(self.uniform_rows))

    @property
    def m(self) -> int:
        return self.alphabet.size


@dataclass(frozen=True)
class SufficientStats:
    """Per-trace counts that make chain fitting and scoring linear algebra.

    first[t]    one-hot of the first symbol of trace t
    bigrams[t]  m x m counts of i->j steps in trace t
    symbols[t]  per-symbol occurrence counts in trace t
    lengths[t]  trace length
    """

    first: np.ndarray
    bigrams: np.ndarray
    symbols: np.ndarray
    lengths: np.ndarray

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def m(self) -> int:
        return self.first.shape[1]


def sufficient_stats(traces: list[Trace], m: int) -> SufficientStats:
    n = len(traces)
    first = np.zeros((n, m))
    bigrams = np.zeros((n, m, m))
    symbols = np.zeros((n, m))
    lengths = np.zeros(n)
    for t, trace in enumerate(traces):
        ev = np.asarray(trace.events)
        first[t, ev[0]] = 1.0
        np.add.at(bigrams[t], (ev[:-1], ev[1:]), 1.0)
        symbols[t] = np.bincount(ev, minlength=m)
        lengths[t] = len(ev)
    return SufficientStats(first, bigrams, symbols, lengths)


def fit_chain(
    traces: list[Trace],
    alphabet: Alphabet,
    weights: np.ndarray | None = None,
    alpha: float = 1e-3,
) -> MarkovChain:
    """Estimate a chain from (optionally weighted) traces with additive smoothing.

    initial[i]        = (alpha + weighted first-symbol count i) / (m*alpha + weighted trace count)
    transitions[i][j] = (alpha + weighted bigram count i->j) / (m*alpha + weighted bigrams from i)

    With alpha=0, rows without outgoing bigrams fall back to uniform and
    are flagged in ``uniform_rows``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    stats = sufficient_stats(traces, alphabet.size)
    return fit_chain_from_stats(stats, alphabet, weights=weights, alpha=alpha)


def fit_chain_from_stats(
    stats: SufficientStats,
    alphabet: Alphabet,
    weights: np.ndarray | None = None,
    alpha: float = 1e-3,
) -> MarkovChain:
    m = alphabet.size
    if weights is None:
        weights = np.ones(stats.n)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (stats.n,):
            raise ValueError("one weight per trace required")
        if (weights < 0).any():
            raise ValueError("weights must be nonnegative")
    total_w = weights.sum()
    if stats.n == 0 or total_w <= 0:
        raise EstimationError("cannot fit a chain without positively weighted traces")

    initial = (alpha + weights @ stats.first) / (m * alpha + total_w)
    big = np.einsum("t,tij->ij", weights, stats.bigrams)
    out = big.sum(axis=1)
    denom = m * alpha + out
    uniform_rows = tuple(int(i) for i in np.nonzero(denom == 0)[0])
    transitions = np.empty((m, m))
    ok = denom > 0
    transitions[ok] = (alpha + big[ok]) / denom[ok, None]
    transitions[~ok] = 1.0 / m
    support = (weights @ stats.symbols) / (weights @ stats.lengths)
    return MarkovChain(alphabet, initial, transitions, support, uniform_rows)


def log_likelihood(chain: MarkovChain, trace: Trace, score_initial: bool = True) -> float:
    """Log-probability of a trace under the chain; -inf on any zero-probability step."""
    ev = np.asarray(trace.events)
    with np.errstate(divide="ignore"):
        steps = np.log(chain.transitions[ev[:-1], ev[1:]])
        total = steps.sum()
        if score_initial:
            total += np.log(chain.initial[ev[0]])
    return float(total)


def log_likelihood_matrix(
    initials: np.ndarray,
    transitions: np.ndarray,
    stats: SufficientStats,
    score_initial: bool = True,
) -> np.ndarray:
    """n x k matrix of per-trace log-likelihoods under k chains.

    ``initials`` is k x m, ``transitions`` k x m x m.  Impossible traces
    come out as -inf.
    """
    k, m = initials.shape
    with np.errstate(divide="ignore"):
        log_t = np.log(transitions).reshape(k, m * m)
        log_i = np.log(initials)
    log_t = np.maximum(log_t, _NEG_CLAMP)
    log_i = np.maximum(log_i, _NEG_CLAMP)
    ll = stats.bigrams.reshape(stats.n, m * m) @ log_t.T
    if score_initial:
        ll += stats.first @ log_i.T
    ll[ll < _NEG_CUTOFF] = -np.inf
    return ll


def predict_next(chain: MarkovChain, current: int) -> int:
    """Most likely successor of ``current``; ties break to the lowest index."""
    return int(np.argmax(chain.transitions[current]))


def stationary_distribution(chain: MarkovChain) -> np.ndarray:
    """Stationary distribution of the transition matrix (left eigenvector for eigenvalue 1)."""
    vals, vecs = np.linalg.eig(chain.transitions.T)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, idx])
    pi = np.abs(pi)
    return pi / pi.sum()


# --- figure export --------------------------------------------------------

# Fixed layout for the canonical six-symbol alphabet: engagement states
# (FG, LE) on the left, knowledge states (HK, LK) in the middle,
# disengagement states (KG, NI) on the right; low-confidence states in
# the upper half, high-confidence states in the lower half.
_CANONICAL_POS = {
    "FG": (0.0, 0.0),
    "LE": (0.0, 2.5),
    "HK": (2.5, 0.0),
    "LK": (2.5, 2.5),
    "KG": (5.0, 0.0),
    "NI": (5.0, 2.5),
}
_CANONICAL_FILL = {
    "FG": "gold",
    "LE": "gold",
    "HK": "gray80",
    "LK": "white",
    "KG": "lightblue",
    "NI": "lightblue",
}


@dataclass(frozen=True)
class FigureNode:
    label: str
    support: float
    width: float
    pos: tuple[float, float] | None = None
    fill: str | None = None


@dataclass(frozen=True)
class FigureEdge:
    src: str
    dst: str
    probability: float
    penwidth: float


@dataclass(frozen=True)
class FigureData:
    nodes: tuple[FigureNode, ...]
    edges: tuple[FigureEdge, ...]
    title: str = ""


def to_figure(
    chain: MarkovChain,
    edge_threshold: float = 0.32,
    node_base: float = 0.3,
    node_scale: float = 2.0,
    edge_base: float = 1.0,
    edge_scale: float = 6.0,
    title: str = "",
) -> FigureData:
    """Figure description: node size follows support, edges only where
    the transition probability strictly exceeds the threshold."""
    if not (0 <= edge_threshold < 1):
        raise ValueError("edge_threshold must be in [0, 1)")
    symbols = chain.alphabet.symbols
    canonical = set(symbols) == set(_CANONICAL_POS)
    nodes = tuple(
        FigureNode(
            label=s,
            support=float(chain.support[i]),
            width=node_base + node_scale * float(chain.support[i]),
            pos=_CANONICAL_POS[s] if canonical else None,
            fill=_CANONICAL_FILL[s] if canonical else None,
        )
        for i, s in enumerate(symbols)
    )
    edges = []
    for i in range(chain.m):
        for j in range(chain.m):
            p = float(chain.transitions[i, j])
            if p > edge_threshold and p > 0:
                edges.append(FigureEdge(symbols[i], symbols[j], p, edge_base + edge_scale * p))
    return FigureData(nodes, tuple(edges), title)


def figure_to_dot(fig: FigureData) -> str:
    """Serialize a figure description in DOT graph format."""
    lines = ["digraph chain {"]
    if fig.title:
        lines.append(f'    label="{fig.title}";')
    lines.append("    node [shape=circle, fixedsize=true];")
    for node in fig.nodes:
        attrs = [
            f'label="{node.label}"',
            f"width={node.width:.4f}",
            f'tooltip="support {100 * node.support:.1f}%"',
        ]
        if node.pos is not None:
            attrs.append(f'pos="{node.pos[0]},{node.pos[1]}!"')
        if node.fill is not None:
            attrs.append(f'style=filled, fillcolor="{node.fill}"')
        lines.append(f'    "{node.label}" [{", ".join(attrs)}];')
    for e in fig.edges:
        lines.append(
            f'    "{e.src}" -> "{e.dst}" '
            f'[penwidth={e.penwidth:.4f}, label="{100 * e.probability:.0f}%"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def chain_to_dot(chain: MarkovChain, edge_threshold: float = 0.32, **kwargs) -> str:
    return figure_to_dot(to_figure(chain, edge_threshold, **kwargs))


# --- serialization --------------------------------------------------------


def chain_to_dict(chain: MarkovChain) -> dict:
    return {
        "alphabet": list(chain.alphabet.symbols),
        "initial": chain.initial.tolist(),
        "transitions": chain.transitions.tolist(),
        "support": chain.support.tolist(),
        "uniform_rows": list(chain.uniform_rows),
    }


def chain_from_dict(d: dict) -> MarkovChain:
    return MarkovChain(
        Alphabet(tuple(d["alphabet"])),
        np.array(d["initial"]),
        np.array(d["transitions"]),
        np.array(d["support"]),
        tuple(d.get("uniform_rows", ())),
    )


def chain_to_json(chain: MarkovChain) -> str:
    return json.dumps(chain_to_dict(chain))


def chain_from_json(text: str) -> MarkovChain:
    return chain_from_dict(json.loads(text))
