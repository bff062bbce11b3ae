import json
import math

import numpy as np
import pytest

from seqmix import (
    Alphabet,
    EstimationError,
    MarkovChain,
    Trace,
    canonical_alphabet,
    chain_from_json,
    chain_to_json,
    fit_chain,
    log_likelihood,
    predict_next,
    stationary_distribution,
    to_figure,
)
from seqmix.markov import chain_to_dot, figure_to_dot

AB = Alphabet(("A", "B"))


def tr(events, tid="t"):
    return Trace("s", tid, events)


def brute_force_bigram_fit(traces, m):
    """Counting oracle for the alpha=0 unweighted fit."""
    init = np.zeros(m)
    big = np.zeros((m, m))
    for t in traces:
        init[t.events[0]] += 1
        for a, b in zip(t.events, t.events[1:]):
            big[a, b] += 1
    init /= init.sum()
    rows = big.sum(axis=1)
    trans = np.full((m, m), 1.0 / m)
    for i in range(m):
        if rows[i] > 0:
            trans[i] = big[i] / rows[i]
    return init, trans


class TestFitChain:
    def test_two_trace_example(self):
        chain = fit_chain([tr((0, 0), "t1"), tr((0, 1), "t2")], AB, alpha=0.0)
        assert chain.initial.tolist() == [1.0, 0.0]
        assert chain.transitions[0].tolist() == [0.5, 0.5]
        assert chain.transitions[1].tolist() == [0.5, 0.5]  # uniform fallback
        assert chain.uniform_rows == (1,)

    def test_single_bigram_type(self):
        chain = fit_chain([tr((0, 0, 0))], AB, alpha=0.0)
        assert chain.transitions[0].tolist() == [1.0, 0.0]

    def test_laplace_smoothing_by_hand(self):
        # <A,A,A>: two A->A bigrams, alpha=1, m=2
        chain = fit_chain([tr((0, 0, 0))], AB, alpha=1.0)
        assert chain.transitions[0].tolist() == [0.75, 0.25]
        assert chain.uniform_rows == ()

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(5)
        m = 4
        alphabet = Alphabet(tuple("wxyz"))
        traces = [
            tr(tuple(rng.integers(0, m, size=rng.integers(2, 10))), f"t{i}")
            for i in range(30)
        ]
        chain = fit_chain(traces, alphabet, alpha=0.0)
        init, trans = brute_force_bigram_fit(traces, m)
        np.testing.assert_allclose(chain.initial, init, atol=1e-15)
        np.testing.assert_allclose(chain.transitions, trans, atol=1e-15)

    def test_invariants_hold_for_any_alpha(self):
        rng = np.random.default_rng(11)
        for alpha in (0.0, 1e-3, 0.5, 2.0):
            traces = [
                tr(tuple(rng.integers(0, 6, size=rng.integers(2, 12))), f"t{i}")
                for i in range(10)
            ]
            weights = rng.random(10)
            chain = fit_chain(traces, canonical_alphabet(), weights=weights, alpha=alpha)
            assert abs(chain.initial.sum() - 1) <= 1e-12
            np.testing.assert_allclose(chain.transitions.sum(axis=1), 1.0, atol=1e-12)
            assert abs(chain.support.sum() - 1) <= 1e-12
            if alpha > 0:
                assert (chain.initial > 0).all()
                assert (chain.transitions > 0).all()

    def test_empty_input_raises(self):
        with pytest.raises(EstimationError):
            fit_chain([], AB)
        with pytest.raises(EstimationError):
            fit_chain([tr((0, 1))], AB, weights=np.array([0.0]))


class TestLogLikelihood:
    def test_deterministic_chain_scores_zero(self):
        chain = MarkovChain(AB, np.array([1.0, 0]), np.array([[1.0, 0], [0, 1.0]]),
                            np.array([0.5, 0.5]))
        assert log_likelihood(chain, tr((0, 0, 0, 0))) == 0.0

    def test_uniform_chain_analytic(self):
        m = 6
        a = canonical_alphabet()
        chain = MarkovChain(a, np.full(m, 1 / m), np.full((m, m), 1 / m), np.full(m, 1 / m))
        ll = log_likelihood(chain, Trace("s", "t", (0, 3, 2, 5)))
        assert ll == pytest.approx(-4 * math.log(6), abs=1e-12)

    def test_direct_product(self):
        chain = fit_chain([tr((0, 0), "t1"), tr((0, 1), "t2")], AB, alpha=0.0)
        assert log_likelihood(chain, tr((0, 1))) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_zero_probability_is_neg_inf(self):
        chain = fit_chain([tr((0, 0), "t1"), tr((0, 1), "t2")], AB, alpha=0.0)
        assert log_likelihood(chain, tr((1, 0))) == -np.inf  # initial prob 0

    def test_score_initial_flag(self):
        chain = fit_chain([tr((0, 0), "t1"), tr((0, 1), "t2")], AB, alpha=0.0)
        assert log_likelihood(chain, tr((1, 0)), score_initial=False) == pytest.approx(
            math.log(0.5)
        )

    def test_additivity_against_probability_product(self):
        rng = np.random.default_rng(7)
        chain = fit_chain(
            [tr(tuple(rng.integers(0, 3, size=8)), f"t{i}") for i in range(20)],
            Alphabet(("a", "b", "c")),
            alpha=0.5,
        )
        for _ in range(50):
            events = tuple(rng.integers(0, 3, size=rng.integers(2, 7)))
            prob = chain.initial[events[0]]
            for a, b in zip(events, events[1:]):
                prob *= chain.transitions[a, b]
            assert log_likelihood(chain, tr(events)) == pytest.approx(
                math.log(prob), abs=1e-10
            )


class TestPredictNext:
    def test_unique_argmax(self):
        row = np.array([0.1, 0.7, 0.2])
        chain = MarkovChain(
            Alphabet(("a", "b", "c")),
            np.array([1.0, 0, 0]),
            np.stack([row, row, row]),
            np.full(3, 1 / 3),
        )
        assert predict_next(chain, 0) == 1

    def test_tie_breaks_low_index(self):
        row = np.array([0.5, 0.5])
        chain = MarkovChain(AB, np.array([1.0, 0]), np.stack([row, row]), np.array([0.5, 0.5]))
        assert predict_next(chain, 0) == 0

    def test_fitted_argmax(self):
        chain = fit_chain(
            [tr((0, 0), "t1"), tr((0, 0), "t2"), tr((0, 1), "t3")], AB, alpha=0.0
        )
        np.testing.assert_allclose(chain.transitions[0], [2 / 3, 1 / 3])
        assert predict_next(chain, 0) == 0

    def test_argmax_scale_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            row = rng.random(6)
            scaled = row * rng.uniform(0.1, 10)
            assert int(np.argmax(row)) == int(np.argmax(scaled))


class TestStationary:
    def test_matches_power_iteration(self):
        rng = np.random.default_rng(4)
        trans = rng.dirichlet(np.ones(4), size=4)
        chain = MarkovChain(
            Alphabet(tuple("abcd")), np.full(4, 0.25), trans, np.full(4, 0.25)
        )
        pi = stationary_distribution(chain)
        np.testing.assert_allclose(pi @ trans, pi, atol=1e-10)
        assert pi.sum() == pytest.approx(1.0)


class TestFigure:
    def two_state_chain(self, p00):
        trans = np.array([[p00, 1 - p00], [0.4, 0.6]])
        return MarkovChain(AB, np.array([0.7, 0.3]), trans, np.array([0.25, 0.75]))

    def test_threshold_suppresses_weak_edges(self):
        chain = self.two_state_chain(0.30)
        fig = to_figure(chain, edge_threshold=0.32)
        outgoing_a = [e for e in fig.edges if e.src == "A"]
        assert [e.dst for e in outgoing_a] == ["B"]  # only the 0.70 edge survives

    def test_threshold_zero_emits_all_positive(self):
        fig = to_figure(self.two_state_chain(0.5), edge_threshold=0.0)
        assert len(fig.edges) == 4

    def test_self_loop_width(self):
        m = 6
        trans = np.full((m, m), (1 - 0.71) / 5)
        trans[2, :] = (1 - 0.71) / 5
        trans[2, 2] = 0.71
        for i in range(m):
            trans[i] /= trans[i].sum()
        trans[2] = np.full(m, (1 - 0.71) / 5)
        trans[2, 2] = 0.71
        chain = MarkovChain(canonical_alphabet(), np.full(m, 1 / m), trans, np.full(m, 1 / m))
        fig = to_figure(chain, edge_threshold=0.32)
        loop = [e for e in fig.edges if e.src == e.dst == "FG"]
        assert len(loop) == 1
        assert loop[0].penwidth == pytest.approx(1 + 6 * 0.71)

    def test_node_width_scaling(self):
        fig = to_figure(self.two_state_chain(0.5))
        widths = {n.label: n.width for n in fig.nodes}
        assert widths["A"] == pytest.approx(0.3 + 2.0 * 0.25)
        assert widths["B"] == pytest.approx(0.3 + 2.0 * 0.75)

    def test_canonical_layout_positions(self):
        m = 6
        chain = MarkovChain(
            canonical_alphabet(), np.full(m, 1 / m), np.full((m, m), 1 / m), np.full(m, 1 / m)
        )
        fig = to_figure(chain)
        pos = {n.label: n.pos for n in fig.nodes}
        # engagement left, knowledge middle, disengagement right
        assert pos["FG"][0] == pos["LE"][0] < pos["HK"][0] == pos["LK"][0] < pos["KG"][0] == pos["NI"][0]
        # low-confidence upper half, high-confidence lower half
        for low, high in (("LE", "FG"), ("LK", "HK"), ("NI", "KG")):
            assert pos[low][1] > pos[high][1]

    def test_dot_output_is_parseable_digraph(self):
        dot = chain_to_dot(self.two_state_chain(0.5), edge_threshold=0.0)
        assert dot.startswith("digraph")
        assert '"A" -> "B"' in dot
        assert "penwidth" in dot


class TestSerialization:
    def test_json_roundtrip_full_precision(self):
        rng = np.random.default_rng(9)
        chain = fit_chain(
            [tr(tuple(rng.integers(0, 6, size=10)), f"t{i}") for i in range(5)],
            canonical_alphabet(),
            alpha=1e-3,
        )
        back = chain_from_json(chain_to_json(chain))
        assert back.alphabet == chain.alphabet
        np.testing.assert_array_equal(back.initial, chain.initial)
        np.testing.assert_array_equal(back.transitions, chain.transitions)
        np.testing.assert_array_equal(back.support, chain.support)

    def test_json_has_required_keys(self):
        chain = fit_chain([tr((0, 1))], AB)
        d = json.loads(chain_to_json(chain))
        assert set(d) >= {"alphabet", "initial", "transitions", "support"}
