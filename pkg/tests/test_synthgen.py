import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscar_kit.core import EnumerationTooLarge, EventVocabulary, InvalidModel, LabelCatalog
from oscar_kit.synthgen import (
    GeneratorModel,
    LabelRule,
    Literal,
    enumerate_label_conditional,
    evaluate_rule,
    exact_label_conditional,
    exact_next_event,
    parse_rule,
    random_model,
    sample_dataset,
    true_markov_boundary,
)


class TestEvaluateRule:
    def test_eq9_shape(self, eq9_vocab, eq9_rule):
        x = eq9_vocab.encode
        assert evaluate_rule(eq9_rule, {x("x1"), x("x5"), x("x12"), x("x3")}) == 1
        assert evaluate_rule(eq9_rule, {x("x5"), x("x12"), x("x3")}) == 0

    def test_both_negated_literals_false(self, eq9_vocab):
        rule = parse_rule("(!x10 | !x20)", eq9_vocab)
        x = eq9_vocab.encode
        assert evaluate_rule(rule, {x("x10"), x("x20")}) == 0
        assert evaluate_rule(rule, {x("x10")}) == 1

    def test_format_round_trip(self, eq9_vocab, eq9_rule):
        assert parse_rule(eq9_rule.format(eq9_vocab), eq9_vocab) == eq9_rule

    def test_empty_clause_rejected(self):
        with pytest.raises(InvalidModel):
            LabelRule(0, ((),))

    @given(st.sets(st.integers(1, 8)), st.sets(st.integers(1, 8)), st.integers(0, 2**16))
    def test_monotone_for_positive_rules(self, presence, extra, seed):
        rng = np.random.default_rng(seed)
        events = rng.choice(np.arange(1, 9), size=4, replace=False)
        rule = LabelRule(0, ((Literal(int(events[0])),), (Literal(int(events[1])), Literal(int(events[2]))),
                             (Literal(int(events[3])),)))
        if evaluate_rule(rule, presence):
            assert evaluate_rule(rule, presence | extra) == 1


class TestTrueMarkovBoundary:
    def test_eq9(self, eq9_vocab, eq9_rule):
        mb = true_markov_boundary([eq9_rule])
        expected = {eq9_vocab.encode(f"x{i}") for i in (1, 5, 8, 18, 12, 3, 10, 20)}
        assert mb[0] == expected

    def test_single_literal(self, eq9_vocab):
        assert true_markov_boundary([parse_rule("x2", eq9_vocab)])[0] == {eq9_vocab.encode("x2")}

    def test_shared_variable(self, eq9_vocab):
        rules = [parse_rule("x1 & x2", eq9_vocab, 0), parse_rule("x1 | x3", eq9_vocab, 1)]
        mb = true_markov_boundary(rules)
        assert 1 in mb[0] and 1 in mb[1]

    def test_ruleless_labels_empty(self, eq9_vocab):
        mb = true_markov_boundary([parse_rule("x1", eq9_vocab, 1)], n_labels=3)
        assert mb[0] == frozenset() and mb[2] == frozenset()


class TestExactConditionals:
    @pytest.mark.parametrize("method", ["enumerate", "recursion"])
    def test_uniform_examples(self, uniform_ab, method):
        assert exact_label_conditional(uniform_ab, [0, 1], 0, method) == 1.0
        assert exact_label_conditional(uniform_ab, [0, 2], 0, method) == 0.5
        assert exact_label_conditional(uniform_ab, [0], 0, method) == 0.75

    def test_next_event_examples(self, ab_vocab):
        chain = np.array([[0, 1, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
        m = GeneratorModel(ab_vocab, LabelCatalog(["y"]), chain, 4, (parse_rule("a", ab_vocab),))
        assert exact_next_event(m, [0, 1]).tolist() == [0, 0, 1]
        row = np.array([[0, 0.5, 0.5], [0, 0.7, 0.3], [0, 0.5, 0.5]])
        m = GeneratorModel(ab_vocab, LabelCatalog(["y"]), row, 4, (parse_rule("a", ab_vocab),))
        assert exact_next_event(m, [0, 1]).tolist() == [0, 0.7, 0.3]
        assert exact_next_event(m, [0]).tolist() == [0, 0.5, 0.5]

    def test_budget(self):
        m = random_model(0, n_events=10, length=8)
        with pytest.raises(EnumerationTooLarge):
            exact_label_conditional(m, [0], 0, "enumerate")
        with pytest.raises(EnumerationTooLarge):
            enumerate_label_conditional(m, [0, 1], 0, budget=100)

    @pytest.mark.parametrize("seed", range(12))
    def test_recursion_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        length = {3: 0.2, 5: 0.8} if seed % 3 == 0 else int(rng.integers(2, 6))
        m = random_model(seed, n_events=int(rng.integers(2, 5)), length=length, n_labels=2,
                         n_ruleless=1, iid=seed % 2 == 0)
        Lmax = m.max_length
        for _ in range(6):
            k = int(rng.integers(0, Lmax + 1))
            prefix = [0] + rng.integers(1, len(m.vocab), size=k).tolist()
            for label in range(len(m.catalog)):
                a = enumerate_label_conditional(m, prefix, label)
                b = exact_label_conditional(m, prefix, label)
                assert 0.0 <= b <= 1.0
                assert b == pytest.approx(a, abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_total_probability(self, seed):
        m = random_model(seed, n_events=5, length=6, n_labels=2)
        rng = np.random.default_rng(seed)
        for k in range(6):
            prefix = [0] + rng.integers(1, 6, size=k).tolist()
            row = exact_next_event(m, prefix)
            for label in range(2):
                lhs = sum(row[x] * exact_label_conditional(m, prefix + [x], label)
                          for x in range(1, len(m.vocab)))
                assert lhs == pytest.approx(exact_label_conditional(m, prefix, label), abs=1e-9)

    def test_full_prefix_is_rule_value(self, uniform_ab):
        for seq in itertools.product([1, 2], repeat=2):
            expected = float(evaluate_rule(uniform_ab.rules[0], set(seq)))
            assert exact_label_conditional(uniform_ab, [0, *seq], 0) == expected


class TestSampling:
    def test_deterministic_chain(self, ab_vocab):
        chain = np.array([[0, 1, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
        m = GeneratorModel(ab_vocab, LabelCatalog(["y"]), chain, 4, (parse_rule("a", ab_vocab),))
        for s in sample_dataset(m, 20):
            assert s.event_indices == (1, 2, 1, 2)
            assert s.labels == (1,)

    def test_first_event_frequency(self, uniform_ab):
        seqs = sample_dataset(uniform_ab, 10_000)
        n_a = sum(s.event_indices[0] == 1 for s in seqs)
        assert n_a / 10_000 == pytest.approx(0.5, abs=0.02)
        # chi-square on the two cells, 1 dof, 99.9% critical value 10.83
        chi2 = 2 * (n_a - 5000) ** 2 / 5000
        assert chi2 < 10.83

    def test_transition_frequencies(self):
        m = random_model(3, n_events=4, length=6)
        counts = np.zeros_like(m.transition)
        for s in sample_dataset(m, 5000):
            tok = s.tokens
            np.add.at(counts, (tok[:-1], tok[1:]), 1)
        emp = counts / counts.sum(axis=1, keepdims=True)
        assert np.abs(emp - m.transition).max() < 0.03

    def test_same_seed_identical_and_slicable(self, uniform_ab):
        a = sample_dataset(uniform_ab, 50)
        assert a == sample_dataset(uniform_ab, 50)
        assert a[20:] == sample_dataset(uniform_ab, 30, start=20)

    def test_labels_follow_rules_and_coins(self):
        m = random_model(5, n_events=6, length=5, n_labels=2, n_ruleless=1)
        seqs = sample_dataset(m, 4000)
        for s in seqs[:200]:
            for r in m.rules:
                assert s.labels[r.label] == evaluate_rule(r, s.presence())
        freq = np.mean([s.labels[2] for s in seqs])
        assert freq == pytest.approx(m.ruleless[2], abs=0.03)

    def test_variable_length(self):
        m = random_model(1, n_events=3, length={2: 0.5, 4: 0.5})
        lengths = [len(s) for s in sample_dataset(m, 2000)]
        assert set(lengths) == {2, 4}
        assert np.mean(np.array(lengths) == 2) == pytest.approx(0.5, abs=0.04)


class TestModelFile:
    def test_json_round_trip(self, tmp_path):
        m = random_model(11, n_events=6, length={3: 0.25, 5: 0.75}, n_labels=2, n_ruleless=1)
        m.save(tmp_path / "m.json")
        back = GeneratorModel.load(tmp_path / "m.json")
        assert back.to_json() == m.to_json()
        assert sample_dataset(back, 10) == sample_dataset(m, 10)
        json.loads((tmp_path / "m.json").read_text())

    @pytest.mark.parametrize("mutate", ["row_sum", "marker_column", "missing_label"])
    def test_invalid(self, ab_vocab, mutate):
        T = np.array([[0, 0.5, 0.5]] * 3)
        rules = (parse_rule("a", ab_vocab),)
        catalog = LabelCatalog(["y"])
        if mutate == "row_sum":
            T[1, 1] = 0.7
        elif mutate == "marker_column":
            T[1] = [0.2, 0.4, 0.4]
        else:
            catalog = LabelCatalog(["y", "z"])
        with pytest.raises(InvalidModel):
            GeneratorModel(ab_vocab, catalog, T, 2, rules)
