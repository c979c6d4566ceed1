import json

import pytest
from hypothesis import given, strategies as st

from oscar_kit.core import (
    EventVocabulary,
    InvalidSequence,
    LabelCatalog,
    LabeledSequence,
    MarkovBoundarySet,
    UnknownSymbol,
    read_sequences,
    sequence_from_record,
    sequence_to_record,
    vocab_lookup,
    write_sequences,
)


class TestVocabulary:
    def test_lookup(self):
        v = EventVocabulary(["a", "b"])
        assert vocab_lookup(v, "a") == 1
        assert vocab_lookup(v, "<BOS>") == 0
        with pytest.raises(UnknownSymbol):
            vocab_lookup(v, "z")

    def test_explicit_marker_kept(self):
        v = EventVocabulary(["BOS", "a", "b"], begin_marker="BOS")
        assert v.encode("BOS") == 0 and v.encode("a") == 1

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            EventVocabulary(["a", "a"])
        with pytest.raises(ValueError):
            EventVocabulary([])

    @given(st.lists(st.text(min_size=1, max_size=4), min_size=1, max_size=30, unique=True))
    def test_round_trip(self, symbols):
        symbols = [s for s in symbols if s != "<BOS>"] or ["e"]
        v = EventVocabulary(symbols)
        for i in range(len(v)):
            assert v.encode(v.decode(i)) == i


class TestLabeledSequence:
    def test_invariants(self):
        with pytest.raises(InvalidSequence):
            LabeledSequence.from_indices([], [0])
        with pytest.raises(InvalidSequence):
            LabeledSequence.from_indices([1, 2], [0], times=[2.0, 1.0])
        with pytest.raises(InvalidSequence):
            LabeledSequence.from_indices([1, 0], [0])
        # equal timestamps are fine
        LabeledSequence.from_indices([1, 2], [1], times=[1.0, 1.0])

    def test_tokens(self):
        s = LabeledSequence.from_indices([2, 1, 2], [1])
        assert s.tokens.tolist() == [0, 2, 1, 2]
        assert s.presence() == {1, 2}

    @given(
        st.lists(st.integers(1, 5), min_size=1, max_size=12),
        st.lists(st.floats(0, 1e6, allow_nan=False), min_size=12, max_size=12),
        st.lists(st.booleans(), min_size=3, max_size=3),
    )
    def test_record_round_trip_bit_exact(self, events, gaps, labels):
        vocab = EventVocabulary(list("abcde"))
        catalog = LabelCatalog(["p", "q", "r"])
        times = sorted(gaps[: len(events)])
        seq = LabeledSequence.from_indices(events, [int(b) for b in labels], times)
        rec = json.loads(json.dumps(sequence_to_record(seq, vocab, catalog)))
        assert sequence_from_record(rec, vocab, catalog) == seq

    def test_file_round_trip(self, tmp_path):
        vocab = EventVocabulary(list("ab"))
        catalog = LabelCatalog(["y"])
        seqs = [LabeledSequence.from_indices([1, 2], [1], [0.1, 0.30000000000000004]),
                LabeledSequence.from_indices([2], [0])]
        write_sequences(tmp_path / "d.jsonl", seqs, vocab, catalog)
        assert read_sequences(tmp_path / "d.jsonl", vocab, catalog) == seqs


def test_markov_boundary_set_excludes_marker():
    with pytest.raises(ValueError):
        MarkovBoundarySet([{0, 1}])
    mb = MarkovBoundarySet([{1, 2}, set()])
    v = EventVocabulary(["a", "b"])
    c = LabelCatalog(["y", "z"])
    assert MarkovBoundarySet.from_json(mb.to_json(v, c), v, c) == mb
