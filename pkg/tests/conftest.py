import numpy as np
import pytest

from oscar_kit.core import EventVocabulary, LabelCatalog
from oscar_kit.synthgen import GeneratorModel, parse_rule


@pytest.fixture
def ab_vocab():
    return EventVocabulary(["a", "b"])


@pytest.fixture
def uniform_ab(ab_vocab):
    """Two equiprobable events, L=2, y = 'a occurs'."""
    T = np.array([[0, 0.5, 0.5]] * 3)
    return GeneratorModel(ab_vocab, LabelCatalog(["y"]), T, 2, (parse_rule("a", ab_vocab),))


@pytest.fixture
def eq9_vocab():
    return EventVocabulary([f"x{i}" for i in range(1, 21)])


@pytest.fixture
def eq9_rule(eq9_vocab):
    return parse_rule("x1 & (x5 | x8) & (x18 | x12) & x3 & (!x10 | !x20)", eq9_vocab)


def alternating_model(seed: int = 0, length: int = 12, rule: str = "x5 & (x6 | !x7)") -> GeneratorModel:
    """Odd steps draw from {x1..x4}, even steps from {x5..x8}.

    Each group's row is shared by every event of the other group, so which
    odd-step event occurs carries no information about the even steps: label
    ``y`` (a rule over x5..x8) is conditionally independent of every odd
    step, and label ``coin`` (no rule) of every step.
    """
    vocab = EventVocabulary([f"x{i}" for i in range(1, 9)])
    rng = np.random.default_rng(seed)
    a_row = np.r_[0, rng.dirichlet(np.ones(4)), np.zeros(4)]
    b_row = np.r_[0, np.zeros(4), rng.dirichlet(np.ones(4))]
    T = np.array([a_row] + [b_row] * 4 + [a_row] * 4)
    return GeneratorModel(vocab, LabelCatalog(["y", "coin"]), T, length, (parse_rule(rule, vocab),),
                          ruleless={1: 0.3}, seed=seed)


@pytest.fixture
def alternating():
    return alternating_model()


# -- acceptance summary -----------------------------------------------------

ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
