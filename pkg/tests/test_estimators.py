import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from oscar_kit import MarkovBoundaryDiscovery
from oscar_kit.bench import linear_fit, runtime_vs_batch, runtime_vs_particles
from oscar_kit.core import MarkovBoundarySet
from oscar_kit.density import NGramDensity, OracleDensity, oracle_pair
from oscar_kit.engine import DiscoveryResult, discover_batch
from oscar_kit.graph import edges_from_json, to_dot
from oscar_kit.sampling import SamplingConfig
from oscar_kit.synthgen import random_model, sample_dataset, true_markov_boundary


@pytest.fixture(scope="module")
def data():
    m = random_model(2, n_events=6, length=10, n_labels=2, literals=(1, 2))
    return m, sample_dataset(m, 400), sample_dataset(m, 12, start=400)


def test_params_and_clone():
    est = MarkovBoundaryDiscovery(n_particles=10, density=NGramDensity(order=3))
    params = est.get_params()
    assert params["n_particles"] == 10 and params["density__order"] == 3
    twin = clone(est)
    assert twin.get_params()["density__order"] == 3 and twin.density is not est.density


def test_fit_transform_predict(data):
    m, train, test = data
    est = MarkovBoundaryDiscovery(n_particles=8, context_floor=3, density=NGramDensity(window=10)).fit(train)
    assert isinstance(est.density_, NGramDensity) and est.density_ is not est.density
    results = est.transform(test)
    assert len(results) == 12 and all(isinstance(r, DiscoveryResult) for r in results)
    mbs = est.predict(test)
    assert all(isinstance(mb, MarkovBoundarySet) for mb in mbs)
    truth = MarkovBoundarySet(true_markov_boundary(m.rules, 2))
    assert 0.0 <= est.score(test, truth) <= 1.0
    assert len(est.cmi_profile(test)) == 12


def test_prefitted_oracle_matches_engine(data):
    m, _, test = data
    pair = oracle_pair(m)
    est = MarkovBoundaryDiscovery(density=pair, refit_density=False, n_particles=8, context_floor=3,
                                  random_state=4).fit(None)
    direct = discover_batch(pair, test, SamplingConfig(n_particles=8, context_floor=3, seed=4))
    for a, b in zip(est.transform(test), direct):
        assert np.array_equal(a.cmi, b.cmi)


def test_not_fitted(data):
    with pytest.raises(NotFittedError):
        MarkovBoundaryDiscovery().transform(data[2])


def test_bad_params_fail_at_fit(data):
    with pytest.raises(ValueError):
        MarkovBoundaryDiscovery(strategy="bogus").fit(data[1])


def test_dot_export(data):
    m, _, test = data
    res = discover_batch(oracle_pair(m), test[:3], SamplingConfig(n_particles=8, context_floor=3))
    for r in res:
        dot = to_dot(r, m.vocab, m.catalog)
        assert dot.startswith('digraph "oscar"') and dot.rstrip().endswith("}")
        assert dot.count(" -> y") == len(r.edges())
        back = edges_from_json(r.to_json(m.vocab, m.catalog), m.vocab, m.catalog)
        assert back == r.edges()


def test_bench_helpers(data):
    m, _, test = data
    pair = oracle_pair(m)
    cfg = SamplingConfig(context_floor=3)
    rows = runtime_vs_particles(pair, test[:3], cfg, [4, 8], repeats=1)
    assert [n for n, _ in rows] == [4, 8] and all(t > 0 for _, t in rows)
    assert [b for b, _ in runtime_vs_batch(pair, test, cfg.with_(n_particles=4), [1, 2], repeats=1)] == [1, 2]
    slope, intercept, r2 = linear_fit([1, 2, 3], [2, 4, 6])
    assert slope == pytest.approx(2) and intercept == pytest.approx(0, abs=1e-12) and r2 == pytest.approx(1)
