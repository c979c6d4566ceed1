"""scikit-learn style front end for discovery."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from .density import DensityEstimator, NGramDensity
from .engine import DiscoveryResult, ThresholdConfig, discover_batch
from .evaluation import aggregate, score_results
from .sampling import SamplingConfig
from .validation import check_sequences


class MarkovBoundaryDiscovery(TransformerMixin, BaseEstimator):
    """Per-sequence Markov boundary discovery.

    ``fit`` trains the density backend on a corpus (a clone of ``density``,
    or an :class:`NGramDensity` when ``density`` is None).  A density that
    is already fitted is used as is when ``refit_density=False``.
    ``transform`` returns one :class:`DiscoveryResult` per sequence and
    ``predict`` the recovered Markov boundaries.

    Parameters
    ----------
    density : DensityEstimator or None
    n_particles, strategy, top_k, top_p, temperature, context_floor :
        See :class:`SamplingConfig`.
    z_coeff, eps, min_cmi :
        See :class:`ThresholdConfig`.
    n_jobs : int
        Worker count for batches; never changes the results.
    random_state : int
    refit_density : bool
    """

    def __init__(self, density: DensityEstimator | None = None, n_particles: int = 68,
                 strategy: str = "top_k_nucleus", top_k: int = 35, top_p: float = 0.8,
                 temperature: float | None = None, context_floor: int = 2, z_coeff: float = 2.75,
                 eps: float = 1e-6, min_cmi: float = 1e-10, n_jobs: int = 1, random_state: int = 0,
                 refit_density: bool = True):
        self.density = density
        self.n_particles = n_particles
        self.strategy = strategy
        self.top_k = top_k
        self.top_p = top_p
        self.temperature = temperature
        self.context_floor = context_floor
        self.z_coeff = z_coeff
        self.eps = eps
        self.min_cmi = min_cmi
        self.n_jobs = n_jobs
        self.random_state = random_state
        self.refit_density = refit_density

    def sampling_config(self) -> SamplingConfig:
        return SamplingConfig(n_particles=self.n_particles, strategy=self.strategy, top_k=self.top_k,
                              top_p=self.top_p, temperature=self.temperature,
                              context_floor=self.context_floor, seed=int(self.random_state))

    def threshold_config(self) -> ThresholdConfig:
        return ThresholdConfig(z_coeff=self.z_coeff, min_cmi=self.min_cmi, eps=self.eps)

    def fit(self, X, y=None):
        seqs = check_sequences(X) if X is not None else []
        # fail fast on bad hyper-parameters
        self.sampling_config()
        self.threshold_config()
        if self.density is not None and not self.refit_density:
            self.density_ = self.density
        else:
            est = clone(self.density) if self.density is not None else NGramDensity()
            self.density_ = est.fit(seqs)
        self.n_labels_ = self.density_.n_labels_
        return self

    def transform(self, X) -> list[DiscoveryResult]:
        check_is_fitted(self, "density_")
        seqs = check_sequences(X, self.density_.n_symbols_, self.n_labels_)
        return discover_batch(self.density_, seqs, self.sampling_config(),
                              self.threshold_config(), n_jobs=self.n_jobs)

    def predict(self, X):
        """Markov boundary sets per sequence (None for sequences that failed)."""
        return [r.markov_boundaries() if isinstance(r, DiscoveryResult) else None
                for r in self.transform(X)]

    def score(self, X, y):
        """Weighted F1 of the recovered boundaries against ``y`` (a MarkovBoundarySet)."""
        report = aggregate(score_results(self.transform(X), y))
        return float(report.weighted["f1"])

    def cmi_profile(self, X) -> list[np.ndarray]:
        return [r.cmi for r in self.transform(X) if isinstance(r, DiscoveryResult)]
