"""One-shot, per-sequence Markov boundary discovery for multi-label event sequences."""

__version__ = "0.1.0"

from .core import (
    EventVocabulary,
    LabelCatalog,
    LabeledSequence,
    MarkovBoundarySet,
    vocab_lookup,
)
from .density import NGramDensity, OracleDensity, fit_ngram, oracle_pair, query_event, query_labels
from .engine import (
    DiscoveryResult,
    ThresholdConfig,
    causal_indicator,
    discover,
    discover_batch,
    dynamic_threshold,
    estimate_cmi,
    info_gain,
)
from .estimators import MarkovBoundaryDiscovery
from .evaluation import aggregate, score_mb, stratify_by_mb_length
from .sampling import SamplingConfig, sample_particles
from .synthgen import (
    GeneratorModel,
    LabelRule,
    evaluate_rule,
    exact_label_conditional,
    exact_next_event,
    sample_dataset,
    true_markov_boundary,
)

__all__ = [
    "EventVocabulary", "LabelCatalog", "LabeledSequence", "MarkovBoundarySet", "vocab_lookup",
    "NGramDensity", "OracleDensity", "fit_ngram", "oracle_pair", "query_event", "query_labels",
    "DiscoveryResult", "ThresholdConfig", "causal_indicator", "discover", "discover_batch",
    "dynamic_threshold", "estimate_cmi", "info_gain", "MarkovBoundaryDiscovery",
    "aggregate", "score_mb", "stratify_by_mb_length", "SamplingConfig", "sample_particles",
    "GeneratorModel", "LabelRule", "evaluate_rule", "exact_label_conditional",
    "exact_next_event", "sample_dataset", "true_markov_boundary",
]
