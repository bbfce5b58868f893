"""Gold Panning bandits: Bayesian relevance tracking through noisy, heterogeneous detectors."""

__version__ = "0.1.0"

from .core_model import (
    Assignment,
    BeliefState,
    DetectorProfile,
    GroundTruth,
    ObservationVector,
    bayes_update,
    binary_entropy,
    expected_gain,
    gain_matrix,
    info_gain,
    likelihood,
    posterior,
    sample_observation,
)
from .matching import MatchResult, brute_force_match, hungarian_solve, is_anti_monge
from .strategies import (
    StrategyKind,
    TsState,
    gp_assign,
    hungarian_ig_assign,
    pad_detectors,
    psc_assign,
    ts_assign,
    ts_update,
)

__all__ = [
    "Assignment",
    "BeliefState",
    "DetectorProfile",
    "GroundTruth",
    "ObservationVector",
    "bayes_update",
    "binary_entropy",
    "expected_gain",
    "gain_matrix",
    "info_gain",
    "likelihood",
    "posterior",
    "sample_observation",
    "StrategyKind",
    "TsState",
    "gp_assign",
    "hungarian_ig_assign",
    "pad_detectors",
    "psc_assign",
    "ts_assign",
    "ts_update",
    "MatchResult",
    "brute_force_match",
    "hungarian_solve",
    "is_anti_monge",
]
