"""Per-round assignment policies.

Every policy returns an :class:`Assignment` mapping item ``i`` to a detector.
Ties in every sort are broken by lower index (stable sorts).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core_model import (
    Assignment,
    BeliefState,
    DetectorProfile,
    ObservationVector,
    gain_matrix,
    profiles_to_arrays,
)
from .matching import hungarian_solve

DUMMY_RATE = 0.5


class StrategyKind(str, enum.Enum):
    GOLD_PANNING = "GoldPanning"
    HUNGARIAN_IG = "HungarianIG"
    PSC = "PSC"
    THOMPSON_SAMPLING = "ThompsonSampling"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown strategy {name!r}; expected one of {valid}") from None

    @property
    def index(self) -> int:
        return list(StrategyKind).index(self)


def _as_arrays(detectors):
    if isinstance(detectors, tuple):
        return np.asarray(detectors[0], dtype=float), np.asarray(detectors[1], dtype=float)
    return profiles_to_arrays(detectors)


def _beliefs(beliefs) -> np.ndarray:
    return beliefs.beliefs if isinstance(beliefs, BeliefState) else np.asarray(beliefs, dtype=float)


def pad_detectors(detectors, n_items: int):
    """Match the detector count to ``n_items``.

    Short lists are padded with zero-diagnosticity dummies; long lists keep the
    ``n_items`` most diagnostic detectors in their original order.
    """
    detectors = list(detectors)
    if len(detectors) < n_items:
        return detectors + [DetectorProfile(DUMMY_RATE, DUMMY_RATE)] * (n_items - len(detectors))
    if len(detectors) > n_items:
        diag = np.array([d.diagnosticity() for d in detectors])
        keep = np.sort(np.argsort(-diag, kind="stable")[:n_items])
        return [detectors[i] for i in keep]
    return detectors


def gp_assign(beliefs, detectors) -> Assignment:
    """Gold Panning: most uncertain item gets the most diagnostic detector, and so on down."""
    b = _beliefs(beliefs)
    tpr, fpr = _as_arrays(detectors)
    if b.size != tpr.size:
        raise ValueError(f"{b.size} items but {tpr.size} detectors")
    entropy = BeliefState(b).entropies()
    items = np.argsort(-entropy, kind="stable")
    dets = np.argsort(-np.abs(tpr - fpr), kind="stable")
    mapping = np.empty(b.size, dtype=int)
    mapping[items] = dets
    return Assignment(mapping)


def hungarian_ig_assign(beliefs, detectors) -> Assignment:
    """Exact maximiser of the one-round total expected information gain."""
    w = gain_matrix(_beliefs(beliefs), _as_arrays(detectors))
    return hungarian_solve(w).assignment


def psc_assign(n: int, rng: np.random.Generator) -> Assignment:
    """Uniformly random permutation."""
    if n < 1:
        raise ValueError("psc_assign needs n >= 1")
    return Assignment(rng.permutation(n))


@dataclass(frozen=True)
class TsState:
    """Independent Beta posteriors over each detector's TPR and FPR."""

    alpha_t: np.ndarray
    beta_t: np.ndarray
    alpha_f: np.ndarray
    beta_f: np.ndarray

    @classmethod
    def prior(cls, n_detectors: int, a: float = 1.0, b: float = 1.0) -> "TsState":
        ones = np.ones(n_detectors)
        return cls(a * ones, b * ones, a * ones, b * ones)

    def __len__(self):
        return self.alpha_t.size

    def mean_rates(self):
        """Posterior-mean ``(tpr, fpr)`` arrays."""
        return (self.alpha_t / (self.alpha_t + self.beta_t),
                self.alpha_f / (self.alpha_f + self.beta_f))

    def sample_rates(self, rng: np.random.Generator):
        return rng.beta(self.alpha_t, self.beta_t), rng.beta(self.alpha_f, self.beta_f)


def ts_assign(beliefs, ts: TsState, rng: np.random.Generator) -> Assignment:
    """Hungarian assignment against one posterior draw of every detector's rates."""
    b = _beliefs(beliefs)
    if len(ts) != b.size:
        raise ValueError(f"TsState covers {len(ts)} detectors, need {b.size}")
    return hungarian_ig_assign(b, ts.sample_rates(rng))


def ts_update(ts: TsState, assignment: Assignment, obs: ObservationVector, beliefs) -> TsState:
    """Expected-count update given the round's posterior beliefs.

    The true state is latent, so item ``i`` credits its detector's TPR counts with
    weight ``b_i`` and FPR counts with weight ``1 - b_i``.
    """
    b = _beliefs(beliefs)
    o = np.asarray(obs.outcomes)
    j = assignment.mapping
    n = len(ts)
    pos = o == 1
    alpha_t = ts.alpha_t + np.bincount(j, weights=b * pos, minlength=n)
    beta_t = ts.beta_t + np.bincount(j, weights=b * ~pos, minlength=n)
    alpha_f = ts.alpha_f + np.bincount(j, weights=(1 - b) * pos, minlength=n)
    beta_f = ts.beta_f + np.bincount(j, weights=(1 - b) * ~pos, minlength=n)
    return TsState(alpha_t, beta_t, alpha_f, beta_f)


def total_gain(beliefs, detectors, assignment: Assignment) -> float:
    """Sum of per-item expected information gain under ``assignment``."""
    w = gain_matrix(_beliefs(beliefs), _as_arrays(detectors))
    return float(w[np.arange(w.shape[0]), assignment.mapping].sum())
