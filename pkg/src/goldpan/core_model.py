"""Probabilistic primitives: detectors, beliefs, observation model, Bayes updates
and the closed-form expected information gain.

All entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Beliefs are kept away from exact 0/1 inside the round loop so entropies stay finite.
BELIEF_CLAMP = 1e-12


@dataclass(frozen=True)
class DetectorProfile:
    tpr: float
    fpr: float

    def __post_init__(self):
        for name in ("tpr", "fpr"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or v != v:
                raise ValueError(f"{name}={v!r} is not a probability")

    @property
    def delta(self) -> float:
        return self.tpr - self.fpr

    def diagnosticity(self) -> float:
        """Youden's J: ``|tpr - fpr|``."""
        return abs(self.tpr - self.fpr)

    @property
    def is_dummy(self) -> bool:
        return self.tpr == self.fpr


def profiles_to_arrays(detectors):
    """Split a list of profiles into ``(tpr, fpr)`` float arrays."""
    tpr = np.array([d.tpr for d in detectors], dtype=float)
    fpr = np.array([d.fpr for d in detectors], dtype=float)
    return tpr, fpr


def arrays_to_profiles(tpr, fpr):
    return [DetectorProfile(float(t), float(f)) for t, f in zip(tpr, fpr)]


@dataclass(frozen=True)
class GroundTruth:
    states: np.ndarray

    @property
    def k(self) -> int:
        return int(np.sum(self.states))

    @property
    def relevant(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.states))


@dataclass(frozen=True)
class Assignment:
    """``mapping[i]`` is the detector that tests item ``i`` this round."""

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=int)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError(f"assignment is not a permutation: {m.tolist()}")
        object.__setattr__(self, "mapping", m)

    def __len__(self):
        return self.mapping.size

    def __getitem__(self, i):
        return int(self.mapping[i])


@dataclass(frozen=True)
class ObservationVector:
    outcomes: np.ndarray


def binary_entropy(p):
    """Binary entropy in bits, with ``0 log 0 = 0``.

    Accepts scalars or arrays; raises ``ValueError`` for values outside [0, 1].
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ValueError("binary_entropy: argument outside [0, 1]")
    out = _entropy_unchecked(arr)
    return float(out) if out.ndim == 0 else out


def _entropy_unchecked(p):
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        h -= np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return h


def likelihood(z: int, det: DetectorProfile) -> float:
    """Pr(O=1 | Z=z) for one detector."""
    return z * det.tpr + (1 - z) * det.fpr


def sample_observation(z: int, det: DetectorProfile, rng: np.random.Generator) -> int:
    return int(rng.random() < likelihood(z, det))


def posterior(b, tpr, fpr, o):
    """Posterior Pr(Z=1 | o) from prior ``b``; vectorised over all arguments.

    A zero denominator (an observation the model deems impossible) leaves the
    belief unchanged.
    """
    b = np.asarray(b, dtype=float)
    o = np.asarray(o)
    l1 = np.where(o == 1, tpr, 1.0 - np.asarray(tpr, dtype=float))
    l0 = np.where(o == 1, fpr, 1.0 - np.asarray(fpr, dtype=float))
    num = b * l1
    den = num + (1.0 - b) * l0
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(den > 0, num / np.where(den > 0, den, 1.0), b)
    return float(post) if post.ndim == 0 else post


def bayes_update(b: float, det: DetectorProfile, o: int) -> float:
    """Scalar form of :func:`posterior` taking a profile."""
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"belief {b!r} outside [0, 1]")
    return posterior(b, det.tpr, det.fpr, o)


def expected_gain(b, tpr, fpr):
    """Expected information gain (mutual information between state and outcome).

    ``H(fpr + b*(tpr - fpr)) - (b*H(tpr) + (1-b)*H(fpr))``, broadcast over inputs.
    Tiny negative values from rounding are clipped to zero.
    """
    b = np.asarray(b, dtype=float)
    tpr = np.asarray(tpr, dtype=float)
    fpr = np.asarray(fpr, dtype=float)
    marginal = fpr + b * (tpr - fpr)
    g = _entropy_unchecked(marginal) - (b * _entropy_unchecked(tpr) + (1.0 - b) * _entropy_unchecked(fpr))
    g = np.maximum(g, 0.0)
    return float(g) if g.ndim == 0 else g


def info_gain(b: float, det: DetectorProfile) -> float:
    return expected_gain(b, det.tpr, det.fpr)


@dataclass(frozen=True)
class BeliefState:
    beliefs: np.ndarray
    round: int = 0

    def __post_init__(self):
        b = np.asarray(self.beliefs, dtype=float)
        if b.ndim != 1 or np.any(~((b >= 0) & (b <= 1))):
            raise ValueError("beliefs must be a vector of probabilities")
        object.__setattr__(self, "beliefs", b)

    @classmethod
    def uninformative(cls, n: int) -> "BeliefState":
        return cls(np.full(n, 0.5))

    def __len__(self):
        return self.beliefs.size

    def entropies(self) -> np.ndarray:
        return _entropy_unchecked(self.beliefs)

    def total_entropy(self) -> float:
        return float(np.sum(self.entropies()))

    def update(self, assignment: Assignment, obs: ObservationVector, tpr, fpr) -> "BeliefState":
        """One round of per-item Bayes updates using the given (agent-side) rates."""
        j = assignment.mapping
        post = posterior(self.beliefs, np.asarray(tpr)[j], np.asarray(fpr)[j], obs.outcomes)
        post = np.clip(post, BELIEF_CLAMP, 1.0 - BELIEF_CLAMP)
        return BeliefState(post, self.round + 1)


def gain_matrix(beliefs, detectors) -> np.ndarray:
    """``W[i, j]`` = information gain of testing item ``i`` with detector ``j``."""
    b = beliefs.beliefs if isinstance(beliefs, BeliefState) else np.asarray(beliefs, dtype=float)
    tpr, fpr = profiles_to_arrays(detectors) if not isinstance(detectors, tuple) else detectors
    if b.size != len(tpr):
        raise ValueError(f"gain_matrix: {b.size} items but {len(tpr)} detectors (pad first)")
    return expected_gain(b[:, None], np.asarray(tpr)[None, :], np.asarray(fpr)[None, :])
