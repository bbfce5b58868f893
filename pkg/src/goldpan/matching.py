"""Maximum-weight assignment over square gain matrices."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core_model import Assignment

BRUTE_FORCE_MAX_N = 10


@dataclass(frozen=True)
class MatchResult:
    assignment: Assignment
    total_weight: float


def _check_square(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("matrix has non-finite entries")
    return w


def assignment_weight(w, mapping) -> float:
    w = np.asarray(w, dtype=float)
    mapping = np.asarray(mapping.mapping if isinstance(mapping, Assignment) else mapping)
    return float(w[np.arange(w.shape[0]), mapping].sum())


def hungarian_solve(w) -> MatchResult:
    """Optimal permutation maximising ``sum_i w[i, sigma(i)]``.

    Delegates to scipy's shortest-augmenting-path solver, O(N^3).
    """
    w = _check_square(w)
    rows, cols = linear_sum_assignment(w, maximize=True)
    mapping = np.empty(w.shape[0], dtype=int)
    mapping[rows] = cols
    return MatchResult(Assignment(mapping), assignment_weight(w, mapping))


def brute_force_match(w) -> MatchResult:
    """Enumerate every permutation; only for N <= 10."""
    w = _check_square(w)
    n = w.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute_force_match refuses N={n} > {BRUTE_FORCE_MAX_N}")
    best, best_perm = -np.inf, None
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        total = w[rows, perm].sum()
        if total > best:
            best, best_perm = total, perm
    return MatchResult(Assignment(np.array(best_perm, dtype=int)), float(best))


def is_anti_monge(w, tol: float = 1e-9) -> bool:
    """True iff ``W[i,j] + W[k,l] >= W[i,l] + W[k,j] - tol`` for all i<k, j<l.

    Works for rectangular input too.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, m = w.shape
    if n < 2 or m < 2:
        return True
    upper = np.triu(np.ones((m, m), dtype=bool), 1)
    for i in range(n - 1):
        # diff[k, j, l] = W[i,j] + W[k,l] - W[i,l] - W[k,j]
        rest = w[i + 1:]
        diff = (w[i, :, None] + rest[:, None, :]) - (w[i, None, :] + rest[:, :, None])
        if np.any(diff[:, upper] < -tol):
            return False
    return True
