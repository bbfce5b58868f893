"""Synthetic environments, multi-round trials and Monte Carlo aggregation.

Seeding
-------
Every random stream comes from ``numpy.random.SeedSequence(master_seed,
spawn_key=(stream, run_index))``:

* stream 0 builds the run's environment: detector profiles, ground truth and a
  ``(iterations, n_items)`` block of uniforms. Item ``i``'s observation in round
  ``t`` is ``U[t, i] < Pr(O=1 | Z_i, true detector)``. All strategies share it.
* stream ``1 + StrategyKind.index`` feeds the strategy. It is split into a policy
  generator (PSC shuffles, Thompson draws) and a noise generator (perturbed profiles).

Results therefore depend only on ``master_seed`` (and the numpy version, whose
distribution samplers may change between releases), never on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration import load_profiles
from .core_model import (
    BELIEF_CLAMP,
    BeliefState,
    GroundTruth,
    ObservationVector,
    _entropy_unchecked,
    arrays_to_profiles,
    posterior,
    profiles_to_arrays,
)
from .strategies import (
    StrategyKind,
    TsState,
    gp_assign,
    hungarian_ig_assign,
    pad_detectors,
    psc_assign,
    ts_update,
)

NOISE_LEVELS = {"perfect": 0.0, "low": 0.0051, "medium": 0.0255, "high": 0.0510}
DEFAULT_SIGMAS = tuple(NOISE_LEVELS.values())
DEFAULT_ALPHAS = tuple(float(a) for a in np.logspace(-1, 2, 20))

ENV_STREAM = 0


@dataclass(frozen=True)
class EnvironmentSpec:
    n_items: int = 50
    detector_source: str = "uniform"  # "uniform" | "beta" | "file"
    alpha: float | None = None
    detector_file: str | None = None
    k: int | None = None  # None: k uniform on {1..floor(sqrt(n))}
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")
        if self.detector_source not in ("uniform", "beta", "file"):
            raise ValueError(f"unknown detector_source {self.detector_source!r}")
        if self.detector_source == "beta" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("beta detector source needs alpha > 0")
        if self.detector_source == "file" and not self.detector_file:
            raise ValueError("file detector source needs detector_file")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.k is not None and not 1 <= self.k <= self.n_items:
            raise ValueError(f"k={self.k} must lie in [1, n_items={self.n_items}]")

    def replace(self, **changes) -> "EnvironmentSpec":
        return EnvironmentSpec(**{**asdict(self), **changes})


@dataclass(frozen=True)
class Stopping:
    """Early stop when every belief is within ``delta`` of 0 or 1, or total entropy < ``epsilon``."""

    delta: float | None = None
    epsilon: float | None = None

    def reached(self, beliefs: np.ndarray, total_entropy: float) -> bool:
        if self.delta is not None and np.all((beliefs <= self.delta) | (beliefs >= 1.0 - self.delta)):
            return True
        return self.epsilon is not None and total_entropy < self.epsilon


@dataclass
class RoundRecord:
    beliefs: np.ndarray  # before the round
    mapping: np.ndarray
    agent_tpr: np.ndarray
    agent_fpr: np.ndarray
    outcomes: np.ndarray


@dataclass
class RunResult:
    accuracy: np.ndarray  # Accuracy@k after each round, 0/1
    entropy: np.ndarray  # total belief entropy after each round
    converged_at: int | None = None  # 1-based round at which stopping fired
    final_beliefs: np.ndarray | None = None
    history: list | None = None


@dataclass
class StrategySeries:
    mean_accuracy: np.ndarray
    std_error: np.ndarray
    mean_entropy: np.ndarray


@dataclass
class AggregateResult:
    series: dict  # StrategyKind value -> StrategySeries
    runs: int
    iterations: int
    config: dict = field(default_factory=dict)

    def rows(self):
        """``(strategy, iteration, mean_accuracy, std_error, mean_entropy)`` tuples, iteration 1-based."""
        for name, s in self.series.items():
            for t in range(self.iterations):
                yield name, t + 1, float(s.mean_accuracy[t]), float(s.std_error[t]), float(s.mean_entropy[t])


@dataclass
class Environment:
    tpr: np.ndarray
    fpr: np.ndarray
    truth: GroundTruth
    uniforms: np.ndarray  # (iterations, n_items)


def gen_detectors(spec: EnvironmentSpec, rng: np.random.Generator) -> list:
    n = spec.n_items
    if spec.detector_source == "uniform":
        tpr, fpr = rng.random(n), rng.random(n)
    elif spec.detector_source == "beta":
        tpr = rng.beta(spec.alpha, spec.alpha, n)
        fpr = rng.beta(spec.alpha, spec.alpha, n)
    else:
        return pad_detectors(load_profiles(spec.detector_file), n)
    return arrays_to_profiles(tpr, fpr)


def gen_ground_truth(n: int, k: int | None, rng: np.random.Generator) -> GroundTruth:
    if n < 1:
        raise ValueError("n must be >= 1")
    if k is None:
        k = int(rng.integers(1, math.isqrt(n) + 1))
    elif not 1 <= k <= n:
        raise ValueError(f"k={k} is outside [1, {n}]")
    states = np.zeros(n, dtype=np.int8)
    states[rng.choice(n, size=k, replace=False)] = 1
    return GroundTruth(states)


def _noisy(tpr, fpr, sigma, rng):
    return (np.clip(tpr + rng.normal(0.0, sigma, tpr.shape), 0.0, 1.0),
            np.clip(fpr + rng.normal(0.0, sigma, fpr.shape), 0.0, 1.0))


def inject_noise(detectors, sigma: float, rng: np.random.Generator) -> list:
    """Agent-visible profiles: each rate plus N(0, sigma^2), clamped to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return list(detectors)
    return arrays_to_profiles(*_noisy(*profiles_to_arrays(detectors), sigma, rng))


def accuracy_at_k(beliefs, truth: GroundTruth) -> int:
    b = beliefs.beliefs if isinstance(beliefs, BeliefState) else np.asarray(beliefs, dtype=float)
    if b.size != truth.states.size:
        raise ValueError("beliefs and truth differ in length")
    top = np.argsort(-b, kind="stable")[: truth.k]
    return int(np.all(truth.states[top] == 1))


def build_environment(spec: EnvironmentSpec, iterations: int, rng: np.random.Generator) -> Environment:
    tpr, fpr = profiles_to_arrays(gen_detectors(spec, rng))
    truth = gen_ground_truth(spec.n_items, spec.k, rng)
    return Environment(tpr, fpr, truth, rng.random((iterations, spec.n_items)))


def run_on_environment(env: Environment, strategy: StrategyKind, iterations: int,
                       policy_rng: np.random.Generator, noise_rng: np.random.Generator,
                       noise_sigma: float = 0.0, stopping: Stopping | None = None,
                       record_history: bool = False) -> RunResult:
    strategy = StrategyKind(strategy)
    n = env.truth.states.size
    z = env.truth.states == 1
    b = np.full(n, 0.5)
    ts = TsState.prior(n) if strategy is StrategyKind.THOMPSON_SAMPLING else None
    acc = np.zeros(iterations, dtype=np.int8)
    ent = np.zeros(iterations)
    history = [] if record_history else None
    converged_at = None

    for t in range(iterations):
        if converged_at is not None:
            acc[t], ent[t] = acc[t - 1], ent[t - 1]
            continue
        if strategy is StrategyKind.THOMPSON_SAMPLING:
            # same draw as ts_assign; the agent also updates beliefs under the sampled rates
            a_tpr, a_fpr = ts.sample_rates(policy_rng)
            assignment = hungarian_ig_assign(b, (a_tpr, a_fpr))
        else:
            if noise_sigma > 0:
                a_tpr, a_fpr = _noisy(env.tpr, env.fpr, noise_sigma, noise_rng)
            else:
                a_tpr, a_fpr = env.tpr, env.fpr
            if strategy is StrategyKind.GOLD_PANNING:
                assignment = gp_assign(b, (a_tpr, a_fpr))
            elif strategy is StrategyKind.HUNGARIAN_IG:
                assignment = hungarian_ig_assign(b, (a_tpr, a_fpr))
            else:
                assignment = psc_assign(n, policy_rng)
        j = assignment.mapping
        p_one = np.where(z, env.tpr[j], env.fpr[j])
        o = (env.uniforms[t] < p_one).astype(np.int8)
        if record_history:
            history.append(RoundRecord(b.copy(), j.copy(), np.asarray(a_tpr).copy(),
                                       np.asarray(a_fpr).copy(), o.copy()))
        b = np.clip(posterior(b, a_tpr[j], a_fpr[j], o), BELIEF_CLAMP, 1.0 - BELIEF_CLAMP)
        if ts is not None:
            ts = ts_update(ts, assignment, ObservationVector(o), b)
        acc[t] = accuracy_at_k(b, env.truth)
        ent[t] = float(np.sum(_entropy_unchecked(b)))
        if stopping is not None and stopping.reached(b, ent[t]):
            converged_at = t + 1
    return RunResult(acc, ent, converged_at, b, history)


def run_trial(spec: EnvironmentSpec, strategy, iterations: int, stopping: Stopping | None = None,
              rng: np.random.Generator | None = None, record_history: bool = False) -> RunResult:
    """One standalone trial; the environment and all randomness come from ``rng``."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    env = build_environment(spec, iterations, rng)
    return run_on_environment(env, strategy, iterations, rng, rng, spec.noise_sigma, stopping,
                              record_history)


def run_seeds(master_seed: int, strategy, run_index: int):
    """``(environment, policy, noise)`` seed sequences for one paired run."""
    env = np.random.SeedSequence(master_seed, spawn_key=(ENV_STREAM, run_index))
    strat = np.random.SeedSequence(master_seed, spawn_key=(1 + StrategyKind(strategy).index, run_index))
    policy, noise = strat.spawn(2)
    return env, policy, noise


def _run_chunk(args):
    spec, strategies, iterations, run_indices, master_seed, stopping = args
    acc = {s: np.zeros((len(run_indices), iterations)) for s in strategies}
    ent = {s: np.zeros((len(run_indices), iterations)) for s in strategies}
    for row, r in enumerate(run_indices):
        env_seq = np.random.SeedSequence(master_seed, spawn_key=(ENV_STREAM, r))
        env = build_environment(spec, iterations, np.random.default_rng(env_seq))
        for s in strategies:
            _, policy, noise = run_seeds(master_seed, s, r)
            res = run_on_environment(env, s, iterations, np.random.default_rng(policy),
                                     np.random.default_rng(noise), spec.noise_sigma, stopping)
            acc[s][row] = res.accuracy
            ent[s][row] = res.entropy
    return acc, ent


def run_experiment(spec: EnvironmentSpec, strategies, iterations: int = 20, runs: int = 2000,
                   master_seed: int | None = None, parallelism: int = 1,
                   stopping: Stopping | None = None) -> AggregateResult:
    """Paired Monte Carlo comparison of ``strategies`` on ``runs`` shared environments."""
    if runs < 1 or iterations < 1:
        raise ValueError("runs and iterations must be >= 1")
    strategies = [StrategyKind(s) for s in strategies]
    if not strategies:
        raise ValueError("no strategies given")
    master_seed = spec.seed if master_seed is None else master_seed
    parallelism = max(1, min(parallelism, runs))
    chunks = [list(c) for c in np.array_split(np.arange(runs), parallelism)]
    jobs = [(spec, strategies, iterations, c, master_seed, stopping) for c in chunks if c]
    if parallelism == 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(_run_chunk, jobs))

    series = {}
    for s in strategies:
        acc = np.concatenate([p[0][s] for p in parts])
        ent = np.concatenate([p[1][s] for p in parts])
        se = acc.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(iterations)
        series[s.value] = StrategySeries(acc.mean(axis=0), se, ent.mean(axis=0))
    config = {**asdict(spec), "strategies": [s.value for s in strategies], "iterations": iterations,
              "runs": runs, "master_seed": master_seed,
              "stopping": None if stopping is None else asdict(stopping)}
    return AggregateResult(series, runs, iterations, config)


def sweep_noise(base: EnvironmentSpec, sigmas=DEFAULT_SIGMAS, strategies=(StrategyKind.GOLD_PANNING,),
                **kwargs) -> dict:
    """``{sigma: AggregateResult}``; environments are shared across noise levels."""
    return {float(s): run_experiment(base.replace(noise_sigma=float(s)), strategies, **kwargs)
            for s in sigmas}


def sweep_concentration(base: EnvironmentSpec, alphas=DEFAULT_ALPHAS,
                        strategies=(StrategyKind.GOLD_PANNING, StrategyKind.PSC), **kwargs) -> dict:
    """``{alpha: AggregateResult}`` with detectors drawn from Beta(alpha, alpha)."""
    return {float(a): run_experiment(base.replace(detector_source="beta", alpha=float(a)), strategies,
                                     **kwargs)
            for a in alphas}


def expected_next_entropy(beliefs, mapping, tpr, fpr) -> float:
    """Exact E[total entropy after one round], enumerating both outcomes per item.

    Outcome probabilities use the same rates as the update, i.e. the agent's model.
    """
    b = np.asarray(beliefs, dtype=float)
    t, f = np.asarray(tpr)[mapping], np.asarray(fpr)[mapping]
    p1 = f + b * (t - f)
    h1 = _entropy_unchecked(posterior(b, t, f, np.ones_like(b, dtype=int)))
    h0 = _entropy_unchecked(posterior(b, t, f, np.zeros_like(b, dtype=int)))
    return float(np.sum(p1 * h1 + (1.0 - p1) * h0))
