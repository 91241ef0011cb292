"""Scenario sampling and the inexact objective/subgradient estimator.

Given a sample set S_k, the estimator returns

    fhat(x) = c'x + sum_i w_i Q(x; xi_i)
    ghat(x) = c  - sum_i w_i T(xi_i)' U(x; xi_i)

with uniform weights 1/|S_k| for sampled sets, or the true probabilities
in exact (full enumeration) mode.  Sampling uses a counter-based
generator keyed by (seed, outer index), so any sample set can be
regenerated bit-exactly, and aggregation always runs in fixed scenario
order so results do not depend on how solves are parallelised.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BadParameter
from .instance import DEFAULT_ENUM_CAP, ScenarioDistribution, TwoStageProblem
from .recourse import SecondStageEngine

# stream tags keep RNG streams for different purposes disjoint
TAG_SOLVE, TAG_EVAL, TAG_SAA, TAG_NOISE = 0, 1, 2, 3

_BLOCK = 64  # scenarios per warm-start chain; fixed so results are thread-count invariant


def _rng(seed: int, k: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(k), int(tag)])))


@dataclass
class SampleSet:
    """Scenario draw for one outer iteration (or an exact enumeration)."""

    scenarios: list
    weights: np.ndarray
    seed: int
    k: int
    exact: bool = False

    @property
    def size(self) -> int:
        return len(self.scenarios)


def draw_sample_set(
    distribution: ScenarioDistribution,
    size: int,
    seed: int,
    k: int,
    tag: int = TAG_SOLVE,
) -> SampleSet:
    """I.i.d. draw with replacement; regeneratable from (seed, k, size)."""
    if size < 1:
        raise BadParameter("sample size must be >= 1")
    rng = _rng(seed, k, tag)
    scenarios = distribution.sample(rng, size)
    w = np.full(size, 1.0 / size)
    for s in scenarios:
        s.weight = 1.0 / size
    return SampleSet(scenarios=scenarios, weights=w, seed=seed, k=k, exact=False)


def exact_sample_set(problem: TwoStageProblem, cap: int = DEFAULT_ENUM_CAP) -> SampleSet:
    """Full-support enumeration with true probabilities (exact oracle)."""
    scenarios = problem.distribution.enumerate(cap=cap)
    w = np.array([s.weight for s in scenarios])
    return SampleSet(scenarios=scenarios, weights=w, seed=-1, k=-1, exact=True)


@dataclass
class Estimate:
    """Value and subgradient of the sampled objective at one point."""

    value: float
    subgrad: np.ndarray
    per_scenario: np.ndarray
    x: np.ndarray

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.subgrad))


@dataclass
class NoiseModel:
    """Known or estimated oracle error bounds (Assumption-style)."""

    eps1: float = 0.0
    eps2: float = 0.0
    sigma: float | None = None

    def ebar(self, beta: float) -> float:
        # always recomputed from (eps1, eps2); never cached
        return (beta + 1.0) * (self.eps1 + self.eps2)


class Estimator:
    """Evaluates estimates for one problem, reusing warm bases per block.

    Scenario solves are fanned out over fixed 64-scenario blocks; each
    block owns its warm-start chain, so the result is identical for any
    worker count.
    """

    def __init__(self, problem: TwoStageProblem, workers: int = 1):
        self.problem = problem
        self.workers = max(1, int(workers))
        self._engines: dict[int, SecondStageEngine] = {}

    def _engine(self, block: int) -> SecondStageEngine:
        eng = self._engines.get(block)
        if eng is None:
            eng = SecondStageEngine(self.problem)
            self._engines[block] = eng
        return eng

    def _solve_block(self, block_idx, scenarios, x):
        eng = self._engine(block_idx)
        vals = np.empty(len(scenarios))
        subs = np.zeros(self.problem.n)
        raw_subs = []
        for i, scen in enumerate(scenarios):
            res = eng.solve(scen, x)
            vals[i] = res.value
            raw_subs.append(res.subgrad)
        return vals, raw_subs

    def estimate(self, sample_set: SampleSet, x) -> Estimate:
        x = np.asarray(x, dtype=float)
        scen = sample_set.scenarios
        blocks = [
            (bi, scen[bi * _BLOCK : (bi + 1) * _BLOCK])
            for bi in range((len(scen) + _BLOCK - 1) // _BLOCK)
        ]
        if self.workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda b: self._solve_block(b[0], b[1], x), blocks))
        else:
            results = [self._solve_block(bi, chunk, x) for bi, chunk in blocks]
        per = np.concatenate([vals for vals, _ in results]) if results else np.zeros(0)
        # fixed-order weighted reduction
        value = float(self.problem.c @ x)
        sub = self.problem.c.astype(float).copy()
        w = sample_set.weights
        idx = 0
        for vals, raw_subs in results:
            for v, g in zip(vals, raw_subs):
                value += w[idx] * v
                sub += w[idx] * g
                idx += 1
        return Estimate(value=value, subgrad=sub, per_scenario=per, x=x.copy())


def estimate(problem: TwoStageProblem, sample_set: SampleSet, x, workers: int = 1) -> Estimate:
    """One-shot estimate (no engine reuse across calls)."""
    return Estimator(problem, workers=workers).estimate(sample_set, x)


def exact_objective(problem: TwoStageProblem, x, cap: int = DEFAULT_ENUM_CAP) -> float:
    """True f(x) by full enumeration; the exact oracle used in tests."""
    return estimate(problem, exact_sample_set(problem, cap=cap), x).value


def exhaustive_noise_bounds(
    problem: TwoStageProblem,
    sample_size: int,
    grid,
    resamples: int = 64,
    seed: int = 0,
    cap: int = DEFAULT_ENUM_CAP,
) -> tuple[float, float]:
    """Empirical (eps1, eps2) estimates over a grid and many resamples.

    eps1 bounds f - fhat from above, eps2 bounds fhat - f.  These are
    observed maxima, not certificates.
    """
    full = exact_sample_set(problem, cap=cap)
    est = Estimator(problem)
    eps1 = 0.0
    eps2 = 0.0
    for gi, x in enumerate(grid):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f_exact = est.estimate(full, x).value
        for rep in range(resamples):
            ss = draw_sample_set(problem.distribution, sample_size, seed, rep + resamples * gi, tag=TAG_NOISE)
            fhat = est.estimate(ss, x).value
            eps1 = max(eps1, f_exact - fhat)
            eps2 = max(eps2, fhat - f_exact)
    return eps1, eps2


def scenario_value_variance(problem: TwoStageProblem, x, cap: int = DEFAULT_ENUM_CAP) -> float:
    """Exact Var[f(x; xi)] over the (enumerable) scenario distribution."""
    ss = exact_sample_set(problem, cap=cap)
    est = Estimator(problem).estimate(ss, x)
    fx = problem.c @ np.asarray(x, dtype=float) + est.per_scenario
    mean = float(ss.weights @ fx)
    return float(ss.weights @ (fx - mean) ** 2)
