"""Policy-sweep benchmarking: solve under each policy/seed, then score
the recorded tail iterates on a fresh evaluation sample.

One row per policy setting: mean and 95% t-interval of the best
evaluated objective over the seeds, mirroring how solver comparisons are
usually tabulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import BadInput
from .instance import TwoStageProblem
from .saa import evaluate_candidates
from .solver import Constant, Optimal, Practical, SolverConfig, run


@dataclass
class BenchRow:
    policy: str
    param: float | None
    values: list
    mean: float
    half_width: float | None


@dataclass
class BenchReport:
    rows: list
    best: BenchRow
    seeds: list = None  # evaluation re-draws its sample per seed; recorded here


def _summary(policy: str, param, values) -> BenchRow:
    mean = float(np.mean(values))
    if len(values) >= 2:
        sd = float(np.std(values, ddof=1))
        tq = float(stats.t.ppf(0.975, len(values) - 1))
        half = tq * sd / math.sqrt(len(values))
    else:
        half = None
    return BenchRow(policy=policy, param=param, values=[float(v) for v in values], mean=mean, half_width=half)


def bench_sweep(
    problem: TwoStageProblem,
    base: SolverConfig,
    constant_rhos=(),
    practical_cps=(),
    f_star: float | None = None,
    seeds: int = 10,
    eval_size: int = 1000,
    workers: int = 1,
) -> BenchReport:
    """Sweep policies x seeds; empty policy set is a usage error."""
    policies = [("constant", r, Constant(r)) for r in constant_rhos]
    policies += [("practical", cp, Practical(cp)) for cp in practical_cps]
    if f_star is not None:
        policies.append(("optimal", None, Optimal(f_star=f_star)))
    if not policies:
        raise BadInput("empty policy set for bench sweep")
    if seeds < 1:
        raise BadInput("need at least one seed")
    rows = []
    for name, param, policy in policies:
        values = []
        for s in range(seeds):
            cfg = replace(base, policy=policy, seed=base.seed + s)
            result = run(problem, cfg)
            ev = evaluate_candidates(
                problem, result.last_iterates, eval_size=eval_size,
                seed=base.seed + s, workers=workers, exact=base.sample_size == 0,
            )
            values.append(ev.best_value)
        rows.append(_summary(name, param, values))
    best = min(rows, key=lambda r: r.mean)
    return BenchReport(rows=rows, best=best, seeds=[base.seed + s for s in range(seeds)])
