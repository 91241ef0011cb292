"""SAA lower bounds, candidate evaluation, and the sample-plan calculator.

The lower-bound estimator solves many independent batch SAA problems as
extensive-form LPs: the expectation of a batch optimum never exceeds the
true optimum, so the batch mean (with a Student-t confidence interval)
is a statistically valid lower-bound estimate.  Candidate evaluation
scores a set of iterates on one shared fresh sample (common random
numbers keep the comparison variance down).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import BadInput, BadParameter
from .instance import TwoStageProblem, build_extensive_form
from .lp import SimplexSolver, ToleranceSet, _certify, solve_lp, to_standard_form
from .oracle import TAG_EVAL, TAG_SAA, Estimator, draw_sample_set, exact_sample_set

CONFIDENCE = 0.95


@dataclass
class BoundEstimate:
    """Mean and 95% CI of batch SAA optima (a lower-bound estimate)."""

    batch_values: list
    mean: float
    half_width: float | None
    batches: int
    batch_size: int
    seed: int

    def to_document(self) -> str:
        return json.dumps(
            {
                "format": "lshaped-bound-report",
                "version": 1,
                "confidence": CONFIDENCE,
                "mean": self.mean,
                "half_width": self.half_width,
                "batches": self.batches,
                "batch_size": self.batch_size,
                "seed": self.seed,
                "batch_values": [float(v) for v in self.batch_values],
            },
            indent=2,
        ) + "\n"


def saa_lower_bound(
    problem: TwoStageProblem,
    batches: int = 50,
    batch_size: int = 100,
    seed: int = 0,
    cap: int = 100_000,
) -> BoundEstimate:
    """Solve ``batches`` extensive-form SAA problems and summarise."""
    if batches < 1 or batch_size < 1:
        raise BadParameter("batches and batch_size must be positive")
    values = []
    # when scenarios only move h, the extensive matrix and costs are the
    # same in every batch: keep one solver and dual-simplex the new rhs
    reusable: SimplexSolver | None = None
    std = None
    tol = ToleranceSet()
    for b in range(batches):
        ss = draw_sample_set(problem.distribution, batch_size, seed, b, tag=TAG_SAA)
        h_only = all(ov[0] == "h" for s in ss.scenarios for ov in s.overrides)
        lp = build_extensive_form(problem, scenarios=ss.scenarios, cap=cap)
        if h_only:
            if reusable is None:
                std = to_standard_form(lp)
                A, bvec, c, lb, ub, n = std
                reusable = SimplexSolver(A, bvec, c, lb, ub)
                status = reusable.solve()
            else:
                status = reusable.resolve_rhs(lp.rhs)
            if status != "optimal":
                raise BadInput(f"batch {b} SAA problem is {status}")
            _certify(lp, reusable.x[: std[5]], reusable.x, reusable.duals,
                     reusable.reduced_costs, std[3], std[4], tol)
            values.append(float(lp.c @ reusable.x[: std[5]]))
        else:
            sol = solve_lp(lp)
            if not sol.optimal:
                raise BadInput(f"batch {b} SAA problem is {sol.status}")
            values.append(float(sol.objective))
    mean = float(np.mean(values))
    if batches >= 2:
        sd = float(np.std(values, ddof=1))
        tq = float(stats.t.ppf(0.5 + CONFIDENCE / 2.0, batches - 1))
        half = tq * sd / math.sqrt(batches)
    else:
        half = None
    return BoundEstimate(
        batch_values=values, mean=mean, half_width=half,
        batches=batches, batch_size=batch_size, seed=seed,
    )


@dataclass
class CandidateEvaluation:
    best_value: float
    best_index: int
    best_x: np.ndarray
    values: list


def evaluate_candidates(
    problem: TwoStageProblem,
    iterates,
    eval_size: int = 1000,
    seed: int = 0,
    workers: int = 1,
    exact: bool = False,
) -> CandidateEvaluation:
    """Score candidates on one shared fresh sample; lowest index wins ties.

    With ``exact=True`` the scoring enumerates the full scenario support
    instead of sampling (used when the solve itself ran exact-oracle).
    """
    iterates = list(iterates)
    if not iterates:
        raise BadInput("empty candidate list")
    if exact:
        ss = exact_sample_set(problem)
    else:
        ss = draw_sample_set(problem.distribution, eval_size, seed, 0, tag=TAG_EVAL)
    est = Estimator(problem, workers=workers)
    values = [est.estimate(ss, x).value for x in iterates]
    best_index = int(np.argmin(values))  # argmin returns the first minimum
    return CandidateEvaluation(
        best_value=float(values[best_index]),
        best_index=best_index,
        best_x=np.asarray(iterates[best_index], dtype=float).copy(),
        values=[float(v) for v in values],
    )


@dataclass
class SamplePlan:
    """Per-iteration sample size and budgets for a target gap delta_s.

    With probability at least 1 - zeta the run reaches an iterate within
    delta_s of optimal inside the predicted budgets.
    """

    zeta: float
    delta_s: float
    beta: float
    gap0: float
    sigma: float
    tau: float
    eps_tilde: float
    sample_size: int
    K_S: int
    inner_budget: float | None = None
    total_samples: float | None = None

    def to_document(self) -> str:
        return json.dumps(
            {"format": "lshaped-sample-plan", "version": 1, **{k: v for k, v in vars(self).items()}},
            indent=2,
        ) + "\n"


def sample_plan(
    zeta: float,
    delta_s: float,
    beta: float,
    gap0: float,
    sigma: float,
    G: float | None = None,
    D: float | None = None,
) -> SamplePlan:
    """Evaluate the high-probability sample-complexity closed forms."""
    if not (0 < zeta < 1) or not (0 < delta_s < 1):
        raise BadParameter("zeta and delta_s must lie in (0,1)")
    if gap0 <= 0 or sigma <= 0:
        raise BadParameter("gap0 and sigma must be positive")
    if not (0 < beta < 1):
        raise BadParameter("beta must lie in (0,1)")
    decay = 1.0 - beta / 4.0
    log_term = math.ceil(math.log(delta_s / gap0) / math.log(decay)) if delta_s < gap0 else 0
    tau = max(1.0, math.sqrt(2.0 * math.log(max(1, 6 * log_term) / zeta)))
    eps_tilde = beta * delta_s / (8.0 * (beta + 1.0) * tau)
    sample_size = max(1, math.ceil(sigma**2 / eps_tilde**2))
    K_S = max(0, math.ceil(math.log(gap0 / delta_s) / -math.log(decay))) if gap0 > delta_s else 0
    inner_budget = None
    total_samples = None
    if G is not None and D is not None:
        inner_budget = (
            256.0 * G**2 * D**2 * (beta + 1.0) ** 2
            / (3.0 * (1.0 - beta) ** 2 * (2.0 - beta / 4.0) * beta**2 * delta_s**2)
        )
        total_samples = max(
            inner_budget,
            16384.0 * sigma**2 * G**2 * D**2 * (beta + 1.0) ** 4 * tau**2
            / (3.0 * (1.0 - beta) ** 2 * (2.0 - beta / 4.0) * beta**4 * delta_s**4),
        )
    return SamplePlan(
        zeta=zeta, delta_s=delta_s, beta=beta, gap0=gap0, sigma=sigma,
        tau=tau, eps_tilde=eps_tilde, sample_size=sample_size, K_S=K_S,
        inner_budget=inner_budget, total_samples=total_samples,
    )
