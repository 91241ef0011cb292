"""Two-loop regularized L-shaped driver.

Outer iteration k draws a sample set, builds estimates, and seeds the
bundle with one cut at the current center; inner iterations alternate a
proximal step on the bundle model with the sufficient-decrease test

    beta * (fhat(center) - model(trial)) <= fhat(center) - fhat(trial).

A pass accepts the trial as the next center (serious step); a failure
refines the model with a gradient and an aggregate cut (null step).
The module also houses the step-size policies, the computable inexact
proximal gap written to the trace, the exact proximal gap used as a test
oracle, and the closed-form iteration-bound calculators.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from collections import deque

import numpy as np

from .bundle import init_bundle
from .errors import BadParameter, MissingParameter, SolverError
from .instance import DEFAULT_ENUM_CAP, TwoStageProblem
from .oracle import Estimator, NoiseModel, draw_sample_set, exact_sample_set
from .prox import Region, solve_prox_step

# ---------------------------------------------------------------------------
# step-size policies
# ---------------------------------------------------------------------------


@dataclass
class Constant:
    rho: float

    def check(self):
        if self.rho <= 0:
            raise BadParameter("constant step size must be positive")


@dataclass
class Optimal:
    """Polyak-style step: rho_k = (fhat_k(center) - eps2 - f*) / D^2."""

    f_star: float
    eps2: float = 0.0
    D: float | None = None

    def check(self):
        pass


@dataclass
class Practical:
    """Approximates f* by the previous outer iteration's final model value."""

    c_p: float

    def check(self):
        if self.c_p <= 0:
            raise BadParameter("practical policy constant must be positive")


@dataclass
class SharpConstant:
    """rho = beta * mu^2 * v / (2 ebar) for mu-sharp objectives."""

    mu: float
    v: float
    ebar: float

    def check(self):
        if not (0 < self.v < 1):
            raise BadParameter("sharp-constant v must lie in (0, 1)")
        if self.mu <= 0 or self.ebar <= 0:
            raise BadParameter("sharp-constant needs mu > 0 and ebar > 0")


@dataclass
class SharpOptimal:
    """rho_k = mu^2 / (fhat_k(center) - eps2 - f*)."""

    mu: float
    f_star: float
    eps2: float = 0.0

    def check(self):
        if self.mu <= 0:
            raise BadParameter("sharp-optimal needs mu > 0")


Policy = Constant | Optimal | Practical | SharpConstant | SharpOptimal


def next_step_size(policy: Policy, k: int, fhat_center: float, beta: float,
                   D: float | None = None, last_model_at_center: float | None = None):
    """Step size for outer iteration k, or None to terminate the run.

    Termination (None) certifies near-optimality for the policies that
    know f*: the center already satisfies f(center) <= f* + eps1 + eps2.
    """
    if isinstance(policy, Constant):
        return policy.rho
    if isinstance(policy, Optimal):
        Dv = policy.D if policy.D is not None else D
        if Dv is None or Dv <= 0:
            raise MissingParameter("optimal policy needs the feasible-set diameter D")
        rho = (fhat_center - policy.eps2 - policy.f_star) / Dv**2
        return rho if rho > 0 else None
    if isinstance(policy, Practical):
        if k != 0 and last_model_at_center is not None and fhat_center > last_model_at_center:
            return policy.c_p * (fhat_center - last_model_at_center)
        return policy.c_p
    if isinstance(policy, SharpConstant):
        return beta * policy.mu**2 * policy.v / (2.0 * policy.ebar)
    if isinstance(policy, SharpOptimal):
        denom = fhat_center - policy.eps2 - policy.f_star
        if denom <= 0:
            return None
        return policy.mu**2 / denom
    raise BadParameter(f"unknown policy {policy!r}")


def serious_test(fhat_center: float, fhat_trial: float, model_trial: float, beta: float) -> bool:
    """Sufficient decay test; exact ties count as serious."""
    return beta * (fhat_center - model_trial) <= fhat_center - fhat_trial


def _with_context(exc: SolverError, k: int, t: int) -> SolverError:
    """Re-wrap a propagated error with (k, t) coordinates."""
    where = f"outer k={k}" + ("" if t < 0 else f", inner t={t}")
    new = type(exc)(f"{where}: {exc}")
    if hasattr(exc, "scenario"):
        new.scenario = exc.scenario
    return new


# ---------------------------------------------------------------------------
# configuration / trace
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    beta: float = 0.5
    sample_size: int = 100          # 0 -> exact oracle (full enumeration)
    policy: Policy = field(default_factory=lambda: Constant(1.0))
    memory: int = 5
    max_outer: int = 1000
    max_total_inner: int = 1000
    max_inner_per_outer: int | None = None
    wall_time_s: float | None = None
    stop_tol: float = 1e-9
    seed: int = 0
    diagnostics: int = 1
    workers: int = 1
    x0: list | None = None
    enum_cap: int = DEFAULT_ENUM_CAP
    noise: NoiseModel | None = None
    grad_bound: float | None = None  # user-supplied G for certified per-outer caps

    def check(self):
        if not (0.0 < self.beta < 1.0):
            raise BadParameter(f"beta must lie strictly in (0,1), got {self.beta}")
        if self.sample_size < 0:
            raise BadParameter("sample size must be >= 0 (0 means exact oracle)")
        if self.max_outer < 1 or self.max_total_inner < 1:
            raise BadParameter("budgets must be positive")
        if self.memory < 1:
            raise BadParameter("bundle memory must be >= 1")
        self.policy.check()


@dataclass
class InnerRecord:
    k: int
    t: int
    kind: str
    rho: float
    fhat_center: float
    fhat_trial: float
    model_trial: float
    delta_tilde: float
    step_norm: float
    cum_inner: int
    wall_ms: float


@dataclass
class OuterRecord:
    k: int
    sample_seed: int
    T_k: int


TRACE_COLUMNS = "k,t,kind,rho,fhat_center,fhat_trial,model_trial,delta_tilde,step_norm,cum_inner,wall_ms"


@dataclass
class RunTrace:
    inner: list = field(default_factory=list)
    outer: list = field(default_factory=list)
    centers: list = field(default_factory=list)  # x_{k,0} at each outer start

    def to_csv(self) -> str:
        lines = [TRACE_COLUMNS]
        for r in self.inner:
            lines.append(
                f"{r.k},{r.t},{r.kind},{r.rho!r},{r.fhat_center!r},{r.fhat_trial!r},"
                f"{r.model_trial!r},{r.delta_tilde!r},{r.step_norm!r},{r.cum_inner},{r.wall_ms!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    status: str  # 'converged' | 'terminated_policy' | 'budget_exhausted'
    best_x: np.ndarray
    best_value: float
    trace: RunTrace
    last_iterates: list
    summary: dict


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------


def run(problem: TwoStageProblem, config: SolverConfig) -> RunResult:
    """Execute the two-loop scheme; see the module docstring.

    Stops when (a) the inexact proximal gap at a serious step falls below
    ``stop_tol`` (a computable optimality surrogate), (b) a policy that
    knows f* certifies near-optimality, or (c) a budget is exhausted.
    """
    config.check()
    report = problem.validation()
    D = report.diameter
    region = Region.from_problem(problem)
    estimator = Estimator(problem, workers=config.workers)
    exact = config.sample_size == 0
    exact_set = exact_sample_set(problem, cap=config.enum_cap) if exact else None

    x_center = np.asarray(config.x0, dtype=float) if config.x0 is not None else report.x_feasible.copy()
    trace = RunTrace()
    last_iterates: deque = deque(maxlen=50)
    violations: list = []
    best_value = math.inf
    best_x = x_center.copy()
    g_emp = 0.0
    cum_inner = 0
    serious_count = 0
    status = "budget_exhausted"
    reason = "outer budget exhausted"
    last_model_at_center = None
    t_start = time.perf_counter()

    ebar = config.noise.ebar(config.beta) if config.noise is not None else None
    per_outer_cap = config.max_inner_per_outer
    k = 0
    stop = False
    while not stop:
        if k >= config.max_outer:
            reason = "outer budget exhausted"
            break
        sample_set = exact_set if exact else draw_sample_set(
            problem.distribution, config.sample_size, config.seed, k
        )
        trace.centers.append(x_center.copy())
        try:
            est_center = estimator.estimate(sample_set, x_center)
        except SolverError as exc:
            raise _with_context(exc, k, -1) from exc
        g_emp = max(g_emp, est_center.grad_norm)
        if est_center.value < best_value:
            best_value, best_x = est_center.value, x_center.copy()

        rho = next_step_size(
            config.policy, k, est_center.value, config.beta,
            D=D, last_model_at_center=last_model_at_center,
        )
        if rho is None:
            status = "terminated_policy"
            reason = "policy certified near-optimality (rho_k <= 0)"
            break
        if rho <= 1e-14:
            # an adaptive policy drove rho to underflow scale: the center is
            # near-optimal and the prox subproblem would be ill-conditioned
            status = "terminated_policy"
            reason = f"step size underflow (rho_k = {rho:.3e})"
            break

        cap_k = per_outer_cap
        if cap_k is None and config.grad_bound is not None and ebar:
            cap_k = inner_loop_bound(config.grad_bound, rho, config.beta, math.inf, 0.0, 0.0, ebar_floor=ebar)

        model = init_bundle(x_center, est_center, memory=config.memory, outer=k)
        prev_dt = None
        prev_trial = None
        t = 0
        while True:
            if cum_inner >= config.max_total_inner:
                reason = "total inner budget exhausted"
                stop = True
                break
            if cap_k is not None and t >= cap_k:
                reason = f"per-outer inner cap {cap_k} hit at k={k}"
                stop = True
                break
            if config.wall_time_s is not None and time.perf_counter() - t_start > config.wall_time_s:
                reason = "wall-time budget exhausted"
                stop = True
                break
            t_step = time.perf_counter()
            res = solve_prox_step(model, x_center, rho, region, tol=1e-9, x_start=prev_trial)
            prev_trial = res.x
            try:
                est_trial = estimator.estimate(sample_set, res.x)
            except SolverError as exc:
                raise _with_context(exc, k, t) from exc
            g_emp = max(g_emp, est_trial.grad_norm)
            serious = serious_test(est_center.value, est_trial.value, res.model_value, config.beta)
            cum_inner += 1
            wall_ms = (time.perf_counter() - t_step) * 1e3
            step_norm = float(np.linalg.norm(res.x - x_center))
            trace.inner.append(
                InnerRecord(
                    k=k, t=t, kind="serious" if serious else "null", rho=float(rho),
                    fhat_center=float(est_center.value), fhat_trial=float(est_trial.value),
                    model_trial=float(res.model_value), delta_tilde=float(res.delta_tilde),
                    step_norm=step_norm, cum_inner=cum_inner, wall_ms=round(wall_ms, 3),
                )
            )
            last_iterates.append(res.x.copy())

            if config.diagnostics >= 1:
                _check_invariants(
                    violations, k, t, res.delta_tilde, prev_dt,
                    est_center, est_trial, res.model_value, rho, config.beta, serious,
                )
            prev_dt = res.delta_tilde

            if serious:
                serious_count += 1
                trace.outer.append(OuterRecord(k=k, sample_seed=config.seed, T_k=t + 1))
                last_model_at_center = res.model_value
                x_center = res.x.copy()
                if est_trial.value < best_value:
                    best_value, best_x = est_trial.value, x_center.copy()
                if res.delta_tilde <= config.stop_tol:
                    status = "converged"
                    reason = f"delta_tilde {res.delta_tilde:.3e} <= stop_tol at a serious step"
                    stop = True
                break
            changed = model.add_cuts(res.x, est_trial.value, est_trial.subgrad, rho, res.model_value, birth=t + 1)
            if not changed:
                # Both cuts were duplicates, so the model is stationary and
                # further inner steps would repeat verbatim.  A real null
                # step strictly improves the model at the trial, so this
                # only happens at roundoff scale; stop there.
                scale = 1e-10 * (1.0 + abs(est_center.value))
                if res.delta_tilde <= max(config.stop_tol, scale):
                    status = "converged"
                    reason = "bundle model stationary at machine precision"
                    stop = True
                    break
                raise SolverError(
                    f"bundle refused both cuts at k={k}, t={t} with delta_tilde={res.delta_tilde:.3e}"
                )
            t += 1
        k += 1

    wall_total = (time.perf_counter() - t_start) * 1e3
    summary = {
        "status": status,
        "reason": reason,
        "best_value": best_value,
        "best_x": [float(v) for v in best_x],
        "outer_count": k,
        "inner_count": cum_inner,
        "serious_count": serious_count,
        "null_count": cum_inner - serious_count,
        "beta": config.beta,
        "sample_size": config.sample_size,
        "policy": type(config.policy).__name__,
        "policy_params": {kk: vv for kk, vv in vars(config.policy).items()},
        "seed": config.seed,
        "memory": config.memory,
        "stop_tol": config.stop_tol,
        "empirical_G": g_emp,
        "diameter": D,
        "diameter_source": "variable-bound over-estimate",
        "diagnostic_violations": violations,
        "wall_ms_total": round(wall_total, 3),
    }
    return RunResult(
        status=status,
        best_x=best_x,
        best_value=best_value,
        trace=trace,
        last_iterates=list(last_iterates),
        summary=summary,
    )


def _check_invariants(violations, k, t, dt, prev_dt, est_center, est_trial, model_trial, rho, beta, serious):
    tol = 1e-9
    if t == 0:
        bound = est_center.grad_norm**2 / (2.0 * rho)
        if dt > bound + tol:
            violations.append({"kind": "delta0_bound", "k": k, "t": t, "excess": dt - bound})
    elif prev_dt is not None and dt > prev_dt + tol:
        violations.append({"kind": "delta_monotone", "k": k, "t": t, "excess": dt - prev_dt})
    if serious:
        lhs = est_trial.value
        rhs = est_center.value - beta * (est_center.value - model_trial)
        if lhs > rhs + tol:
            violations.append({"kind": "serious_decrease", "k": k, "t": t, "excess": lhs - rhs})
    else:
        gap = est_trial.value - model_trial
        if not gap > (1.0 - beta) * dt - tol:
            violations.append({"kind": "null_step_gap", "k": k, "t": t, "excess": (1.0 - beta) * dt - gap})


# ---------------------------------------------------------------------------
# exact proximal gap (test oracle)
# ---------------------------------------------------------------------------


def exact_proximal_gap(
    problem: TwoStageProblem,
    x_center,
    rho: float,
    tol: float = 1e-9,
    cap: int = DEFAULT_ENUM_CAP,
    max_rounds: int = 500,
    with_argmin: bool = False,
):
    """Delta_k = f(center) - min_x { f(x) + (rho/2)||x - center||^2 }.

    Uses full-scenario estimates and refines an unlimited-memory bundle
    until the prox value is certified within ``tol``.  With
    ``with_argmin`` the best prox point found is returned alongside.
    """
    x_center = np.asarray(x_center, dtype=float)
    full = exact_sample_set(problem, cap=cap)
    estimator = Estimator(problem)
    region = Region.from_problem(problem)
    est_c = estimator.estimate(full, x_center)
    model = init_bundle(x_center, est_c, memory=10**9)
    ub = est_c.value  # F(center) with zero prox term
    arg = x_center.copy()
    lb = -math.inf
    for _ in range(max_rounds):
        res = solve_prox_step(model, x_center, rho, region, tol=1e-10)
        lb = res.prox_objective
        est_t = estimator.estimate(full, res.x)
        F_trial = est_t.value + 0.5 * rho * float(np.sum((res.x - x_center) ** 2))
        if F_trial < ub:
            ub = F_trial
            arg = res.x.copy()
        if ub - lb <= tol:
            break
        model.add_cuts(res.x, est_t.value, est_t.subgrad, rho, res.model_value, birth=len(model.cuts))
    else:
        raise SolverError("exact proximal gap did not converge")
    delta = est_c.value - 0.5 * (ub + lb)
    return (delta, arg) if with_argmin else delta


# ---------------------------------------------------------------------------
# theory-bound calculators
# ---------------------------------------------------------------------------


def inner_loop_bound(G: float, rho: float, beta: float, Delta: float,
                     eps1: float, eps2: float, ebar_floor: float | None = None) -> int | float:
    """Per-outer inner-iteration bound ceil(8G^2/(rho(1-b)^2 d) - 16/(1-b)^2) + 1.

    ``d`` is Delta - eps1 - eps2, or ``ebar_floor`` when supplied (the
    worst-case substitution used for aggregate bounds).
    """
    denom = ebar_floor if ebar_floor is not None else Delta - eps1 - eps2
    if denom is None or denom <= 0 or not math.isfinite(denom):
        return math.inf
    raw = 8.0 * G**2 / (rho * (1.0 - beta) ** 2 * denom) - 16.0 / (1.0 - beta) ** 2
    return max(1, math.ceil(raw) + 1)


@dataclass
class TheoryBounds:
    """Closed-form neighborhood radii and iteration counts, per policy."""

    ebar: float
    exact_oracle_mode: bool
    delta_C: float | None = None
    K_C: int | None = None
    inner_per_outer_C: float | None = None
    total_inner_C: float | None = None
    delta_I: float | None = None
    K_I: int | None = None
    total_inner_I: float | None = None
    delta_SC: float | None = None
    K_SC: int | None = None
    total_inner_SC: float | None = None
    delta_SI: float | None = None
    K_SI: int | None = None
    total_inner_SI: float | None = None


def theory_bounds(
    G: float,
    D: float,
    eps1: float,
    eps2: float,
    beta: float,
    policy: Policy,
    f0: float,
    f_star: float,
    mu: float | None = None,
    v: float | None = None,
) -> TheoryBounds:
    """Evaluate the iteration-bound formulas for the supplied parameters.

    With eps1 = eps2 = 0 the neighborhood radii degenerate to zero and
    the counts are undefined; ``exact_oracle_mode`` flags that the
    per-outer bound should instead be evaluated with a measured proximal
    gap via :func:`inner_loop_bound`.
    """
    for name, val in (("G", G), ("D", D)):
        if val is None or val <= 0:
            raise MissingParameter(f"theory bounds need {name} > 0")
    if eps1 < 0 or eps2 < 0:
        raise BadParameter("noise bounds must be nonnegative")
    if not (0 < beta < 1):
        raise BadParameter("beta must lie in (0,1)")
    ebar = (beta + 1.0) * (eps1 + eps2)
    gap0 = f0 - f_star
    out = TheoryBounds(ebar=ebar, exact_oracle_mode=ebar == 0.0)
    if ebar == 0.0:
        out.delta_C = 0.0
        out.delta_I = 0.0
        out.delta_SC = 0.0
        out.delta_SI = 0.0
        return out

    # constant policy block (needs rho)
    if isinstance(policy, Constant):
        rho = policy.rho
        out.delta_C = max(4.0 * ebar / beta, math.sqrt(4.0 * ebar * rho / beta) * D)
        out.K_C = max(0, math.ceil((gap0 - out.delta_C) / ebar))
        out.inner_per_outer_C = inner_loop_bound(G, rho, beta, math.inf, 0, 0, ebar_floor=ebar)
        out.total_inner_C = out.inner_per_outer_C * out.K_C

    # optimal (Polyak-type) block
    out.delta_I = 4.0 * ebar / beta
    if gap0 <= out.delta_I:
        out.K_I = 0
    else:
        out.K_I = max(0, math.ceil(math.log(gap0 / out.delta_I) / -math.log(1.0 - beta / 4.0)))
    out.total_inner_I = 32.0 * G**2 * D**2 / (3.0 * (1.0 - beta) ** 2 * (2.0 - beta / 4.0) * ebar**2)

    if mu is not None and v is not None:
        if not (0 < v < 1):
            raise BadParameter("sharpness parameter v must lie in (0,1)")
        out.delta_SC = 4.0 * ebar / beta
        base = max(1, math.ceil((gap0 - 4.0 * ebar / beta) / ((1.0 / v - 1.0) * ebar)) + 1)
        per = math.ceil(16.0 / (1.0 - beta) ** 2 * (G**2 / ((1.0 - v) * mu**2) - 1.0)) + 1
        if v >= 0.5:
            out.K_SC = base
            out.total_inner_SC = base * per
        else:
            out.K_SC = base + math.ceil(-math.log(1.0 / v - 1.0) / math.log(1.0 - beta / 2.0)) + 1
            base2 = max(1, math.ceil((gap0 - 2.0 * ebar / (beta * v)) / ((1.0 / v - 1.0) * ebar)) + 1)
            out.total_inner_SC = base2 * per + 32.0 * G**2 / (mu**2 * v * beta * (1.0 - beta) ** 2)
    if mu is not None:
        out.delta_SI = 4.0 * ebar / beta
        num = gap0 - 3.0 * ebar / beta
        if num <= ebar / beta:
            out.K_SI = 0
        else:
            out.K_SI = max(0, math.ceil(-math.log(num / (ebar / beta)) / math.log(1.0 - beta / 2.0)))
        per = 16.0 * G**2 / ((1.0 - beta) ** 2 * mu**2 * (1.0 - 2.0 * beta / (3.0 * (beta + 1.0))))
        out.total_inner_SI = per * out.K_SI
    return out
