"""Problem model for two-stage stochastic LPs with fixed recourse.

A :class:`TwoStageProblem` is

    min  c'x + E_xi[ Q(x; xi) ]     over  lb <= x <= ub,  first-stage rows
    Q(x; xi) = min { q(xi)'y : W y = h(xi) - T(xi) x, y >= 0 }

where the recourse matrix W is the same in every scenario and the random
data (T, q, h) is a sparse set of overrides on deterministic baselines.
The module also carries the instance generators, feasibility/boundedness
validation, and the extensive-form reformulation used as a correctness
oracle in tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadInput,
    BadParameter,
    BadProbabilities,
    EmptyFeasibleSet,
    EnumerationCapExceeded,
    TooLarge,
    UnboundedFirstStage,
)
from .lp import LinearProgram, solve_lp

_INF = float("inf")

PROB_TOL = 1e-9
DEFAULT_ENUM_CAP = 10**6

# A stochastic entry address: target is "T" (row, col), "q" (col) or "h" (row).
Override = tuple  # (target, row, col, value)


@dataclass
class Scenario:
    """Sparse overrides on the (T, q, h) baselines plus a weight."""

    overrides: list
    weight: float = 1.0

    def apply(self, problem: "TwoStageProblem"):
        """Materialise (T, q, h); never mutates the baselines."""
        T = problem.base_T.copy()
        q = problem.base_q.copy()
        h = problem.base_h.copy()
        for target, row, col, value in self.overrides:
            if target == "T":
                T[row, col] = value
            elif target == "q":
                q[col] = value
            elif target == "h":
                h[row] = value
            else:
                raise BadInput(f"unknown override target {target!r}")
        return T, q, h

    def key(self):
        return tuple((t, r, c, v) for t, r, c, v in self.overrides)


def _check_probs(probs, what: str):
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise BadProbabilities(f"{what}: empty probability table")
    if np.any(p < -PROB_TOL):
        raise BadProbabilities(f"{what}: negative probability")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise BadProbabilities(f"{what}: probabilities sum to {p.sum():.12g}, not 1")
    return p


class ScenarioDistribution:
    """Base class; concrete forms mirror SMPS STOCH content."""

    def scenario_count(self) -> int:
        raise NotImplementedError

    def validate(self) -> None:
        raise NotImplementedError

    def addresses(self):
        raise NotImplementedError

    def enumerate(self, cap: int = DEFAULT_ENUM_CAP):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int):
        raise NotImplementedError


@dataclass
class FiniteList(ScenarioDistribution):
    """Explicit scenario list; weights are probabilities summing to one."""

    scenarios: list

    def scenario_count(self) -> int:
        return len(self.scenarios)

    def validate(self) -> None:
        _check_probs([s.weight for s in self.scenarios], "scenario list")

    def addresses(self):
        for s in self.scenarios:
            for t, r, c, _ in s.overrides:
                yield t, r, c

    def enumerate(self, cap: int = DEFAULT_ENUM_CAP):
        if len(self.scenarios) > cap:
            raise EnumerationCapExceeded(f"{len(self.scenarios)} scenarios exceed cap {cap}")
        return [Scenario(list(s.overrides), s.weight) for s in self.scenarios]

    def sample(self, rng, size: int):
        cum = np.cumsum([s.weight for s in self.scenarios])
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return [Scenario(list(self.scenarios[i].overrides), 1.0) for i in idx]


@dataclass
class IndependentDiscrete(ScenarioDistribution):
    """Per-entry marginal tables; entries are sampled independently.

    Each marginal is ``(address, values, probs)`` with ``address`` a
    ``(target, row, col)`` triple.
    """

    marginals: list

    def scenario_count(self) -> int:
        count = 1
        for _, values, _ in self.marginals:
            count *= len(values)
        return count

    def validate(self) -> None:
        seen = set()
        for addr, values, probs in self.marginals:
            if len(values) != len(probs):
                raise BadProbabilities(f"marginal {addr}: value/prob length mismatch")
            _check_probs(probs, f"marginal {addr}")
            if addr in seen:
                raise BadInput(f"duplicate marginal for {addr}")
            seen.add(addr)

    def addresses(self):
        for addr, _, _ in self.marginals:
            yield addr

    def enumerate(self, cap: int = DEFAULT_ENUM_CAP):
        if self.scenario_count() > cap:
            raise EnumerationCapExceeded(
                f"{self.scenario_count()} joint scenarios exceed cap {cap}"
            )
        out = []
        tables = [
            [((addr[0], addr[1], addr[2], v), p) for v, p in zip(values, probs)]
            for addr, values, probs in self.marginals
        ]
        for combo in itertools.product(*tables):
            weight = 1.0
            ov = []
            for entry, p in combo:
                ov.append(entry)
                weight *= p
            out.append(Scenario(ov, weight))
        return out

    def sample(self, rng, size: int):
        cums = [np.cumsum(probs) for _, _, probs in self.marginals]
        for cum in cums:
            cum[-1] = 1.0
        draws = rng.random((size, len(self.marginals)))
        out = []
        for row in draws:
            ov = []
            for (addr, values, _), cum, u in zip(self.marginals, cums, row):
                i = int(np.searchsorted(cum, u, side="right"))
                ov.append((addr[0], addr[1], addr[2], values[i]))
            out.append(Scenario(ov, 1.0))
        return out


@dataclass
class BlockDiscrete(ScenarioDistribution):
    """Joint blocks of overrides; blocks are independent of each other.

    Each block is ``(realizations, probs)`` where ``realizations`` is a
    list of override lists.
    """

    blocks: list

    def scenario_count(self) -> int:
        count = 1
        for realizations, _ in self.blocks:
            count *= len(realizations)
        return count

    def validate(self) -> None:
        for i, (realizations, probs) in enumerate(self.blocks):
            if len(realizations) != len(probs):
                raise BadProbabilities(f"block {i}: realization/prob length mismatch")
            _check_probs(probs, f"block {i}")

    def addresses(self):
        for realizations, _ in self.blocks:
            for real in realizations:
                for t, r, c, _ in real:
                    yield t, r, c

    def enumerate(self, cap: int = DEFAULT_ENUM_CAP):
        if self.scenario_count() > cap:
            raise EnumerationCapExceeded(
                f"{self.scenario_count()} joint scenarios exceed cap {cap}"
            )
        out = []
        tables = [list(zip(realizations, probs)) for realizations, probs in self.blocks]
        for combo in itertools.product(*tables):
            weight = 1.0
            ov = []
            for real, p in combo:
                ov.extend(real)
                weight *= p
            out.append(Scenario(ov, weight))
        return out

    def sample(self, rng, size: int):
        cums = [np.cumsum(probs) for _, probs in self.blocks]
        for cum in cums:
            cum[-1] = 1.0
        draws = rng.random((size, len(self.blocks)))
        out = []
        for row in draws:
            ov = []
            for (realizations, _), cum, u in zip(self.blocks, cums, row):
                i = int(np.searchsorted(cum, u, side="right"))
                ov.extend(realizations[i])
            out.append(Scenario(ov, 1.0))
        return out


@dataclass
class TwoStageProblem:
    """Immutable-after-construction two-stage SLP with fixed recourse."""

    c: np.ndarray
    A: np.ndarray          # first-stage rows (m x n)
    senses: list
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    W: np.ndarray          # recourse matrix (r x l), scenario independent
    base_T: np.ndarray     # r x n
    base_q: np.ndarray     # length l
    base_h: np.ndarray     # length r
    distribution: ScenarioDistribution
    name: str = "instance"
    second_stage_structural: int | None = None
    first_stage_names: list | None = None
    second_stage_names: list | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = len(self.c)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n) if np.size(self.A) else np.zeros((0, n))
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        self.base_q = np.asarray(self.base_q, dtype=float)
        self.base_h = np.asarray(self.base_h, dtype=float)
        r, l = self.W.shape
        self.base_T = np.asarray(self.base_T, dtype=float).reshape(r, n)
        if len(self.base_q) != l or len(self.base_h) != r:
            raise BadInput("second-stage dimension mismatch")
        if len(self.lb) != n or len(self.ub) != n or len(self.rhs) != self.A.shape[0]:
            raise BadInput("first-stage dimension mismatch")
        if self.second_stage_structural is None:
            self.second_stage_structural = l
        self._validation = None

    # dimensions, following the usual (n, m, l, r) naming
    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.W.shape[1]

    @property
    def r(self) -> int:
        return self.W.shape[0]

    def check_addresses(self):
        for target, row, col in self.distribution.addresses():
            if target == "T":
                ok = 0 <= row < self.r and 0 <= col < self.n
            elif target == "q":
                ok = 0 <= col < self.l
            elif target == "h":
                ok = 0 <= row < self.r
            else:
                ok = False
            if not ok:
                raise BadInput(f"stochastic address ({target},{row},{col}) out of range")

    def validation(self) -> "ValidationReport":
        if self._validation is None:
            self._validation = validate(self)
        return self._validation


@dataclass
class ValidationReport:
    feasible: bool
    x_feasible: np.ndarray
    diameter: float
    lb_tight: np.ndarray
    ub_tight: np.ndarray
    scenario_count: int
    messages: list = field(default_factory=list)


def tighten_bounds(A, senses, rhs, lb, ub, passes: int = 3):
    """Derive implied finite bounds from single rows (simple presolve)."""
    lb = lb.copy()
    ub = ub.copy()
    m, n = A.shape if A.size else (0, len(lb))
    for _ in range(passes):
        changed = False
        for i in range(m):
            row = A[i]
            nz = np.flatnonzero(np.abs(row) > 0)
            if nz.size == 0:
                continue
            for bound_kind in ("upper", "lower"):
                # express the row as sum <= b (upper) or sum >= b (lower)
                if bound_kind == "upper" and senses[i] not in ("<=", "="):
                    continue
                if bound_kind == "lower" and senses[i] not in (">=", "="):
                    continue
                # minimum (resp. maximum) activity contribution per term
                contrib = np.empty(nz.size)
                for t, j in enumerate(nz):
                    a = row[j]
                    if bound_kind == "upper":
                        contrib[t] = a * lb[j] if a > 0 else a * ub[j]
                    else:
                        contrib[t] = a * ub[j] if a > 0 else a * lb[j]
                inf_mask = ~np.isfinite(contrib)
                n_inf = int(inf_mask.sum())
                if n_inf > 1:
                    continue
                total = contrib[~inf_mask].sum()
                for t, j in enumerate(nz):
                    if n_inf == 1 and not inf_mask[t]:
                        continue
                    rest = total if inf_mask[t] else total - contrib[t]
                    a = row[j]
                    if bound_kind == "upper":
                        limit = (rhs[i] - rest) / a
                        if a > 0 and limit < ub[j] - 1e-12:
                            ub[j] = limit
                            changed = True
                        elif a < 0 and limit > lb[j] + 1e-12:
                            lb[j] = limit
                            changed = True
                    else:
                        limit = (rhs[i] - rest) / a
                        if a > 0 and limit > lb[j] + 1e-12:
                            lb[j] = limit
                            changed = True
                        elif a < 0 and limit < ub[j] - 1e-12:
                            ub[j] = limit
                            changed = True
        if not changed:
            break
    return lb, ub


def validate(problem: TwoStageProblem) -> ValidationReport:
    """Check non-empty bounded X, probability tables, and report D.

    The diameter is the over-estimate ``||ub - lb||`` from (tightened)
    variable bounds; an over-estimate is safe everywhere D is used.
    """
    problem.distribution.validate()
    problem.check_addresses()

    lb_t, ub_t = tighten_bounds(problem.A, problem.senses, problem.rhs, problem.lb, problem.ub)
    bad = [j for j in range(problem.n) if not (np.isfinite(lb_t[j]) and np.isfinite(ub_t[j]))]
    if bad:
        raise UnboundedFirstStage(
            f"variables {bad} have no finite bounds after tightening"
        )
    feas = solve_lp(
        LinearProgram(
            c=np.zeros(problem.n),
            A=problem.A,
            senses=list(problem.senses),
            rhs=problem.rhs,
            lb=problem.lb,
            ub=problem.ub,
        )
    )
    if feas.status != "optimal":
        raise EmptyFeasibleSet("first-stage feasible region is empty")
    diameter = float(np.linalg.norm(ub_t - lb_t))
    return ValidationReport(
        feasible=True,
        x_feasible=feas.x,
        diameter=diameter,
        lb_tight=lb_t,
        ub_tight=ub_t,
        scenario_count=problem.distribution.scenario_count(),
    )


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def gen_inventory(
    n: int,
    p,
    h,
    b: float,
    s,
    r: float,
    customer_table=None,
    customer_marginals=None,
    seed=None,
) -> TwoStageProblem:
    """Newsvendor-style inventory instance.

    First stage buys ``x`` under a budget ``p'x <= b``; the second stage
    sells ``y`` with ``0 <= y <= x`` and ``y <= r * customers``.  Exactly
    one of ``customer_table`` (list of ``(prob, customer_vector)``) or
    ``customer_marginals`` (per-item ``(values, probs)``) must be given.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if len(p) == 1 and n > 1:
        p = np.full(n, p[0])
    if len(h) == 1 and n > 1:
        h = np.full(n, h[0])
    if len(s) == 1 and n > 1:
        s = np.full(n, s[0])
    if n < 1 or len(p) != n or len(h) != n or len(s) != n:
        raise BadParameter("price vectors must have length n")
    if np.any(p <= 0) or np.any(h <= 0) or np.any(s <= 0):
        raise BadParameter("p, h, s must be positive componentwise")
    if not (0 < r < 1):
        raise BadParameter("sale ratio r must lie in (0, 1)")
    if b <= 0:
        raise BadParameter("budget b must be positive")
    if (customer_table is None) == (customer_marginals is None):
        raise BadParameter("give exactly one of customer_table / customer_marginals")

    l = 3 * n   # y, slack for y<=x, slack for y<=r*c
    rr = 2 * n
    W = np.zeros((rr, l))
    T = np.zeros((rr, n))
    q = np.zeros(l)
    hbase = np.zeros(rr)
    q[:n] = -s
    for i in range(n):
        W[i, i] = 1.0
        W[i, n + i] = 1.0
        T[i, i] = -1.0          # y_i + u_i - x_i = 0
        W[n + i, i] = 1.0
        W[n + i, 2 * n + i] = 1.0  # y_i + v_i = r*c_i

    if customer_table is not None:
        scen = []
        first = None
        for prob, cvec in customer_table:
            cvec = np.atleast_1d(np.asarray(cvec, dtype=float))
            if len(cvec) != n:
                raise BadParameter("customer vectors must have length n")
            if np.any(cvec < 0):
                raise BadParameter("customer counts must be nonnegative")
            if first is None:
                first = cvec
            scen.append(
                Scenario([("h", n + i, 0, r * cvec[i]) for i in range(n)], float(prob))
            )
        hbase[n:] = r * first
        dist = FiniteList(scen)
    else:
        if len(customer_marginals) != n:
            raise BadParameter("need one customer marginal per item")
        marginals = []
        for i, (values, probs) in enumerate(customer_marginals):
            values = [float(v) for v in values]
            if any(v < 0 for v in values):
                raise BadParameter("customer counts must be nonnegative")
            marginals.append((("h", n + i, 0), [r * v for v in values], [float(pp) for pp in probs]))
            hbase[n + i] = r * values[0]
        dist = IndependentDiscrete(marginals)
    dist.validate()

    return TwoStageProblem(
        c=p + h,
        A=p.reshape(1, n),
        senses=["<="],
        rhs=np.array([float(b)]),
        lb=np.zeros(n),
        ub=b / p,
        W=W,
        base_T=T,
        base_q=q,
        base_h=hbase,
        distribution=dist,
        name=f"inventory{n}",
        second_stage_structural=n,
    )


def tiny_inventory() -> TwoStageProblem:
    """The one-item instance used throughout the tests (f* = -0.9 at x* = 1)."""
    return gen_inventory(
        n=1, p=1.0, h=0.1, b=10.0, s=2.0, r=0.5,
        customer_table=[(0.5, [2.0]), (0.5, [4.0])],
    )


def gen_random(
    seed: int,
    n: int = 4,
    r_rows: int = 3,
    l_extra: int = 3,
    n_scenarios: int = 10,
    stochastic_q: bool = False,
    stochastic_t: bool = False,
) -> TwoStageProblem:
    """Random bounded instance with guaranteed complete recourse.

    The recourse matrix carries +/- identity penalty blocks with positive
    costs, so every scenario LP is feasible and bounded for any x.
    """
    if n < 1 or r_rows < 1 or n_scenarios < 1:
        raise BadParameter("dimensions must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 91]))
    ub = rng.uniform(1.0, 5.0, n).round(3)
    c = rng.uniform(-2.0, 2.0, n).round(3)
    W0 = rng.normal(size=(r_rows, l_extra)).round(3)
    W = np.hstack([W0, np.eye(r_rows), -np.eye(r_rows)])
    q = np.concatenate(
        [rng.uniform(0.0, 2.0, l_extra).round(3),
         rng.uniform(0.5, 2.0, r_rows).round(3),
         rng.uniform(0.5, 2.0, r_rows).round(3)]
    )
    T = (rng.normal(size=(r_rows, n)) / np.sqrt(n)).round(3)
    hbase = rng.uniform(0.0, 1.0, r_rows).round(3)

    scen = []
    probs = rng.random(n_scenarios) + 0.1
    probs = probs / probs.sum()
    # exact weights that sum to one
    probs = np.round(probs, 9)
    probs[-1] = 1.0 - probs[:-1].sum()
    for k in range(n_scenarios):
        ov = [("h", i, 0, float(hbase[i] + round(rng.uniform(-0.5, 0.5), 3))) for i in range(r_rows)]
        if stochastic_q:
            j = int(rng.integers(0, l_extra))
            ov.append(("q", 0, j, float(round(rng.uniform(0.0, 2.0), 3))))
        if stochastic_t:
            ov.append(
                ("T", int(rng.integers(0, r_rows)), int(rng.integers(0, n)),
                 float(round(rng.normal(), 3)))
            )
        scen.append(Scenario(ov, float(probs[k])))
    return TwoStageProblem(
        c=c,
        A=np.zeros((0, n)),
        senses=[],
        rhs=np.zeros(0),
        lb=np.zeros(n),
        ub=ub,
        W=W,
        base_T=T,
        base_q=q,
        base_h=hbase,
        distribution=FiniteList(scen),
        name=f"random{seed}",
        second_stage_structural=l_extra,
    )


GENERATORS = {
    "inventory": gen_inventory,
    "tiny-inventory": lambda **kw: tiny_inventory(),
    "random": gen_random,
}


# --------------------------------------------------------------------------
# extensive form
# --------------------------------------------------------------------------

def build_extensive_form(
    problem: TwoStageProblem,
    scenarios=None,
    cap: int = 50_000,
) -> LinearProgram:
    """Single LP over (x, y_1, ..., y_S): the deterministic equivalent.

    Variable ordering is x first, then scenario blocks in input order.
    """
    if scenarios is None:
        dist = problem.distribution
        scenarios = dist.enumerate(cap=cap)
    if len(scenarios) == 0:
        raise BadInput("empty scenario list")
    weights = np.array([s.weight for s in scenarios], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise BadInput(f"scenario weights sum to {weights.sum():.12g}, not 1")

    S = len(scenarios)
    n, l, r = problem.n, problem.l, problem.r
    ncols = n + S * l
    if ncols > cap:
        raise TooLarge(f"extensive form has {ncols} columns (cap {cap})")
    m = problem.m
    nrows = m + S * r
    A = np.zeros((nrows, ncols))
    senses = list(problem.senses)
    rhs = np.zeros(nrows)
    c = np.zeros(ncols)
    c[:n] = problem.c
    if m:
        A[:m, :n] = problem.A
        rhs[:m] = problem.rhs
    lb = np.concatenate([problem.lb, np.zeros(S * l)])
    ub = np.concatenate([problem.ub, np.full(S * l, _INF)])
    for sidx, scen in enumerate(scenarios):
        T, q, h = scen.apply(problem)
        row0 = m + sidx * r
        col0 = n + sidx * l
        A[row0 : row0 + r, :n] = T
        A[row0 : row0 + r, col0 : col0 + l] = problem.W
        rhs[row0 : row0 + r] = h
        senses.extend(["="] * r)
        c[col0 : col0 + l] = weights[sidx] * q
    return LinearProgram(c=c, A=A, senses=senses, rhs=rhs, lb=lb, ub=ub, name=f"{problem.name}-ext")
