"""Second-stage (recourse) LP solves with basis reuse.

For a fixed first-stage point the scenario LPs share the matrix W and
differ only in costs and right-hand sides, so consecutive solves restart
from the previous optimal basis: a dual-simplex restart when only the
right-hand side moved, a primal restart when costs moved.  Chains are
deterministic because callers feed scenarios in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SecondStageInfeasible, SecondStageUnbounded
from .instance import Scenario, TwoStageProblem
from .lp import SimplexSolver

_INF = float("inf")


@dataclass
class SecondStageResult:
    """Optimal value Q(x; xi), recourse solution, duals and -T(xi)'u."""

    value: float
    y: np.ndarray
    dual: np.ndarray
    subgrad: np.ndarray


class SecondStageEngine:
    """Reusable scenario-LP solver bound to one problem."""

    def __init__(self, problem: TwoStageProblem):
        self.problem = problem
        r, l = problem.r, problem.l
        self._solver = SimplexSolver(
            problem.W,
            problem.base_h,
            problem.base_q,
            np.zeros(l),
            np.full(l, _INF),
            scale=True,
        )
        self._have_basis = False
        self._current_q = problem.base_q.copy()
        self._x = None
        self._Tx_base = None

    def _set_x(self, x: np.ndarray):
        if self._x is None or not np.array_equal(self._x, x):
            self._x = np.array(x, dtype=float, copy=True)
            self._Tx_base = self.problem.base_T @ self._x

    def _assemble(self, scenario: Scenario):
        """Scenario cost vector and rhs h(xi) - T(xi) x from sparse overrides."""
        p = self.problem
        q = None
        rhs = p.base_h - self._Tx_base
        for target, row, col, value in scenario.overrides:
            if target == "h":
                rhs[row] += value - p.base_h[row]
            elif target == "T":
                rhs[row] -= (value - p.base_T[row, col]) * self._x[col]
            elif target == "q":
                if q is None:
                    q = p.base_q.copy()
                q[col] = value
        return (q if q is not None else p.base_q), rhs

    def solve(self, scenario: Scenario, x: np.ndarray) -> SecondStageResult:
        self._set_x(np.asarray(x, dtype=float))
        q, rhs = self._assemble(scenario)
        s = self._solver
        if not self._have_basis:
            s.b = rhs
            s.c = q.copy()
            status = s.solve()
        else:
            if not np.array_equal(q, self._current_q):
                status = s.resolve_cost(q)
                if status == "optimal":
                    status = s.resolve_rhs(rhs)
                else:
                    s.b = rhs
                    status = s.solve()
            else:
                status = s.resolve_rhs(rhs)
        self._current_q = np.array(q, copy=True)
        self._have_basis = status == "optimal"
        if status == "infeasible":
            raise SecondStageInfeasible(
                "scenario second stage infeasible (relatively complete recourse violated)",
                scenario=scenario,
            )
        if status == "unbounded":
            raise SecondStageUnbounded("scenario second stage unbounded below")
        u = s.duals
        sub = -(self.problem.base_T.T @ u)
        for target, row, col, value in scenario.overrides:
            if target == "T":
                sub[col] -= (value - self.problem.base_T[row, col]) * u[row]
        return SecondStageResult(value=float(s.objective), y=s.x.copy(), dual=u.copy(), subgrad=sub)


def solve_second_stage(problem: TwoStageProblem, scenario: Scenario, x) -> SecondStageResult:
    """One-shot scenario solve (no basis reuse)."""
    return SecondStageEngine(problem).solve(scenario, x)
