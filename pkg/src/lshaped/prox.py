"""Proximal master subproblem: min model(x) + (rho/2)||x - center||^2 over X.

Solved exactly (KKT residual <= tol) via a primal active-set method on
the epigraph form

    min  theta + (rho/2)||x - center||^2
    s.t. theta >= cut_j(x) for every retained cut, x in X.

Each working-set subproblem is an equality-constrained QP, strictly
convex in x and linear in theta; the multipliers of the active cuts form
a convex combination, which is exactly the optimality certificate
``rho (center - x*) in d(model)(x*) + N(x*; X)`` the tests check.
Exactness matters here: the inexact-proximal-gap recursion asserted on
every inner iteration is only guaranteed for the true prox minimiser.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, IterationLimit, NumericalBreakdown
from .bundle import BundleModel

_INF = float("inf")


@dataclass
class Region:
    """First-stage feasible set: rows with senses plus variable bounds."""

    A: np.ndarray
    senses: list
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @classmethod
    def from_problem(cls, problem) -> "Region":
        return cls(problem.A, list(problem.senses), problem.rhs, problem.lb, problem.ub)


@dataclass
class ProxResult:
    """Minimiser of the proximal subproblem plus diagnostics."""

    x: np.ndarray
    model_value: float
    prox_objective: float
    delta_tilde: float
    cut_multipliers: np.ndarray
    active: list = field(default_factory=list)
    iterations: int = 0


def _assemble(model: BundleModel, region: Region):
    """Inequalities C z <= d over z = (x, theta), equalities (Ceq, deq)."""
    n = len(region.lb)
    rows_C, rows_d, labels = [], [], []
    for j, cut in enumerate(model.cuts):
        row = np.zeros(n + 1)
        row[:n] = cut.slope
        row[n] = -1.0
        rows_C.append(row)
        rows_d.append(float(cut.slope @ cut.anchor - cut.value))
        labels.append(("cut", j))
    eq_C, eq_d = [], []
    for i in range(region.A.shape[0] if region.A.size else 0):
        row = np.zeros(n + 1)
        row[:n] = region.A[i]
        if region.senses[i] == "<=":
            rows_C.append(row)
            rows_d.append(float(region.rhs[i]))
            labels.append(("row", i))
        elif region.senses[i] == ">=":
            rows_C.append(-row)
            rows_d.append(-float(region.rhs[i]))
            labels.append(("row", i))
        else:
            eq_C.append(row)
            eq_d.append(float(region.rhs[i]))
    for t in range(n):
        if np.isfinite(region.ub[t]):
            row = np.zeros(n + 1)
            row[t] = 1.0
            rows_C.append(row)
            rows_d.append(float(region.ub[t]))
            labels.append(("ub", t))
        if np.isfinite(region.lb[t]):
            row = np.zeros(n + 1)
            row[t] = -1.0
            rows_C.append(row)
            rows_d.append(-float(region.lb[t]))
            labels.append(("lb", t))
    C = np.array(rows_C) if rows_C else np.zeros((0, n + 1))
    d = np.array(rows_d)
    Ceq = np.array(eq_C) if eq_C else np.zeros((0, n + 1))
    deq = np.array(eq_d) if eq_d else np.zeros(0)
    return C, d, Ceq, deq, labels


def _solve_eqp(n, rho, center, C_act, d_act):
    """KKT solve of the working-set QP; returns (z, multipliers)."""
    na = C_act.shape[0]
    size = n + 1 + na
    M = np.zeros((size, size))
    rhs = np.zeros(size)
    M[:n, :n] = rho * np.eye(n)
    rhs[:n] = rho * center
    # stationarity in theta: 1 + sum lambda_i * c_theta_i = 0
    M[n, n + 1 :] = C_act[:, n]
    rhs[n] = -1.0
    M[: n, n + 1 :] = C_act[:, :n].T
    M[n + 1 :, : n + 1] = C_act
    rhs[n + 1 :] = d_act
    try:
        sol = np.linalg.solve(M, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if not np.all(np.isfinite(sol)):
            raise NumericalBreakdown("singular KKT system in prox step")
    return sol[: n + 1], sol[n + 1 :]


def solve_prox_step(
    model: BundleModel,
    x_center,
    rho: float,
    region: Region,
    tol: float = 1e-9,
    max_iter: int | None = None,
    x_start=None,
) -> ProxResult:
    """Exact proximal step on the current bundle model.

    The center must be feasible for the region (it is a previous iterate).
    ``x_start`` warm-starts the active set from a feasible point, usually
    the previous trial when the model grew by one refinement round.
    Deterministic: ties in blocking and dropping break to lowest index.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not model.cuts:
        raise ValueError("bundle must hold at least one cut")
    x_center = np.asarray(x_center, dtype=float)
    n = len(x_center)
    C, d, Ceq, deq, labels = _assemble(model, region)
    neq = Ceq.shape[0]
    ncut = len(model.cuts)
    if max_iter is None:
        max_iter = 50 * (len(labels) + neq + n) + 100

    x0 = x_center if x_start is None else np.asarray(x_start, dtype=float)
    z = np.concatenate([x0, [model.evaluate(x0)]])
    resid0 = C @ z - d if len(d) else np.zeros(0)
    if resid0.size and resid0.max() > 1e-7 * (1.0 + np.abs(z).max()):
        if x_start is not None:
            return solve_prox_step(model, x_center, rho, region, tol=tol, max_iter=max_iter)
        raise Infeasible("prox center violates the feasible region")

    vals = model.evaluate_cuts(x0)
    start_cut = int(np.argmax(vals))
    work = [start_cut]  # indices into C/labels; cut rows come first

    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise IterationLimit("active-set prox solver exceeded iteration cap")
        C_act = np.vstack([C[work], Ceq]) if neq else C[work]
        d_act = np.concatenate([d[work], deq]) if neq else d[work]
        z_hat, mult = _solve_eqp(n, rho, x_center, C_act, d_act)
        p = z_hat - z
        if np.abs(p).max() <= 1e-11 * (1.0 + np.abs(z).max()):
            lam = mult[: len(work)]
            if lam.size == 0 or lam.min() >= -1e-9:
                z = z_hat
                break
            worst = int(np.argmin(lam))
            # lowest constraint index among near-worst ties
            close = np.flatnonzero(lam <= lam[worst] + 1e-12)
            drop = min(work[i] for i in close)
            work.remove(drop)
            continue
        # blocking-constraint ratio test over inactive inequalities
        alpha = 1.0
        blocking = -1
        if len(d):
            Cp = C @ p
            resid = d - C @ z
            for i in range(len(d)):
                if i in work:
                    continue
                if Cp[i] > 1e-13:
                    a_i = resid[i] / Cp[i]
                    if a_i < alpha - 1e-14:
                        alpha = max(a_i, 0.0)
                        blocking = i
        z = z + alpha * p
        if blocking >= 0:
            work.append(blocking)
        # alpha == 1 with no blocking: next EQP solve verifies optimality

    x = z[:n]
    theta = float(z[n])
    lam_full = np.zeros(ncut)
    lam = mult[: len(work)]
    for wi, li in zip(work, lam):
        if wi < ncut:
            lam_full[wi] = li
    _check_kkt(model, region, x_center, rho, z, C, d, Ceq, deq, work, mult, tol)
    model_value = model.evaluate(x)
    prox_obj = model_value + 0.5 * rho * float(np.sum((x - x_center) ** 2))
    return ProxResult(
        x=x,
        model_value=model_value,
        prox_objective=prox_obj,
        delta_tilde=model.center_value - prox_obj,
        cut_multipliers=lam_full,
        active=[labels[i] for i in sorted(work)],
        iterations=it,
    )


def _check_kkt(model, region, center, rho, z, C, d, Ceq, deq, work, mult, tol):
    n = len(center)
    scale = 1.0 + abs(z[n]) + float(np.abs(z[:n]).max(initial=0.0))
    # primal feasibility
    if len(d):
        viol = (C @ z - d).max()
        if viol > tol * scale + 1e-12:
            raise NumericalBreakdown(f"prox primal violation {viol:.2e}")
    if Ceq.shape[0]:
        viol = np.abs(Ceq @ z - deq).max()
        if viol > tol * scale + 1e-12:
            raise NumericalBreakdown(f"prox equality violation {viol:.2e}")
    # stationarity
    C_act = np.vstack([C[work], Ceq]) if Ceq.shape[0] else C[work]
    grad = np.concatenate([rho * (z[:n] - center), [1.0]])
    station = grad + C_act.T @ mult
    if np.abs(station).max() > tol * (1.0 + rho * scale) + 1e-12:
        raise NumericalBreakdown(f"prox stationarity residual {np.abs(station).max():.2e}")
    lam = mult[: len(work)]
    if lam.size and lam.min() < -1e-8:
        raise NumericalBreakdown("negative multiplier at claimed optimum")
