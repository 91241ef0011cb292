"""Dense revised-simplex LP engine with dual extraction.

The solver works on an equality standard form (all rows ``Ax + s = b``
with bounded variables); :func:`solve_lp` converts a row system with
mixed senses by appending one slack per row.  The implementation is a
bounded-variable primal simplex with a phase-1 artificial start, Dantzig
pricing that falls back to Bland's rule when it stalls, an explicitly
maintained basis inverse with periodic refactorisation, and a dual
simplex restart path used to sweep scenario right-hand sides from a warm
basis.

Everything is deterministic: ties in pricing and ratio tests break
toward the lowest variable index, so identical input bytes produce
identical solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IterationLimit, NumericalBreakdown

_INF = float("inf")

# variable statuses
_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3


@dataclass
class ToleranceSet:
    """Certification tolerances (absolute on scaled data, gap relative)."""

    feas: float = 1e-8
    comp: float = 1e-8
    gap: float = 1e-8
    pivot: float = 1e-9


@dataclass
class LinearProgram:
    """Minimisation LP over a row system with senses and variable bounds."""

    c: np.ndarray
    A: np.ndarray
    senses: list  # '<=', '>=', '=' per row
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    name: str = "lp"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(len(self.rhs), -1) if len(self.rhs) else np.zeros((0, len(self.c)))
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m, n = self.A.shape
        if not (len(self.c) == n == len(self.lb) == len(self.ub) and len(self.senses) == m):
            raise ValueError("inconsistent LP dimensions")
        for arr in (self.c, self.A, self.rhs):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite LP data")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass
class LpSolution:
    """Status plus certified primal/dual information."""

    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _geometric_scaling(A: np.ndarray, rounds: int = 2):
    """Geometric-mean row/column equilibration factors for A."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if m == 0 or n == 0:
        return r, s
    B = np.abs(A)
    for _ in range(rounds):
        M = B * r[:, None] * s[None, :]
        with np.errstate(divide="ignore"):
            for i in range(m):
                nz = M[i][M[i] > 0]
                if nz.size:
                    r[i] /= np.sqrt(nz.max() * nz.min())
            M = B * r[:, None] * s[None, :]
            for j in range(n):
                nz = M[:, j][M[:, j] > 0]
                if nz.size:
                    s[j] /= np.sqrt(nz.max() * nz.min())
    return r, s


class SimplexSolver:
    """Bounded-variable revised simplex on ``Ax = b, lb <= x <= ub``.

    A solver instance is single-use per solve but supports warm restarts
    (:meth:`resolve_rhs`, :meth:`resolve_cost`) that reuse the optimal
    basis of the previous solve.
    """

    REFACTOR_EVERY = 64

    def __init__(self, A, b, c, lb, ub, scale: bool = True, max_iter: int | None = None):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.m, self.n = self.A.shape
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.asarray(c, dtype=float).copy()
        self.lb = np.asarray(lb, dtype=float).copy()
        self.ub = np.asarray(ub, dtype=float).copy()
        self.max_iter = max_iter if max_iter is not None else 50 * (self.m + self.n) + 200
        self.piv_tol = 1e-9
        self.dj_tol = 1e-9
        self.feas_tol = 1e-9

        if scale and self.m and self.n:
            self.row_scale, self.col_scale = _geometric_scaling(self.A)
        else:
            self.row_scale = np.ones(self.m)
            self.col_scale = np.ones(self.n)
        self.As = self.A * self.row_scale[:, None] * self.col_scale[None, :]

        # artificial columns are appended lazily on the first cold solve
        self._art_sign = np.ones(self.m)
        self.status = None
        self.basis = None
        self.vstat = None
        self.B_inv = None
        self.xB = None
        self._pivots_since_refactor = 0

    # -- scaled problem views ------------------------------------------------
    def _scaled(self):
        bs = self.b * self.row_scale
        cs = self.c * self.col_scale
        lbs = self.lb / self.col_scale
        ubs = self.ub / self.col_scale
        return bs, cs, lbs, ubs

    def _nonbasic_value(self, lbs, ubs, j):
        st = self.vstat[j]
        if st == _AT_LB:
            return lbs[j]
        if st == _AT_UB:
            return ubs[j]
        return 0.0

    def _nb_values(self, lbs, ubs):
        v = np.zeros(self.ntot)
        at_lb = self.vstat == _AT_LB
        at_ub = self.vstat == _AT_UB
        v[at_lb] = lbs[at_lb]
        v[at_ub] = ubs[at_ub]
        return v

    def _refactor(self, Afull, bs, lbs, ubs):
        B = Afull[:, self.basis]
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalBreakdown("singular basis matrix")
        v = self._nb_values(lbs, ubs)
        v[self.basis] = 0.0
        self.xB = self.B_inv @ (bs - Afull @ v)
        self._pivots_since_refactor = 0

    def _pivot_update(self, w, r):
        """Product-form update of B_inv after column enters in row r."""
        piv = w[r]
        if abs(piv) < 1e-13:
            raise NumericalBreakdown("vanishing pivot")
        row = self.B_inv[r] / piv
        corr = np.outer(w, row)
        corr[r] = 0.0
        self.B_inv -= corr
        self.B_inv[r] = row
        self._pivots_since_refactor += 1

    # -- core primal iterations ----------------------------------------------
    def _primal_loop(self, Afull, cc, bs, lbs, ubs, phase_one: bool):
        m = self.m
        iters = 0
        stall = 0
        bland = False
        stall_limit = 2 * (m + self.ntot)
        fixed = ubs - lbs <= 0
        while True:
            iters += 1
            if iters > self.max_iter:
                raise IterationLimit(f"primal simplex exceeded {self.max_iter} iterations")
            if self._pivots_since_refactor >= self.REFACTOR_EVERY:
                self._refactor(Afull, bs, lbs, ubs)

            y = cc[self.basis] @ self.B_inv
            d = cc - y @ Afull
            at_lb = self.vstat == _AT_LB
            at_ub = self.vstat == _AT_UB
            freev = self.vstat == _FREE
            viol = np.zeros(self.ntot)
            viol[at_lb] = -d[at_lb]
            viol[at_ub] = d[at_ub]
            viol[freev] = np.abs(d[freev])
            viol[fixed] = 0.0
            cand = viol > self.dj_tol
            if not cand.any():
                return "optimal", y, d
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                j = int(np.argmax(viol))
            t = 1.0 if (self.vstat[j] == _AT_LB or (self.vstat[j] == _FREE and d[j] < 0)) else -1.0

            w = self.B_inv @ Afull[:, j]
            tw = t * w
            # blocking ratios from basic variables
            lo = lbs[self.basis]
            hi = ubs[self.basis]
            ratios = np.full(m, _INF)
            dec = tw > self.piv_tol
            inc = tw < -self.piv_tol
            with np.errstate(invalid="ignore"):
                ratios[dec] = (self.xB[dec] - lo[dec]) / tw[dec]
                ratios[inc] = (self.xB[inc] - hi[inc]) / tw[inc]
            ratios[ratios < 0] = 0.0  # degenerate: do not step backwards
            own = ubs[j] - lbs[j]
            rmin = ratios.min() if m else _INF
            step = min(rmin, own)
            if step == _INF:
                return "unbounded", y, d

            if own <= rmin:
                # bound flip, no basis change
                self.xB -= own * tw
                self.vstat[j] = _AT_UB if self.vstat[j] == _AT_LB else _AT_LB
            else:
                close = np.flatnonzero(ratios <= rmin + 1e-12)
                # lowest leaving-variable index among ties (Bland-compatible)
                r = int(close[np.argmin(self.basis[close])])
                leave = self.basis[r]
                self.xB -= step * tw
                enter_val = self._nonbasic_value(lbs, ubs, j) + t * step
                self.xB[r] = enter_val
                self.vstat[leave] = _AT_LB if tw[r] > 0 else _AT_UB
                if not np.isfinite(lbs[leave]) and self.vstat[leave] == _AT_LB:
                    self.vstat[leave] = _FREE
                if not np.isfinite(ubs[leave]) and self.vstat[leave] == _AT_UB:
                    self.vstat[leave] = _FREE
                self.basis[r] = j
                self.vstat[j] = _BASIC
                self._pivot_update(w, r)
                if phase_one and leave >= self.n:
                    ubs[leave] = 0.0  # retire artificials for good

            if viol[j] * step <= 1e-12:
                stall += 1
                if stall > stall_limit:
                    bland = True
            else:
                stall = 0

    # -- cold solve ------------------------------------------------------------
    def solve(self) -> str:
        bs, cs, lbs, ubs = self._scaled()
        m, n = self.m, self.n
        self.ntot = n + m  # artificials appended
        Afull = np.hstack([self.As, np.zeros((m, m))])

        # initial nonbasic statuses for structural variables
        self.vstat = np.empty(self.ntot, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lbs[j]):
                self.vstat[j] = _AT_LB
            elif np.isfinite(ubs[j]):
                self.vstat[j] = _AT_UB
            else:
                self.vstat[j] = _FREE
        v = np.zeros(self.ntot)
        v[: n][self.vstat[:n] == _AT_LB] = lbs[: n][self.vstat[:n] == _AT_LB]
        v[: n][self.vstat[:n] == _AT_UB] = ubs[: n][self.vstat[:n] == _AT_UB]
        res = bs - self.As @ v[:n]
        self._art_sign = np.where(res >= 0, 1.0, -1.0)
        for i in range(m):
            Afull[i, n + i] = self._art_sign[i]

        lbs_full = np.concatenate([lbs, np.zeros(m)])
        ubs_full = np.concatenate([ubs, np.full(m, _INF)])
        self.basis = np.arange(n, n + m)
        self.vstat[n:] = _BASIC
        self.B_inv = np.diag(1.0 / self._art_sign) if m else np.zeros((0, 0))
        self.xB = np.abs(res)
        self._pivots_since_refactor = 0
        self._Afull = Afull
        self._lbs_full, self._ubs_full = lbs_full, ubs_full
        self._bs = bs

        if m:
            c1 = np.concatenate([np.zeros(n), np.ones(m)])
            status, _, _ = self._primal_loop(Afull, c1, bs, lbs_full, ubs_full, True)
            art_total = self.xB[self.basis >= n].sum() if (self.basis >= n).any() else 0.0
            if art_total > 1e-7 * (1.0 + np.abs(bs).max(initial=0.0)):
                self.status = "infeasible"
                return self.status
            self._drive_out_artificials(Afull, lbs_full, ubs_full)
        # fix artificials at zero for phase 2
        ubs_full[n:] = 0.0
        cc = np.concatenate([cs, np.zeros(m)])
        status, y, d = self._primal_loop(Afull, cc, bs, lbs_full, ubs_full, False)
        self._cc = cc
        self.status = status
        if status == "optimal":
            self._extract(y, d, lbs_full, ubs_full)
        return self.status

    def _drive_out_artificials(self, Afull, lbs_full, ubs_full):
        n = self.n
        for r in range(self.m):
            if self.basis[r] < n:
                continue
            if abs(self.xB[r]) > 1e-7:
                continue
            alpha = self.B_inv[r] @ Afull[:, :n]
            cands = np.flatnonzero((np.abs(alpha) > 1e-7) & (self.vstat[:n] != _BASIC))
            if cands.size == 0:
                continue  # redundant row: artificial stays basic at zero
            j = int(cands[0])
            art = self.basis[r]
            w = self.B_inv @ Afull[:, j]
            self.basis[r] = j
            self.xB[r] = self._nonbasic_value(lbs_full, ubs_full, j)
            self.vstat[j] = _BASIC
            self.vstat[art] = _AT_LB
            self._pivot_update(w, r)
            v = self._nb_values(lbs_full, ubs_full)
            v[self.basis] = 0.0
            self.xB = self.B_inv @ (self._bs - Afull @ v)

    # -- warm restarts -----------------------------------------------------------
    def resolve_rhs(self, b_new) -> str:
        """Re-solve after changing only b, via dual simplex from the old basis."""
        if self.status != "optimal":
            self.b = np.asarray(b_new, dtype=float).copy()
            return self.solve()
        self.b = np.asarray(b_new, dtype=float).copy()
        bs = self.b * self.row_scale
        self._bs = bs
        v = self._nb_values(self._lbs_full, self._ubs_full)
        v[self.basis] = 0.0
        self.xB = self.B_inv @ (bs - self._Afull @ v)
        try:
            status = self._dual_loop()
        except (IterationLimit, NumericalBreakdown):
            return self.solve()
        self.status = status
        if status == "optimal":
            y = self._cc[self.basis] @ self.B_inv
            d = self._cc - y @ self._Afull
            self._extract(y, d, self._lbs_full, self._ubs_full)
        return self.status

    def resolve_cost(self, c_new) -> str:
        """Re-solve after changing only c: the old basis stays primal feasible."""
        if self.status not in ("optimal", "unbounded"):
            self.c = np.asarray(c_new, dtype=float).copy()
            return self.solve()
        self.c = np.asarray(c_new, dtype=float).copy()
        cs = self.c * self.col_scale
        self._cc = np.concatenate([cs, np.zeros(self.m)])
        try:
            status, y, d = self._primal_loop(
                self._Afull, self._cc, self._bs, self._lbs_full, self._ubs_full, False
            )
        except (IterationLimit, NumericalBreakdown):
            return self.solve()
        self.status = status
        if status == "optimal":
            self._extract(y, d, self._lbs_full, self._ubs_full)
        return self.status

    def _dual_loop(self) -> str:
        Afull = self._Afull
        lbs, ubs = self._lbs_full, self._ubs_full
        d = self._cc - (self._cc[self.basis] @ self.B_inv) @ Afull
        fixed = ubs - lbs <= 0
        max_iter = 20 * self.m + 100
        for _ in range(max_iter):
            lo = lbs[self.basis]
            hi = ubs[self.basis]
            below = self.xB - lo
            above = self.xB - hi
            viol = np.maximum(np.maximum(-below, above), 0.0)
            viol[~np.isfinite(viol)] = 0.0
            if viol.max(initial=0.0) <= self.feas_tol:
                return "optimal"
            r = int(np.argmax(viol))
            going_up = below[r] < 0  # basic below its lower bound: must increase
            alpha = self.B_inv[r] @ Afull
            at_lb = self.vstat == _AT_LB
            at_ub = self.vstat == _AT_UB
            freev = self.vstat == _FREE
            if going_up:
                cand = (at_lb & (alpha < -self.piv_tol)) | (at_ub & (alpha > self.piv_tol)) | (
                    freev & (np.abs(alpha) > self.piv_tol)
                )
            else:
                cand = (at_lb & (alpha > self.piv_tol)) | (at_ub & (alpha < -self.piv_tol)) | (
                    freev & (np.abs(alpha) > self.piv_tol)
                )
            cand &= ~fixed
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.abs(d[idx] / alpha[idx])
            k = int(np.argmin(ratios))
            close = np.flatnonzero(ratios <= ratios[k] + 1e-12)
            e = int(idx[close[np.argmin(idx[close])]])

            leave = self.basis[r]
            target = lo[r] if going_up else hi[r]
            w = self.B_inv @ Afull[:, e]
            delta = (self.xB[r] - target) / w[r]
            self.xB -= delta * w
            self.xB[r] = self._nonbasic_value(lbs, ubs, e) + delta
            self.vstat[leave] = _AT_LB if going_up else _AT_UB
            self.basis[r] = e
            self.vstat[e] = _BASIC
            self._pivot_update(w, r)
            gamma = d[e] / alpha[e]
            d = d - gamma * alpha
            d[e] = 0.0
            if self._pivots_since_refactor >= self.REFACTOR_EVERY:
                self._refactor(Afull, self._bs, lbs, ubs)
                y = self._cc[self.basis] @ self.B_inv
                d = self._cc - y @ Afull
        raise IterationLimit("dual simplex exceeded iteration cap")

    # -- extraction ------------------------------------------------------------
    def _extract(self, y, d, lbs_full, ubs_full):
        n = self.n
        xs = self._nb_values(lbs_full, ubs_full)
        xs[self.basis] = self.xB
        self.x = (xs[:n] * self.col_scale)
        self.duals = y * self.row_scale
        self.reduced_costs = d[:n] / self.col_scale
        self.objective = float(self.c @ self.x)

    def solution(self, tol: ToleranceSet | None = None) -> LpSolution:
        tol = tol or ToleranceSet()
        if self.status != "optimal":
            return LpSolution(status=self.status)
        return LpSolution(
            status="optimal",
            x=self.x.copy(),
            objective=self.objective,
            duals=self.duals.copy(),
            reduced_costs=self.reduced_costs.copy(),
        )


def to_standard_form(lp: LinearProgram):
    """Append one slack column per row; returns (A, b, c, lb, ub, n_struct)."""
    m, n = lp.m, lp.n
    A = np.hstack([lp.A, np.eye(m)]) if m else lp.A.copy()
    c = np.concatenate([lp.c, np.zeros(m)])
    lb = np.concatenate([lp.lb, np.zeros(m)])
    ub = np.concatenate([lp.ub, np.zeros(m)])
    for i, sense in enumerate(lp.senses):
        if sense == "<=":
            ub[n + i] = _INF
        elif sense == ">=":
            lb[n + i] = -_INF
            ub[n + i] = 0.0
        elif sense == "=":
            pass  # slack fixed at zero
        else:
            raise ValueError(f"unknown row sense {sense!r}")
    return A, lp.rhs.copy(), c, lb, ub, n


def solve_lp(lp: LinearProgram, tol: ToleranceSet | None = None, scale: bool = True) -> LpSolution:
    """Solve a general-sense LP and certify the returned solution.

    The certificate checks primal feasibility, reduced-cost signs and the
    primal/dual objective identity.  Violations raise
    :class:`NumericalBreakdown` rather than returning a bad point.
    """
    tol = tol or ToleranceSet()
    A, b, c, lb, ub, n = to_standard_form(lp)
    solver = SimplexSolver(A, b, c, lb, ub, scale=scale)
    status = solver.solve()
    if status != "optimal":
        return LpSolution(status=status)
    x_full = solver.x
    x = x_full[:n]
    duals = solver.duals
    rc = solver.reduced_costs[:n]
    _certify(lp, x, x_full, duals, solver.reduced_costs, lb, ub, tol)
    return LpSolution(status="optimal", x=x, objective=float(lp.c @ x), duals=duals, reduced_costs=rc)


def _certify(lp, x, x_full, duals, rc_full, lb_full, ub_full, tol):
    scale = 1.0 + max(np.abs(lp.rhs).max(initial=0.0), np.abs(x).max(initial=0.0))
    if lp.m:
        row_vals = lp.A @ x
        for i, sense in enumerate(lp.senses):
            resid = row_vals[i] - lp.rhs[i]
            ok = (
                resid <= tol.feas * scale
                if sense == "<="
                else resid >= -tol.feas * scale
                if sense == ">="
                else abs(resid) <= tol.feas * scale
            )
            if not ok:
                raise NumericalBreakdown(f"row {i} infeasible by {resid:.3e}")
    if np.any(x < lb_full[: lp.n] - tol.feas * scale) or np.any(x > ub_full[: lp.n] + tol.feas * scale):
        raise NumericalBreakdown("bound violation in reported solution")
    # primal/dual objective identity: c'x = y'b + d'x with d ~ 0 on basics
    dual_obj = float(duals @ lp.rhs + rc_full @ x_full)
    primal_obj = float(lp.c @ x)
    if abs(primal_obj - dual_obj) > tol.gap * (1.0 + abs(primal_obj)) + 1e-7:
        raise NumericalBreakdown(
            f"duality gap {primal_obj - dual_obj:.3e} exceeds tolerance"
        )
