"""Cut storage and the piecewise-linear model used by the inner loop.

The model is a max of affine minorants of the sampled objective.  Two
kinds of cuts enter after a null step at a trial point: a gradient cut
(value and subgradient of the sampled objective there) and an aggregate
cut whose slope is ``rho * (center - trial)``, valid by the optimality
condition of the proximal step.  Memory is limited per kind, evicting
oldest first, so the newest gradient and newest aggregate cut are always
retained -- the property the convergence analysis needs.

Cuts are stored in anchor form (x_j, v_j, g_j) rather than intercept
form to avoid cancellation far from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DUPLICATE_TOL = 1e-12

GRADIENT = "gradient"
AGGREGATE = "aggregate"


@dataclass
class Cut:
    """Affine minorant value(x) = v + g'(x - anchor)."""

    kind: str
    anchor: np.ndarray
    value: float
    slope: np.ndarray
    birth: int  # inner index at creation

    def __call__(self, x) -> float:
        return float(self.value + self.slope @ (np.asarray(x) - self.anchor))


class BundleModel:
    """Ordered cut collection with per-kind limited memory."""

    def __init__(self, center, center_value: float, memory: int = 5, outer: int = 0):
        self.center = np.asarray(center, dtype=float).copy()
        self.center_value = float(center_value)
        self.memory = int(memory)
        self.outer = int(outer)
        self.cuts: list[Cut] = []
        if self.memory < 1:
            raise ValueError("bundle memory must be >= 1")

    # -- evaluation ------------------------------------------------------------
    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return max(c(x) for c in self.cuts)

    def evaluate_cuts(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c(x) for c in self.cuts])

    def lipschitz_bound(self) -> float:
        return max(float(np.linalg.norm(c.slope)) for c in self.cuts)

    # -- growth ------------------------------------------------------------------
    def _is_duplicate(self, cand: Cut) -> bool:
        for c in self.cuts:
            if np.max(np.abs(c.slope - cand.slope), initial=0.0) <= DUPLICATE_TOL and abs(
                c(cand.anchor) - cand.value
            ) <= DUPLICATE_TOL:
                return True
        return False

    def _append(self, cut: Cut) -> bool:
        if self._is_duplicate(cut):
            return False
        self.cuts.append(cut)
        same = [c for c in self.cuts if c.kind == cut.kind]
        while len(same) > self.memory:
            oldest = min(same, key=lambda c: c.birth)
            self.cuts.remove(oldest)
            same.remove(oldest)
        return True

    def add_cuts(self, trial, fhat_trial: float, ghat_trial, rho: float, model_trial: float, birth: int) -> bool:
        """Gradient + aggregate cut after a null step at ``trial``.

        ``model_trial`` is the pre-update model value f_{k,t}(trial),
        which anchors the aggregate cut; its slope rho*(center - trial)
        is a subgradient of the model plus normal cone at the trial.
        Returns False when both cuts were duplicates of retained ones,
        i.e. the model did not change (only possible at roundoff scale).
        """
        trial = np.asarray(trial, dtype=float).copy()
        added = self._append(
            Cut(GRADIENT, trial, float(fhat_trial), np.asarray(ghat_trial, dtype=float).copy(), birth)
        )
        agg_slope = rho * (self.center - trial)
        added |= self._append(Cut(AGGREGATE, trial, float(model_trial), agg_slope, birth))
        return added


def init_bundle(center, estimate_at_center, memory: int = 5, outer: int = 0) -> BundleModel:
    """Single gradient cut anchored at the center: model(center) = fhat(center)."""
    model = BundleModel(center, estimate_at_center.value, memory=memory, outer=outer)
    model._append(
        Cut(GRADIENT, model.center, estimate_at_center.value, np.asarray(estimate_at_center.subgrad, dtype=float).copy(), 0)
    )
    return model
