"""Conformal-risk-control core: empirical risk aggregation, the
finite-sample feasibility bound, and the threshold-selection search.

The operative feasibility predicate is the exact chain

    n * L_n(lambda) + 1 <= alpha * (n + 1)

so every returned threshold satisfies the guarantee precondition in the
same floating-point arithmetic in which it is later re-asserted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grids import CalibrationRecord
from .losses import (
    NO_DIRECTION,
    NON_DECREASING,
    NON_INCREASING,
    LossKind,
    _effective_losses,
    _record_stats,
    breakpoint_grid,
    default_grid,
    validate_grid,
)

__all__ = [
    "RiskLevel",
    "RiskProfile",
    "CalibrationInfeasible",
    "SEARCH_MODES",
    "crc_bound",
    "empirical_risk",
    "calibrate",
    "calibrate_oracle",
]

GRID_SCAN = "grid-scan"
BINARY_SEARCH = "binary-search"
EXACT_BREAKPOINTS = "exact-breakpoints"
SEARCH_MODES = (GRID_SCAN, BINARY_SEARCH, EXACT_BREAKPOINTS)


@dataclass(frozen=True)
class RiskLevel:
    """User-chosen upper bound on the expected loss, in (0, 1]."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


class CalibrationInfeasible(Exception):
    """No grid lambda satisfies the risk bound.

    Carries the minimal feasible alpha ``(n * L_min + 1) / (n + 1)`` so
    callers can relax their risk level.
    """

    def __init__(self, alpha: float, min_feasible_alpha: float):
        self.alpha = alpha
        self.min_feasible_alpha = min_feasible_alpha
        super().__init__(
            f"no threshold satisfies the risk bound at alpha={alpha:g}; "
            f"minimal feasible alpha is {min_feasible_alpha:.6g}"
        )


@dataclass(frozen=True)
class RiskProfile:
    """Calibration output: the selected threshold and its diagnostics."""

    kind: LossKind
    alpha: float
    lambda_hat: float
    empirical_risk_at_lambda_hat: float
    adjusted_target: float
    n_calibration: int
    search_mode: str

    def __post_init__(self):
        if not 0.0 <= self.lambda_hat <= 1.0:
            raise ValueError(f"lambda_hat must lie in [0, 1], got {self.lambda_hat}")
        if self.search_mode not in SEARCH_MODES:
            raise ValueError(f"unknown search mode {self.search_mode!r}")
        self.check_guarantee_precondition()

    def check_guarantee_precondition(self) -> None:
        """Assert the exact chain n*L + 1 <= alpha*(n+1)."""
        n = self.n_calibration
        lhs = n * self.empirical_risk_at_lambda_hat + 1.0
        rhs = self.alpha * (n + 1)
        if not lhs <= rhs:
            raise ValueError(
                f"guarantee precondition violated: {n}*{self.empirical_risk_at_lambda_hat!r}+1 "
                f"> {self.alpha!r}*({n}+1)"
            )


def crc_bound(alpha, n: int) -> float:
    """Adjusted empirical-risk target ``(alpha * (n + 1) - 1) / n``.

    May be negative, which signals infeasibility downstream.
    """
    if isinstance(alpha, RiskLevel):
        alpha = alpha.alpha
    if n < 1:
        raise ValueError("need at least one calibration sample")
    return (alpha * (n + 1) - 1.0) / n


def _as_alpha(alpha) -> float:
    if isinstance(alpha, RiskLevel):
        return alpha.alpha
    return RiskLevel(float(alpha)).alpha


def empirical_risk(
    records: Sequence[CalibrationRecord],
    lam: float,
    kind: LossKind,
    lambdas=None,
) -> float:
    """Mean per-record loss at a single lambda, summed in record order.

    For the monotonized fdr kind the envelope is taken over the grid
    points at or below ``lam`` (plus ``lam`` itself); ``lambdas`` defaults
    to the 1001-point uniform grid.
    """
    if len(records) == 0:
        raise ValueError("empirical_risk requires a non-empty record sequence")
    total = 0.0
    for loss in _losses_at(records, lam, kind, lambdas):
        total += loss
    return total / len(records)


def _losses_at(records, lam, kind, lambdas=None):
    """Per-record effective loss at a single lambda, in record order."""
    from .losses import _raw_losses  # local to keep the import graph flat

    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if kind.tag == "fdr" and kind.direction == NON_DECREASING:
        grid = default_grid() if lambdas is None else validate_grid(lambdas)
        points = grid[grid <= lam]
        if points.size == 0 or points[-1] != lam:
            points = np.append(points, lam)
        for rec in records:
            yield float(np.max(_raw_losses(rec, kind.tag, points)))
    else:
        points = np.array([lam])
        for rec in records:
            yield float(_raw_losses(rec, kind.tag, points)[0])


def _mean_curve(records, kind, grid) -> np.ndarray:
    """Empirical risk over the grid, accumulated in record order."""
    total = np.zeros(grid.size, dtype=np.float64)
    for rec in records:
        total += _effective_losses(rec, kind, grid)
    return total / len(records)


def _resolve_grid(records, lambdas, search_mode) -> np.ndarray:
    if search_mode == EXACT_BREAKPOINTS:
        return breakpoint_grid(records)
    if lambdas is None:
        return default_grid()
    return validate_grid(lambdas)


def calibrate(
    records: Sequence[CalibrationRecord],
    kind: LossKind,
    alpha,
    lambdas=None,
    search_mode: str = GRID_SCAN,
) -> RiskProfile:
    """Select the risk-controlling threshold on a lambda grid.

    Direction-aware selection:

    * non-increasing losses (fnr): smallest grid lambda whose empirical
      risk meets the bound -- the smallest risk-feasible prediction sets;
    * non-decreasing losses (monotonized fdr): largest feasible grid
      lambda, the same rule under the lambda -> 1 - lambda
      reparameterization;
    * direction-free losses: grid-scan only, largest feasible lambda;
      binary search on a non-monotone step function is refused.

    Raises :class:`CalibrationInfeasible` when no grid lambda meets the
    bound.
    """
    if len(records) == 0:
        raise ValueError("calibrate requires a non-empty record sequence")
    if search_mode not in SEARCH_MODES:
        raise ValueError(f"unknown search mode {search_mode!r}")
    alpha = _as_alpha(alpha)
    if search_mode == BINARY_SEARCH and not kind.monotone:
        raise ValueError(
            "binary search requires a declared monotone direction; "
            "use grid-scan for the direction-free fdr loss"
        )
    grid = _resolve_grid(records, lambdas, search_mode)
    n = len(records)
    budget = alpha * (n + 1)

    if search_mode == BINARY_SEARCH and kind.direction == NON_INCREASING:
        idx, risk = _bisect_non_increasing(records, kind, grid, n, budget, alpha)
    else:
        risks = _mean_curve(records, kind, grid)
        feasible = n * risks + 1.0 <= budget
        if not feasible.any():
            raise CalibrationInfeasible(alpha, (n * float(risks.min()) + 1.0) / (n + 1))
        if kind.direction == NON_INCREASING:
            idx = int(np.argmax(feasible))
        else:
            idx = int(feasible.size - 1 - np.argmax(feasible[::-1]))
        risk = float(risks[idx])

    return RiskProfile(
        kind=kind,
        alpha=alpha,
        lambda_hat=float(grid[idx]),
        empirical_risk_at_lambda_hat=risk,
        adjusted_target=crc_bound(alpha, n),
        n_calibration=n,
        search_mode=search_mode,
    )


def _risk_at_index(records, kind, grid, idx) -> float:
    """Empirical risk at one grid index, in record order; matches the
    vectorized curve bit-for-bit (same thresholds, counts, divisions)."""
    thr = 1.0 - grid[idx]
    total = 0.0
    for rec in records:
        sorted_all, sorted_def, n_pix, n_def = _record_stats(rec)
        inter = n_def - int(np.searchsorted(sorted_def, thr, side="left"))
        if kind.tag == "fnr":
            total += 0.0 if n_def == 0 else (n_def - inter) / n_def
        else:
            size = n_pix - int(np.searchsorted(sorted_all, thr, side="left"))
            total += 1.0 - inter / max(size, 1)
    return total / len(records)


def _bisect_non_increasing(records, kind, grid, n, budget, alpha):
    """Leftmost feasible index on a non-increasing risk curve, evaluating
    the curve lazily at the probed indices only."""

    def feasible(i: int) -> bool:
        return n * _risk_at_index(records, kind, grid, i) + 1.0 <= budget

    hi = grid.size - 1
    if not feasible(hi):
        risk_min = _risk_at_index(records, kind, grid, hi)
        raise CalibrationInfeasible(alpha, (n * risk_min + 1.0) / (n + 1))
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo, _risk_at_index(records, kind, grid, lo)


def calibrate_oracle(
    records: Sequence[CalibrationRecord],
    kind: LossKind,
    alpha,
    lambdas=None,
) -> RiskProfile:
    """Independent exhaustive reference for :func:`calibrate`.

    Evaluates every record at every grid lambda by direct pixel
    comparison, with no monotonicity assumptions and no shared curve code.
    """
    if len(records) == 0:
        raise ValueError("calibrate_oracle requires a non-empty record sequence")
    alpha = _as_alpha(alpha)
    grid = default_grid() if lambdas is None else validate_grid(lambdas)
    n = len(records)
    budget = alpha * (n + 1)

    acc = [0.0] * grid.size
    for rec in records:
        flat = rec.map.values.astype(np.float64).ravel()
        mbits = rec.mask.bits.ravel()
        n_def = int(np.count_nonzero(mbits))
        prev = 0.0
        for t in range(grid.size):
            thr = 1.0 - float(grid[t])
            selected = flat >= thr
            inter = int(np.count_nonzero(selected & mbits))
            if kind.tag == "fnr":
                loss = 0.0 if n_def == 0 else (n_def - inter) / n_def
            else:
                size = int(np.count_nonzero(selected))
                loss = 1.0 - inter / max(size, 1)
                if kind.direction == NON_DECREASING:
                    loss = max(prev, loss)
                    prev = loss
            acc[t] += loss

    feasible = [n * (acc[t] / n) + 1.0 <= budget for t in range(grid.size)]
    if not any(feasible):
        risk_min = min(acc[t] / n for t in range(grid.size))
        raise CalibrationInfeasible(alpha, (n * risk_min + 1.0) / (n + 1))
    if kind.direction == NON_INCREASING:
        idx = feasible.index(True)
    else:
        idx = len(feasible) - 1 - feasible[::-1].index(True)

    return RiskProfile(
        kind=kind,
        alpha=alpha,
        lambda_hat=float(grid[idx]),
        empirical_risk_at_lambda_hat=acc[idx] / n,
        adjusted_target=crc_bound(alpha, n),
        n_calibration=n,
        search_mode=GRID_SCAN,
    )
