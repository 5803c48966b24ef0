"""Test-side metrics and experiment protocols: empirical risk at the
calibrated threshold, prediction-set-size statistics, alpha sweeps,
split-ratio ablation, and Monte Carlo validation of the risk-control
guarantee.

Everything here is a deterministic function of (records, parameters,
seed); per-row and per-trial random streams derive from the seed and an
index, so results are independent of any execution schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calibration import (
    CalibrationInfeasible,
    RiskLevel,
    _as_alpha,
    _losses_at,
    calibrate,
)
from .grids import CalibrationRecord
from .losses import LossKind, _record_stats, default_grid, validate_grid
from .synthetic import GeneratorParams, generate_dataset

__all__ = [
    "SweepRow",
    "AblationRow",
    "GuaranteeReport",
    "test_risk",
    "mean_predset_size",
    "pearson",
    "sweep",
    "ablate_splits",
    "validate_guarantee",
]


@dataclass(frozen=True)
class SweepRow:
    """One alpha's worth of a calibration/test sweep."""

    alpha: float
    lambda_hat: Optional[float]
    empirical_test_risk: Optional[float]
    mean_predset_size: Optional[float]
    n_calibration: int
    n_test: int
    seed: int
    feasible: bool = True
    calibration_risk: Optional[float] = None
    min_feasible_alpha: Optional[float] = None

    def __post_init__(self):
        if self.feasible:
            if self.mean_predset_size is None or self.mean_predset_size < 0:
                raise ValueError("mean_predset_size must be >= 0")
            if not 0.0 <= self.empirical_test_risk <= 1.0:
                raise ValueError("empirical_test_risk must lie in [0, 1]")


@dataclass(frozen=True)
class AblationRow:
    """Seed-aggregated result for one (split ratio, alpha) cell."""

    split_ratio: float
    alpha: float
    mean_lambda_hat: Optional[float]
    mean_empirical_risk: Optional[float]
    control_status: str  # "pass" | "fail" | "infeasible"
    n_seeds: int
    n_infeasible: int


@dataclass(frozen=True)
class GuaranteeReport:
    """Monte Carlo audit of the expected-risk guarantee."""

    alpha: float
    trials: int
    mean_test_risk: float
    std_error: float
    violation_fraction: float
    per_trial_risks: tuple

    def __post_init__(self):
        if not 0.0 <= self.violation_fraction <= 1.0:
            raise ValueError("violation_fraction must lie in [0, 1]")
        total = 0.0
        for r in self.per_trial_risks:
            total += r
        if abs(total / len(self.per_trial_risks) - self.mean_test_risk) > 1e-12 * self.trials:
            raise ValueError("mean_test_risk disagrees with per-trial risks")


def test_risk(
    test_records: Sequence[CalibrationRecord],
    lambda_hat: float,
    kind: LossKind,
    lambdas=None,
) -> float:
    """Mean per-record loss at the calibrated threshold over the test set."""
    if len(test_records) == 0:
        raise ValueError("test_risk requires a non-empty test set")
    total = 0.0
    for loss in _losses_at(test_records, lambda_hat, kind, lambdas):
        total += loss
    return total / len(test_records)


def mean_predset_size(test_records: Sequence[CalibrationRecord], lambda_hat: float) -> float:
    """Mean prediction-set cardinality at the calibrated threshold."""
    if len(test_records) == 0:
        raise ValueError("mean_predset_size requires a non-empty test set")
    lam = float(lambda_hat)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    thr = 1.0 - lam
    total = 0.0
    for rec in test_records:
        sorted_all, _, n_pix, _ = _record_stats(rec)
        total += n_pix - int(np.searchsorted(sorted_all, thr, side="left"))
    return total / len(test_records)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson requires two equal-length 1-D sequences")
    if x.size < 2:
        raise ValueError("pearson requires at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for a zero-variance sequence")
    return float(dx @ dy) / math.sqrt(sxx * syy)


def _split(records, split_ratio: float, rng) -> tuple:
    n = len(records)
    n_cal = math.ceil(split_ratio * n)
    if n_cal < 1 or n_cal >= n:
        raise ValueError(
            f"split ratio {split_ratio} leaves an empty calibration or test set for n={n}"
        )
    perm = rng.permutation(n)
    cal = [records[i] for i in perm[:n_cal]]
    test = [records[i] for i in perm[n_cal:]]
    return cal, test


def sweep(
    records: Sequence[CalibrationRecord],
    alphas: Sequence,
    kind: LossKind,
    split_ratio: float = 0.5,
    seed: int = 0,
    lambdas=None,
) -> list:
    """Calibrate and evaluate at each alpha on a seeded random split.

    An infeasible alpha yields a row marked infeasible instead of
    aborting the sweep.
    """
    if len(alphas) == 0:
        raise ValueError("sweep requires at least one alpha")
    if not 0.0 < split_ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {split_ratio}")
    grid = default_grid() if lambdas is None else validate_grid(lambdas)
    rows = []
    for i, alpha in enumerate(alphas):
        alpha = _as_alpha(alpha)
        rng = np.random.default_rng([int(seed), i])
        cal, test = _split(records, split_ratio, rng)
        try:
            profile = calibrate(cal, kind, alpha, lambdas=grid)
        except CalibrationInfeasible as exc:
            rows.append(
                SweepRow(
                    alpha=alpha,
                    lambda_hat=None,
                    empirical_test_risk=None,
                    mean_predset_size=None,
                    n_calibration=len(cal),
                    n_test=len(test),
                    seed=int(seed),
                    feasible=False,
                    min_feasible_alpha=exc.min_feasible_alpha,
                )
            )
            continue
        rows.append(
            SweepRow(
                alpha=alpha,
                lambda_hat=profile.lambda_hat,
                empirical_test_risk=test_risk(test, profile.lambda_hat, kind, grid),
                mean_predset_size=mean_predset_size(test, profile.lambda_hat),
                n_calibration=len(cal),
                n_test=len(test),
                seed=int(seed),
                calibration_risk=profile.empirical_risk_at_lambda_hat,
            )
        )
    return rows


def ablate_splits(
    records: Sequence[CalibrationRecord],
    split_ratios: Sequence[float],
    alphas: Sequence,
    kind: LossKind,
    seeds: Sequence[int],
    lambdas=None,
) -> list:
    """Split-ratio ablation: one seed-aggregated row per (ratio, alpha).

    control_status is "pass" iff the mean empirical test risk over the
    feasible seeds is at most alpha.
    """
    if len(seeds) == 0:
        raise ValueError("ablate_splits requires at least one seed")
    grid = default_grid() if lambdas is None else validate_grid(lambdas)
    rows = []
    for ratio in split_ratios:
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
        for alpha in alphas:
            alpha = _as_alpha(alpha)
            risks, lams, n_infeasible = [], [], 0
            for s in seeds:
                rng = np.random.default_rng(int(s))
                try:
                    cal, test = _split(records, ratio, rng)
                    profile = calibrate(cal, kind, alpha, lambdas=grid)
                except (CalibrationInfeasible, ValueError):
                    n_infeasible += 1
                    continue
                lams.append(profile.lambda_hat)
                risks.append(test_risk(test, profile.lambda_hat, kind, grid))
            if not risks:
                rows.append(
                    AblationRow(ratio, alpha, None, None, "infeasible", len(seeds), n_infeasible)
                )
                continue
            mean_risk = sum(risks) / len(risks)
            rows.append(
                AblationRow(
                    split_ratio=ratio,
                    alpha=alpha,
                    mean_lambda_hat=sum(lams) / len(lams),
                    mean_empirical_risk=mean_risk,
                    control_status="pass" if mean_risk <= alpha else "fail",
                    n_seeds=len(seeds),
                    n_infeasible=n_infeasible,
                )
            )
    return rows


def validate_guarantee(
    params: GeneratorParams,
    alpha,
    kind: LossKind,
    n_cal: int,
    n_test: int,
    trials: int,
    seed: int = 0,
    lambdas=None,
) -> GuaranteeReport:
    """Audit the expected-risk guarantee by Monte Carlo simulation.

    Each trial draws a fresh exchangeable synthetic dataset from the
    stream (seed, trial index), calibrates on the first ``n_cal`` records,
    and scores the remaining ``n_test``. The guarantee bounds the mean
    over trials, not each realization, so per-trial violations are
    expected and only reported.
    """
    if trials < 1 or n_cal < 1 or n_test < 1:
        raise ValueError("trials, n_cal and n_test must all be >= 1")
    alpha = _as_alpha(alpha)
    grid = default_grid() if lambdas is None else validate_grid(lambdas)
    per_trial = []
    for t in range(trials):
        records = generate_dataset(params, n_cal + n_test, master_seed=[int(seed), t])
        profile = calibrate(records[:n_cal], kind, alpha, lambdas=grid)
        per_trial.append(test_risk(records[n_cal:], profile.lambda_hat, kind, grid))
    mean_risk = sum(per_trial) / trials
    if trials > 1:
        var = sum((r - mean_risk) ** 2 for r in per_trial) / (trials - 1)
        std_error = math.sqrt(var / trials)
    else:
        std_error = 0.0
    return GuaranteeReport(
        alpha=alpha,
        trials=trials,
        mean_test_risk=mean_risk,
        std_error=std_error,
        violation_fraction=sum(1 for r in per_trial if r > alpha) / trials,
        per_trial_risks=tuple(per_trial),
    )
