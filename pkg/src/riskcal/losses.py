"""Per-sample loss functions over the threshold parameter lambda.

Two losses are provided:

* false-discovery loss: ``1 - |C ∩ y| / max(|C|, 1)``, with the max guard
  keeping the empty prediction set at loss 1;
* false-negative loss: missed defect pixels over total defect pixels,
  0 for an empty ground-truth mask (nothing can be missed).

The false-negative loss is non-increasing in lambda (prediction sets are
nested). The false-discovery loss is not monotone in general, so a
monotonizing envelope is provided for use where the risk-control
selection rule requires monotonicity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grids import (
    CalibrationRecord,
    DefectMask,
    PredictionSet,
    _check_same_shape,
)

__all__ = [
    "LossKind",
    "LossCurve",
    "FNR",
    "FDR",
    "FDR_MONOTONE",
    "fdr_loss",
    "fnr_loss",
    "loss_curve",
    "monotonize",
    "default_grid",
    "breakpoint_grid",
    "validate_grid",
]

NON_INCREASING = "non-increasing"
NON_DECREASING = "non-decreasing"
NO_DIRECTION = "none"

_DIRECTIONS = (NON_INCREASING, NON_DECREASING, NO_DIRECTION)


@dataclass(frozen=True)
class LossKind:
    """A loss tag plus its declared monotonicity in lambda.

    ``fnr`` must be declared non-increasing (a superset of pixels can only
    reduce misses). ``fdr`` is direction-free by default; declaring it
    non-decreasing selects the monotonized (running-max) variant used by
    the calibration search.
    """

    tag: str
    direction: str

    def __post_init__(self):
        if self.tag not in ("fdr", "fnr"):
            raise ValueError(f"unknown loss tag {self.tag!r}")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.tag == "fnr" and self.direction != NON_INCREASING:
            raise ValueError("fnr loss is non-increasing in lambda by construction")
        if self.tag == "fdr" and self.direction == NON_INCREASING:
            raise ValueError("fdr loss cannot be declared non-increasing")

    @property
    def monotone(self) -> bool:
        return self.direction != NO_DIRECTION


FNR = LossKind(tag="fnr", direction=NON_INCREASING)
FDR = LossKind(tag="fdr", direction=NO_DIRECTION)
FDR_MONOTONE = LossKind(tag="fdr", direction=NON_DECREASING)


def validate_grid(lambdas) -> np.ndarray:
    """Validate a lambda grid: strictly increasing, within [0, 1]."""
    grid = np.asarray(lambdas, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("lambda grid must be a non-empty 1-D sequence")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError("lambda grid must lie within [0, 1]")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("lambda grid must be strictly increasing")
    return grid


def default_grid(steps: int = 1000) -> np.ndarray:
    """Uniform grid of ``steps + 1`` lambda values over [0, 1]."""
    if steps < 1:
        raise ValueError("grid needs at least one step")
    return np.linspace(0.0, 1.0, steps + 1)


def breakpoint_grid(records: Sequence[CalibrationRecord]) -> np.ndarray:
    """Exact step-function grid: every ``1 - p`` over distinct map values,
    plus the endpoints 0 and 1. Intended for small images."""
    pieces = [np.array([0.0, 1.0])]
    for rec in records:
        probs = np.unique(rec.map.values.astype(np.float64))
        pieces.append(1.0 - probs)
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= 0.0) & (grid <= 1.0)]


@dataclass(frozen=True, eq=False)
class LossCurve:
    """A loss sampled on a lambda grid."""

    lambdas: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        grid = validate_grid(self.lambdas)
        losses = np.asarray(self.losses, dtype=np.float64)
        if losses.shape != grid.shape:
            raise ValueError("lambdas and losses must have equal length")
        if losses.size and (losses.min() < 0.0 or losses.max() > 1.0):
            raise ValueError("losses must lie in [0, 1]")
        grid.setflags(write=False)
        losses.setflags(write=False)
        object.__setattr__(self, "lambdas", grid)
        object.__setattr__(self, "losses", losses)


def fdr_loss(pred_set: PredictionSet, mask: DefectMask) -> float:
    """False-discovery loss ``1 - |C ∩ y| / max(|C|, 1)``."""
    _check_same_shape(pred_set, mask)
    inter = int(np.count_nonzero(pred_set.bits & mask.bits))
    return 1.0 - inter / max(pred_set.size, 1)


def fnr_loss(pred_set: PredictionSet, mask: DefectMask) -> float:
    """False-negative loss: missed defect pixels / total defect pixels.

    Returns 0 for an empty ground-truth mask.
    """
    _check_same_shape(pred_set, mask)
    if mask.defect_count == 0:
        return 0.0
    inter = int(np.count_nonzero(pred_set.bits & mask.bits))
    return (mask.defect_count - inter) / mask.defect_count


def _record_stats(record: CalibrationRecord):
    """Cached ascending float64 probability vectors for a record."""
    stats = record._cache.get("stats")
    if stats is None:
        flat = record.map.values.astype(np.float64).ravel()
        mbits = record.mask.bits.ravel()
        sorted_all = np.sort(flat)
        sorted_def = np.sort(flat[mbits])
        stats = (sorted_all, sorted_def, flat.size, int(sorted_def.size))
        record._cache["stats"] = stats
    return stats


def _raw_losses(record: CalibrationRecord, tag: str, grid: np.ndarray) -> np.ndarray:
    """Pointwise loss values at each grid lambda, without any envelope."""
    sorted_all, sorted_def, n_pix, n_def = _record_stats(record)
    thresholds = 1.0 - grid
    inter = n_def - np.searchsorted(sorted_def, thresholds, side="left")
    if tag == "fnr":
        if n_def == 0:
            return np.zeros_like(grid)
        return (n_def - inter) / n_def
    sizes = n_pix - np.searchsorted(sorted_all, thresholds, side="left")
    return 1.0 - inter / np.maximum(sizes, 1)


def _effective_losses(record: CalibrationRecord, kind: LossKind, grid: np.ndarray) -> np.ndarray:
    """Per-grid losses for ``kind``, including the monotonizing envelope
    when the kind declares a non-decreasing fdr loss."""
    raw = _raw_losses(record, kind.tag, grid)
    if kind.tag == "fdr" and kind.direction == NON_DECREASING:
        return np.maximum.accumulate(raw)
    return raw


def loss_curve(record: CalibrationRecord, kind: LossKind, lambdas) -> LossCurve:
    """Evaluate the chosen loss over a lambda grid.

    For the monotonized fdr kind the returned losses are the running-max
    envelope over the grid; otherwise they equal the pointwise loss of the
    prediction set built at each grid lambda.
    """
    grid = validate_grid(lambdas)
    return LossCurve(lambdas=grid, losses=_effective_losses(record, kind, grid))


def monotonize(curve: LossCurve, direction: str) -> LossCurve:
    """Smallest envelope of the curve that is monotone in ``direction`` and
    dominates the original pointwise."""
    if direction == NON_DECREASING:
        env = np.maximum.accumulate(curve.losses)
    elif direction == NON_INCREASING:
        env = np.maximum.accumulate(curve.losses[::-1])[::-1]
    else:
        raise ValueError(f"direction must be monotone, got {direction!r}")
    return LossCurve(lambdas=curve.lambdas, losses=env)
