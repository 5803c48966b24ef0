"""Pixel-grid data model: probability maps, ground-truth masks, and
threshold-induced prediction sets.

All types are immutable after construction and safe to share across
threads; the operations in this module are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "ProbabilityMap",
    "DefectMask",
    "PredictionSet",
    "CalibrationRecord",
    "build_prediction_set",
    "intersect_count",
    "defect_coverage_ratio",
]


class DimensionMismatchError(ValueError):
    """Paired grids disagree in height or width."""


def _check_same_shape(a, b) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"grid dimensions disagree: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Dense H x W grid of pixel defect probabilities in [0, 1].

    Values are stored as float32 (matching the on-disk format) but all
    threshold comparisons are performed in float64. NaN and infinite
    values are rejected at construction: a NaN would silently break the
    monotonicity the risk-control guarantee rests on.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"probability map must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability map contains NaN or infinite values")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise ValueError("probability values must lie in [0, 1]")
        arr = arr.astype(np.float32, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class DefectMask:
    """H x W binary ground-truth mask; True marks a defect pixel."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            uniq = np.unique(arr)
            if not np.all(np.isin(uniq, (0, 1))):
                raise ValueError("mask entries must be binary")
        arr = arr.astype(np.bool_, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)
        object.__setattr__(self, "_defect_count", int(np.count_nonzero(arr)))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.bits.size

    @property
    def defect_count(self) -> int:
        return self._defect_count


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Threshold-induced pixel set: all pixels with probability >= 1 - lam.

    ``size`` is the cached cardinality of ``bits`` and is validated at
    construction.
    """

    bits: np.ndarray
    lam: float
    size: int

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.bool_)
        if arr.ndim != 2:
            raise ValueError("prediction set bits must be a 2-D grid")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.size != int(np.count_nonzero(arr)):
            raise ValueError("cached size disagrees with the number of set bits")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True, eq=False)
class CalibrationRecord:
    """One (probability map, ground-truth mask) pair."""

    id: str
    map: ProbabilityMap
    mask: DefectMask
    # per-record scratch cache (sorted probability vectors); not part of identity
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        _check_same_shape(self.map, self.mask)


def build_prediction_set(pmap: ProbabilityMap, lam: float) -> PredictionSet:
    """Build the prediction set at threshold ``lam``.

    A pixel (j, k) is included iff ``pmap[j, k] >= 1 - lam``; the boundary
    is inclusive, so ties are deterministic. Comparison happens in float64.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    threshold = 1.0 - lam
    bits = pmap.values.astype(np.float64) >= threshold
    return PredictionSet(bits=bits, lam=lam, size=int(np.count_nonzero(bits)))


def intersect_count(pred_set: PredictionSet, mask: DefectMask) -> int:
    """Number of pixels present in both the prediction set and the mask."""
    _check_same_shape(pred_set, mask)
    return int(np.count_nonzero(pred_set.bits & mask.bits))


def defect_coverage_ratio(records: Sequence[CalibrationRecord]) -> float:
    """Average fraction of defect pixels per image over a dataset."""
    if len(records) == 0:
        raise ValueError("defect_coverage_ratio requires a non-empty record sequence")
    total = 0.0
    for rec in records:
        total += rec.mask.defect_count / rec.mask.n_pixels
    return total / len(records)
