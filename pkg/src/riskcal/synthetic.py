"""Exchangeable synthetic data generator standing in for an upstream
segmentation model: blob-shaped ground-truth defects plus a noisy
probability map with controllable quality.

Blob placement wraps around the grid edges (torus topology) so every
pixel has the same coverage probability, which keeps the expected defect
coverage in closed form for oracle tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from .grids import CalibrationRecord, DefectMask, ProbabilityMap

__all__ = ["GeneratorParams", "generate_sample", "generate_dataset", "disk_offsets"]

SEED_POLICY_SPAWN = "seedseq-spawn"


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs for the synthetic defect-map generator.

    ``signal`` is the mean probability on defect pixels and must exceed
    ``background_level`` so defects are statistically detectable. All
    generated probabilities are clamped to [0, 1] after perturbation.
    """

    height: int = 64
    width: int = 64
    blob_count_range: Tuple[int, int] = (1, 3)
    blob_radius_range: Tuple[int, int] = (2, 6)
    signal: float = 0.85
    noise_sigma: float = 0.15
    background_level: float = 0.15
    seed_policy: str = SEED_POLICY_SPAWN

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("grid dimensions must be positive")
        c_lo, c_hi = self.blob_count_range
        r_lo, r_hi = self.blob_radius_range
        if c_lo < 0 or c_hi < c_lo:
            raise ValueError(f"bad blob count range {self.blob_count_range}")
        if r_lo < 1 or r_hi < r_lo:
            raise ValueError(f"bad blob radius range {self.blob_radius_range}")
        if not 0.0 < self.signal <= 1.0:
            raise ValueError(f"signal must lie in (0, 1], got {self.signal}")
        if not 0.0 <= self.background_level < 1.0:
            raise ValueError(f"background level must lie in [0, 1), got {self.background_level}")
        if self.signal <= self.background_level:
            raise ValueError("signal must exceed background_level")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")
        if self.seed_policy != SEED_POLICY_SPAWN:
            raise ValueError(f"unsupported seed policy {self.seed_policy!r}")


@lru_cache(maxsize=None)
def disk_offsets(radius: int) -> np.ndarray:
    """Integer offsets (dy, dx) with dy^2 + dx^2 <= radius^2."""
    r = int(radius)
    span = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    keep = dy * dy + dx * dx <= r * r
    offsets = np.stack([dy[keep], dx[keep]], axis=1)
    offsets.setflags(write=False)  # cached instance is shared
    return offsets


def generate_sample(params: GeneratorParams, stream_seed, sample_id: str = "sample") -> CalibrationRecord:
    """Draw one (probability map, mask) pair from a dedicated stream.

    mask = union of randomly placed disks; map = clamp(background +
    (signal - background) * mask + gaussian noise). Fully determined by
    (params, stream_seed).
    """
    rng = np.random.default_rng(stream_seed)
    h, w = params.height, params.width
    mask = np.zeros((h, w), dtype=np.bool_)
    c_lo, c_hi = params.blob_count_range
    r_lo, r_hi = params.blob_radius_range
    count = int(rng.integers(c_lo, c_hi + 1))
    for _ in range(count):
        cy = int(rng.integers(0, h))
        cx = int(rng.integers(0, w))
        radius = int(rng.integers(r_lo, r_hi + 1))
        offsets = disk_offsets(radius)
        rows = (cy + offsets[:, 0]) % h
        cols = (cx + offsets[:, 1]) % w
        mask[rows, cols] = True

    base = np.where(mask, params.signal, params.background_level)
    noise = rng.normal(0.0, params.noise_sigma, size=(h, w)) if params.noise_sigma > 0 else 0.0
    values = np.clip(base + noise, 0.0, 1.0)
    return CalibrationRecord(id=sample_id, map=ProbabilityMap(values), mask=DefectMask(mask))


def generate_dataset(params: GeneratorParams, n: int, master_seed) -> List[CalibrationRecord]:
    """Draw ``n`` independent samples; sample ``i`` uses the child stream
    spawned at index ``i`` from the master seed, so the sequence is
    exchangeable by construction and independent of generation order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [
        generate_sample(params, children[i], sample_id=f"sample-{i:05d}")
        for i in range(n)
    ]
