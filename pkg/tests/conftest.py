import numpy as np
import pytest

from riskcal import CalibrationRecord, DefectMask, GeneratorParams, ProbabilityMap


@pytest.fixture
def small_params():
    """Desk-scale generator for fast tests."""
    return GeneratorParams(height=16, width=16, blob_count_range=(1, 2), blob_radius_range=(1, 3))


def random_record(rng, height=8, width=8, rec_id="r") -> CalibrationRecord:
    """Uncorrelated random map/mask pair (worst case for loss shapes)."""
    values = rng.random((height, width))
    bits = rng.random((height, width)) < 0.3
    return CalibrationRecord(id=rec_id, map=ProbabilityMap(values), mask=DefectMask(bits))
