import json

import pytest

from riskcal import FNR, GeneratorParams, calibrate, default_grid, generate_dataset, sweep
from riskcal.reports import RunReport, render_report, write_report


@pytest.fixture
def sample_report(small_params):
    recs = generate_dataset(small_params, 30, master_seed=14)
    rows = sweep(recs, [0.2, 0.4], FNR, seed=7, lambdas=default_grid(200))
    profile = calibrate(recs, FNR, 0.3, lambdas=default_grid(200))
    return RunReport(
        tool_version="0.1.0",
        command="sweep",
        params={"alphas": "0.2,0.4", "seed": 7},
        profile=profile,
        sweep_rows=rows,
        duration_seconds=1.23,
    )


class TestDeterminism:
    def test_serialize_twice_identical(self, sample_report):
        assert render_report(sample_report, "json") == render_report(sample_report, "json")
        assert render_report(sample_report, "csv") == render_report(sample_report, "csv")

    def test_duration_not_serialized(self, sample_report):
        blob = render_report(sample_report, "json")
        sample_report.duration_seconds = 99.9
        assert render_report(sample_report, "json") == blob


class TestCsv:
    def test_row_count_is_header_plus_rows(self, sample_report):
        text = render_report(sample_report, "csv").decode()
        lines = text.rstrip("\n").split("\n")
        assert len(lines) == 1 + len(sample_report.sweep_rows)

    def test_trailing_newline(self, sample_report):
        assert render_report(sample_report, "csv").endswith(b"\n")


class TestJson:
    def test_round_trip_field_by_field(self, sample_report):
        doc = json.loads(render_report(sample_report, "json"))
        profile = sample_report.profile
        assert doc["tool_version"] == "0.1.0"
        assert doc["params"]["seed"] == 7
        assert doc["profile"]["lambda_hat"] == profile.lambda_hat
        assert (
            doc["profile"]["empirical_risk_at_lambda_hat"]
            == profile.empirical_risk_at_lambda_hat
        )
        for parsed, row in zip(doc["sweep_rows"], sample_report.sweep_rows):
            assert parsed["alpha"] == row.alpha
            assert parsed["lambda_hat"] == row.lambda_hat
            assert parsed["empirical_test_risk"] == row.empirical_test_risk
            assert parsed["feasible"] == row.feasible

    def test_seventeen_digit_rendering_is_lossless(self):
        # 17 significant decimal digits uniquely identify a binary64 value
        for value in (0.1, 1 / 3, 19 / 99, 0.28899999999999998):
            assert float(format(value, ".17g")) == value


class TestRecheck:
    def test_tampered_profile_rejected(self, sample_report):
        object.__setattr__(sample_report.profile, "empirical_risk_at_lambda_hat", 0.99)
        with pytest.raises(ValueError, match="precondition"):
            render_report(sample_report, "json")

    def test_write_report(self, sample_report, tmp_path):
        path = tmp_path / "r.json"
        write_report(sample_report, path, "json")
        assert json.loads(path.read_text())["command"] == "sweep"

    def test_unknown_format(self, sample_report):
        with pytest.raises(ValueError):
            render_report(sample_report, "xml")
