"""Deterministic report emission.

Reports serialize with a fixed field order and 17-significant-digit
decimal rendering of reals, so binary64 values round-trip losslessly and
identical runs produce byte-identical files. Wall-clock duration is kept
on the in-memory report but deliberately excluded from the serialized
bytes, which must be reproducible across runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .calibration import RiskProfile
from .evaluation import AblationRow, GuaranteeReport, SweepRow

__all__ = ["RunReport", "write_report", "render_report"]

FORMATS = ("csv", "json")


@dataclass
class RunReport:
    """Everything one CLI invocation produced, plus its parameter echo."""

    tool_version: str
    command: str
    params: dict
    profile: Optional[RiskProfile] = None
    evaluation: Optional[dict] = None
    sweep_rows: Optional[List[SweepRow]] = None
    ablation_rows: Optional[List[AblationRow]] = None
    guarantee: Optional[GuaranteeReport] = None
    duration_seconds: Optional[float] = None  # never serialized

    def recheck(self) -> None:
        """Re-assert the guarantee precondition on every reported threshold."""
        if self.profile is not None:
            self.profile.check_guarantee_precondition()
        for row in self.sweep_rows or ():
            if row.feasible and row.calibration_risk is not None:
                lhs = row.n_calibration * row.calibration_risk + 1.0
                if not lhs <= row.alpha * (row.n_calibration + 1):
                    raise ValueError(
                        f"sweep row alpha={row.alpha} violates the guarantee precondition"
                    )


def _fmt(value) -> str:
    """17-significant-digit decimal rendering; lossless for binary64."""
    return format(float(value), ".17g")


def _json_value(value, out: list, indent: int) -> None:
    pad = "  " * indent
    if value is None:
        out.append("null")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(_fmt(value))
    elif isinstance(value, str):
        out.append('"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(value.items()):
            out.append(f'{pad}  "{k}": ')
            _json_value(v, out, indent + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(value):
            out.append(pad + "  ")
            _json_value(v, out, indent + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def _profile_dict(profile: RiskProfile) -> dict:
    return {
        "loss": profile.kind.tag,
        "direction": profile.kind.direction,
        "alpha": profile.alpha,
        "lambda_hat": profile.lambda_hat,
        "empirical_risk_at_lambda_hat": profile.empirical_risk_at_lambda_hat,
        "adjusted_target": profile.adjusted_target,
        "n_calibration": profile.n_calibration,
        "search_mode": profile.search_mode,
    }


def _sweep_dict(row: SweepRow) -> dict:
    return {
        "alpha": row.alpha,
        "lambda_hat": row.lambda_hat,
        "empirical_test_risk": row.empirical_test_risk,
        "mean_predset_size": row.mean_predset_size,
        "n_calibration": row.n_calibration,
        "n_test": row.n_test,
        "seed": row.seed,
        "feasible": row.feasible,
        "calibration_risk": row.calibration_risk,
        "min_feasible_alpha": row.min_feasible_alpha,
    }


def _ablation_dict(row: AblationRow) -> dict:
    return {
        "split_ratio": row.split_ratio,
        "alpha": row.alpha,
        "mean_lambda_hat": row.mean_lambda_hat,
        "mean_empirical_risk": row.mean_empirical_risk,
        "control_status": row.control_status,
        "n_seeds": row.n_seeds,
        "n_infeasible": row.n_infeasible,
    }


def _guarantee_dict(rep: GuaranteeReport) -> dict:
    return {
        "alpha": rep.alpha,
        "trials": rep.trials,
        "mean_test_risk": rep.mean_test_risk,
        "std_error": rep.std_error,
        "violation_fraction": rep.violation_fraction,
        "per_trial_risks": list(rep.per_trial_risks),
    }


def _report_dict(report: RunReport) -> dict:
    doc = {
        "tool_version": report.tool_version,
        "command": report.command,
        "params": report.params,
    }
    if report.profile is not None:
        doc["profile"] = _profile_dict(report.profile)
    if report.evaluation is not None:
        doc["evaluation"] = report.evaluation
    if report.sweep_rows is not None:
        doc["sweep_rows"] = [_sweep_dict(r) for r in report.sweep_rows]
    if report.ablation_rows is not None:
        doc["ablation_rows"] = [_ablation_dict(r) for r in report.ablation_rows]
    if report.guarantee is not None:
        doc["guarantee"] = _guarantee_dict(report.guarantee)
    return doc


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def _csv_table(rows: List[dict]) -> str:
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[k]) for k in header))
    return "\n".join(lines) + "\n"


def render_report(report: RunReport, fmt: str) -> bytes:
    """Render the report to deterministic bytes."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}")
    report.recheck()
    if fmt == "json":
        out: list = []
        _json_value(_report_dict(report), out, 0)
        return ("".join(out) + "\n").encode("utf-8")
    # CSV carries the tabular payload only; the parameter echo lives in JSON
    if report.sweep_rows is not None:
        return _csv_table([_sweep_dict(r) for r in report.sweep_rows]).encode("utf-8")
    if report.ablation_rows is not None:
        return _csv_table([_ablation_dict(r) for r in report.ablation_rows]).encode("utf-8")
    if report.guarantee is not None:
        rows = [
            {"trial": i, "test_risk": r}
            for i, r in enumerate(report.guarantee.per_trial_risks)
        ]
        return _csv_table(rows).encode("utf-8")
    if report.profile is not None:
        return _csv_table([_profile_dict(report.profile)]).encode("utf-8")
    if report.evaluation is not None:
        return _csv_table([report.evaluation]).encode("utf-8")
    raise ValueError("report has no payload to render")


def write_report(report: RunReport, path, fmt: str) -> None:
    Path(path).write_bytes(render_report(report, fmt))
