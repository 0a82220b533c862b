"""Deterministic rendering of per-segment reports, comparison tables, and
plot data. Floats are printed with 6 significant digits, LF endings; the x100
display scaling of SMAPE/MAPE appears only here, in columns labeled _pct."""

from __future__ import annotations

import json
from pathlib import Path

from .metrics import smape_improvement
from .residual import SegmentReport

ROW_HEADER = "segment,model,stage,rmse,mape,smape,res_b,epochs"
FORMATS = ("csv", "json", "plotdata")


def _f(x: float) -> str:
    return format(x, ".6g")


def report_rows(reports: list[SegmentReport], model_name: str) -> list[dict]:
    rows = []
    for r in reports:
        if r.failed is not None:
            rows.append({"segment": r.segment_index, "model": model_name,
                         "stage": "failed", "error": r.failed})
            continue
        for stage, metrics, epochs in (
            ("val", r.base_val, r.base_epochs),
            ("test", r.base_test, r.base_epochs),
        ):
            if metrics is not None:
                rows.append(_row(r, model_name, stage, metrics, epochs))
        for stage, metrics in (("val", r.combined_val), ("test", r.combined_test)):
            if metrics is not None:
                rows.append(_row(r, f"{model_name}+reslearn", stage, metrics,
                                 r.base_epochs + r.residual_epochs))
    return rows


def _row(r: SegmentReport, model: str, stage: str, metrics, epochs: int) -> dict:
    return {
        "segment": r.segment_index,
        "model": model,
        "stage": stage,
        "rmse": float(_f(metrics.rmse)),
        "mape": float(_f(metrics.mape)),
        "smape": float(_f(metrics.smape)),
        "res_b": float(_f(r.res_b)),
        "epochs": epochs,
    }


def render_csv(rows: list[dict]) -> str:
    lines = [ROW_HEADER]
    for row in rows:
        if row["stage"] == "failed":
            lines.append(f"{row['segment']},{row['model']},failed,NA,NA,NA,NA,NA")
        else:
            lines.append(
                f"{row['segment']},{row['model']},{row['stage']},"
                f"{_f(row['rmse'])},{_f(row['mape'])},{_f(row['smape'])},"
                f"{_f(row['res_b'])},{row['epochs']}"
            )
    return "\n".join(lines) + "\n"


def render_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def plot_data_csv(actual, predicted) -> str:
    lines = ["actual,predicted"]
    lines += [f"{_f(a)},{_f(p)}" for a, p in zip(actual, predicted)]
    return "\n".join(lines) + "\n"


def emit_report(
    reports: list[SegmentReport],
    fmt: str,
    out_dir,
    model_name: str = "model",
    plot_series: dict[int, tuple] | None = None,
) -> list[Path]:
    """Write report files of the requested format; returns the paths written."""
    if not reports:
        raise ValueError("no reports to emit")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = report_rows(reports, model_name)
    written = []
    if fmt == "csv":
        path = out_dir / f"report_{model_name}.csv"
        path.write_text(render_csv(rows))
        written.append(path)
    elif fmt == "json":
        path = out_dir / f"report_{model_name}.json"
        path.write_text(render_json(rows))
        written.append(path)
    else:
        if not plot_series:
            raise ValueError("plotdata format needs per-segment (actual, predicted) series")
        for seg_index in sorted(plot_series):
            actual, predicted = plot_series[seg_index]
            path = out_dir / f"plot_{model_name}_seg{seg_index}.csv"
            path.write_text(plot_data_csv(actual, predicted))
            written.append(path)
    return written


def comparison_csv(kind_reports: dict[str, list[SegmentReport]]) -> str:
    """One base row and one reslearn row per model kind, with mean SMAPE over
    segments, its x100 display form, and the val-SMAPE improvement."""
    lines = [
        "model,variant,val_smape,val_smape_pct,test_smape,test_smape_pct,val_improvement_pct"
    ]
    for kind, reports in kind_reports.items():
        ok = [r for r in reports if r.failed is None]
        if not ok:
            lines.append(f"{kind},base,NA,NA,NA,NA,NA")
            lines.append(f"{kind},reslearn,NA,NA,NA,NA,NA")
            continue
        base_val = _mean(r.base_val.smape for r in ok)
        base_test = _mean(r.base_test.smape for r in ok)
        comb_val = _mean(r.combined_val.smape for r in ok)
        comb_test = _mean(r.combined_test.smape for r in ok)
        improvement = smape_improvement(base_val, comb_val)
        lines.append(
            f"{kind},base,{_f(base_val)},{_f(100 * base_val)},"
            f"{_f(base_test)},{_f(100 * base_test)},"
        )
        lines.append(
            f"{kind},reslearn,{_f(comb_val)},{_f(100 * comb_val)},"
            f"{_f(comb_test)},{_f(100 * comb_test)},{_f(improvement)}"
        )
    return "\n".join(lines) + "\n"


def _mean(values) -> float:
    vals = list(values)
    return sum(vals) / len(vals)
