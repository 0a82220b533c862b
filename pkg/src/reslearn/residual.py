"""Two-stage residual learning: base sequence model plus an FCNN trained on
bias-shifted residuals, combined into one forecaster per segment."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import LengthMismatch, ResLearnError
from .metrics import MetricsResult, evaluate
from .models import Predictor, PredictorConfig, build_predictor
from .seriesprep import (
    Scaler,
    SegmentedSeries,
    SplitSpec,
    make_windows,
    minmax_scale,
    split,
)


@dataclass
class ResLearnModel:
    base: Predictor
    residual: Predictor
    res_b: float                       # |min(train residuals)|, scaled units
    scaler: Scaler
    paper_literal_combine: bool = False


@dataclass
class SegmentReport:
    segment_index: int
    res_b: float = 0.0
    base_epochs: int = 0
    residual_epochs: int = 0
    base_val: MetricsResult | None = None
    base_test: MetricsResult | None = None
    combined_val: MetricsResult | None = None
    combined_test: MetricsResult | None = None
    failed: str | None = None


RESLEARN_CHECKPOINT_VERSION = 1


def save_reslearn(model: ResLearnModel, path) -> None:
    """Bundle base, residual, scaler, and the residual bias in one file."""
    import json
    from dataclasses import asdict

    meta = {
        "version": RESLEARN_CHECKPOINT_VERSION,
        "res_b": model.res_b,
        "scaler": {"lo": model.scaler.lo, "hi": model.scaler.hi,
                   "identity": model.scaler.identity},
        "paper_literal_combine": model.paper_literal_combine,
        "base_config": asdict(model.base.config),
        "residual_config": asdict(model.residual.config),
    }
    data = {f"base__{k}": v for k, v in model.base.params.items()}
    data.update({f"residual__{k}": v for k, v in model.residual.params.items()})
    np.savez(path, __meta__=json.dumps(meta), **data)


def load_reslearn(path) -> ResLearnModel:
    import json

    from .errors import CheckpointError

    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise CheckpointError("missing checkpoint metadata")
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != RESLEARN_CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
        base = build_predictor(PredictorConfig(**meta["base_config"]))
        residual = build_predictor(PredictorConfig(**meta["residual_config"]))
        for prefix, model in (("base__", base), ("residual__", residual)):
            for k in model.params:
                key = prefix + k
                if key not in data:
                    raise CheckpointError(f"missing parameter {key}")
                if data[key].shape != model.params[k].shape:
                    raise CheckpointError(f"shape mismatch for {key}")
                model.params[k] = data[key].astype(np.float64)
        scaler = Scaler(**meta["scaler"])
    return ResLearnModel(base, residual, float(meta["res_b"]), scaler,
                         bool(meta["paper_literal_combine"]))


def residual_targets(
    train_targets: np.ndarray, base_predictions: np.ndarray
) -> tuple[np.ndarray, float, np.ndarray]:
    """Residuals, their bias |min|, and the shifted training targets for the
    second-stage model."""
    train_targets = np.asarray(train_targets, dtype=np.float64)
    base_predictions = np.asarray(base_predictions, dtype=np.float64)
    if train_targets.shape != base_predictions.shape:
        raise LengthMismatch(
            f"targets {train_targets.shape} vs predictions {base_predictions.shape}"
        )
    if train_targets.size < 1:
        raise LengthMismatch("need at least one residual")
    res = train_targets - base_predictions
    res_b = float(abs(res.min()))
    return res, res_b, res + res_b


def predict_combined(
    model: ResLearnModel, inputs: np.ndarray, scaled: bool = False
) -> np.ndarray:
    """Base + residual predictions with the training-time bias removed
    (kept when paper_literal_combine is set). Physical units by default."""
    combined = model.base.predict(inputs) + model.residual.predict(inputs)
    if not model.paper_literal_combine:
        combined = combined - model.res_b
    if scaled:
        return combined
    return model.scaler.inverse(combined)


def train_reslearn(
    segments: SegmentedSeries | list[np.ndarray],
    base_cfg: PredictorConfig,
    residual_cfg: PredictorConfig,
    split_spec: SplitSpec,
    paper_literal_combine: bool = False,
) -> tuple[list[ResLearnModel | None], list[SegmentReport]]:
    """Run the per-segment pipeline: split, scale on train, fit base, fit the
    residual learner on bias-shifted train residuals, evaluate both stages on
    val and test in physical units. A failing segment is flagged in its report
    and the loop continues."""
    seg_list = segments.segments if isinstance(segments, SegmentedSeries) else segments
    models: list[ResLearnModel | None] = []
    reports: list[SegmentReport] = []
    for i, seg in enumerate(seg_list):
        report = SegmentReport(segment_index=i)
        try:
            model, report = _train_segment(
                i, seg, base_cfg, residual_cfg, split_spec, paper_literal_combine
            )
        except ResLearnError as exc:
            model = None
            report.failed = f"{type(exc).__name__}: {exc}"
        models.append(model)
        reports.append(report)
    return models, reports


def _train_segment(
    index: int,
    values: np.ndarray,
    base_cfg: PredictorConfig,
    residual_cfg: PredictorConfig,
    split_spec: SplitSpec,
    paper_literal_combine: bool,
) -> tuple[ResLearnModel, SegmentReport]:
    w = base_cfg.lookback
    train, val, test = split(values, split_spec, lookback=w)
    train_scaled, scaler = minmax_scale(train)
    val_scaled = scaler.transform(val)
    test_scaled = scaler.transform(test)

    x_train, y_train = make_windows(train_scaled, w)
    x_val, y_val = make_windows(val_scaled, w)
    x_test, y_test = make_windows(test_scaled, w)

    # fresh parameters per segment, with a segment-derived seed
    base = build_predictor(replace(base_cfg, seed=base_cfg.seed + 1000 * index))
    base_trace = base.fit(x_train, y_train, x_val, y_val)

    train_pred = base.predict(x_train)
    _, res_b, shifted = residual_targets(y_train, train_pred)

    residual = build_predictor(replace(residual_cfg, seed=residual_cfg.seed + 1000 * index + 1))
    val_res_shifted = (y_val - base.predict(x_val)) + res_b
    res_trace = residual.fit(x_train, shifted, x_val, val_res_shifted)

    model = ResLearnModel(base, residual, res_b, scaler, paper_literal_combine)

    report = SegmentReport(
        segment_index=index,
        res_b=res_b,
        base_epochs=base_trace.epochs_run,
        residual_epochs=res_trace.epochs_run,
        base_val=evaluate(scaler.inverse(y_val), scaler.inverse(base.predict(x_val))),
        base_test=evaluate(scaler.inverse(y_test), scaler.inverse(base.predict(x_test))),
        combined_val=evaluate(scaler.inverse(y_val), predict_combined(model, x_val)),
        combined_test=evaluate(scaler.inverse(y_test), predict_combined(model, x_test)),
    )
    return model, report
