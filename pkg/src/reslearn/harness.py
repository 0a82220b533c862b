"""Experiment orchestration: input to feature series, EDA, the model matrix,
and deterministic report files.

Outputs carry no timestamps, so a rerun with the same config and seed is
byte-identical. Parallelism (jobs > 1) fans model kinds out to threads and
merges results in configured order, which keeps the bytes identical too.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import (
    ConfigError,
    DegenerateDistribution,
    DegenerateSeries,
    NonFiniteLoss,
    ResLearnError,
)
from .ingest import EndpointFilter, PacketRecord, parse_csv, parse_pcap
from .metrics import smape_improvement
from .models import PredictorConfig
from .report import comparison_csv, plot_data_csv, render_csv, render_json, report_rows
from .residual import SegmentReport, predict_combined, train_reslearn
from .seriesprep import (
    SplitSpec,
    impute_absent,
    make_windows,
    rolling_mean,
    runs_test,
    segment,
    split,
)
from .synth import SeriesSpec, TraceSpec, gen_series, gen_trace
from .viewframe import (
    Thresholds,
    _dur_threshold_with_peaks,
    estimate_len_threshold,
    features_csv,
    identify_frames,
    segment_features,
    threshold_report,
)


def trace_spec_from_config(cfg: ExperimentConfig) -> TraceSpec:
    return TraceSpec(
        fps=cfg.synth_fps,
        mean_frame_size=cfg.synth_mean_frame_size,
        packets_per_frame=cfg.synth_packets_per_frame,
        intra_spacing=cfg.synth_intra_spacing,
        background_rate=cfg.synth_background_rate,
        jitter_std=cfg.synth_jitter_std,
        duration=cfg.synth_duration,
        seed=cfg.seed,
    )


def series_spec_from_config(cfg: ExperimentConfig) -> SeriesSpec:
    return SeriesSpec(
        length=cfg.synth_length,
        level=cfg.synth_level,
        amplitude=cfg.synth_amplitude,
        period=cfg.synth_period,
        slope=cfg.synth_slope,
        noise_std=cfg.synth_noise_std,
        spike_rate=cfg.synth_spike_rate,
        spike_height=cfg.synth_spike_height,
        seed=cfg.seed,
    )


def predictor_config(cfg: ExperimentConfig, kind: str, epochs: int) -> PredictorConfig:
    return PredictorConfig(
        kind=kind,
        lookback=cfg.lookback,
        epochs=epochs,
        hidden_width=cfg.hidden_width,
        d_model=cfg.d_model,
        n_heads=cfg.n_heads,
        n_layers=cfg.n_layers,
        ffn_width=cfg.ffn_width,
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        early_stop_patience=cfg.patience,
        early_stop_min_delta=cfg.min_delta,
        seed=cfg.seed,
    )


def load_packets(cfg: ExperimentConfig) -> list[PacketRecord]:
    if cfg.input_kind == "synth-trace":
        return gen_trace(trace_spec_from_config(cfg))[0]
    if cfg.input_kind == "pcap":
        filt = EndpointFilter(cfg.server, cfg.port if cfg.port >= 0 else None)
        return parse_pcap(Path(cfg.input_path).read_bytes(), filt).records
    if cfg.input_kind == "csv":
        return parse_csv(Path(cfg.input_path).read_text())
    raise ConfigError(f"input_kind {cfg.input_kind} carries no packets")


def estimate_session_thresholds(
    packets: list[PacketRecord], cfg: ExperimentConfig
) -> Thresholds:
    """Thresholds from the first segment, falling back to the configured
    default duration when the IAT histogram is unimodal."""
    first = [p for p in packets if p.ts < cfg.segment_duration]
    len_th = estimate_len_threshold(first)
    try:
        dur_th, peaks = _dur_threshold_with_peaks(first, cfg.bins)
    except DegenerateDistribution:
        dur_th, peaks = cfg.default_dur_th, []
    return Thresholds(len_th=len_th, dur_th=dur_th, bins=cfg.bins, peaks=tuple(peaks))


def feature_series(cfg: ExperimentConfig):
    """Resolve the configured input into (values, thresholds, features); the
    latter two are None for series inputs."""
    if cfg.input_kind == "synth-series":
        return gen_series(series_spec_from_config(cfg))[0], None, None
    if cfg.input_kind == "features":
        return read_feature_csv(Path(cfg.input_path).read_text(), cfg.feature), None, None
    packets = load_packets(cfg)
    thresholds = estimate_session_thresholds(packets, cfg)
    frames = identify_frames(packets, thresholds, min_packets=cfg.min_packets)
    last_ts = packets[-1].ts if packets else 0.0
    num_segments = int(last_ts // cfg.segment_duration) + 1
    feats = segment_features(frames, 0.0, cfg.segment_duration, num_segments)
    values = _feature_column(feats, cfg.feature)
    return values, thresholds, feats


def _feature_column(feats, feature: str) -> np.ndarray:
    if feature == "f_c":
        return np.array([sf.f_c for sf in feats], dtype=np.float64)
    if feature == "f_s":
        return np.array([sf.f_s for sf in feats], dtype=np.float64)
    return impute_absent([sf.f_iat for sf in feats])


def read_feature_csv(text: str, feature: str) -> np.ndarray:
    from .errors import SchemaMismatch

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "segment,f_c,f_s,f_iat":
        raise SchemaMismatch("expected header 'segment,f_c,f_s,f_iat'")
    col = {"f_c": 1, "f_s": 2, "f_iat": 3}[feature]
    raw = []
    for ln in lines[1:]:
        parts = ln.split(",")
        raw.append(None if parts[col] == "NA" else float(parts[col]))
    if feature == "f_iat":
        return impute_absent(raw)
    return np.array([0.0 if v is None else v for v in raw], dtype=np.float64)


def eda_csv(values: np.ndarray, window: int) -> str:
    """Runs-test rows for the raw series and its rolling mean."""
    lines = ["series,n,n_runs,z,p_value"]
    for name, series in (("raw", values), ("rolling_mean", rolling_mean(values, window))):
        try:
            r = runs_test(series)
            lines.append(
                f"{name},{series.size},{r.n_runs},{format(r.z, '.6g')},{format(r.p_value, '.6g')}"
            )
        except DegenerateSeries:
            lines.append(f"{name},{series.size},NA,NA,NA")
    return "\n".join(lines) + "\n"


def _train_kind(kind: str, segments, cfg: ExperimentConfig, split_spec: SplitSpec):
    base_cfg = predictor_config(cfg, kind, cfg.epochs)
    residual_epochs = cfg.residual_epochs if cfg.reslearn == "on" else 0
    residual_cfg = predictor_config(cfg, "fcnn", residual_epochs)
    models, reports = train_reslearn(
        segments, base_cfg, residual_cfg, split_spec,
        paper_literal_combine=cfg.paper_literal_combine,
    )
    if cfg.reslearn == "off":
        for r in reports:
            r.combined_val = r.combined_test = None
    return models, reports


def _plot_series(models, segments, split_spec: SplitSpec, lookback: int):
    """Per-segment (actual, predicted) pairs on the test part for the base
    and the combined model."""
    base_plots: dict[int, tuple] = {}
    combined_plots: dict[int, tuple] = {}
    for i, model in enumerate(models):
        if model is None:
            continue
        _, _, test = split(segments.segments[i], split_spec, lookback=lookback)
        x_test, y_test = make_windows(model.scaler.transform(test), lookback)
        actual = model.scaler.inverse(y_test)
        base_plots[i] = (actual, model.scaler.inverse(model.base.predict(x_test)))
        combined_plots[i] = (actual, predict_combined(model, x_test))
    return base_plots, combined_plots


def run_experiment(cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Full pipeline; returns the report files written. Raises ConfigError,
    data-stage ResLearnError/OSError, or NonFiniteLoss for the CLI to map to
    exit codes."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = [f"input_kind={cfg.input_kind}", f"feature={cfg.feature}", f"seed={cfg.seed}"]
    written: list[Path] = []

    try:
        values, thresholds, feats = feature_series(cfg)
    except (ResLearnError, OSError) as exc:
        log.append(f"error: {type(exc).__name__}: {exc}")
        (out_dir / "run.log").write_text("\n".join(log) + "\n")
        raise

    if thresholds is not None:
        path = out_dir / "thresholds.json"
        path.write_text(threshold_report(thresholds))
        written.append(path)
        path = out_dir / "features.csv"
        path.write_text(features_csv(feats))
        written.append(path)
        log.append(f"frames: len_th={thresholds.len_th:.6g} dur_th={thresholds.dur_th:.6g}")

    path = out_dir / "eda.csv"
    path.write_text(eda_csv(values, cfg.eda_window))
    written.append(path)

    segments = segment(values, cfg.segment_size)
    split_spec = SplitSpec(cfg.train_ratio, cfg.val_ratio)
    log.append(f"segments: X={segments.num_segments} N={segments.segment_size} "
               f"dropped={segments.dropped}")

    kinds = cfg.model_kinds()
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {
                kind: pool.submit(_train_kind, kind, segments, cfg, split_spec)
                for kind in kinds
            }
            results = {kind: futures[kind].result() for kind in kinds}
    else:
        results = {kind: _train_kind(kind, segments, cfg, split_spec) for kind in kinds}

    kind_reports: dict[str, list[SegmentReport]] = {}
    any_success = False
    for kind in kinds:
        models, reports = results[kind]
        kind_reports[kind] = reports
        any_success = any_success or any(r.failed is None for r in reports)
        rows = report_rows(reports, kind)
        path = out_dir / f"report_{kind}.csv"
        path.write_text(render_csv(rows))
        written.append(path)
        path = out_dir / f"report_{kind}.json"
        path.write_text(render_json(rows))
        written.append(path)
        base_plots, combined_plots = _plot_series(models, segments, split_spec, cfg.lookback)
        for seg_index in sorted(base_plots):
            path = out_dir / f"plot_{kind}_seg{seg_index}.csv"
            path.write_text(plot_data_csv(*base_plots[seg_index]))
            written.append(path)
        if cfg.reslearn == "on":
            for seg_index in sorted(combined_plots):
                path = out_dir / f"plot_{kind}_reslearn_seg{seg_index}.csv"
                path.write_text(plot_data_csv(*combined_plots[seg_index]))
                written.append(path)
        ok = [r for r in reports if r.failed is None]
        if ok and cfg.reslearn == "on":
            improvement = smape_improvement(
                sum(r.base_val.smape for r in ok) / len(ok),
                sum(r.combined_val.smape for r in ok) / len(ok),
            )
            log.append(f"{kind}: segments_ok={len(ok)} val_smape_improvement="
                       f"{improvement:.4g}%")
        else:
            log.append(f"{kind}: segments_ok={len(ok)}")

    if not any_success:
        log.append("error: every segment failed to train")
        (out_dir / "run.log").write_text("\n".join(log) + "\n")
        raise NonFiniteLoss("every segment failed to train")

    if cfg.reslearn == "on":
        path = out_dir / "comparison.csv"
        path.write_text(comparison_csv(kind_reports))
        written.append(path)

    (out_dir / "run.log").write_text("\n".join(log) + "\n")
    return written
