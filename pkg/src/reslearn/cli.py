"""Command line front end.

Exit codes: 0 success, 1 config error, 2 data error, 3 training failure.
The default output directory can be set with RESLEARN_OUT_DIR.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import apply_overrides, load_config
from .errors import ConfigError, NonFiniteLoss, ResLearnError
from .harness import (
    eda_csv,
    estimate_session_thresholds,
    feature_series,
    load_packets,
    read_feature_csv,
    run_experiment,
    series_spec_from_config,
    trace_spec_from_config,
)
from .ingest import EndpointFilter, emit_csv, parse_csv, parse_pcap
from .metrics import evaluate
from .report import _f
from .residual import load_reslearn, predict_combined
from .seriesprep import make_windows
from .synth import gen_series, gen_trace
from .viewframe import features_csv, identify_frames, segment_features, threshold_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


def _default_out() -> str:
    return os.environ.get("RESLEARN_OUT_DIR", "out")


def _add_packet_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pcap", help="classic pcap input file")
    p.add_argument("--csv", help="packet CSV input file (ts,length,direction)")
    p.add_argument("--server", help="rendering server IPv4 address (pcap input)")
    p.add_argument("--port", type=int, help="optional server port filter")


def _read_packets(args) -> list:
    if args.pcap:
        if not args.server:
            raise ConfigError("--pcap needs --server")
        filt = EndpointFilter(args.server, args.port)
        result = parse_pcap(Path(args.pcap).read_bytes(), filt)
        print(f"parsed {len(result.records)} packets, skipped {result.skipped}, "
              f"warnings {result.warnings}", file=sys.stderr)
        return result.records
    if args.csv:
        return parse_csv(Path(args.csv).read_text())
    raise ConfigError("need --pcap or --csv")


def cmd_ingest(args) -> int:
    records = _read_packets(args)
    text = emit_csv(records)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_frames(args) -> int:
    cfg = load_config(args.config) if args.config else _default_cfg()
    records = _read_packets(args)
    thresholds = estimate_session_thresholds(records, cfg)
    frames = identify_frames(records, thresholds, min_packets=cfg.min_packets)
    num_segments = int(records[-1].ts // cfg.segment_duration) + 1 if records else 0
    feats = segment_features(frames, 0.0, cfg.segment_duration, num_segments)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    (out / "thresholds.json").write_text(threshold_report(thresholds))
    (out / "features.csv").write_text(features_csv(feats))
    print(f"{len(frames)} frames over {num_segments} segments -> {out}", file=sys.stderr)
    return EXIT_OK


def cmd_eda(args) -> int:
    values = read_feature_csv(Path(args.features).read_text(), args.feature)
    text = eda_csv(values, args.window)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = load_config(args.config) if args.config else _default_cfg()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.kind == "trace":
        packets, _ = gen_trace(trace_spec_from_config(cfg))
        text = emit_csv(packets)
    else:
        values, _ = gen_series(series_spec_from_config(cfg))
        text = "value\n" + "\n".join(repr(v) for v in values) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    from .harness import _train_kind, predictor_config  # noqa: PLC0415
    from .residual import save_reslearn
    from .seriesprep import SplitSpec, segment

    cfg = _load_run_config(args)
    cfg.validate()
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    values, _, _ = feature_series(cfg)
    segments = segment(values, cfg.segment_size)
    split_spec = SplitSpec(cfg.train_ratio, cfg.val_ratio)
    for kind in cfg.model_kinds():
        models, reports = _train_kind(kind, segments, cfg, split_spec)
        for i, model in enumerate(models):
            if model is None:
                print(f"{kind} segment {i}: {reports[i].failed}", file=sys.stderr)
                continue
            path = out / f"ckpt_{kind}_seg{i}.npz"
            save_reslearn(model, path)
            print(f"saved {path}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_reslearn(args.model)
    values = read_feature_csv(Path(args.features).read_text(), args.feature)
    w = model.base.config.lookback
    x, y = make_windows(model.scaler.transform(values), w)
    actual = model.scaler.inverse(y)
    base_m = evaluate(actual, model.scaler.inverse(model.base.predict(x)))
    comb_m = evaluate(actual, predict_combined(model, x))
    print("model,rmse,mape,smape")
    print(f"base,{_f(base_m.rmse)},{_f(base_m.mape)},{_f(base_m.smape)}")
    print(f"reslearn,{_f(comb_m.rmse)},{_f(comb_m.mape)},{_f(comb_m.smape)}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_run_config(args)
    run_experiment(cfg, Path(args.out or _default_out()))
    return EXIT_OK


def _default_cfg():
    from .config import ExperimentConfig

    return ExperimentConfig()


def _load_run_config(args):
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return apply_overrides(cfg, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reslearn")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a trace into the normalized packet CSV")
    _add_packet_source(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("frames", help="estimate thresholds and emit frame features")
    _add_packet_source(p)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_frames)

    p = sub.add_parser("eda", help="runs-test predictability report for a feature series")
    p.add_argument("--features", required=True)
    p.add_argument("--feature", default="f_s", choices=("f_c", "f_s", "f_iat"))
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eda)

    p = sub.add_parser("synth", help="generate a synthetic trace or series")
    p.add_argument("--kind", choices=("trace", "series"), default="series")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the model matrix and save checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved combined model on a feature series")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--feature", default="f_s", choices=("f_c", "f_s", "f_iat"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from config to report files")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLoss as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (ResLearnError, OSError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
