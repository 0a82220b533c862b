"""Video-frame reconstruction from packet streams.

Frame-carrying packets are long and closely spaced, so two thresholds split
them out: a length floor (quarter of the observed maximum) and an
inter-arrival ceiling read off the gap between the first two modes of the
IAT distribution. Both are estimated once from the first segment of a
session and frozen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._backend import maybe_njit
from .errors import DegenerateDistribution, EmptySegment
from .ingest import Direction, PacketRecord

DEFAULT_BINS = 50
LEN_FRACTION = 0.25


@dataclass(frozen=True)
class Thresholds:
    len_th: float     # bytes; packets below this are not frame packets
    dur_th: float     # seconds; gaps above this close a frame
    bins: int = DEFAULT_BINS
    peaks: tuple[float, ...] = ()   # IAT values at detected histogram peaks


@dataclass(frozen=True)
class Frame:
    start_ts: float
    end_ts: float
    size: int
    packet_count: int


@dataclass(frozen=True)
class SegmentFeatures:
    segment_index: int
    f_c: int                 # frame count
    f_s: int                 # total frame size, bytes
    f_iat: float | None      # mean inter-frame arrival, None if < 2 frames


def estimate_len_threshold(packets: list[PacketRecord]) -> float:
    if not packets:
        raise EmptySegment("length threshold needs a non-empty first segment")
    return LEN_FRACTION * max(p.length for p in packets)


def estimate_dur_threshold(packets: list[PacketRecord], bins: int = DEFAULT_BINS) -> float:
    return _dur_threshold_with_peaks(packets, bins)[0]


def _dur_threshold_with_peaks(
    packets: list[PacketRecord], bins: int = DEFAULT_BINS
) -> tuple[float, list[float]]:
    """Histogram log10(IAT) and return the geometric midpoint between the
    centers of the first two peaks, plus the peak IATs for reporting."""
    if len(packets) < 3:
        raise EmptySegment("duration threshold needs at least 3 packets")
    ts = np.array([p.ts for p in packets], dtype=np.float64)
    iat = np.diff(ts)
    iat = iat[iat > 0]
    if iat.size < 2 or np.unique(iat).size < 2:
        raise DegenerateDistribution("need at least 2 distinct positive IATs")
    log_iat = np.log10(iat)
    if log_iat.max() - log_iat.min() < 1e-9:
        raise DegenerateDistribution("IAT distribution is effectively single-valued")
    counts, edges = np.histogram(log_iat, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    padded = np.concatenate(([0], counts, [0]))
    # a stray single-count bin must not pass as a mode on real captures
    min_count = max(2, int(np.ceil(0.01 * iat.size)))
    is_peak = (
        (padded[1:-1] > padded[:-2])
        & (padded[1:-1] > padded[2:])
        & (counts >= min_count)
    )
    peak_idx = np.nonzero(is_peak)[0]
    if peak_idx.size < 2:
        raise DegenerateDistribution(
            f"found {peak_idx.size} IAT peak(s); caller should fall back to a default dur_th"
        )
    mid = 0.5 * (centers[peak_idx[0]] + centers[peak_idx[1]])
    return float(10.0 ** mid), [float(10.0 ** centers[i]) for i in peak_idx]


def estimate_thresholds(packets: list[PacketRecord], bins: int = DEFAULT_BINS) -> Thresholds:
    len_th = estimate_len_threshold(packets)
    dur_th, peaks = _dur_threshold_with_peaks(packets, bins)
    return Thresholds(len_th=len_th, dur_th=dur_th, bins=bins, peaks=tuple(peaks))


def _assign_frames(ts, eligible, dur_th, split_on_small):
    """Frame id per packet, -1 for non-members. Consecutive eligible packets
    with gap <= dur_th share a frame."""
    n = ts.shape[0]
    fid = np.full(n, -1, dtype=np.int64)
    cur = -1
    last_ts = 0.0
    open_frame = False
    for i in range(n):
        if eligible[i]:
            if (not open_frame) or ts[i] - last_ts > dur_th:
                cur += 1
                open_frame = True
            fid[i] = cur
            last_ts = ts[i]
        elif split_on_small:
            open_frame = False
    return fid


_assign_frames_jit = maybe_njit(_assign_frames)


def identify_frames(
    packets: list[PacketRecord],
    thresholds: Thresholds,
    min_packets: int = 1,
    directions: frozenset[Direction] = frozenset({Direction.DOWNLINK}),
    split_on_small_packet: bool = False,
) -> list[Frame]:
    """Group frame-eligible packets into frames per the threshold rules."""
    scanned = [p for p in packets if p.direction in directions]
    if not scanned:
        return []
    ts = np.array([p.ts for p in scanned], dtype=np.float64)
    length = np.array([p.length for p in scanned], dtype=np.int64)
    eligible = length.astype(np.float64) >= thresholds.len_th
    fid = _assign_frames_jit(ts, eligible, float(thresholds.dur_th), split_on_small_packet)

    frames = []
    member = fid >= 0
    if not member.any():
        return frames
    f = fid[member]
    t = ts[member]
    ln = length[member]
    counts = np.bincount(f)
    sizes = np.bincount(f, weights=ln).astype(np.int64)
    first = np.searchsorted(f, np.arange(counts.size), side="left")
    last = np.searchsorted(f, np.arange(counts.size), side="right") - 1
    for k in range(counts.size):
        if counts[k] < min_packets:
            continue
        frames.append(
            Frame(
                start_ts=float(t[first[k]]),
                end_ts=float(t[last[k]]),
                size=int(sizes[k]),
                packet_count=int(counts[k]),
            )
        )
    return frames


def segment_features(
    frames: list[Frame],
    session_start: float,
    segment_duration: float,
    num_segments: int,
) -> list[SegmentFeatures]:
    """Aggregate frames into dense per-segment feature rows."""
    if segment_duration <= 0:
        raise ValueError("segment_duration must be positive")
    by_segment: dict[int, list[Frame]] = {}
    for fr in frames:
        idx = int((fr.start_ts - session_start) // segment_duration)
        if 0 <= idx < num_segments:
            by_segment.setdefault(idx, []).append(fr)
    out = []
    for idx in range(num_segments):
        members = by_segment.get(idx, [])
        f_c = len(members)
        f_s = sum(fr.size for fr in members)
        if f_c >= 2:
            starts = [fr.start_ts for fr in members]
            f_iat = float(np.mean(np.diff(starts)))
        else:
            f_iat = None
        out.append(SegmentFeatures(idx, f_c, f_s, f_iat))
    return out


def features_csv(features: list[SegmentFeatures]) -> str:
    """Per-segment feature table; absent IATs rendered as NA."""
    lines = ["segment,f_c,f_s,f_iat"]
    for sf in features:
        iat = "NA" if sf.f_iat is None else format(sf.f_iat, ".6g")
        lines.append(f"{sf.segment_index},{sf.f_c},{sf.f_s},{iat}")
    return "\n".join(lines) + "\n"


def threshold_report(thresholds: Thresholds) -> str:
    return json.dumps(
        {
            "len_th": thresholds.len_th,
            "dur_th": thresholds.dur_th,
            "bins": thresholds.bins,
            "peaks": list(thresholds.peaks),
        },
        indent=2,
    ) + "\n"
