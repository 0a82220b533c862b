"""Segmentation, chronological splits, scaling, windowing, and EDA helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, SeriesTooShort, SplitTooSmall

MIN_SEGMENT_SIZE = 8


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.5
    val_ratio_within_train: float = 0.2

    def __post_init__(self):
        if not 0 < self.train_ratio < 1:
            raise ValueError("train_ratio must be in (0,1)")
        if not 0 < self.val_ratio_within_train < 1:
            raise ValueError("val_ratio_within_train must be in (0,1)")


@dataclass
class SegmentedSeries:
    segments: list[np.ndarray]
    segment_size: int
    dropped: int          # trailing samples shorter than one segment

    @property
    def num_segments(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class Scaler:
    lo: float
    hi: float
    identity: bool = False   # set when the fit range was degenerate

    def transform(self, values: np.ndarray) -> np.ndarray:
        if self.identity:
            return np.asarray(values, dtype=np.float64).copy()
        return (np.asarray(values, dtype=np.float64) - self.lo) / (self.hi - self.lo)

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        if self.identity:
            return np.asarray(scaled, dtype=np.float64).copy()
        return np.asarray(scaled, dtype=np.float64) * (self.hi - self.lo) + self.lo


@dataclass(frozen=True)
class RunsTestResult:
    n_runs: int
    z: float
    p_value: float


def impute_absent(values: list[float | None]) -> np.ndarray:
    """Forward-fill absent entries; leading absents take the first valid value."""
    out = np.empty(len(values), dtype=np.float64)
    last = None
    for i, v in enumerate(values):
        if v is not None:
            last = float(v)
            break
    if last is None:
        raise DegenerateSeries("every value is absent")
    for i, v in enumerate(values):
        if v is not None:
            last = float(v)
        out[i] = last
    return out


def segment(values: np.ndarray, n: int) -> SegmentedSeries:
    values = np.asarray(values, dtype=np.float64)
    if n < MIN_SEGMENT_SIZE:
        raise ValueError(f"segment size must be >= {MIN_SEGMENT_SIZE}")
    if values.size < n:
        raise SeriesTooShort(f"{values.size} values cannot fill one segment of {n}")
    x = values.size // n
    segments = [values[i * n:(i + 1) * n].copy() for i in range(x)]
    return SegmentedSeries(segments, n, dropped=values.size - x * n)


def split(
    values: np.ndarray, spec: SplitSpec, lookback: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chronological train/val/test split; never shuffles.

    When `lookback` is given each part must be able to form at least one
    prediction window (length >= lookback + 1).
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    pool = int(n * spec.train_ratio)
    n_val = int(pool * spec.val_ratio_within_train)
    n_train = pool - n_val
    if lookback is not None:
        need = lookback + 1
        if min(n_train, n_val, n - pool) < need:
            raise SplitTooSmall(
                f"split {n_train}/{n_val}/{n - pool} cannot form windows of lookback {lookback}"
            )
    elif min(n_train, n_val, n - pool) < 1:
        raise SplitTooSmall(f"series of {n} points leaves an empty part")
    return values[:n_train], values[n_train:pool], values[pool:]


def rolling_mean(values: np.ndarray, window: int = 20) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if values.size < window:
        raise SeriesTooShort(f"{values.size} values < window {window}")
    view = np.lib.stride_tricks.sliding_window_view(values, window)
    return view.mean(axis=1)


def runs_test(values: np.ndarray) -> RunsTestResult:
    """Wald-Wolfowitz runs test about the median; ties at the median dropped."""
    values = np.asarray(values, dtype=np.float64)
    med = np.median(values)
    signs = np.sign(values - med)
    signs = signs[signs != 0]
    n1 = int((signs > 0).sum())
    n2 = int((signs < 0).sum())
    if n1 == 0 or n2 == 0:
        raise DegenerateSeries("all values on one side of the median")
    runs = int(1 + (signs[1:] != signs[:-1]).sum())
    n = n1 + n2
    mu = 2.0 * n1 * n2 / n + 1.0
    var = (2.0 * n1 * n2) * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    z = (runs - mu) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return RunsTestResult(n_runs=runs, z=z, p_value=p)


def minmax_scale(values: np.ndarray) -> tuple[np.ndarray, Scaler]:
    """Fit a [0,1] scaler; a constant series passes through with an identity
    scaler flagged rather than raising."""
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        scaler = Scaler(lo, hi, identity=True)
        return values.copy(), scaler
    scaler = Scaler(lo, hi)
    return scaler.transform(values), scaler


def make_windows(values: np.ndarray, lookback: int) -> tuple[np.ndarray, np.ndarray]:
    """One-step-ahead supervised pairs: inputs (n-W, W), targets (n-W,)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < lookback + 1:
        raise SeriesTooShort(f"{values.size} values < lookback {lookback} + 1")
    inputs = np.lib.stride_tricks.sliding_window_view(values[:-1], lookback).copy()
    targets = values[lookback:].copy()
    return inputs, targets
