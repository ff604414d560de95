"""g2(tau) estimation from event streams.

Three estimators: exhaustive forward pairs in a sliding window (the primary,
unbiased one), two-channel cross-correlation for the beam-splitter
configuration, and the windowed start-stop protocol that emulates
trace-triggered acquisition.  Histograms are a mergeable monoid so segmented
or parallel runs can be combined exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from photonlab import _kernels
from photonlab.core import TICKS_PER_SECOND

MODE_ALL_PAIRS = "all_pairs_forward"
MODE_START_STOP = "start_stop_first"
MODE_CROSS = "cross_two_channel"


@dataclass(frozen=True)
class CorrelationHistogram:
    """Binned coincidence counts plus the metadata needed to normalize them."""

    tau_min: int
    tau_max: int
    bin_width: int
    counts: np.ndarray
    n_start_events: int
    stop_rate: float
    total_duration: int
    mode: str

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if (self.tau_max - self.tau_min) % self.bin_width:
            raise ValueError("(tau_max - tau_min) must be divisible by bin_width")
        n_bins = (self.tau_max - self.tau_min) // self.bin_width
        counts = np.asarray(self.counts, dtype=np.int64)
        if len(counts) != n_bins:
            raise ValueError(f"expected {n_bins} bins, got {len(counts)}")
        object.__setattr__(self, "counts", counts)

    @property
    def tau_centers(self) -> np.ndarray:
        """Bin centers in ticks (float: centers sit on half ticks)."""
        edges = self.tau_min + self.bin_width * np.arange(len(self.counts), dtype=np.float64)
        return edges + 0.5 * self.bin_width


@dataclass(frozen=True)
class G2Curve:
    """Normalized correlation curve with one-sigma Poisson error bars."""

    tau_centers: np.ndarray  # ticks
    g2: np.ndarray
    g2_err: np.ndarray
    counts: np.ndarray
    mode: str
    histogram: CorrelationHistogram | None = None

    @property
    def tau_ns(self) -> np.ndarray:
        return np.asarray(self.tau_centers, dtype=np.float64) / 1000.0


def _check_geometry(tau_min, tau_max, bin_width):
    if tau_max <= tau_min:
        raise ValueError("tau_max must exceed tau_min")
    if bin_width <= 0 or (tau_max - tau_min) % bin_width:
        raise ValueError("window must be a whole number of bins")


def correlate_all_pairs(c, tau_min: int, tau_max: int, bin_width: int,
                        start_window: tuple[int, int] | None = None) -> CorrelationHistogram:
    """Histogram every ordered pair (i, j), i < j, with delay in
    [tau_min, tau_max).

    `start_window` restricts which events act as starts (used for segmented
    runs); stops always come from the full stream.
    """
    _check_geometry(tau_min, tau_max, bin_width)
    lo, hi = start_window if start_window is not None else (0, c.duration)
    counts, n_starts = _kernels.pair_histogram(
        c.events, np.int64(tau_min), np.int64(tau_max), np.int64(bin_width),
        np.int64(lo), np.int64(hi))
    return CorrelationHistogram(
        tau_min=tau_min, tau_max=tau_max, bin_width=bin_width, counts=counts,
        n_start_events=n_starts, stop_rate=c.rate,
        total_duration=c.duration, mode=MODE_ALL_PAIRS)


def correlate_cross(a, b, tau_max: int, bin_width: int) -> CorrelationHistogram:
    """Two-sided histogram of delays t_b - t_a over [-tau_max, tau_max)."""
    if a.duration != b.duration:
        raise ValueError("cross-correlation requires equal durations")
    if tau_max % bin_width:
        raise ValueError("tau_max must be a whole number of bins")
    _check_geometry(-tau_max, tau_max, bin_width)
    counts = _kernels.cross_histogram(a.events, b.events,
                                      np.int64(tau_max), np.int64(bin_width))
    return CorrelationHistogram(
        tau_min=-tau_max, tau_max=tau_max, bin_width=bin_width, counts=counts,
        n_start_events=len(a), stop_rate=b.rate,
        total_duration=a.duration, mode=MODE_CROSS)


def start_stop_pairs(c, w_min: int, w_max: int):
    """Raw start-stop delays and the provenance tag of each stop click."""
    prov = getattr(c, "provenance", None)
    if prov is None:
        prov = np.zeros(len(c.events), dtype=np.uint8)
    return _kernels.start_stop_delays(c.events, prov,
                                      np.int64(w_min), np.int64(w_max))


def start_stop_first(c, w_min: int, w_max: int,
                     bin_width: int = 1000) -> CorrelationHistogram:
    """For each click, if the immediately next click falls in [w_min, w_max),
    record that single delay (the trace-capture trigger protocol)."""
    if w_min >= w_max:
        raise ValueError("w_min must be below w_max")
    _check_geometry(w_min, w_max, bin_width)
    delays, _ = start_stop_pairs(c, w_min, w_max)
    counts, _ = np.histogram(delays, bins=(w_max - w_min) // bin_width,
                             range=(w_min, w_max))
    return CorrelationHistogram(
        tau_min=w_min, tau_max=w_max, bin_width=bin_width,
        counts=counts.astype(np.int64),
        n_start_events=len(c), stop_rate=c.rate,
        total_duration=c.duration, mode=MODE_START_STOP)


def normalize_g2(h: CorrelationHistogram, exp_correction: bool = False) -> G2Curve:
    """Normalize counts to g2: counts / (n_starts * stop_rate * bin_width).

    Error bars are sqrt(counts) under the same scale; zero-count bins get a
    one-count floor error, i.e. infinite relative error.  For the start-stop
    mode, `exp_correction` multiplies by exp(+rate*tau) to undo the
    first-successor waiting-time decay.
    """
    if h.n_start_events <= 0 or h.stop_rate <= 0.0:
        if h.counts.sum() == 0:
            n = len(h.counts)
            z = np.zeros(n)
            return G2Curve(h.tau_centers, z, np.full(n, np.inf), h.counts.copy(),
                           h.mode, h)
        raise ValueError("cannot normalize: zero starts or zero stop rate")
    scale = 1.0 / (h.n_start_events * h.stop_rate * (h.bin_width / TICKS_PER_SECOND))
    g2 = h.counts * scale
    err = np.sqrt(np.maximum(h.counts, 1)) * scale
    if exp_correction:
        if h.mode != MODE_START_STOP:
            raise ValueError("exp_correction applies to start-stop histograms only")
        corr = np.exp(h.stop_rate * h.tau_centers / TICKS_PER_SECOND)
        g2 = g2 * corr
        err = err * corr
    return G2Curve(h.tau_centers, g2, err, h.counts.copy(), h.mode, h)


def merge_histograms(h1: CorrelationHistogram,
                     h2: CorrelationHistogram) -> CorrelationHistogram:
    """Element-wise sum of two histograms with identical geometry and mode."""
    for f in ("tau_min", "tau_max", "bin_width", "mode"):
        if getattr(h1, f) != getattr(h2, f):
            raise ValueError(f"histogram {f} mismatch")
    total = h1.total_duration + h2.total_duration
    t1 = h1.total_duration / TICKS_PER_SECOND
    t2 = h2.total_duration / TICKS_PER_SECOND
    rate = (h1.stop_rate * t1 + h2.stop_rate * t2) / (t1 + t2) if total else 0.0
    return replace(h1, counts=h1.counts + h2.counts,
                   n_start_events=h1.n_start_events + h2.n_start_events,
                   stop_rate=rate, total_duration=total)


def fold_two_sided(h: CorrelationHistogram) -> CorrelationHistogram:
    """Fold a symmetric two-sided histogram onto |tau|.

    Bins at +tau and -tau are summed and the start count doubled, so the
    normalization of the folded curve matches the one-sided estimators.
    """
    if h.tau_min != -h.tau_max:
        raise ValueError("fold requires a symmetric window")
    half = len(h.counts) // 2
    folded = h.counts[half:] + h.counts[half - 1::-1]
    return replace(h, tau_min=0, counts=folded,
                   n_start_events=2 * h.n_start_events)
