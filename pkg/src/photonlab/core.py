"""Shared time base, event-stream containers and the deterministic RNG contract.

All timestamps are integer picosecond ticks (1 tick = 1 ps). Module APIs never
exchange floating-point seconds; helpers below convert at the boundary only.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# 1 tick = 1 ps
TICKS_PER_SECOND = 1_000_000_000_000
TICKS_PER_NS = 1_000

# Ticks are held in int64 arrays; anything beyond this is an overflow error,
# never a silent wrap.
MAX_TICK = np.iinfo(np.int64).max

# provenance codes for ClickStream events
PROV_PHOTON = 0
PROV_DARK = 1
PROV_AFTERPULSE = 2


class TickOverflowError(OverflowError):
    """Tick arithmetic left the representable int64 range."""


def seconds_to_ticks(seconds: float) -> int:
    t = round(seconds * TICKS_PER_SECOND)
    if t < 0 or t > MAX_TICK:
        raise TickOverflowError(f"{seconds} s is outside the tick range")
    return t


def ns_to_ticks(ns: float) -> int:
    return seconds_to_ticks(ns * 1e-9)


def ticks_to_seconds(ticks) -> float:
    return np.asarray(ticks, dtype=np.float64) * (1.0 / TICKS_PER_SECOND) if np.ndim(ticks) else ticks / TICKS_PER_SECOND


def ticks_to_ns(ticks):
    return np.asarray(ticks, dtype=np.float64) / TICKS_PER_NS if np.ndim(ticks) else ticks / TICKS_PER_NS


@dataclass(frozen=True)
class RngSeed:
    """Seed plus sub-stream selector.

    Equal (seed, stream_id) reproduce bit-identical output everywhere; distinct
    stream ids give statistically independent sequences.  ``split`` derives
    further independent child streams for internal use (detector stages,
    simulation segments) without consuming randomness.
    """

    seed: int
    stream_id: int = 0
    _path: tuple = field(default=(), repr=False)

    def split(self, index: int) -> "RngSeed":
        return replace(self, _path=self._path + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id, *self._path))
        return np.random.default_rng(ss)


def _as_tick_array(events) -> np.ndarray:
    arr = np.asarray(events, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("events must be one-dimensional")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StreamReport:
    """Outcome of validate_stream: ok, or first offending index and why."""

    ok: bool
    index: int = -1
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class PhotonStream:
    """Strictly increasing emission timestamps plus total duration."""

    events: np.ndarray
    duration: int
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "events", _freeze(_as_tick_array(self.events)))
        if not (0 <= self.duration <= MAX_TICK):
            raise TickOverflowError(f"bad duration {self.duration}")
        rep = validate_stream(self)
        if not rep:
            raise ValueError(f"invalid PhotonStream: {rep.reason} at index {rep.index}")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def rate(self) -> float:
        """Mean event rate in s^-1."""
        return len(self.events) / (self.duration / TICKS_PER_SECOND)


@dataclass(frozen=True)
class ClickStream:
    """Detector output pulses with per-event provenance tags."""

    events: np.ndarray
    duration: int
    detector_id: int = 0
    provenance: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", _freeze(_as_tick_array(self.events)))
        if self.provenance is None:
            object.__setattr__(self, "provenance",
                               np.zeros(len(self.events), dtype=np.uint8))
        prov = np.asarray(self.provenance, dtype=np.uint8)
        if prov.shape != self.events.shape:
            raise ValueError("provenance must match events in length")
        object.__setattr__(self, "provenance", _freeze(prov))
        if not (0 <= self.duration <= MAX_TICK):
            raise TickOverflowError(f"bad duration {self.duration}")
        rep = validate_stream(self)
        if not rep:
            raise ValueError(f"invalid ClickStream: {rep.reason} at index {rep.index}")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def rate(self) -> float:
        return len(self.events) / (self.duration / TICKS_PER_SECOND)


def validate_stream(s) -> StreamReport:
    """Check strict monotonicity and the duration bound of any stream.

    Returns the first violating index rather than raising, so callers can use
    it both as an assertion and as a diagnostic.
    """
    ev = s.events
    if len(ev) == 0:
        return StreamReport(True)
    if ev[0] < 0:
        return StreamReport(False, 0, "negative timestamp")
    bad = np.flatnonzero(np.diff(ev) <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        kind = "duplicate" if ev[i] == ev[i - 1] else "out of order"
        return StreamReport(False, i, kind)
    over = np.flatnonzero(ev >= s.duration)
    if over.size:
        return StreamReport(False, int(over[0]), "exceeds duration")
    return StreamReport(True)


def merge_streams(a, b):
    """Sorted union of two same-kind, same-duration streams.

    Tie rule: both events are kept, the a-event first and the b-event bumped
    by +1 tick (streams stay strictly increasing).  Provenance tags are
    preserved for click streams.
    """
    if type(a) is not type(b):
        raise TypeError("cannot merge streams of different kinds")
    if a.duration != b.duration:
        raise ValueError(f"duration mismatch: {a.duration} != {b.duration}")
    ev = np.concatenate([a.events, b.events])
    origin = np.concatenate([np.zeros(len(a), np.uint8), np.ones(len(b), np.uint8)])
    order = np.argsort(ev, kind="stable")  # stable sort keeps a before b on ties
    ev = resolve_collisions(ev[order])
    if isinstance(a, ClickStream):
        prov = np.concatenate([a.provenance, b.provenance])[order]
        return ClickStream(ev, a.duration, detector_id=a.detector_id, provenance=prov)
    del origin
    return PhotonStream(ev, a.duration, label=a.label)


def resolve_collisions(sorted_events: np.ndarray) -> np.ndarray:
    """Bump duplicate ticks in a sorted array by +1 until strictly increasing."""
    from photonlab._kernels import bump_duplicates

    out = np.array(sorted_events, dtype=np.int64)
    bump_duplicates(out)
    if len(out) and out[-1] > MAX_TICK - 1:
        raise TickOverflowError("collision bump overflowed the tick range")
    return out
