"""Detector chain: beam splitting, efficiency loss, dark counts, timing
jitter, non-paralyzable dead time and afterpulsing.

The detect() pipeline order is fixed and documented: thinning -> dark counts
-> jitter -> dead time -> afterpulse injection (with the dead-time rule
re-applied, afterpulses treated as ordinary events).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from photonlab import _kernels
from photonlab.core import (
    PROV_AFTERPULSE,
    PROV_DARK,
    PROV_PHOTON,
    TICKS_PER_SECOND,
    ClickStream,
    PhotonStream,
    RngSeed,
    StreamReport,
    ns_to_ticks,
    resolve_collisions,
)
from photonlab.emitters import poisson_segment

# FWHM of a Gaussian = 2 sqrt(2 ln 2) sigma
_FWHM_TO_SIGMA = 1.0 / 2.3548200450309493


@dataclass(frozen=True)
class DetectorParams:
    """One detector: efficiency, dead time, dark rate, jitter, afterpulsing.

    afterpulse_delay is a uniform (min, max) tick window measured from the
    triggering click; its minimum may not fall inside the dead time.
    """

    efficiency: float
    dead_time: int = 0
    dark_rate: float = 0.0
    jitter_fwhm: int = 0
    afterpulse_prob: float = 0.0
    afterpulse_delay: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if not 0.0 <= self.afterpulse_prob <= 1.0:
            raise ValueError("afterpulse_prob must be in [0, 1]")
        if self.dead_time < 0 or self.dark_rate < 0 or self.jitter_fwhm < 0:
            raise ValueError("dead_time, dark_rate and jitter_fwhm must be >= 0")
        lo, hi = self.afterpulse_delay
        if self.afterpulse_prob > 0:
            if lo < self.dead_time:
                raise ValueError("afterpulse delay cannot start inside the dead time")
            if hi <= lo:
                raise ValueError("afterpulse delay window must have max > min")


# Presets for the two detectors of the source paper's control experiments.
# The APD efficiency is 1 and its dark rate 0: its published controls quote
# rates measured at the detector, so callers set the source rate to the
# detected rate.
PRESETS = {
    "apd-paper": DetectorParams(
        efficiency=1.0,
        dead_time=ns_to_ticks(30),
        dark_rate=0.0,
        jitter_fwhm=0,
        afterpulse_prob=0.005,
        afterpulse_delay=(ns_to_ticks(30), ns_to_ticks(50)),
    ),
    "sspd-paper": DetectorParams(
        efficiency=0.10,
        dead_time=ns_to_ticks(5),
        dark_rate=50.0,
        jitter_fwhm=ns_to_ticks(0.1),
        afterpulse_prob=0.0,
    ),
}


def get_preset(name: str) -> DetectorParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown detector preset {name!r}; "
                       f"available: {sorted(PRESETS)}") from None


def beam_splitter(s: PhotonStream, transmittance: float,
                  seed: RngSeed) -> tuple[PhotonStream, PhotonStream]:
    """Route each photon independently: output A with probability
    `transmittance`, else output B.  The union of outputs is the input."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must be in [0, 1]")
    to_a = seed.generator().random(len(s)) < transmittance
    a = PhotonStream(s.events[to_a], s.duration, label=s.label + "/A")
    b = PhotonStream(s.events[~to_a], s.duration, label=s.label + "/B")
    return a, b


def apply_dead_time(events: np.ndarray, dead_time: int) -> np.ndarray:
    """Non-paralyzable dead time on a strictly increasing tick array: an event
    is kept iff it is >= dead_time after the last kept event."""
    events = np.asarray(events, dtype=np.int64)
    return events[_kernels.dead_time_filter(events, np.int64(dead_time))]


def _apply_jitter(events, prov, sigma_ticks, duration, rng):
    deltas = np.rint(rng.normal(0.0, sigma_ticks, size=len(events))).astype(np.int64)
    ev = events + deltas
    np.clip(ev, 0, None, out=ev)
    order = np.argsort(ev, kind="stable")
    ev = resolve_collisions(ev[order])
    keep = ev < duration
    return ev[keep], prov[order][keep]


def _afterpulse_stage(events, prov, p: DetectorParams, rng):
    """Afterpulse injection plus dead-time re-application; redraws a longer
    uniform buffer and reruns if the click chain outgrows the first draw."""
    cap = 2 * len(events) + 1024
    u_decide = rng.random(cap)
    u_delay = rng.random(cap)
    lo, hi = p.afterpulse_delay
    while True:
        out_t = np.empty(cap, dtype=np.int64)
        out_p = np.empty(cap, dtype=np.uint8)
        m, _, overflow = _kernels.afterpulse_pass(
            events, prov, np.int64(p.dead_time), p.afterpulse_prob,
            np.int64(lo), np.int64(hi), u_decide, u_delay, out_t, out_p)
        if not overflow:
            return out_t[:m], out_p[:m]
        extra = cap
        u_decide = np.concatenate([u_decide, rng.random(extra)])
        u_delay = np.concatenate([u_delay, rng.random(extra)])
        cap += extra


def detect(s: PhotonStream, p: DetectorParams, seed: RngSeed,
           detector_id: int = 0) -> ClickStream:
    """Full detection chain producing a ClickStream with provenance tags.

    Fixed stage order (each stage has its own child RNG stream):
    1. Bernoulli thinning by efficiency
    2. merge of a Poisson dark-count stream
    3. Gaussian timing jitter (events below tick 0 clamp to 0; collisions are
       bumped +1 tick; events pushed past the duration are dropped)
    4. non-paralyzable dead time
    5. afterpulse injection, dead-time rule re-applied; afterpulses may spawn
       afterpulses
    """
    ev = s.events
    if p.efficiency < 1.0:
        ev = ev[seed.split(0).generator().random(len(ev)) < p.efficiency]
    prov = np.full(len(ev), PROV_PHOTON, dtype=np.uint8)

    if p.dark_rate > 0.0 and s.duration > 0:
        dark = poisson_segment(p.dark_rate, 0, s.duration, seed.split(1))
        ev = np.concatenate([ev, dark])
        prov = np.concatenate([prov, np.full(len(dark), PROV_DARK, np.uint8)])
        order = np.argsort(ev, kind="stable")
        ev = resolve_collisions(ev[order])
        prov = prov[order]
        keep = ev < s.duration
        ev, prov = ev[keep], prov[keep]

    if p.jitter_fwhm > 0 and len(ev):
        ev, prov = _apply_jitter(ev, prov, p.jitter_fwhm * _FWHM_TO_SIGMA,
                                 s.duration, seed.split(2).generator())

    if p.dead_time > 0 and len(ev):
        keep = _kernels.dead_time_filter(ev, np.int64(p.dead_time))
        ev, prov = ev[keep], prov[keep]

    if p.afterpulse_prob > 0.0 and len(ev):
        ev, prov = _afterpulse_stage(ev, prov, p, seed.split(3).generator())
        keep = ev < s.duration
        ev, prov = ev[keep], prov[keep]

    return ClickStream(ev, s.duration, detector_id=detector_id, provenance=prov)


def validate_clicks(c: ClickStream, p: DetectorParams) -> StreamReport:
    """Check that consecutive clicks respect the detector's dead time."""
    if len(c) < 2:
        return StreamReport(True)
    gaps = np.diff(c.events)
    bad = np.flatnonzero(gaps < p.dead_time)
    if bad.size:
        return StreamReport(False, int(bad[0]) + 1, "spacing below dead time")
    return StreamReport(True)
