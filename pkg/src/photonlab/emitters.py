"""Photon sources: coherent (Poisson) light, Fock modes, and a three-level
emitter with ground, excited and metastable ("off") states, plus the analytic
two-exponential g2 curve of the three-level model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from photonlab import _kernels
from photonlab.core import (
    MAX_TICK,
    TICKS_PER_SECOND,
    PhotonStream,
    RngSeed,
    TickOverflowError,
    resolve_collisions,
)

_MAX_EVENTS = 1 << 62


class DegenerateRatesError(ValueError):
    """The reduced 2x2 rate matrix has no two distinct real decay rates, so
    the two-exponential curve form does not apply."""


@dataclass(frozen=True)
class ThreeLevelParams:
    """Transition rates (s^-1) of the ground/excited/metastable model.

    k12: pump (ground -> excited), k21: radiative decay (excited -> ground,
    1/lifetime), k23: crossing into the metastable state, k31: deshelving.
    """

    k12: float
    k21: float
    k23: float
    k31: float

    def __post_init__(self):
        if min(self.k12, self.k21, self.k23, self.k31) < 0:
            raise ValueError("rates must be >= 0")
        if self.k21 <= 0:
            raise ValueError("radiative rate k21 must be > 0")


# Default emitter: 30 ns excited-state lifetime; pump and shelving rates are
# configuration defaults chosen so a desk-scale run shows a clear antibunching
# dip and a bunching shoulder while staying within a few GB of memory.
NV_DEFAULT = ThreeLevelParams(k12=1.0e6, k21=1.0 / 30e-9, k23=5.0e6, k31=5.0e5)

THREE_LEVEL_PRESETS = {"nv-default": NV_DEFAULT}


@dataclass(frozen=True)
class G2Model:
    """g2(tau) = 1 - (1 + a) exp(-lambda1 tau) + a exp(-lambda2 tau).

    Rates are s^-1; `a` is the bunching amplitude.  g2(0) = 0 holds
    identically for this form.
    """

    a: float
    lambda1: float
    lambda2: float

    def evaluate_seconds(self, tau):
        tau = np.abs(np.asarray(tau, dtype=np.float64))
        return (1.0 - (1.0 + self.a) * np.exp(-self.lambda1 * tau)
                + self.a * np.exp(-self.lambda2 * tau))


@dataclass(frozen=True)
class FockModeSpec:
    """n photons per mode, mode length in ticks, number of consecutive modes."""

    n: int
    mode_duration: int
    n_modes: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.mode_duration < 1:
            raise ValueError("mode_duration must be >= 1 tick")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.n_modes * self.mode_duration > MAX_TICK:
            raise TickOverflowError("total duration overflows the tick range")


def _segment_plan(duration: int, segment_duration: int | None):
    if segment_duration is None or segment_duration >= duration:
        return [(0, duration)]
    plan = []
    off = 0
    while off < duration:
        plan.append((off, min(segment_duration, duration - off)))
        off += segment_duration
    return plan


def poisson_segment(rate: float, offset: int, length: int, seed: RngSeed) -> np.ndarray:
    """One independently seeded segment of a homogeneous Poisson process."""
    g = seed.generator()
    n = g.poisson(rate * length / TICKS_PER_SECOND)
    ticks = np.sort(g.integers(0, length, size=n, dtype=np.int64)) + offset
    return ticks


def simulate_poisson(rate: float, duration: int, seed: RngSeed,
                     segment_duration: int | None = None,
                     label: str = "poisson") -> PhotonStream:
    """Homogeneous Poisson photon stream (coherent light).

    With a segment plan, each segment draws from its own child sub-stream, so
    segments may be computed in any order or in parallel; the concatenated
    result is identical to the serial run for the same plan.
    """
    if rate <= 0:
        raise ValueError("rate must be > 0")
    if rate * duration / TICKS_PER_SECOND > _MAX_EVENTS:
        raise TickOverflowError("rate * duration is absurdly large")
    if duration == 0:
        return PhotonStream(np.empty(0, np.int64), 0, label=label)
    plan = _segment_plan(duration, segment_duration)
    parts = [poisson_segment(rate, off, length, seed.split(i))
             for i, (off, length) in enumerate(plan)]
    ev = resolve_collisions(np.concatenate(parts))
    return PhotonStream(ev[ev < duration], duration, label=label)


def simulate_fock_modes(spec: FockModeSpec, seed: RngSeed,
                        label: str = "fock") -> PhotonStream:
    """Consecutive time windows with exactly n photons uniformly placed in
    each; duration = n_modes * mode_duration."""
    g = seed.generator()
    pos = g.integers(0, spec.mode_duration, size=(spec.n_modes, spec.n),
                     dtype=np.int64)
    pos.sort(axis=1)
    offsets = np.arange(spec.n_modes, dtype=np.int64) * spec.mode_duration
    ev = resolve_collisions((pos + offsets[:, None]).ravel())
    duration = spec.n_modes * spec.mode_duration
    return PhotonStream(ev[ev < duration], duration, label=label)


def simulate_three_level(params: ThreeLevelParams, duration: int,
                         seed: RngSeed, label: str = "three-level") -> PhotonStream:
    """Markov jump simulation over {ground, excited, metastable}; one photon
    per excited -> ground jump, start in the ground state.

    Per-state waiting times are exponential in the total exit rate with the
    branch chosen by rate ratio; jump times are rounded half-up to ticks and
    a zero-tick jump is bumped to one tick.
    """
    if params.k12 == 0:
        return PhotonStream(np.empty(0, np.int64), duration, label=label)
    per_tick = 1.0 / TICKS_PER_SECOND
    ev = _kernels.three_level_jumps(
        seed.generator(),
        params.k12 * per_tick, params.k21 * per_tick,
        params.k23 * per_tick, params.k31 * per_tick,
        np.int64(duration))
    return PhotonStream(ev, duration, label=label)


def steady_state(params: ThreeLevelParams):
    """Occupation probabilities (p1, p2, p3) of the three-level model."""
    k12, k21, k23, k31 = params.k12, params.k21, params.k23, params.k31
    denom = k31 * (k12 + k21 + k23) + k12 * k23
    p2 = k12 * k31 / denom
    p3 = k23 * p2 / k31 if k31 > 0 else 0.0
    if k31 == 0 and k23 > 0:
        # everything ends up shelved
        return 0.0, 0.0, 1.0
    return 1.0 - p2 - p3, p2, p3


def analytic_g2(params: ThreeLevelParams) -> G2Model:
    """Closed-form g2 of the three-level model.

    Solves the reduced linear system for (p_excited, p_metastable) with the
    post-detection initial condition p2 = p3 = 0 and normalizes by the steady
    state: g2(tau) = p2(tau) / p2(inf).  lambda1 and lambda2 are the negated
    eigenvalues of the 2x2 coefficient matrix.
    """
    if params.k12 <= 0:
        raise ValueError("k12 must be > 0 for a g2 curve")
    k12, k21, k23, k31 = params.k12, params.k21, params.k23, params.k31
    if k23 == 0.0:
        # pure two-level antibunching, no bunching shoulder
        return G2Model(a=0.0, lambda1=k12 + k21, lambda2=k31 if k31 > 0 else k12 + k21)
    trace = k12 + k21 + k23 + k31
    det = k31 * (k12 + k21 + k23) + k12 * k23
    disc = trace * trace - 4.0 * det
    if disc <= 0.0:
        raise DegenerateRatesError(
            "decay rates are degenerate or complex; two-exponential form invalid")
    root = math.sqrt(disc)
    lam1 = 0.5 * (trace + root)
    lam2 = 0.5 * (trace - root)
    p2_ss = k12 * k31 / det
    a = (k12 / p2_ss - lam1) / (lam1 - lam2)
    return G2Model(a=a, lambda1=lam1, lambda2=lam2)


def eval_g2(model: G2Model, tau):
    """Evaluate the curve at a delay (or array of delays) in ticks; the curve
    is symmetric, negative delays are mirrored."""
    return model.evaluate_seconds(np.asarray(tau, dtype=np.float64) / TICKS_PER_SECOND)
