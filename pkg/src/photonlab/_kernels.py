"""Numba kernels for the per-event hot loops.

Everything here is deterministic: kernels either take no randomness, consume
pre-drawn uniforms sequentially, or advance a numpy Generator that the caller
seeded.  Pure-python reference implementations used as oracles live in the
test suite, not here.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def bump_duplicates(events):
    """In-place: make a sorted int64 array strictly increasing by +1 bumps."""
    for i in range(1, len(events)):
        if events[i] <= events[i - 1]:
            events[i] = events[i - 1] + 1


@njit(cache=True)
def dead_time_filter(events, dead_time):
    """Non-paralyzable dead time: keep an event iff >= dead_time after the
    last kept one.  Returns a boolean keep mask; first event always kept."""
    keep = np.zeros(len(events), dtype=np.bool_)
    if len(events) == 0:
        return keep
    keep[0] = True
    last = events[0]
    for i in range(1, len(events)):
        if events[i] - last >= dead_time and events[i] > last:
            keep[i] = True
            last = events[i]
    return keep


@njit(cache=True)
def afterpulse_pass(events, prov, dead_time, ap_prob, ap_min, ap_max,
                    u_decide, u_delay, out_t, out_p):
    """Dead-time pass over real clicks with afterpulse injection.

    Each kept click consumes one decision uniform; a spawned afterpulse gets a
    delay uniform in [ap_min, ap_max) ticks from its trigger and competes with
    real events under the same dead-time rule (afterpulses can spawn
    afterpulses).  Returns (n_out, n_consumed, overflowed); on overflow the
    caller redraws a longer uniform buffer and reruns.
    """
    n = len(events)
    cap = len(u_decide)
    pend_t = np.empty(64, dtype=np.int64)
    n_pend = 0
    last = np.int64(-1) - dead_time  # first event always passes
    i = 0
    k = 0
    m = 0
    while i < n or n_pend > 0:
        take_pending = False
        if n_pend > 0 and (i >= n or pend_t[0] < events[i]):
            take_pending = True
        if take_pending:
            t = pend_t[0]
            p = np.uint8(2)
            n_pend -= 1
            for j in range(n_pend):
                pend_t[j] = pend_t[j + 1]
        else:
            t = events[i]
            p = prov[i]
            i += 1
        if t - last >= dead_time and t > last:
            if k >= cap or m >= len(out_t):
                return m, k, True
            out_t[m] = t
            out_p[m] = p
            m += 1
            last = t
            if u_decide[k] < ap_prob:
                at = t + ap_min + np.int64(u_delay[k] * (ap_max - ap_min))
                if n_pend < 64:
                    j = n_pend
                    while j > 0 and pend_t[j - 1] > at:
                        pend_t[j] = pend_t[j - 1]
                        j -= 1
                    pend_t[j] = at
                    n_pend += 1
            k += 1
    return m, k, False


@njit(cache=True)
def three_level_jumps(rng, k12, k21, k23, k31, duration):
    """Continuous-time Markov jump simulation of {ground, excited, metastable}.

    Rates are per tick.  Waiting times are rounded half-up to integer ticks
    (a zero-tick jump is bumped to one tick) and accumulated exactly in
    integers.  Records one timestamp per excited->ground jump.
    """
    cap = 1 << 16
    buf = np.empty(cap, dtype=np.int64)
    n = 0
    t = np.int64(0)
    state = 1
    p_rad = k21 / (k21 + k23) if (k21 + k23) > 0 else 0.0
    while True:
        if state == 1:
            dt = rng.exponential(1.0 / k12)
            nxt = 2
            emit = False
        elif state == 2:
            dt = rng.exponential(1.0 / (k21 + k23))
            if rng.random() < p_rad:
                nxt = 1
                emit = True
            else:
                nxt = 3
                emit = False
        else:
            dt = rng.exponential(1.0 / k31)
            nxt = 1
            emit = False
        ticks = np.int64(dt + 0.5)
        if ticks < 1:
            ticks = 1
        t += ticks
        if t >= duration:
            break
        if emit:
            if n == cap:
                cap *= 2
                new = np.empty(cap, dtype=np.int64)
                new[:n] = buf[:n]
                buf = new
            buf[n] = t
            n += 1
        state = nxt
    return buf[:n]


@njit(cache=True)
def pair_histogram(events, tau_min, tau_max, bin_width, start_lo, start_hi):
    """Forward ordered-pair delay histogram with a sliding window.

    Counts every ordered pair (i, j), i < j, with delay in [tau_min, tau_max)
    whose *start* event lies in [start_lo, start_hi).  The start window makes
    segmented runs exact: correlating consecutive segments with a tau_max
    overlap margin and summing reproduces the whole-stream histogram.
    Returns (counts, n_starts).
    """
    n_bins = (tau_max - tau_min) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    n_starts = 0
    n = len(events)
    for i in range(n):
        t = events[i]
        if t < start_lo:
            continue
        if t >= start_hi:
            break
        n_starts += 1
        for j in range(i + 1, n):
            d = events[j] - t
            if d >= tau_max:
                break
            if d >= tau_min:
                counts[(d - tau_min) // bin_width] += 1
    return counts, n_starts


@njit(cache=True)
def cross_histogram(a, b, tau_max, bin_width):
    """Two-sided histogram of delays t_b - t_a over [-tau_max, tau_max)."""
    n_bins = (2 * tau_max) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    nb = len(b)
    lo = 0
    for i in range(len(a)):
        t = a[i]
        while lo < nb and b[lo] - t < -tau_max:
            lo += 1
        j = lo
        while j < nb and b[j] - t < tau_max:
            counts[(b[j] - t + tau_max) // bin_width] += 1
            j += 1
    return counts


@njit(cache=True)
def start_stop_delays(events, prov, w_min, w_max):
    """Delay to the immediately next event, kept when inside [w_min, w_max).

    Emulates trace-triggered acquisition: each click is a potential start and
    only its first successor can stop it.  Returns (delays, stop_provenance).
    """
    n = len(events)
    delays = np.empty(n, dtype=np.int64)
    stop_p = np.empty(n, dtype=np.uint8)
    m = 0
    for i in range(n - 1):
        d = events[i + 1] - events[i]
        if w_min <= d < w_max:
            delays[m] = d
            stop_p[m] = prov[i + 1]
            m += 1
    return delays[:m], stop_p[:m]
