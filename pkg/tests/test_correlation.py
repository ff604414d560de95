import numpy as np
import pytest

from conftest import brute_force_cross, brute_force_pairs
from photonlab.core import ClickStream, RngSeed, ns_to_ticks, seconds_to_ticks
from photonlab.correlation import (
    MODE_ALL_PAIRS,
    CorrelationHistogram,
    correlate_all_pairs,
    correlate_cross,
    fold_two_sided,
    merge_histograms,
    normalize_g2,
    start_stop_first,
    start_stop_pairs,
)
from photonlab.emitters import simulate_poisson


def random_clicks(seed, n=1000, duration=None):
    rng = RngSeed(seed).generator()
    duration = duration or ns_to_ticks(10_000)
    ev = np.sort(rng.choice(duration - 1, size=n, replace=False)).astype(np.int64)
    return ClickStream(ev, duration)


class TestAllPairs:
    def test_enumerated_pairs(self):
        ns = ns_to_ticks
        c = ClickStream([ns(0), ns(3), ns(8)], ns(100))
        h = correlate_all_pairs(c, 0, ns(10), ns(1))
        expected = np.zeros(10, dtype=int)
        expected[3] += 1  # 3 - 0
        expected[5] += 1  # 8 - 3
        expected[8] += 1  # 8 - 0
        assert h.counts.tolist() == expected.tolist()

    def test_empty_stream(self):
        c = ClickStream([], ns_to_ticks(100))
        h = correlate_all_pairs(c, 0, ns_to_ticks(10), ns_to_ticks(1))
        assert h.counts.sum() == 0

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_brute_force_equivalence(self, seed):
        c = random_clicks(seed)
        tmin, tmax, w = ns_to_ticks(2), ns_to_ticks(302), ns_to_ticks(4)
        h = correlate_all_pairs(c, tmin, tmax, w)
        assert np.array_equal(h.counts, brute_force_pairs(c.events, tmin, tmax, w))

    def test_brute_force_equivalence_2000(self):
        c = random_clicks(9, n=2000)
        h = correlate_all_pairs(c, 0, ns_to_ticks(500), ns_to_ticks(5))
        assert np.array_equal(
            h.counts, brute_force_pairs(c.events, 0, ns_to_ticks(500), ns_to_ticks(5)))

    def test_geometry_validation(self):
        c = random_clicks(1, n=10)
        with pytest.raises(ValueError):
            correlate_all_pairs(c, 0, 10, 3)  # not a whole number of bins
        with pytest.raises(ValueError):
            correlate_all_pairs(c, 10, 10, 1)


class TestCross:
    def test_single_pair(self):
        ns = ns_to_ticks
        a = ClickStream([ns(10)], ns(100))
        b = ClickStream([ns(15)], ns(100))
        h = correlate_cross(a, b, ns(20), ns(1))
        centers = h.tau_centers
        (idx,) = np.nonzero(h.counts)
        assert len(idx) == 1
        assert centers[idx[0]] == ns(5) + 500  # +5 ns bin

    def test_self_cross_matches_autocorrelation(self):
        c = random_clicks(4, n=500)
        tmax, w = ns_to_ticks(200), ns_to_ticks(2)
        cross = correlate_cross(c, c, tmax, w)
        auto = correlate_all_pairs(c, 0, tmax, w)
        # positive-tau half of the self cross-correlation is the forward
        # all-pairs histogram, once the n zero-lag self pairs are removed
        # from the first bin
        half = cross.counts[len(cross.counts) // 2:].copy()
        half[0] -= len(c)
        assert np.array_equal(half, auto.counts)

    @pytest.mark.parametrize("seed", [5, 6])
    def test_brute_force_equivalence(self, seed):
        a = random_clicks(seed, n=400)
        b = random_clicks(seed + 100, n=300)
        tmax, w = ns_to_ticks(250), ns_to_ticks(5)
        h = correlate_cross(a, b, tmax, w)
        assert np.array_equal(h.counts, brute_force_cross(a.events, b.events, tmax, w))

    def test_duration_mismatch(self):
        a = ClickStream([1], 100)
        b = ClickStream([1], 200)
        with pytest.raises(ValueError):
            correlate_cross(a, b, 10, 1)

    def test_fold(self):
        a = random_clicks(7, n=300)
        b = random_clicks(8, n=300)
        h = correlate_cross(a, b, ns_to_ticks(100), ns_to_ticks(2))
        f = fold_two_sided(h)
        assert f.counts.sum() == h.counts.sum()
        assert f.tau_min == 0
        assert f.n_start_events == 2 * h.n_start_events


class TestStartStop:
    def test_first_successor_only(self):
        ns = ns_to_ticks
        c = ClickStream([ns(0), ns(100), ns(300)], ns(1000))
        h = start_stop_first(c, ns(5), ns(200), ns(1))
        assert h.counts.sum() == 1  # 0->100 recorded; 100->300 lands at 200, excluded
        assert h.counts[95] == 1  # bin [100, 101) ns relative to w_min = 5 ns

    def test_too_close_pair_excluded(self):
        ns = ns_to_ticks
        c = ClickStream([0, ns(2)], ns(1000))
        h = start_stop_first(c, ns(5), ns(200), ns(1))
        assert h.counts.sum() == 0

    def test_brute_force(self):
        c = random_clicks(11, n=1500)
        w_min, w_max, w = ns_to_ticks(5), ns_to_ticks(205), ns_to_ticks(5)
        h = start_stop_first(c, w_min, w_max, w)
        ref = np.zeros(40, dtype=int)
        for i in range(len(c) - 1):
            d = c.events[i + 1] - c.events[i]
            if w_min <= d < w_max:
                ref[(d - w_min) // w] += 1
        assert h.counts.tolist() == ref.tolist()

    def test_start_stop_vs_all_pairs_decay(self):
        # start-stop undercounts all-pairs by e^(-r tau); <= ~6% over the
        # 5-200 ns window at 300 kcps, so the curve looks nearly linear
        r = 3e5
        s = simulate_poisson(r, seconds_to_ticks(30), RngSeed(12))
        c = ClickStream(s.events, s.duration)
        w_min, w_max, w = ns_to_ticks(5), ns_to_ticks(200), ns_to_ticks(5)
        ss = normalize_g2(start_stop_first(c, w_min, w_max, w))
        ap = normalize_g2(correlate_all_pairs(c, w_min, w_max, w))
        tau_s = ss.tau_centers / 1e12
        ratio = ss.g2 / ap.g2
        expected = np.exp(-r * tau_s)
        assert np.mean(np.abs(ratio - expected)) < 0.01
        assert np.max(np.abs(ratio - expected)) < 0.05
        assert np.all(expected > 0.94)

    def test_exp_correction_flattens(self):
        r = 3e5
        s = simulate_poisson(r, seconds_to_ticks(30), RngSeed(13))
        c = ClickStream(s.events, s.duration)
        h = start_stop_first(c, ns_to_ticks(5), ns_to_ticks(200), ns_to_ticks(5))
        cur = normalize_g2(h, exp_correction=True)
        assert abs(cur.g2.mean() - 1.0) < 0.02


class TestNormalize:
    def test_poisson_flat_at_one(self):
        s = simulate_poisson(5e5, seconds_to_ticks(20), RngSeed(14))
        c = ClickStream(s.events, s.duration)
        cur = normalize_g2(correlate_all_pairs(c, 0, ns_to_ticks(200), ns_to_ticks(2)))
        assert abs(cur.g2.mean() - 1.0) < 0.02

    def test_all_zero_counts_flagged(self):
        h = CorrelationHistogram(
            tau_min=0, tau_max=10, bin_width=1, counts=np.zeros(10, int),
            n_start_events=100, stop_rate=1000.0, total_duration=10**12,
            mode=MODE_ALL_PAIRS)
        cur = normalize_g2(h)
        assert np.all(cur.g2 == 0)
        assert np.all(cur.g2_err > 0)  # one-count floor: infinite relative error

    def test_error_bars_scale_with_sqrt_counts(self):
        h = CorrelationHistogram(
            tau_min=0, tau_max=2, bin_width=1, counts=np.array([100, 400]),
            n_start_events=10, stop_rate=1e6, total_duration=10**12,
            mode=MODE_ALL_PAIRS)
        cur = normalize_g2(h)
        assert cur.g2_err[1] == 2 * cur.g2_err[0]

    def test_zero_rate_rejected(self):
        h = CorrelationHistogram(
            tau_min=0, tau_max=2, bin_width=1, counts=np.array([1, 2]),
            n_start_events=0, stop_rate=0.0, total_duration=10**12,
            mode=MODE_ALL_PAIRS)
        with pytest.raises(ValueError):
            normalize_g2(h)


class TestMerge:
    def _hist(self, counts, n_start=10, rate=100.0, dur=10**12):
        counts = np.asarray(counts)
        return CorrelationHistogram(
            tau_min=0, tau_max=len(counts), bin_width=1, counts=counts,
            n_start_events=n_start, stop_rate=rate, total_duration=dur,
            mode=MODE_ALL_PAIRS)

    def test_zero_identity(self):
        h = self._hist([1, 2, 3])
        z = self._hist([0, 0, 0], n_start=0, rate=0.0, dur=0)
        m = merge_histograms(h, z)
        assert m.counts.tolist() == [1, 2, 3]
        assert m.n_start_events == h.n_start_events

    def test_commutative(self):
        h1, h2 = self._hist([1, 0, 2]), self._hist([4, 4, 4], n_start=7)
        a, b = merge_histograms(h1, h2), merge_histograms(h2, h1)
        assert a.counts.tolist() == b.counts.tolist()
        assert a.n_start_events == b.n_start_events
        assert a.stop_rate == pytest.approx(b.stop_rate)

    def test_associative(self):
        hs = [self._hist([i, 2 * i, 1]) for i in range(1, 4)]
        left = merge_histograms(merge_histograms(hs[0], hs[1]), hs[2])
        right = merge_histograms(hs[0], merge_histograms(hs[1], hs[2]))
        assert left.counts.tolist() == right.counts.tolist()
        assert left.total_duration == right.total_duration

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            merge_histograms(self._hist([1, 2]), self._hist([1, 2, 3]))

    def test_segmented_equals_whole_with_overlap_margin(self):
        c = random_clicks(15, n=2000, duration=ns_to_ticks(20_000))
        tmax, w = ns_to_ticks(400), ns_to_ticks(4)
        cut = c.duration // 2
        whole = correlate_all_pairs(c, 0, tmax, w)
        seg1 = ClickStream(c.events[c.events < cut + tmax], c.duration)
        seg2 = ClickStream(c.events[c.events >= cut], c.duration)
        h1 = correlate_all_pairs(seg1, 0, tmax, w, start_window=(0, cut))
        h2 = correlate_all_pairs(seg2, 0, tmax, w, start_window=(cut, c.duration))
        merged = merge_histograms(h1, h2)
        assert np.array_equal(merged.counts, whole.counts)
        assert merged.n_start_events == whole.n_start_events
