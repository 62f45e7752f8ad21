import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdecode.errors import ConfigError, EmptyStreamError, InvalidInputError
from cpdecode.signal_pipeline import (
    BandSpec,
    PacketizerConfig,
    StandardizerState,
    bandpower,
    build_feature_streams,
    car,
    decimate,
    ems_apply,
    ems_standardize,
    packetize,
    round_half_away,
    welch_psd,
)

FS = 250.0


def test_round_half_away():
    assert round_half_away(62.5) == 63
    assert round_half_away(-62.5) == -63
    assert round_half_away(62.4) == 62
    assert round_half_away(10.0) == 10


class TestPacketizerConfig:
    def test_defaults(self):
        cfg = PacketizerConfig()
        assert cfg.L == 63  # round(0.25 * 250) with half away from zero
        assert cfg.H == 10
        assert cfg.dt == 0.04
        assert cfg.H * cfg.fp == cfg.fs

    def test_decimation_factor(self):
        assert PacketizerConfig().decimation_factor == 4
        with pytest.raises(ConfigError):
            PacketizerConfig(fs_in=1000, fs=300).decimation_factor

    def test_invalid(self):
        with pytest.raises(ConfigError):
            PacketizerConfig(window_sec=-1)
        with pytest.raises(ConfigError):
            PacketizerConfig(fs=0)


class TestDecimate:
    def test_identity_factor(self):
        x = np.random.default_rng(0).standard_normal((3, 100))
        np.testing.assert_array_equal(decimate(x, 1), x)

    def test_dc_preserved(self):
        x = np.full((2, 4000), 3.7)
        out = decimate(x, 4)
        assert out.shape == (2, 1000)
        np.testing.assert_allclose(out, 3.7, atol=1e-9)

    def test_sinusoid_amplitude(self):
        # 10 Hz tone at 1000 Hz decimated by 4; compare against the
        # analytically sampled tone on the output grid
        t_in = np.arange(4000) / 1000.0
        x = np.sin(2 * np.pi * 10 * t_in)[None, :]
        out = decimate(x, 4)
        ref = np.sin(2 * np.pi * 10 * t_in[::4])
        core = slice(50, -50)  # away from filtfilt edge effects
        amp = 0.5 * (out[0, core].max() - out[0, core].min())
        assert abs(amp - 1.0) < 0.01
        assert np.max(np.abs(out[0, core] - ref[core])) < 0.01

    def test_output_length(self):
        for T in (1001, 1002, 1003, 1004):
            assert decimate(np.zeros((1, T)), 4).shape[1] == -(-T // 4)

    def test_errors(self):
        with pytest.raises(ConfigError):
            decimate(np.zeros((1, 100)), 0)
        with pytest.raises(ConfigError):
            decimate(np.zeros((1, 100)), -2)
        x = np.zeros((1, 100))
        x[0, 3] = np.nan
        with pytest.raises(InvalidInputError):
            decimate(x, 4)


class TestPacketize:
    def test_counts_and_coverage(self):
        cfg = PacketizerConfig()
        x = np.random.default_rng(1).standard_normal((3, 1000))
        windows, t = packetize(x, cfg)
        assert windows.shape == (94, 3, 63)
        for k in (0, 17, 93):
            np.testing.assert_array_equal(windows[k], x[:, k * 10 : k * 10 + 63])

    def test_timestamps_right_edge(self):
        cfg = PacketizerConfig()
        _, t = packetize(np.zeros((2, 1000)), cfg)
        np.testing.assert_allclose(t[0], 63 / 250)
        np.testing.assert_allclose(np.diff(t), cfg.dt, atol=1e-12)
        assert np.all(np.diff(t) > 0)

    def test_too_short(self):
        with pytest.raises(EmptyStreamError):
            packetize(np.zeros((2, 62)), PacketizerConfig())

    @given(
        T=st.integers(min_value=63, max_value=2500),
        mult=st.integers(min_value=1, max_value=8),
    )
    @settings(max_examples=40, deadline=None)
    def test_count_formula_by_enumeration(self, T, mult):
        cfg = PacketizerConfig(step_sec=0.04 * mult)
        L, H = cfg.L, cfg.H
        windows, _ = packetize(np.zeros((1, T)), cfg)
        starts = [s for s in range(0, T, H) if s + L <= T]
        assert windows.shape[0] == len(starts) == (T - L) // H + 1


class TestWelch:
    def test_zero_signal(self):
        _, psd = welch_psd(np.zeros(250), FS)
        np.testing.assert_array_equal(psd, 0.0)

    def test_sinusoid_band_mass(self):
        # direct periodogram oracle for where the mass should fall
        t = np.arange(250) / FS
        x = np.sin(2 * np.pi * 10 * t)
        spec = np.abs(np.fft.rfft(x)) ** 2
        f_or = np.fft.rfftfreq(250, 1 / FS)
        mask = (f_or >= 8) & (f_or <= 13)
        assert spec[mask].sum() / spec.sum() >= 0.90  # oracle confirms placement

        freqs, psd = welch_psd(x, FS)
        total = np.trapezoid(psd, freqs)
        in_alpha = bandpower(freqs, psd, [BandSpec("alpha", 8, 13)])[0]
        assert in_alpha / total >= 0.90
        peak = freqs[np.argmax(psd)]
        assert abs(peak - 10) <= freqs[1] - freqs[0]

    def test_white_noise_total_power(self):
        # Monte Carlo oracle: integrated density ~ variance on average
        sigma2 = 2.5
        integrals = []
        for seed in range(100):
            x = np.sqrt(sigma2) * np.random.default_rng(seed).standard_normal(512)
            freqs, psd = welch_psd(x, FS)
            integrals.append(np.sum(psd) * (freqs[1] - freqs[0]))
        assert abs(np.mean(integrals) - sigma2) / sigma2 < 0.20

    @pytest.mark.parametrize("L", [64, 250, 700])
    def test_parseval(self, L):
        rng = np.random.default_rng(L)
        x = rng.standard_normal(L) * 1.7 + 0.4
        freqs, psd = welch_psd(x, FS)
        integral = np.sum(psd) * (freqs[1] - freqs[0])
        # windowed mean-square oracle, segment by segment
        from scipy.signal.windows import hann

        nper = min(L, 256)
        hop = nper - nper // 2
        w = hann(nper)
        powers = []
        for s in range(0, L - nper + 1, hop):
            seg = x[s : s + nper]
            seg = seg - seg.mean()
            powers.append(np.sum((w * seg) ** 2) / np.sum(w**2))
        oracle = np.mean(powers)
        assert abs(integral - oracle) / oracle < 0.05

    def test_window_too_short(self):
        with pytest.raises(ConfigError):
            welch_psd(np.zeros(7), FS)


class TestBandpower:
    def test_constant_psd(self):
        f = np.linspace(0, 125, 126)
        p = bandpower(f, np.ones((1, 126)), [BandSpec("alpha", 8, 13)])
        np.testing.assert_allclose(p[0, 0], 5.0)

    def test_zero_psd(self):
        f = np.linspace(0, 125, 126)
        p = bandpower(f, np.zeros((2, 126)), [BandSpec("alpha", 8, 13)])
        np.testing.assert_array_equal(p, 0.0)

    def test_sinusoid_band_dominance(self):
        t = np.arange(250) / FS
        freqs, psd = welch_psd(np.sin(2 * np.pi * 10 * t), FS)
        bands = [BandSpec("theta", 4, 7), BandSpec("alpha", 8, 13), BandSpec("beta", 13, 30)]
        p = bandpower(freqs, psd, bands)
        assert p[0] < 0.05 * p[1]
        assert p[2] < 0.05 * p[1]

    def test_band_outside_nyquist(self):
        f = np.linspace(0, 125, 126)
        with pytest.raises(ConfigError):
            bandpower(f, np.ones((1, 126)), [BandSpec("hf", 100, 300)])

    @given(data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_additivity(self, data):
        f = np.linspace(0, 125, 126)
        rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
        psd = rng.random((1, 126))
        a = data.draw(st.floats(min_value=1.0, max_value=50.0))
        b = data.draw(st.floats(min_value=a + 1.0, max_value=80.0))
        c = data.draw(st.floats(min_value=b + 1.0, max_value=120.0))
        p_ab = bandpower(f, psd, [BandSpec("ab", a, b)])[0, 0]
        p_bc = bandpower(f, psd, [BandSpec("bc", b, c)])[0, 0]
        p_ac = bandpower(f, psd, [BandSpec("ac", a, c)])[0, 0]
        assert abs(p_ab + p_bc - p_ac) < 1e-9

    def test_nonnegative(self):
        t = np.arange(250) / FS
        freqs, psd = welch_psd(np.random.default_rng(9).standard_normal((4, 250)), FS)
        p = bandpower(freqs, psd, [BandSpec("alpha", 8, 13)])
        assert np.all(p >= 0)


class TestCAR:
    def test_identical_channels(self):
        w = np.tile(np.random.default_rng(0).standard_normal(50), (4, 1))
        np.testing.assert_allclose(car(w), 0.0, atol=1e-12)

    def test_arithmetic(self):
        w = np.array([[1.0], [2.0], [3.0]])
        np.testing.assert_allclose(car(w), [[-1.0], [0.0], [1.0]])

    def test_idempotent_and_zero_mean(self):
        w = np.random.default_rng(2).standard_normal((6, 80))
        once = car(w)
        np.testing.assert_allclose(car(once), once, atol=1e-12)
        np.testing.assert_allclose(once.mean(axis=0), 0.0, atol=1e-12)

    def test_zero_mean_input_unchanged(self):
        w = np.random.default_rng(3).standard_normal((5, 30))
        w = w - w.mean(axis=0, keepdims=True)
        np.testing.assert_allclose(car(w), w, atol=1e-12)

    def test_needs_two_channels(self):
        with pytest.raises(ConfigError):
            car(np.zeros((1, 10)))


class TestEMS:
    def test_constant_input_bounded(self):
        # oracle: run the recursion; mean locks to c so outputs stay small
        alpha = 0.01
        state = StandardizerState(alpha=alpha)
        outs = [abs(float(ems_standardize(state, np.array([4.2]))[0]))
                for _ in range(int(10 / alpha))]
        burn = len(outs) // 10
        tail = outs[burn:]
        assert max(tail) < 0.2
        assert all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))

    def test_alpha_one_degenerate(self):
        state = StandardizerState(alpha=1.0)
        for x in np.random.default_rng(0).standard_normal(10):
            out = ems_standardize(state, np.array([x]))
            assert out[0] == 0.0
            assert state.m[0] == x
            assert state.v[0] == 0.0

    def test_unit_variance_stream(self):
        state = StandardizerState(alpha=0.001)
        x = np.random.default_rng(5).standard_normal((1, 1000))
        out = ems_apply(x, state)
        assert 0.5 < out.var() < 1.5

    def test_deterministic(self):
        x = np.random.default_rng(7).standard_normal((3, 400))
        s1, s2 = StandardizerState(0.01), StandardizerState(0.01)
        o1, o2 = ems_apply(x, s1), ems_apply(x, s2)
        np.testing.assert_array_equal(o1, o2)
        np.testing.assert_array_equal(s1.m, s2.m)
        np.testing.assert_array_equal(s1.v, s2.v)

    def test_stream_matches_batch_bitwise(self):
        x = np.random.default_rng(8).standard_normal((3, 200))
        s1, s2 = StandardizerState(0.01), StandardizerState(0.01)
        batch = ems_apply(x, s1)
        stream = np.column_stack([ems_standardize(s2, x[:, i]) for i in range(200)])
        np.testing.assert_array_equal(batch, stream)
        np.testing.assert_array_equal(s1.m, s2.m)
        np.testing.assert_array_equal(s1.v, s2.v)

    def test_variance_nonnegative(self):
        state = StandardizerState(alpha=0.3)
        for x in np.random.default_rng(11).standard_normal(500) * 100:
            ems_standardize(state, np.array([x]))
            assert state.v[0] >= 0

    def test_nonfinite_rejected_state_unchanged(self):
        state = StandardizerState()
        ems_standardize(state, np.array([1.0, 2.0]))
        m, v = state.m.copy(), state.v.copy()
        with pytest.raises(InvalidInputError):
            ems_standardize(state, np.array([np.nan, 0.0]))
        np.testing.assert_array_equal(state.m, m)
        np.testing.assert_array_equal(state.v, v)


class TestBuildFeatureStreams:
    def test_shapes_62_channels(self):
        rec = np.random.default_rng(0).standard_normal((62, 1000))
        ps = build_feature_streams(rec)
        assert ps.n_features == 186
        assert ps.X_bp.shape == (94, 186)
        assert ps.X_raw.shape == (94, 1, 62, 63)
        assert ps.t.shape == (94,)
        ps.validate()

    def test_zero_recording(self):
        ps = build_feature_streams(np.zeros((4, 1000)))
        np.testing.assert_array_equal(ps.X_bp, 0.0)

    def test_band_above_nyquist_rejected(self):
        with pytest.raises(ConfigError):
            build_feature_streams(
                np.zeros((4, 1000)), bands=[BandSpec("hf", 100, 130)]
            )

    def test_channel_major_band_minor_layout(self):
        # put a strong alpha tone on channel 2 only; its alpha feature
        # should dominate and sit at index 2*K + 1
        rng = np.random.default_rng(4)
        rec = 0.01 * rng.standard_normal((4, 2000))
        t = np.arange(2000) / 250.0
        rec[2] += np.sin(2 * np.pi * 10 * t)
        ps = build_feature_streams(rec)
        k = ps.X_bp.mean(axis=0).argmax()
        assert k == 2 * 3 + 1
