import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omisi.dsp import StftConfig, stft
from omisi.phase_init import (assign_regions, bin_frequencies, find_peaks, initial_phase,
                              mixture_phase, refine_frequency, sinusoidal_phase, wrap_phase)

from oracles import hann, zero_padded_peak_frequency


def test_mixture_phase_examples():
    np.testing.assert_array_equal(mixture_phase(np.array([1.0, 2.5, 0.0])), [0, 0, 0])
    assert mixture_phase(np.array([1j]))[0] == pytest.approx(np.pi / 2)
    assert mixture_phase(np.array([-1 - 1j]))[0] == pytest.approx(-3 * np.pi / 4)
    assert mixture_phase(np.array([-1.0]))[0] == pytest.approx(np.pi)


def test_find_peaks_examples():
    assert find_peaks(np.arange(10.0)).size == 0
    bump = np.zeros(12)
    bump[4:7] = [1, 3, 1]
    np.testing.assert_array_equal(find_peaks(bump), [5])
    # plateaus count once, at their left end
    np.testing.assert_array_equal(find_peaks(np.array([0, 2, 2, 0.0])), [1])
    assert find_peaks(np.zeros(8)).size == 0
    assert find_peaks(np.array([1.0, 2.0])).size == 0


def test_find_peaks_ignores_numerical_zero_bumps():
    mag = np.zeros(20)
    mag[5] = 1.0
    mag[12] = 1e-10
    np.testing.assert_array_equal(find_peaks(mag), [5])


def test_find_peaks_on_windowed_sinusoid():
    cfg = StftConfig()
    nu = 0.1
    x = np.cos(2 * np.pi * nu * np.arange(256))
    mag = np.abs(stft(x, cfg)[:, 0])
    peaks = find_peaks(mag)
    dominant = peaks[np.argmax(mag[peaks])]
    assert dominant == round(nu * cfg.dft_size)
    # every other peak is a sidelobe at least 30 dB down
    others = np.delete(peaks, np.argmax(mag[peaks]))
    assert np.all(mag[others] < mag[dominant] * 10 ** (-30 / 20))


def test_refine_frequency_symmetric_stencils():
    cfg = StftConfig()
    assert refine_frequency(np.exp([0.0, 1.0, 0.0]), 1, cfg) == 1 / 512
    assert refine_frequency(np.array([1.0, 4.0, 1.0]), 1, cfg) == 1 / 512


def test_refine_frequency_on_bin_sinusoid():
    cfg = StftConfig()
    p = 40
    n = np.arange(256)
    # complex tone: the Hann main lobe is exactly symmetric about p
    tone = np.exp(2j * np.pi * p / 512 * n) * hann(256)
    mag = np.abs(np.fft.fft(tone, 512))[: cfg.n_bins]
    assert refine_frequency(mag, p, cfg) == pytest.approx(p / 512, abs=1e-12)
    # real tone: the negative-frequency image biases by a tiny bin fraction
    mag = np.abs(stft(np.cos(2 * np.pi * p / 512 * n), cfg)[:, 0])
    assert refine_frequency(mag, p, cfg) == pytest.approx(p / 512, abs=1e-3 / 512)


def test_refine_frequency_degenerate_curvature():
    cfg = StftConfig()
    assert refine_frequency(np.array([1.0, 2.0, 4.0]), 1, cfg) == 1 / 512
    with pytest.raises(ValueError):
        refine_frequency(np.ones(4), 0, cfg)


def test_refine_frequency_off_bin_against_padded_dft():
    cfg = StftConfig()
    nu_true = 0.07 + 0.3 / cfg.dft_size
    x = hann(256) * np.cos(2 * np.pi * nu_true * np.arange(256))
    mag = np.abs(np.fft.rfft(x, n=cfg.dft_size))
    p = int(np.argmax(mag))
    oracle = zero_padded_peak_frequency(x)
    assert abs(oracle - nu_true) < 1 / (64 * 256)
    assert abs(refine_frequency(mag, p, cfg) - oracle) < 0.3 / cfg.dft_size
    assert abs(refine_frequency(mag, p, cfg) - nu_true) < 0.3 / cfg.dft_size


def test_assign_regions_examples():
    np.testing.assert_array_equal(assign_regions([10], 20), np.zeros(20, dtype=int))
    regions = assign_regions([4, 12], 20)
    assert regions[8] == 0  # tie goes to the lower peak
    assert regions[9] == 1
    assert regions[0] == 0 and regions[19] == 1
    np.testing.assert_array_equal(assign_regions([], 5), [-1] * 5)


def test_bin_frequencies_without_peaks_are_bin_centres():
    cfg = StftConfig(win_len=8, hop=4, dft_size=16)
    np.testing.assert_allclose(bin_frequencies(np.ones(9), cfg), np.arange(9) / 16)


def test_sinusoidal_phase_full_cycle_advance():
    # hop == dft_size makes hop * nu an integer for every on-bin frequency
    cfg = StftConfig(win_len=8, hop=8, dft_size=8)
    prev = np.random.default_rng(0).uniform(-np.pi, np.pi, cfg.n_bins)
    out = sinusoidal_phase(prev, np.ones(cfg.n_bins), cfg)
    np.testing.assert_allclose(np.exp(1j * out), np.exp(1j * prev), atol=1e-12)


def test_sinusoidal_phase_dc_unchanged():
    cfg = StftConfig()
    prev = np.linspace(-3, 3, cfg.n_bins)
    out = sinusoidal_phase(prev, np.ones(cfg.n_bins), cfg)
    assert out[0] == pytest.approx(prev[0])


def test_sinusoidal_phase_tracks_true_stft_phase():
    cfg = StftConfig()
    nu = 0.05
    n_frames = 11
    x = np.cos(2 * np.pi * nu * np.arange(cfg.signal_length(n_frames)) + 0.3)
    spec = stft(x, cfg)
    p = int(round(nu * cfg.dft_size))
    phase = np.angle(spec[:, 0])
    for t in range(1, n_frames):
        phase = sinusoidal_phase(phase, np.abs(spec[:, t]), cfg)
        err = np.angle(np.exp(1j * (phase[p] - np.angle(spec[p, t]))))
        assert abs(err) < 0.2, (t, err)


@settings(max_examples=50, deadline=None)
@given(phi=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_wrap_phase_range(phi):
    out = wrap_phase(phi)
    assert np.all(out > -np.pi) and np.all(out <= np.pi)
    np.testing.assert_allclose(np.exp(1j * out), np.exp(1j * np.asarray(phi)), atol=1e-9)


def test_wrap_phase_boundary():
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(np.pi) == pytest.approx(np.pi)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(-10, 10))
def test_sinusoidal_phase_shift_equivariant(seed, c):
    cfg = StftConfig(win_len=32, hop=16, dft_size=64)
    g = np.random.default_rng(seed)
    prev = g.uniform(-np.pi, np.pi, cfg.n_bins)
    mag = g.uniform(0, 1, cfg.n_bins)
    a = sinusoidal_phase(prev + c, mag, cfg)
    b = sinusoidal_phase(prev, mag, cfg)
    assert np.all(a > -np.pi) and np.all(a <= np.pi)
    np.testing.assert_allclose(np.exp(1j * a), np.exp(1j * (b + c)), atol=1e-9)


def test_initial_phase_schemes(rng):
    cfg = StftConfig(win_len=32, hop=16, dft_size=64)
    x = stft(rng.standard_normal(400), cfg)
    v = rng.uniform(0, 1, (2,) + x.shape)
    mix = initial_phase("mixture", x, v, cfg)
    np.testing.assert_allclose(mix[1], np.angle(x))
    sin = initial_phase("sinusoidal", x, v, cfg)
    np.testing.assert_allclose(sin[:, :, 0], mix[:, :, 0])
    # frame t advances the mixture-consistent estimate of frame t - 1
    y = v[:, :, 1] * np.exp(1j * sin[:, :, 1])
    y += (x[:, 1] - y.sum(axis=0)) / 2
    np.testing.assert_allclose(sin[1, :, 2], sinusoidal_phase(np.angle(y[1]), v[1, :, 2], cfg))
    with pytest.raises(ValueError):
        initial_phase("random", x, v, cfg)
