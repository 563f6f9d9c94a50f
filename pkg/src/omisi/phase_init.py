"""Phase initialization for new frames: mixture phase or sinusoidal model.

The sinusoidal scheme advances each bin's phase by ``2*pi*hop*nu`` where
``nu`` is the frequency of the spectral peak governing that bin, refined by
quadratic interpolation of the log-magnitude.
"""
from __future__ import annotations

import numpy as np

from .dsp import StftConfig

PHASE_INITS = ("mixture", "sinusoidal")

# peaks below this fraction of the frame maximum are ignored
PEAK_FLOOR = 1e-8


def wrap_phase(phi):
    """Map angles to the principal interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


def safe_angle(z):
    """``np.angle`` with the angle of (numerically) zero taken as 0."""
    z = np.asarray(z)
    return np.where(np.abs(z) < 1e-12, 0.0, np.angle(z))


def mixture_phase(x_frame):
    return wrap_phase(safe_angle(x_frame))


def find_peaks(mag) -> np.ndarray:
    """Interior local maxima: ``m[f] > m[f-1]`` and ``m[f] >= m[f+1]``."""
    mag = np.asarray(mag, dtype=float)
    if mag.size < 3:
        return np.zeros(0, dtype=int)
    floor = PEAK_FLOOR * mag.max()
    mid = mag[1:-1]
    is_peak = (mid > mag[:-2]) & (mid >= mag[2:]) & (mid > floor)
    return np.flatnonzero(is_peak) + 1


def refine_frequency(mag, peak_bin: int, config: StftConfig) -> float:
    """Frequency in cycles/sample from a parabola through three log-magnitudes."""
    p = int(peak_bin)
    if not 0 < p < len(mag) - 1:
        raise ValueError("peak_bin must be an interior bin")
    with np.errstate(divide="ignore"):
        a, b, c = np.log(np.asarray(mag[p - 1:p + 2], dtype=float))
    curvature = a - 2 * b + c
    if not np.isfinite(curvature) or curvature >= 0:
        delta = 0.0
    else:
        delta = float(np.clip(0.5 * (a - c) / curvature, -0.5, 0.5))
    return (p + delta) / config.dft_size


def assign_regions(peaks, n_bins: int) -> np.ndarray:
    """Index of the nearest peak for every bin (ties go to the lower peak).

    Returns -1 for every bin when there are no peaks.
    """
    peaks = np.asarray(peaks, dtype=int)
    if peaks.size == 0:
        return np.full(n_bins, -1, dtype=int)
    bins = np.arange(n_bins)
    upper = np.clip(np.searchsorted(peaks, bins), 0, len(peaks) - 1)
    lower = np.clip(upper - 1, 0, len(peaks) - 1)
    take_upper = np.abs(peaks[upper] - bins) < np.abs(bins - peaks[lower])
    return np.where(take_upper, upper, lower)


def bin_frequencies(mag, config: StftConfig) -> np.ndarray:
    """Per-bin instantaneous frequency (cycles/sample) from peak regions."""
    mag = np.asarray(mag, dtype=float)
    peaks = find_peaks(mag)
    if peaks.size == 0:
        return np.arange(len(mag)) / config.dft_size
    nu = np.array([refine_frequency(mag, p, config) for p in peaks])
    return nu[assign_regions(peaks, len(mag))]


def sinusoidal_phase(prev_phase, mag_frame, config: StftConfig) -> np.ndarray:
    """Advance the previous frame's phase by one hop of each bin's sinusoid."""
    nu = bin_frequencies(mag_frame, config)
    return wrap_phase(np.asarray(prev_phase) + 2 * np.pi * config.hop * nu)


def initial_phase(scheme: str, mixture: np.ndarray, magnitudes: np.ndarray,
                  config: StftConfig) -> np.ndarray:
    """Initial phases for a whole utterance, shape ``(J, F, T)``.

    The sinusoidal scheme starts from the mixture phase in frame 0. Each
    later frame advances the phase of the previous frame's initial estimate
    after the mixture error has been spread over the sources, which is what
    a frame-by-frame stream sees before it iterates.
    """
    mix_phi = mixture_phase(mixture)
    n_src = magnitudes.shape[0]
    if scheme == "mixture":
        return np.broadcast_to(mix_phi, (n_src,) + mix_phi.shape).copy()
    if scheme != "sinusoidal":
        raise ValueError(f"unknown phase init {scheme!r}")
    phi = np.empty(magnitudes.shape)
    phi[:, :, 0] = mix_phi[:, 0]
    for t in range(1, magnitudes.shape[2]):
        y = magnitudes[:, :, t - 1] * np.exp(1j * phi[:, :, t - 1])
        y += (mixture[:, t - 1] - y.sum(axis=0)) / n_src
        for j in range(n_src):
            phi[j, :, t] = sinusoidal_phase(safe_angle(y[j]), magnitudes[j, :, t], config)
    return phi
