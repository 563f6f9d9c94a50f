"""Speech-like synthetic sources for experiments and tests.

Each source is a glottal-like harmonic series with a drifting pitch,
formant-shaped harmonic amplitudes and a syllabic on/off envelope, plus a
little breath noise.
"""
from __future__ import annotations

import numpy as np


def speech_like(rng: np.random.Generator, duration=1.0, sample_rate=16000,
                f0_range=(90.0, 260.0), peak=0.3) -> np.ndarray:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    f0_base = rng.uniform(*f0_range)
    drift = 0.15 * f0_base * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 2 * np.pi))
    vibrato = 0.02 * f0_base * np.sin(2 * np.pi * rng.uniform(4, 7) * t)
    f0 = f0_base + drift + vibrato
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate

    formants = np.sort(rng.uniform([300, 900, 2000], [900, 2000, 3200]))
    bandwidths = np.array([80.0, 120.0, 180.0])
    n_harm = int(0.45 * sample_rate / f0.max())
    x = np.zeros(n)
    for h in range(1, n_harm + 1):
        fh = h * f0
        amp = sum(1.0 / (1.0 + ((fh - fc) / bw) ** 2) for fc, bw in zip(formants, bandwidths))
        x += amp / h ** 0.5 * np.sin(h * phase + rng.uniform(0, 2 * np.pi))

    # syllable-rate gating, smoothed so onsets are not clicks
    rate = rng.uniform(3.0, 5.0)
    gate = 0.5 + 0.5 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    gate = np.clip(1.6 * gate - 0.3, 0.0, 1.0) ** 2
    x = x * gate + 0.01 * rng.standard_normal(n) * gate

    return peak * x / np.max(np.abs(x))


def speech_like_mixture(rng: np.random.Generator, n_sources=2, duration=1.0,
                        sample_rate=16000):
    """Return ``(sources, mixture)`` with sources of shape (J, N)."""
    sources = np.stack([speech_like(rng, duration, sample_rate) for _ in range(n_sources)])
    return sources, sources.sum(axis=0)
