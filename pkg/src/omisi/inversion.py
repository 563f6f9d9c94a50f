"""Offline multiple-input spectrogram inversion (MISI).

Each iteration re-analyzes the synthesized sources, imposes the target
magnitudes while keeping the phases, then spreads the mixture residual
equally over the sources so they add up to the mixture.

Iterations run on the exact least-squares inverse STFT, so the re-analysis
is an orthogonal projection and the magnitude loss cannot increase. Output
signals use the edge-tapered inverse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, istft, project_consistent, stft
from .phase_init import initial_phase, safe_angle


@dataclass
class InversionResult:
    spectra: np.ndarray  # (J, F, T) complex
    signals: np.ndarray  # (J, N)
    loss_trace: list = field(default_factory=list)


def check_magnitudes(magnitudes, mixture_spec) -> np.ndarray:
    v = np.asarray(magnitudes, dtype=float)
    if v.ndim == 2:
        v = v[None]
    if v.ndim != 3 or v.shape[1:] != np.shape(mixture_spec):
        raise ValueError(
            f"magnitudes of shape {v.shape} do not match mixture spectrogram "
            f"{np.shape(mixture_spec)}"
        )
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError("magnitudes must be finite and nonnegative")
    return v


def magnitude_loss(spectra, magnitudes) -> float:
    """``sum_j || |Z_j| - V_j ||^2`` with every stored bin weighted 1."""
    return float(np.sum((np.abs(spectra) - magnitudes) ** 2))


def spectral_loss(sources, magnitudes, config: StftConfig) -> float:
    """Magnitude mismatch of the STFTs of time-domain sources."""
    z = stft(np.atleast_2d(sources), config)
    if z.shape != np.shape(magnitudes):
        raise ValueError(f"source STFTs {z.shape} vs magnitudes {np.shape(magnitudes)}")
    return magnitude_loss(z, magnitudes)


def magnitude_projection(z, v):
    """Replace magnitudes by ``v`` keeping the phase of ``z`` (phase 0 where ``z`` is 0)."""
    return v * np.exp(1j * safe_angle(z))


def mix_error_distribute(y, x):
    """Add ``(x - sum_j y_j) / J`` to every source estimate."""
    y = np.asarray(y)
    return y + (x - y.sum(axis=0)) / y.shape[0]


def distribute_time_residual(signals, mixture):
    """Time-domain counterpart of :func:`mix_error_distribute`."""
    signals = np.asarray(signals, dtype=float)
    n = signals.shape[1]
    return signals + (np.asarray(mixture)[:n] - signals.sum(axis=0)) / signals.shape[0]


def misi(mixture, magnitudes, config: StftConfig, n_iter: int = 15,
         init="mixture", callback=None) -> InversionResult:
    """Run MISI on a time-domain mixture.

    Parameters
    ----------
    mixture : array_like, shape (N,)
        Time-domain mixture.
    magnitudes : array_like, shape (J, F, T)
        Target magnitudes, matching ``stft(mixture)``.
    n_iter : int
        Number of iterations; ``loss_trace`` has ``n_iter + 1`` entries.
    init : {"mixture", "sinusoidal"} or ndarray
        Phase initialization scheme, or explicit initial phases of shape (J, F, T).
    callback : callable, optional
        Called as ``callback(k, signals)`` after the initial point (k=0) and
        after every iteration.

    Returns
    -------
    InversionResult
        Signals have length ``(T - 1) * hop + win_len`` and sum to the
        mixture sample by sample.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    x = np.asarray(mixture, dtype=float)
    mix_spec = stft(x, config)
    v = check_magnitudes(magnitudes, mix_spec)
    if isinstance(init, str):
        phase = initial_phase(init, mix_spec, v, config)
    else:
        phase = np.asarray(init, dtype=float)
        if phase.shape != v.shape:
            raise ValueError("explicit initial phase must match magnitudes")

    s = mix_error_distribute(v * np.exp(1j * phase), mix_spec)
    z = project_consistent(s, config)
    trace = [magnitude_loss(z, v)]
    if callback is not None:
        callback(0, istft(s, config))
    for k in range(n_iter):
        y = magnitude_projection(z, v)
        s = mix_error_distribute(y, mix_spec)
        z = project_consistent(s, config)
        trace.append(magnitude_loss(z, v))
        if callback is not None:
            callback(k + 1, istft(s, config))

    signals = distribute_time_residual(istft(s, config), x)
    return InversionResult(spectra=s, signals=signals, loss_trace=trace)
