"""STFT analysis/synthesis with a least-squares (dual window) inverse.

Spectrograms are one-sided complex arrays of shape ``(n_bins, n_frames)``.
Frame ``t`` covers samples ``[t * hop, t * hop + win_len)``; there is no
centering and a trailing partial frame is dropped.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

WINDOW_KINDS = ("hann", "sqrt_hann")

# below this the stationary window energy is treated as zero
ENVELOPE_FLOOR = 1e-12
# edge samples whose window energy is below this fraction of the interior
# maximum are tapered instead of inverted (caps the inverse gain at 10)
EDGE_FLOOR = 1e-2


class ReconstructionError(ValueError):
    """The window/hop pair cannot reconstruct every sample."""


@dataclass(frozen=True)
class StftConfig:
    """Frame geometry shared by analysis and synthesis.

    Defaults are a 16 ms Hann window at 16 kHz, 50% overlap and a
    zero-padding factor of 2.
    """

    win_len: int = 256
    hop: int = 128
    dft_size: int = 512
    sample_rate: int = 16000
    window_kind: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop <= self.win_len <= self.dft_size:
            raise ValueError(
                f"need 0 < hop <= win_len <= dft_size, got "
                f"hop={self.hop}, win_len={self.win_len}, dft_size={self.dft_size}"
            )
        if self.win_len % self.hop:
            raise ValueError("win_len must be an integer multiple of hop")
        if self.dft_size % self.win_len or self.dft_size % 2:
            raise ValueError("dft_size must be an even integer multiple of win_len")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.window_kind!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @classmethod
    def from_ms(cls, win_ms=16.0, hop_ratio=0.5, zpf=2, sample_rate=16000,
                window_kind="hann"):
        win_len = int(round(win_ms * 1e-3 * sample_rate))
        hop = int(round(win_len * hop_ratio))
        return cls(win_len=win_len, hop=hop, dft_size=zpf * win_len,
                   sample_rate=sample_rate, window_kind=window_kind)

    @property
    def n_bins(self) -> int:
        return self.dft_size // 2 + 1

    @property
    def overlap(self) -> int:
        """Number of frames covering each interior sample."""
        return self.win_len // self.hop

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_len:
            raise ValueError(
                f"signal of {n_samples} samples is shorter than one window ({self.win_len})"
            )
        return (n_samples - self.win_len) // self.hop + 1

    def signal_length(self, n_frames: int) -> int:
        """Length of the synthesized signal for ``n_frames`` frames."""
        return (n_frames - 1) * self.hop + self.win_len

    def to_dict(self) -> dict:
        return asdict(self)


def make_analysis_window(config: StftConfig) -> np.ndarray:
    """Periodic Hann window (or its square root)."""
    n = np.arange(config.win_len)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * n / config.win_len)
    if config.window_kind == "sqrt_hann":
        w = np.sqrt(w)
    return w


def make_synthesis_window(analysis: np.ndarray, hop: int) -> np.ndarray:
    """Canonical dual window ``w / sum_t w(n - t*hop)**2``.

    Raises
    ------
    ReconstructionError
        If some sample receives (numerically) no window energy.
    """
    analysis = np.asarray(analysis, dtype=float)
    if len(analysis) % hop:
        raise ValueError("window length must be an integer multiple of hop")
    denom = (analysis.reshape(-1, hop) ** 2).sum(axis=0)
    if np.any(denom < ENVELOPE_FLOOR):
        raise ReconstructionError(
            "window/hop pair leaves samples with zero window energy"
        )
    return analysis / np.tile(denom, len(analysis) // hop)


@lru_cache(maxsize=32)
def _windows(config: StftConfig):
    w = make_analysis_window(config)
    ws = make_synthesis_window(w, config.hop)
    w.flags.writeable = False
    ws.flags.writeable = False
    return w, ws


def analysis_window(config: StftConfig) -> np.ndarray:
    return _windows(config)[0]


def synthesis_window(config: StftConfig) -> np.ndarray:
    return _windows(config)[1]


def window_envelope(config: StftConfig, n_frames: int) -> np.ndarray:
    """Sum of squared analysis windows over ``n_frames`` consecutive frames."""
    w2 = analysis_window(config) ** 2
    return overlap_add(np.broadcast_to(w2, (n_frames, config.win_len)), config.hop)


def stft(x: np.ndarray, config: StftConfig) -> np.ndarray:
    """One-sided STFT of ``x`` (shape ``(..., N)``), shape ``(..., n_bins, n_frames)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("stft expects a signal, got a scalar")
    n_frames = config.n_frames(x.shape[-1])
    frames = np.lib.stride_tricks.sliding_window_view(x, config.win_len, axis=-1)
    frames = frames[..., : (n_frames - 1) * config.hop + 1 : config.hop, :]
    spec = np.fft.rfft(frames * analysis_window(config), n=config.dft_size, axis=-1)
    return np.swapaxes(spec, -1, -2)


def frame_signals(spec: np.ndarray, config: StftConfig) -> np.ndarray:
    """Truncated inverse DFTs of each column, shape ``(..., n_frames, win_len)``."""
    r = np.fft.irfft(spec, n=config.dft_size, axis=-2)[..., : config.win_len, :]
    return np.swapaxes(r, -1, -2)


def frame_idft(frame: np.ndarray, config: StftConfig) -> np.ndarray:
    """Windowed inverse DFT of one frame, truncated to ``win_len`` samples."""
    frame = np.asarray(frame)
    if frame.shape != (config.n_bins,):
        raise ValueError(f"frame must have {config.n_bins} bins, got {frame.shape}")
    r = np.fft.irfft(frame, n=config.dft_size)[: config.win_len]
    return r * synthesis_window(config)


def overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    """Overlap-add ``frames`` (shape ``(..., n_frames, frame_len)``) at stride ``hop``."""
    frames = np.asarray(frames)
    *lead, n_frames, n_w = frames.shape
    out = np.zeros(tuple(lead) + ((n_frames - 1) * hop + n_w,), dtype=frames.dtype)
    for r in range(n_w // hop):
        chunk = frames[..., r * hop:(r + 1) * hop]
        out[..., r * hop: r * hop + n_frames * hop] += chunk.reshape(tuple(lead) + (-1,))
    return out


def envelope_floor(config: StftConfig) -> float:
    w2 = analysis_window(config) ** 2
    return EDGE_FLOOR * float((w2.reshape(-1, config.hop)).sum(axis=0).max())


def normalize_envelope(numerator: np.ndarray, envelope: np.ndarray,
                       config: StftConfig, exact: bool = False) -> np.ndarray:
    """Divide an overlap-added numerator by the window envelope.

    With ``exact=False`` the envelope is clamped below at
    :func:`envelope_floor`, bounding the gain at the signal edges. With
    ``exact=True`` this is the least-squares inverse of the STFT (zero where
    no window energy at all), which is what makes ``stft(istft(.))`` an
    orthogonal projection; it is only safe for signals that are re-analyzed
    right away.
    """
    if not exact:
        return numerator / np.maximum(envelope, envelope_floor(config))
    out = np.zeros_like(numerator)
    ok = envelope > ENVELOPE_FLOOR
    out[..., ok] = numerator[..., ok] / envelope[ok]
    return out


def istft(spec: np.ndarray, config: StftConfig, exact: bool = False) -> np.ndarray:
    """Least-squares inverse STFT.

    Windowed frames are overlap-added and divided by the window envelope of
    the frames that actually exist, so the partially covered edges are
    reconstructed too. Where that envelope falls below
    :func:`envelope_floor` (the first and last few samples of a Hann
    analysis) the output is tapered rather than inverted; see
    :func:`reconstructable`. In the interior this equals overlap-adding
    :func:`frame_idft` outputs.

    ``exact=True`` gives the untapered least-squares inverse; see
    :func:`normalize_envelope`.
    """
    spec = np.asarray(spec)
    if spec.ndim < 2 or spec.shape[-2] != config.n_bins:
        raise ValueError(
            f"spectrogram must have shape (..., {config.n_bins}, T), got {spec.shape}"
        )
    frames = frame_signals(spec, config) * analysis_window(config)
    num = overlap_add(frames, config.hop)
    return normalize_envelope(num, window_envelope(config, spec.shape[-1]), config,
                              exact=exact)


def project_consistent(spec: np.ndarray, config: StftConfig) -> np.ndarray:
    """``stft(istft(spec))`` with the exact inverse: the nearest consistent spectrogram."""
    return stft(istft(spec, config, exact=True), config)


def reconstructable(config: StftConfig, n_frames: int) -> np.ndarray:
    """Samples that :func:`istft` inverts exactly for consistent spectrograms."""
    return window_envelope(config, n_frames) >= envelope_floor(config)


def spectral_inner(a: np.ndarray, b: np.ndarray, config: StftConfig) -> float:
    """Real inner product of one-sided spectrograms as full spectra.

    Interior bins count twice (their mirrored negative-frequency bins) and
    the sum is divided by ``dft_size`` so that, for a window with constant
    envelope, ``spectral_inner(stft(x), Y) == x @ istft(Y)`` away from edges.
    """
    weights = np.full(config.n_bins, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return float(np.sum(weights[:, None] * np.real(a * np.conj(b)))) / config.dft_size
