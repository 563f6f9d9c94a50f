"""Online MISI: frame-synchronous phase recovery with K frames of lookahead.

Each pushed frame enters a window of at most ``K + 1`` in-flight frames.
Once the window is full, the window frames are iterated against a signal
segment made of the committed past (a fixed overlap-add tail) plus the
synthesis of the in-flight frames. The oldest frame is then committed and
``hop`` output samples are emitted. Algorithmic latency is
``win_len + K * hop`` samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dsp import (StftConfig, analysis_window, frame_signals, normalize_envelope,
                  overlap_add, stft, window_envelope)
from .inversion import magnitude_projection, mix_error_distribute
from .phase_init import PHASE_INITS, mixture_phase, safe_angle, sinusoidal_phase

OFFLINE_ITERATIONS = 15
FUTURE_EDGES = ("renormalize", "truncate")


def default_iterations(lookahead: int) -> int:
    """Per-frame budget matching 15 offline iterations: ``round(15 / (K + 1))``."""
    return max(1, round(OFFLINE_ITERATIONS / (lookahead + 1)))


@dataclass(frozen=True)
class StreamConfig:
    stft: StftConfig
    n_sources: int
    lookahead: int = 1
    iters_per_frame: int | None = None
    phase_init: str = "mixture"
    # extra iterations for each window left at end of stream; None -> iters_per_frame
    drain_iters: int | None = None
    # "renormalize": in-flight segment is inverted as if frame t+K were the last;
    # "truncate": missing future frames are simply left out of the overlap-add
    future_edge: str = "renormalize"

    def __post_init__(self):
        if self.n_sources < 1:
            raise ValueError("need at least one source")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")
        if self.iters_per_frame is None:
            object.__setattr__(self, "iters_per_frame", default_iterations(self.lookahead))
        if self.iters_per_frame < 1:
            raise ValueError("iters_per_frame must be >= 1")
        if self.drain_iters is None:
            object.__setattr__(self, "drain_iters", self.iters_per_frame)
        if self.drain_iters < 0:
            raise ValueError("drain_iters must be >= 0")
        if self.future_edge not in FUTURE_EDGES:
            raise ValueError(f"unknown future_edge {self.future_edge!r}")
        if self.phase_init not in PHASE_INITS:
            raise ValueError(f"unknown phase init {self.phase_init!r}")


def latency_samples(config: StreamConfig) -> int:
    return config.stft.win_len + config.lookahead * config.stft.hop


@lru_cache(maxsize=256)
def _envelope_slice(config: StftConfig, n_before: int, n_frames: int, length: int):
    """Window envelope seen from frame ``n_before`` of a run of ``n_frames`` frames."""
    env = window_envelope(config, n_frames)[n_before * config.hop:][:length]
    env.flags.writeable = False
    return env


class OnlineMISI:
    """Streaming oMISI for one utterance.

    Not thread-safe: ``push`` and ``close`` must be serialized per instance.

    Attributes
    ----------
    loss_log : list of (frame, iteration, loss)
        Windowed magnitude loss ``sum_j || |Z_j| - V_j ||^2`` over the
        in-flight frames, recorded before every update.
    """

    def __init__(self, config: StreamConfig):
        self.config = config
        cfg = config.stft
        n_src, n_bins = config.n_sources, cfg.n_bins
        self._window = analysis_window(cfg)
        self._spectra = np.zeros((n_src, n_bins, 0), dtype=complex)
        self._mixture = np.zeros((n_bins, 0), dtype=complex)
        self._magnitudes = np.zeros((n_src, n_bins, 0))
        self.past_tail = np.zeros((n_src, cfg.win_len - cfg.hop))
        self._last_phase = np.zeros((n_src, n_bins))
        self.frame_index = 0  # next frame to commit
        self.frames_pushed = 0
        self.closed = False
        self.loss_log = []

    @property
    def capacity(self) -> int:
        return self.config.lookahead + 1

    @property
    def n_inflight(self) -> int:
        return self._spectra.shape[2]

    def push(self, mixture_frame, magnitudes):
        """Add frame ``t + K``; return the ``(J, hop)`` block for frame ``t`` once the window is full."""
        if self.closed:
            raise RuntimeError("push after close")
        cfg = self.config.stft
        x = np.asarray(mixture_frame, dtype=complex)
        v = np.asarray(magnitudes, dtype=float)
        if x.shape != (cfg.n_bins,):
            raise ValueError(f"mixture frame must have shape ({cfg.n_bins},), got {x.shape}")
        if v.shape != (self.config.n_sources, cfg.n_bins):
            raise ValueError(
                f"magnitudes must have shape ({self.config.n_sources}, {cfg.n_bins}), got {v.shape}"
            )

        phase = self._init_phase(x, v)
        s_new = mix_error_distribute(v * np.exp(1j * phase), x)
        self._spectra = np.concatenate([self._spectra, s_new[:, :, None]], axis=2)
        self._mixture = np.concatenate([self._mixture, x[:, None]], axis=1)
        self._magnitudes = np.concatenate([self._magnitudes, v[:, :, None]], axis=2)
        self.frames_pushed += 1

        if self.n_inflight < self.capacity:
            return None
        self._iterate(self.config.iters_per_frame)
        return self._commit()

    def close(self) -> np.ndarray:
        """Commit the remaining frames and return all trailing samples, shape (J, n)."""
        if self.closed:
            raise RuntimeError("stream already closed")
        self.closed = True
        cfg = self.config.stft
        if self.frames_pushed == 0:
            return np.zeros((self.config.n_sources, 0))

        # a stream shorter than the window never got its full-window pass
        n_iter = (self.config.iters_per_frame if self.frames_pushed < self.capacity
                  else self.config.drain_iters)
        blocks = []
        while self.n_inflight:
            self._iterate(n_iter)
            n_iter = self.config.drain_iters
            blocks.append(self._commit())

        n_before = min(self.frame_index, cfg.overlap - 1)
        env = _envelope_slice(cfg, n_before, n_before, cfg.win_len - cfg.hop)
        blocks.append(normalize_envelope(self.past_tail, env, cfg))
        return np.concatenate(blocks, axis=1)

    def _init_phase(self, x, v):
        if self.config.phase_init == "mixture" or self.frames_pushed == 0:
            return np.broadcast_to(mixture_phase(x), v.shape)
        prev = safe_angle(self._spectra[:, :, -1]) if self.n_inflight else self._last_phase
        return np.stack([sinusoidal_phase(p, m, self.config.stft) for p, m in zip(prev, v)])

    def _iterate(self, n_iter: int):
        cfg = self.config.stft
        n_win = self.n_inflight
        if n_iter == 0 or n_win == 0:
            return
        n_before = min(self.frame_index, cfg.overlap - 1)
        seg_len = cfg.signal_length(n_win)
        n_env = n_before + n_win
        if self.config.future_edge == "truncate":
            n_env += cfg.overlap - 1
        env = _envelope_slice(cfg, n_before, n_env, seg_len)
        past = np.zeros((self.config.n_sources, seg_len))
        past[:, : self.past_tail.shape[1]] = self.past_tail

        s, v, x = self._spectra, self._magnitudes, self._mixture
        for it in range(n_iter):
            future = overlap_add(frame_signals(s, cfg) * self._window, cfg.hop)
            segment = normalize_envelope(past + future, env, cfg, exact=True)
            z = stft(segment, cfg)
            self.loss_log.append(
                (self.frame_index, it, float(np.sum((np.abs(z) - v) ** 2)))
            )
            s = mix_error_distribute(magnitude_projection(z, v), x)
        self._spectra = s

    def _commit(self) -> np.ndarray:
        cfg = self.config.stft
        frame = self._spectra[:, :, 0]
        synth = np.fft.irfft(frame, n=cfg.dft_size, axis=1)[:, : cfg.win_len] * self._window
        synth[:, : self.past_tail.shape[1]] += self.past_tail

        n_before = min(self.frame_index, cfg.overlap - 1)
        env = _envelope_slice(cfg, n_before, n_before + 1, cfg.hop)
        block = normalize_envelope(synth[:, : cfg.hop], env, cfg)
        self.past_tail = synth[:, cfg.hop:]
        self._last_phase = safe_angle(frame)

        self._spectra = self._spectra[:, :, 1:]
        self._mixture = self._mixture[:, 1:]
        self._magnitudes = self._magnitudes[:, :, 1:]
        self.frame_index += 1
        return block


def stream_open(config: StreamConfig) -> OnlineMISI:
    return OnlineMISI(config)


def run_online(mixture_spec, magnitudes, config: StreamConfig):
    """Push every frame of an utterance through :class:`OnlineMISI`.

    Returns the concatenated ``(J, (T - 1) * hop + win_len)`` output and the
    stream (for its ``loss_log``).
    """
    v = np.asarray(magnitudes, dtype=float)
    x = np.asarray(mixture_spec)
    if v.shape != (config.n_sources,) + x.shape:
        raise ValueError(f"magnitudes {v.shape} do not match mixture {x.shape}")
    stream = OnlineMISI(config)
    blocks = []
    for t in range(x.shape[1]):
        out = stream.push(x[:, t], v[:, :, t])
        if out is not None:
            blocks.append(out)
    blocks.append(stream.close())
    return np.concatenate(blocks, axis=1), stream
