"""Run AM / MISI / oMISI on one mixture and score the result."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, istft, stft
from .inversion import check_magnitudes, distribute_time_residual, misi
from .metrics import amplitude_mask, evaluate
from .streaming import StreamConfig, latency_samples, run_online

ALGORITHMS = ("am", "misi", "omisi")


@dataclass
class Separation:
    label: str
    algorithm: str
    estimates: np.ndarray
    latency_samples: int | None
    n_iter: int | None = None
    lookahead: int | None = None
    phase_init: str | None = None
    # misi: one loss per iteration; omisi: (frame, iteration, loss) rows
    loss_trace: list = field(default_factory=list)


def make_label(algorithm, lookahead=None, phase_init="mixture"):
    label = algorithm
    if algorithm == "omisi":
        label += f"_K{lookahead}"
    if algorithm != "am" and phase_init != "mixture":
        label += "_sin"
    return label


def separate(algorithm, mixture, magnitudes, config: StftConfig, *, n_iter=15,
             lookahead=1, iters_per_frame=None, phase_init="mixture",
             drain_iters=None, future_edge="renormalize") -> Separation:
    """Separate ``mixture`` given per-source magnitudes with one algorithm.

    All outputs are trimmed to ``(T - 1) * hop + win_len`` samples and sum to
    the mixture.
    """
    x = np.asarray(mixture, dtype=float)
    mix_spec = stft(x, config)
    v = check_magnitudes(magnitudes, mix_spec)
    label = make_label(algorithm, lookahead, phase_init)

    if algorithm == "am":
        est = distribute_time_residual(istft(amplitude_mask(v, mix_spec), config), x)
        return Separation(label, "am", est, latency_samples=config.win_len)
    if algorithm == "misi":
        res = misi(x, v, config, n_iter=n_iter, init=phase_init)
        return Separation(label, "misi", res.signals, latency_samples=None,
                          n_iter=n_iter, phase_init=phase_init, loss_trace=res.loss_trace)
    if algorithm == "omisi":
        scfg = StreamConfig(config, n_sources=v.shape[0], lookahead=lookahead,
                            iters_per_frame=iters_per_frame, phase_init=phase_init,
                            drain_iters=drain_iters, future_edge=future_edge)
        out, stream = run_online(mix_spec, v, scfg)
        est = distribute_time_residual(out, x)
        return Separation(label, "omisi", est, latency_samples=latency_samples(scfg),
                          n_iter=scfg.iters_per_frame, lookahead=lookahead,
                          phase_init=phase_init, loss_trace=stream.loss_log)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def score(sep: Separation, references, mixture):
    trace = sep.loss_trace if sep.algorithm == "misi" else ()
    return evaluate(sep.label, sep.estimates, references, mixture,
                    latency_samples=sep.latency_samples, loss_trace=trace)
