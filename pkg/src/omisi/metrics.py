"""Amplitude-mask baseline, oracle magnitudes and SI-SDR scoring."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .dsp import StftConfig, stft

MASK_EPS = 1e-12
SDR_CAP = 300.0
_TINY = 1e-30


def amplitude_mask(magnitudes, mixture_spec):
    """Soft mask ``V_j / sum_p V_p`` applied to the mixture spectrogram."""
    v = np.asarray(magnitudes, dtype=float)
    return v / (v.sum(axis=0) + MASK_EPS) * mixture_spec


def oracle_magnitudes(sources, config: StftConfig) -> np.ndarray:
    sources = [np.asarray(s, dtype=float) for s in sources]
    if len({len(s) for s in sources}) != 1:
        raise ValueError("sources must have equal lengths")
    return np.stack([np.abs(stft(s, config)) for s in sources])


def si_sdr(estimate, reference) -> float:
    """Scale-invariant SDR in dB, clipped to +/-300 dB for degenerate cases.

    Both signals are trimmed to the shorter length.

    >>> si_sdr([1.0, 1.0], [1.0, 0.0])
    0.0
    """
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    n = min(len(est), len(ref))
    est, ref = est[:n], ref[:n]
    ref_energy = ref @ ref
    if ref_energy < _TINY:
        raise ValueError("reference signal is identically zero")
    target = (est @ ref) / ref_energy * ref
    target_energy = target @ target
    err = target - est
    err_energy = err @ err
    if target_energy < _TINY:
        return -SDR_CAP
    if err_energy < _TINY:
        return SDR_CAP
    return float(np.clip(10 * np.log10(target_energy / err_energy), -SDR_CAP, SDR_CAP))


def si_sdr_improvement(estimate, reference, mixture) -> float:
    return si_sdr(estimate, reference) - si_sdr(mixture, reference)


@dataclass
class SeparationReport:
    algorithm: str
    si_sdr: list
    si_sdri: list
    latency_samples: int | None = None
    loss_trace: list = field(default_factory=list)

    @property
    def mean_si_sdri(self) -> float:
        return float(np.mean(self.si_sdri))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_si_sdri"] = self.mean_si_sdri
        return d


def evaluate(algorithm, estimates, references, mixture, latency_samples=None,
             loss_trace=()) -> SeparationReport:
    sdr = [si_sdr(e, r) for e, r in zip(estimates, references)]
    sdri = [si_sdr_improvement(e, r, mixture) for e, r in zip(estimates, references)]
    return SeparationReport(algorithm=algorithm, si_sdr=sdr, si_sdri=sdri,
                            latency_samples=latency_samples,
                            loss_trace=[float(v) for v in loss_trace])
