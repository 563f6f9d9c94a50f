"""Offline (MISI) and online (oMISI) multiple-input spectrogram inversion."""
from .dsp import (ReconstructionError, StftConfig, frame_idft, istft, make_analysis_window,
                  make_synthesis_window, stft)
from .inversion import (InversionResult, magnitude_projection, misi, mix_error_distribute,
                        spectral_loss)
from .metrics import (SeparationReport, amplitude_mask, oracle_magnitudes, si_sdr,
                      si_sdr_improvement)
from .streaming import OnlineMISI, StreamConfig, latency_samples, run_online, stream_open

__version__ = "0.1.0"
