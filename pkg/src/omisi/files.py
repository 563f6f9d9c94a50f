"""WAV and magnitude-file I/O.

Magnitude files (``.mspc``) hold J nonnegative F x T matrices::

    offset  size  field
    0       4     magic b"MSPC"
    4       4     version (uint32 LE, = 1)
    8       4     F  (uint32 LE)
    12      4     T  (uint32 LE)
    16      4     J  (uint32 LE)
    20      4*J*T*F  float32 LE, source-major, then frame-major (F values per frame)
"""
from __future__ import annotations

import struct

import numpy as np
from scipy.io import wavfile

MAGIC = b"MSPC"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class FileFormatError(ValueError):
    pass


def read_wav(path):
    """Read a mono PCM16 or float32 WAV; returns ``(samples, sample_rate)``.

    PCM16 is scaled to [-1, 1).
    """
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise FileFormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0, rate
    if data.dtype == np.float32:
        return data.astype(np.float64), rate
    raise FileFormatError(f"{path}: unsupported WAV encoding {data.dtype}")


def write_wav(path, samples, sample_rate, pcm16=False):
    samples = np.asarray(samples, dtype=np.float64)
    if pcm16:
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    wavfile.write(path, int(sample_rate), data)


def write_magnitudes(path, magnitudes):
    """Write a ``(J, F, T)`` array as a magnitude file."""
    v = np.asarray(magnitudes, dtype=np.float64)
    if v.ndim == 2:
        v = v[None]
    if v.ndim != 3:
        raise ValueError("magnitudes must have shape (J, F, T)")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("magnitudes must be finite and nonnegative")
    n_src, n_bins, n_frames = v.shape
    payload = np.ascontiguousarray(v.transpose(0, 2, 1), dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n_bins, n_frames, n_src))
        f.write(payload.tobytes())


def read_magnitudes(path) -> np.ndarray:
    """Read a magnitude file into a float64 ``(J, F, T)`` array."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, version, n_bins, n_frames, n_src = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    expected = 4 * n_src * n_frames * n_bins
    if len(raw) - _HEADER.size != expected:
        raise FileFormatError(
            f"{path}: payload has {len(raw) - _HEADER.size} bytes, expected {expected}"
        )
    v = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    v = v.reshape(n_src, n_frames, n_bins).transpose(0, 2, 1).astype(np.float64)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise FileFormatError(f"{path}: magnitudes must be finite and nonnegative")
    return v
