"""Signal-to-spectrogram frontend: pre-emphasis, framing, windowing, power spectra.

A flow record is treated as a short 1-D signal (its feature values in column
order). The per-frame power-spectrum kernel has two interchangeable backends:
a compiled extension (melflow._spectral_cy) used when available, and a pure
numpy twin (melflow._spectral_np). Set MELFLOW_SPECTRAL=numpy or =cython to
force one; see benchmarks/bench_spectral.py for the speed comparison.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _spectral_np
from .errors import ConfigError, NumericError

_forced = os.environ.get("MELFLOW_SPECTRAL", "").strip().lower()
if _forced == "numpy":
    _kernels = _spectral_np
elif _forced == "cython":
    from . import _spectral_cy as _kernels
elif _forced:
    raise ConfigError(f"MELFLOW_SPECTRAL must be 'numpy' or 'cython', got {_forced!r}")
else:
    try:
        from . import _spectral_cy as _kernels
    except ImportError:
        _kernels = _spectral_np


def backend_name():
    """Name of the active power-spectrum kernel backend."""
    return _kernels.BACKEND_NAME


WINDOW_KINDS = ("rectangular", "hamming", "hann")


@dataclass(frozen=True)
class WindowSpec:
    """Framing and windowing parameters for the spectral frontend."""

    frame_length: int = 32
    hop: int = 16
    window_kind: str = "hamming"
    pre_emphasis_alpha: float = 0.97

    def __post_init__(self):
        if self.frame_length < 1:
            raise ConfigError(f"frame_length must be >= 1, got {self.frame_length}")
        if not 1 <= self.hop <= self.frame_length:
            raise ConfigError(
                f"hop must be in [1, frame_length], got hop={self.hop} "
                f"frame_length={self.frame_length}"
            )
        if self.window_kind not in WINDOW_KINDS:
            raise ConfigError(f"unknown window kind {self.window_kind!r}")
        if self.window_kind != "rectangular" and self.frame_length < 2:
            raise ConfigError("non-rectangular windows need frame_length >= 2")
        if not 0.0 <= self.pre_emphasis_alpha < 1.0:
            raise ConfigError(
                f"pre_emphasis_alpha must be in [0, 1), got {self.pre_emphasis_alpha}"
            )

    @property
    def n_bins(self):
        return self.frame_length // 2 + 1


def pre_emphasis(x, alpha):
    """y(0) = x(0), y(t) = x(t) - alpha * x(t-1). Accepts a signal or a batch of rows."""
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"pre-emphasis alpha must be in [0, 1), got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[..., 1:] -= alpha * x[..., :-1]
    return y


def frame_signal(x, spec):
    """Slice a signal into (n_frames, L) frames; zero-pads to one frame when T < L."""
    x = np.asarray(x, dtype=np.float64)
    length, hop = spec.frame_length, spec.hop
    if x.shape[-1] < length:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, length - x.shape[-1])]
        return np.pad(x, pad)[..., None, :]
    windows = np.lib.stride_tricks.sliding_window_view(x, length, axis=-1)
    return np.ascontiguousarray(windows[..., ::hop, :])


def window_weights(kind, length):
    if kind == "rectangular":
        return np.ones(length)
    n = np.arange(length)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))
    if kind == "hann":
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))
    raise ConfigError(f"unknown window kind {kind!r}")


def apply_window(frame, kind):
    """Elementwise taper; the rectangular window is an exact identity."""
    frame = np.asarray(frame, dtype=np.float64)
    if kind == "rectangular":
        return frame.copy()
    return frame * window_weights(kind, frame.shape[-1])


def power_spectra(frames):
    """Batched |X(k)|^2 over the unilateral spectrum via the active backend."""
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if not np.isfinite(frames).all():
        raise NumericError("non-finite values in frames")
    return _kernels.power_spectra(frames)


def power_spectrum(frame):
    """|X(k)|^2 for k = 0..L//2 of one frame (unnormalized DFT)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise NumericError("power_spectrum expects a 1-D frame")
    return power_spectra(frame[None, :])[0]


def spectrogram(x, spec):
    """Full frontend for one signal: pre-emphasis, framing, window, power spectra."""
    y = pre_emphasis(x, spec.pre_emphasis_alpha)
    frames = apply_window(frame_signal(y, spec), spec.window_kind)
    return power_spectra(frames)


def spectrogram_batch(rows, spec):
    """Spectrograms for a (n_rows, T) matrix of equal-length signals.

    Returns (n_rows, n_frames, n_bins); one reshaped kernel call for the
    whole batch.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise NumericError("spectrogram_batch expects a 2-D matrix of signals")
    y = pre_emphasis(rows, spec.pre_emphasis_alpha)
    frames = apply_window(frame_signal(y, spec), spec.window_kind)
    n_rows, n_frames, length = frames.shape
    flat = power_spectra(frames.reshape(n_rows * n_frames, length))
    return flat.reshape(n_rows, n_frames, spec.n_bins)
