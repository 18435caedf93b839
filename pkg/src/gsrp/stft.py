"""Multichannel short-time Fourier analysis."""

from dataclasses import dataclass

import numpy as np

__all__ = ["StftParams", "MultichannelStft", "analyze", "bin_frequency", "window", "window_energy"]


@dataclass(frozen=True)
class StftParams:
    """Framing parameters. Defaults are 16 kHz, 512/256 samples, Hann."""

    frame_size: int = 512
    frame_shift: int = 256
    window: str = "hann"
    sample_rate: float = 16000.0

    def __post_init__(self):
        n = self.frame_size
        if n < 2 or n & (n - 1):
            raise ValueError(f"frame_size must be a power of two, got {n}")
        if not 0 < self.frame_shift <= n:
            raise ValueError(f"frame_shift must be in (0, frame_size], got {self.frame_shift}")
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_bins(self):
        return self.frame_size // 2 + 1

    @property
    def frequencies(self):
        return np.arange(self.n_bins) * self.sample_rate / self.frame_size


@dataclass
class MultichannelStft:
    """STFT tiles of shape ``(frames, bins, channels)``."""

    tiles: np.ndarray
    params: StftParams

    @property
    def n_frames(self):
        return self.tiles.shape[0]

    @property
    def n_bins(self):
        return self.tiles.shape[1]

    @property
    def n_channels(self):
        return self.tiles.shape[2]

    @property
    def frequencies(self):
        return self.params.frequencies

    def frame_time(self, frame):
        """Time of the frame centre in seconds."""
        p = self.params
        return (frame * p.frame_shift + p.frame_size / 2) / p.sample_rate


def window(params):
    """Analysis window (periodic Hann or rectangular), unnormalized."""
    n = params.frame_size
    if params.window == "rectangular":
        return np.ones(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def window_energy(params):
    """Sum of squared window samples.

    A stationary process with per-sample cross-spectral matrix ``S(f)`` has
    expected STFT covariance ``window_energy * S(f)``.
    """
    return float(np.sum(window(params) ** 2))


def analyze(signal, params):
    """Windowed one-sided STFT of a multichannel signal.

    Parameters
    ----------
    signal : array_like, shape (n_samples, M)
        Real samples, one column per channel. A 1-D array is one channel.
    params : StftParams

    Returns
    -------
    MultichannelStft
        ``floor((n_samples - frame_size) / frame_shift) + 1`` frames; the
        incomplete tail is dropped.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("signal must have shape (n_samples, channels) with at least one channel")
    n = params.frame_size
    if x.shape[0] < n:
        raise ValueError(f"signal has {x.shape[0]} samples, fewer than frame_size={n}")
    n_frames = (x.shape[0] - n) // params.frame_shift + 1
    starts = np.arange(n_frames) * params.frame_shift
    idx = starts[:, None] + np.arange(n)[None, :]
    frames = x[idx] * window(params)[None, :, None]  # (L, N, M)
    tiles = np.fft.rfft(frames, axis=1)
    return MultichannelStft(tiles=tiles, params=params)


def bin_frequency(k, params):
    """Centre frequency of bin ``k`` in Hz."""
    return k * params.sample_rate / params.frame_size
