"""Signal and noise covariance estimation from STFT tiles.

Covariance spectra are arrays of shape ``(K, M, M)``: one Hermitian matrix
per frequency bin.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import hermitize, trace

__all__ = [
    "SmoothingParams",
    "instantaneous_scm",
    "estimate_ncm",
    "smooth_scm",
    "smoothed_scms",
    "signal_power",
    "regularize_ncm",
]


@dataclass(frozen=True)
class SmoothingParams:
    """Recursive SCM smoothing; ``tau_sm`` is informational only."""

    alpha_sm: float = 0.2
    tau_sm: float = 0.075

    def __post_init__(self):
        if not 0.0 < self.alpha_sm <= 1.0:
            raise ValueError(f"alpha_sm must be in (0, 1], got {self.alpha_sm}")


def instantaneous_scm(y):
    """Outer product ``y y^H`` for a vector ``(M,)`` or a stack ``(..., M)``."""
    y = np.asarray(y, dtype=complex)
    return y[..., :, None] * np.conj(y[..., None, :])


def estimate_ncm(stft, frame_range):
    """Average of instantaneous SCMs over a range of frames.

    Parameters
    ----------
    stft : MultichannelStft or ndarray, shape (L, K, M)
    frame_range : slice, range or (start, stop)

    Returns
    -------
    ndarray, shape (K, M, M)
    """
    tiles = getattr(stft, "tiles", stft)
    if isinstance(frame_range, tuple):
        frame_range = slice(*frame_range)
    if isinstance(frame_range, range):
        frame_range = slice(frame_range.start, frame_range.stop, frame_range.step)
    sel = tiles[frame_range]
    if sel.shape[0] == 0:
        raise ValueError("empty frame range for noise covariance estimate")
    ncm = np.einsum("lki,lkj->kij", sel, np.conj(sel)) / sel.shape[0]
    return hermitize(ncm)


def smooth_scm(prev, y, alpha_sm):
    """One step of ``(1 - alpha) * prev + alpha * y y^H``."""
    prev = np.asarray(prev)
    if prev.shape[-1] != np.shape(y)[-1]:
        raise ValueError("dimension mismatch between previous SCM and observation")
    return (1.0 - alpha_sm) * prev + alpha_sm * instantaneous_scm(y)


def smoothed_scms(tiles, alpha_sm, start=0, stop=None):
    """Yield ``(frame, scm)`` for frames ``start..stop`` with recursive smoothing.

    The recursion starts from the instantaneous SCM of frame ``start``.
    """
    tiles = getattr(tiles, "tiles", tiles)
    stop = tiles.shape[0] if stop is None else stop
    scm = None
    for l in range(start, stop):
        if scm is None:
            scm = instantaneous_scm(tiles[l])
        else:
            scm = smooth_scm(scm, tiles[l], alpha_sm)
        yield l, scm


def signal_power(scm):
    """Average microphone power ``tr(scm) / M`` per matrix."""
    scm = np.asarray(scm)
    return trace(scm) / scm.shape[-1]


def regularize_ncm(ncm, sigma_y2, eps_reg):
    """Diagonal loading ``ncm + eps_reg * sigma_y2 * I``.

    ``sigma_y2`` is a scalar or one value per matrix in the stack.
    """
    if eps_reg < 0:
        raise ValueError("eps_reg must be non-negative")
    ncm = np.asarray(ncm, dtype=complex)
    if eps_reg == 0:
        return ncm.copy()
    load = eps_reg * np.asarray(sigma_y2, dtype=float)
    if np.any(load < 0):
        raise ValueError("sigma_y2 must be non-negative")
    eye = np.eye(ncm.shape[-1])
    return ncm + load[..., None, None] * eye
