"""Frequency weights and the PHAT SCM transform.

``zeta2_*`` functions return the squared weight applied to a unit-weight
beamformer PSD. All of them vectorize over a leading bin axis.
"""

from enum import Enum

import numpy as np

from .numerics import frobenius_norm, trace

__all__ = [
    "WeightingKind",
    "phat_transform",
    "zeta2_snr",
    "zeta2_flat",
    "zeta2_frob",
    "band_mask",
]


class WeightingKind(str, Enum):
    NONE = "none"
    PHAT = "phat"
    SNR = "snr"
    FLAT = "flat"
    FROB = "frob"


def phat_transform(scm, floor=None):
    """Scale every SCM element to unit magnitude.

    Elements with magnitude below ``floor`` are divided by ``floor`` instead,
    so zeros stay zero. The default floor is ``1e-12`` times the largest
    element magnitude of each matrix.
    """
    scm = np.asarray(scm, dtype=complex)
    mag = np.abs(scm)
    if floor is None:
        floor = 1e-12 * np.max(mag, axis=(-2, -1), keepdims=True)
        floor = np.where(floor > 0, floor, np.finfo(float).tiny)
    elif np.any(np.asarray(floor) <= 0):
        raise ValueError("PHAT floor must be positive")
    return scm / np.maximum(mag, floor)


def zeta2_snr(n_mics):
    """Constant ``1 / M``; the MVCNR peak then tracks the narrowband SNR."""
    return 1.0 / n_mics


def zeta2_flat(ncm_inv, scm):
    """Spectral flattening ``1 / (tr(ncm_inv scm) - M + 1)``.

    The denominator is clamped below at 1: with estimated statistics the
    trace can fall short of ``M``.
    """
    ncm_inv = np.asarray(ncm_inv)
    m = ncm_inv.shape[-1]
    t = trace(ncm_inv @ np.asarray(scm))
    return 1.0 / np.maximum(t - m + 1.0, 1.0)


def zeta2_frob(sigma_v2, scm):
    """``sigma_v2 / ||scm||_F`` (Frobenius norm floored at 1e-300)."""
    return np.asarray(sigma_v2) / np.maximum(frobenius_norm(scm), 1e-300)


def band_mask(bin_frequencies, band):
    """1 for bins with ``f_lo <= f <= f_hi``, else 0 (inclusive edges)."""
    f_lo, f_hi = band
    if not f_lo < f_hi:
        raise ValueError(f"empty band {band}")
    f = np.asarray(bin_frequencies, dtype=float)
    return ((f >= f_lo) & (f <= f_hi)).astype(float)
