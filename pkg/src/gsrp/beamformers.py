"""Narrowband beamformer weights and output PSDs for SRP localization.

All functions broadcast: a steering vector ``d`` may be ``(M,)`` with
matrices ``(M, M)``, or a per-bin grid tensor ``(K, P, M)`` with per-bin
matrices ``(K, M, M)``. PSDs are returned with the vector axis removed.

``zeta`` is the square root of the frequency weight. The map assembly calls
these functions with ``zeta=1`` and applies the weight afterwards.
"""

from enum import Enum

import numpy as np

from .errors import DegenerateSteeringError
from .numerics import hermitian_form, matvec

__all__ = [
    "BeamformerKind",
    "ds_psd",
    "mvdr_weights",
    "mvdr_psd",
    "mpdr_weights",
    "mpdr_psd",
    "mvcnr_weights",
    "mvcnr_psd",
    "nmf_weights",
    "nmf_psd",
    "mpcnr_weights",
    "mpcnr_psd",
    "noise_response",
    "criterion1_check",
    "narrowband_psd",
]

_TINY = 1e-300


class BeamformerKind(str, Enum):
    DS = "ds"
    MVDR = "mvdr"
    MPDR = "mpdr"
    MVCNR = "mvcnr"
    NMF = "nmf"
    MPCNR = "mpcnr"

    @property
    def needs_ncm(self):
        return self in (BeamformerKind.MVDR, BeamformerKind.MVCNR, BeamformerKind.MPCNR)

    @property
    def needs_scm_inverse(self):
        return self in (BeamformerKind.MPDR, BeamformerKind.MPCNR)


def _output_psd(w, scm):
    return np.maximum(hermitian_form(w, scm), 0.0)


def _norm_term(d, m, what):
    """``d^H m d`` with a check that it stays positive."""
    q = hermitian_form(d, m)
    bad = ~(q > _TINY)
    if np.any(bad):
        raise DegenerateSteeringError(f"{what} is not positive", index=np.argwhere(bad)[0] if bad.ndim else ())
    return q


def ds_psd(d, scm):
    """Delay-and-sum output ``d^H scm d``."""
    return _output_psd(d, scm)


def mvdr_weights(d, ncm_inv):
    """``ncm_inv d / (d^H ncm_inv d)``."""
    u = matvec(ncm_inv, d)
    q = _norm_term(d, ncm_inv, "d^H Phi_vv^-1 d")
    return u / q[..., None]


def mvdr_psd(d, scm, ncm_inv):
    return _output_psd(mvdr_weights(d, ncm_inv), scm)


def mpdr_weights(d, scm_inv):
    u = matvec(scm_inv, d)
    q = _norm_term(d, scm_inv, "d^H Phi_yy^-1 d")
    return u / q[..., None]


def mpdr_psd(d, scm, scm_inv):
    """MPDR output power, evaluated from the weights.

    Equals ``1 / (d^H scm^-1 d)`` when ``scm_inv`` is the exact inverse.
    """
    return _output_psd(mpdr_weights(d, scm_inv), scm)


def mvcnr_weights(d, ncm_inv, zeta=1.0):
    """``zeta * ncm_inv d / sqrt(d^H ncm_inv d)``.

    The noise response ``w^H ncm w`` of these weights equals ``zeta**2`` for
    every steering vector.
    """
    u = matvec(ncm_inv, d)
    q = _norm_term(d, ncm_inv, "d^H Phi_vv^-1 d")
    return (np.asarray(zeta)[..., None] if np.ndim(zeta) else zeta) * u / np.sqrt(q)[..., None]


def mvcnr_psd(d, scm, ncm_inv, zeta=1.0):
    """Closed form ``zeta^2 (u^H scm u) / (d^H u)`` with ``u = ncm_inv d``."""
    u = matvec(ncm_inv, d)
    q = _norm_term(d, ncm_inv, "d^H Phi_vv^-1 d")
    return np.square(zeta) * np.maximum(hermitian_form(u, scm), 0.0) / q


def nmf_weights(d, sigma_v2, zeta=1.0):
    """Unit-norm matched filter scaled by ``zeta / sigma_v``."""
    n = np.sqrt(np.sum(np.abs(d) ** 2, axis=-1))
    if np.any(n <= 0):
        raise DegenerateSteeringError("steering vector is zero")
    scale = np.asarray(zeta) / np.sqrt(sigma_v2)
    return (scale[..., None] if np.ndim(scale) else scale) * d / n[..., None]


def nmf_psd(d, scm, sigma_v2, zeta=1.0):
    """``(zeta^2 / sigma_v2) (d^H scm d) / (d^H d)``."""
    if np.any(np.asarray(sigma_v2) <= 0):
        raise ValueError("sigma_v2 must be positive")
    dd = np.sum(np.abs(d) ** 2, axis=-1)
    if np.any(dd <= _TINY):
        raise DegenerateSteeringError("steering vector is zero")
    return np.square(zeta) / np.asarray(sigma_v2) * ds_psd(d, scm) / dd


def mpcnr_weights(d, scm_inv, ncm_inv, zeta=1.0):
    """``zeta sqrt(d^H ncm_inv d) * scm_inv d / (d^H scm_inv d)``."""
    qv = _norm_term(d, ncm_inv, "d^H Phi_vv^-1 d")
    w = mpdr_weights(d, scm_inv)
    scale = np.asarray(zeta) * np.sqrt(qv)
    return scale[..., None] * w


def mpcnr_psd(d, scm_inv, ncm_inv, scm, zeta=1.0):
    """MPCNR output power ``w^H scm w``.

    With ``scm_inv`` the exact inverse of ``scm`` this reduces to
    ``zeta^2 (d^H ncm_inv d) / (d^H scm_inv d)``.
    """
    return _output_psd(mpcnr_weights(d, scm_inv, ncm_inv, zeta), scm)


def noise_response(w, ncm):
    """``w^H ncm w``."""
    return hermitian_form(w, ncm)


def criterion1_check(A, h_s, candidates, zeta=1.0, slack=1e-12):
    """Check the maximum-source-response inequality for ``w = alpha A h``.

    With ``alpha(h) = zeta / sqrt(h^H A h)``, verifies
    ``|w(h_s)^H h_s| >= |w(h)^H h_s|`` for every candidate ``h``. The slack
    is relative to the left-hand side.
    """
    A = np.asarray(A, dtype=complex)
    h_s = np.asarray(h_s, dtype=complex)
    cands = np.atleast_2d(np.asarray(candidates, dtype=complex))

    def weights(h):
        return zeta * matvec(A, h) / np.sqrt(hermitian_form(h, A))[..., None]

    lhs = np.abs(np.vdot(weights(h_s), h_s))
    rhs = np.abs(np.conj(weights(cands)) @ h_s)
    return bool(np.all(rhs <= lhs * (1.0 + slack) + slack))


def narrowband_psd(kind, d, scm, ncm_inv=None, scm_inv=None, sigma_v2=None):
    """Unit-weight PSD for any beamformer kind.

    Steering vectors that are identically zero (for instance a source in the
    null of every directional microphone) get a PSD of 0.

    Returns
    -------
    psd : ndarray
        Shape of ``d`` without its last axis.
    n_zero : int
        Number of zero steering vectors encountered.
    """
    kind = BeamformerKind(kind)
    d = np.asarray(d)
    zero = np.all(d == 0, axis=-1)
    n_zero = int(np.count_nonzero(zero))
    if n_zero:
        # substitute a harmless vector, zero the result afterwards
        d = np.where(zero[..., None], 1.0, d)
    if kind is BeamformerKind.DS:
        out = ds_psd(d, scm)
    elif kind is BeamformerKind.MVDR:
        out = mvdr_psd(d, scm, ncm_inv)
    elif kind is BeamformerKind.MPDR:
        out = mpdr_psd(d, scm, scm_inv)
    elif kind is BeamformerKind.MVCNR:
        out = mvcnr_psd(d, scm, ncm_inv)
    elif kind is BeamformerKind.NMF:
        s = np.asarray(sigma_v2, dtype=float)
        if s.ndim and d.ndim == 3:
            s = s[:, None]
        out = nmf_psd(d, scm, s)
    else:
        out = mpcnr_psd(d, scm_inv, ncm_inv, scm)
    if n_zero:
        out = np.where(zero, 0.0, out)
    return out, n_zero
