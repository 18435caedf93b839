"""Dense complex linear algebra for small Hermitian matrices.

Every function accepts a single matrix of shape ``(M, M)`` or a stack of
shape ``(..., M, M)``; vectors are ``(M,)`` or ``(..., M)``. The sizes used
here are small (a handful to a few dozen microphones), so the Cholesky
factorization is written as an unpivoted column loop that is vectorized over
the leading stack dimensions.
"""

import numpy as np

from .errors import NotPositiveDefiniteError

__all__ = [
    "hermitize",
    "cholesky",
    "hermitian_inverse",
    "matvec",
    "quadratic_form",
    "hermitian_form",
    "frobenius_norm",
    "trace",
]


def hermitize(m):
    """Return ``(m + m^H) / 2``, the nearest Hermitian matrix."""
    m = np.asarray(m)
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _check_square(m):
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")


def cholesky(m):
    """Lower-triangular Cholesky factor ``L`` with ``L @ L^H == m``.

    Only the lower triangle of ``m`` is read.

    Parameters
    ----------
    m : array_like, shape (..., M, M)
        Hermitian positive definite matrix or stack of matrices.

    Returns
    -------
    L : ndarray, complex, shape (..., M, M)

    Raises
    ------
    NotPositiveDefiniteError
        If any pivot is non-positive or non-finite. ``pivot`` holds the first
        failing column index.
    """
    m = np.asarray(m, dtype=complex)
    _check_square(m)
    n = m.shape[-1]
    L = np.zeros_like(m)
    for j in range(n):
        row = L[..., j, :j]
        pivot = m[..., j, j].real - np.sum(np.abs(row) ** 2, axis=-1)
        bad = ~(np.isfinite(pivot) & (pivot > 0.0))
        if np.any(bad):
            raise NotPositiveDefiniteError(j, np.argwhere(bad)[0] if bad.ndim else ())
        ljj = np.sqrt(pivot)
        L[..., j, j] = ljj
        if j + 1 < n:
            # column below the diagonal: (m[i, j] - sum_k L[i, k] conj(L[j, k])) / L[j, j]
            below = m[..., j + 1:, j] - np.einsum("...ik,...k->...i", L[..., j + 1:, :j], np.conj(row))
            L[..., j + 1:, j] = below / ljj[..., None]
    return L


def _lower_inverse(L):
    """Inverse of a lower-triangular stack by forward substitution."""
    n = L.shape[-1]
    inv = np.zeros_like(L)
    for i in range(n):
        inv[..., i, i] = 1.0 / L[..., i, i]
        for j in range(i):
            acc = np.einsum("...k,...k->...", L[..., i, j:i], inv[..., j:i, j])
            inv[..., i, j] = -acc / L[..., i, i]
    return inv


def hermitian_inverse(m):
    """Inverse of a Hermitian positive definite matrix via its Cholesky factor.

    The result is exactly Hermitian (symmetrized after the solve).

    Raises
    ------
    NotPositiveDefiniteError
        Propagated from :func:`cholesky`.
    """
    L = cholesky(m)
    Linv = _lower_inverse(L)
    inv = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    return hermitize(inv)


def matvec(m, v):
    """Matrix-vector product ``m @ v`` broadcast over stacks.

    ``v`` may carry one extra leading dimension relative to ``m``, e.g. a
    per-bin matrix stack ``(K, M, M)`` applied to steering vectors
    ``(K, P, M)``.
    """
    m = np.asarray(m)
    v = np.asarray(v)
    return v @ np.swapaxes(m, -1, -2)


def quadratic_form(a, m, b=None):
    """Evaluate ``a^H m b``.

    With ``b`` omitted the form ``a^H m a`` is returned as a real value (the
    imaginary rounding residue of a Hermitian form is dropped).

    Raises
    ------
    ValueError
        On dimension mismatch.
    """
    a = np.asarray(a)
    m = np.asarray(m)
    _check_square(m)
    if a.shape[-1] != m.shape[-1]:
        raise ValueError(f"vector length {a.shape[-1]} does not match matrix size {m.shape[-1]}")
    if b is None:
        return hermitian_form(a, m)
    b = np.asarray(b)
    if b.shape[-1] != m.shape[-1]:
        raise ValueError(f"vector length {b.shape[-1]} does not match matrix size {m.shape[-1]}")
    return np.sum(np.conj(a) * matvec(m, b), axis=-1)


def hermitian_form(a, m):
    """Real-valued ``a^H m a`` for Hermitian ``m``."""
    return np.sum(np.conj(a) * matvec(m, a), axis=-1).real


def frobenius_norm(m):
    """Frobenius norm over the last two axes."""
    m = np.asarray(m)
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def trace(m):
    """Real part of the trace over the last two axes."""
    return np.trace(np.asarray(m), axis1=-2, axis2=-1).real
