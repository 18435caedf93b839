import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_pd
from gsrp.beamformers import mvcnr_psd
from gsrp.numerics import hermitian_inverse
from gsrp.weighting import WeightingKind, band_mask, phat_transform, zeta2_flat, zeta2_frob, zeta2_snr


def test_kinds():
    assert [k.value for k in WeightingKind] == ["none", "phat", "snr", "flat", "frob"]


def test_phat_elements():
    out = phat_transform(np.array([[2.0, 3 + 4j], [3 - 4j, 7.0]]))
    np.testing.assert_allclose(out, [[1, 0.6 + 0.8j], [0.6 - 0.8j, 1]])


def test_phat_floor_keeps_zeros_finite():
    out = phat_transform(np.array([[1.0, 0.0], [0.0, 1.0]]), floor=1e-12)
    assert np.all(np.isfinite(out))
    assert out[0, 1] == 0
    assert np.all(np.isfinite(phat_transform(np.zeros((2, 2)))))
    with pytest.raises(ValueError):
        phat_transform(np.eye(2), floor=0.0)


def test_zeta2_snr():
    assert zeta2_snr(6) == pytest.approx(1 / 6)
    assert zeta2_snr(1) == 1


def test_zeta2_snr_peak_tracks_snr(rng):
    # rank-one source with tr = 4, white unit noise, M = 4: peak = 1 + 1/4
    h = crandn(rng, 4)
    h *= 2 / np.linalg.norm(h)
    scm = np.outer(h, h.conj()) + np.eye(4)
    assert zeta2_snr(4) * mvcnr_psd(h, scm, np.eye(4)) == pytest.approx(1.25, rel=1e-12)


def test_zeta2_flat(rng):
    ncm = random_pd(rng, 5)
    assert zeta2_flat(hermitian_inverse(ncm), ncm) == pytest.approx(1.0, rel=1e-12)
    h = np.array([3.0, 0, 0])
    assert zeta2_flat(np.eye(3), np.eye(3) + np.outer(h, h)) == pytest.approx(0.1)
    # estimated statistics can undershoot M; the weight is clamped to 1
    assert zeta2_flat(np.eye(3), 0.5 * np.eye(3)) == 1.0


def test_zeta2_flat_normalizes_peak(rng):
    ncm = random_pd(rng, 6)
    inv = hermitian_inverse(ncm)
    h = crandn(rng, 6)
    scm = 0.7 * np.outer(h, h.conj()) + ncm
    assert zeta2_flat(inv, scm) * mvcnr_psd(h, scm, inv) == pytest.approx(1.0, abs=1e-9)


def test_zeta2_frob():
    assert zeta2_frob(1.0, np.eye(6)) == pytest.approx(1 / np.sqrt(6))
    assert zeta2_frob(2.0, np.zeros((2, 2))) == pytest.approx(2e300)


def test_frob_over_flat_limits(rng):
    M = 6
    h = crandn(rng, M)
    ratios = {}
    for snr_db in (-60.0, 20.0):
        phi = 10 ** (snr_db / 10) * M / np.vdot(h, h).real
        scm = phi * np.outer(h, h.conj()) + np.eye(M)
        ratios[snr_db] = zeta2_frob(1.0, scm) / zeta2_flat(np.eye(M), scm)
    assert ratios[-60.0] == pytest.approx(1 / np.sqrt(M), rel=1e-3)
    assert 0.9 <= ratios[20.0] <= 1.1


def test_band_mask_edges():
    f = np.arange(257) * 31.25
    m = band_mask(f, (100.0, 8000.0))
    assert m[0] == 0 and m[3] == 0 and m[4] == 1 and m[-1] == 1
    assert band_mask([1000.0], (100, 8000))[0] == 1
    assert band_mask([100.0, 4000.0], (100.0, 4000.0)).tolist() == [1, 1]
    with pytest.raises(ValueError):
        band_mask(f, (500.0, 500.0))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(2, 8))
def test_property_phat_idempotent(seed, m):
    r = np.random.default_rng(seed)
    x = random_pd(r, m)
    once = phat_transform(x)
    np.testing.assert_allclose(phat_transform(once), once, rtol=1e-14)
    np.testing.assert_allclose(np.abs(once), 1.0, rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(2, 8))
def test_property_weights_positive(seed, m):
    r = np.random.default_rng(seed)
    ncm, scm = random_pd(r, m), random_pd(r, m)
    assert zeta2_flat(hermitian_inverse(ncm), scm) > 0
    assert zeta2_frob(1.0, scm) > 0
