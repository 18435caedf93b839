import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_pd
from gsrp.beamformers import (
    BeamformerKind,
    criterion1_check,
    ds_psd,
    mpcnr_psd,
    mpcnr_weights,
    mpdr_psd,
    mvcnr_psd,
    mvcnr_weights,
    mvdr_psd,
    mvdr_weights,
    narrowband_psd,
    nmf_psd,
    nmf_weights,
    noise_response,
)
from gsrp.errors import DegenerateSteeringError
from gsrp.numerics import hermitian_inverse


def _psd(w, scm):
    return np.vdot(w, scm @ w).real


def test_kind_requirements():
    assert {k.value for k in BeamformerKind if k.needs_ncm} == {"mvdr", "mvcnr", "mpcnr"}
    assert {k.value for k in BeamformerKind if k.needs_scm_inverse} == {"mpdr", "mpcnr"}


def test_ds_trivial():
    d = np.exp(1j * np.array([0.1, 1.2, -2.0, 0.4]))
    assert ds_psd(d, np.eye(4)) == pytest.approx(4)
    d = np.array([1 + 1j, 2, -0.5j])
    assert ds_psd(d, np.outer(d, d.conj())) == pytest.approx(np.vdot(d, d).real ** 2)


def test_mvdr_white_noise(rng):
    d = crandn(rng, 4)
    np.testing.assert_allclose(mvdr_weights(d, np.eye(4)), d / np.vdot(d, d).real)
    assert mvdr_psd(d, np.eye(4), np.eye(4)) == pytest.approx(1 / np.vdot(d, d).real)


def test_mpdr_identities(rng):
    d = crandn(rng, 5)
    scm = random_pd(rng, 5)
    inv = hermitian_inverse(scm)
    assert mpdr_psd(d, scm, inv) == pytest.approx(mvdr_psd(d, scm, inv), rel=1e-12)
    assert mpdr_psd(d, scm, inv) == pytest.approx(1 / np.vdot(d, inv @ d).real, rel=1e-12)
    assert mpdr_psd(d, np.eye(5), np.eye(5)) == pytest.approx(1 / np.vdot(d, d).real)


def test_mvcnr_white_noise_is_normalized_filter(rng):
    d = crandn(rng, 6)
    np.testing.assert_allclose(mvcnr_weights(d, np.eye(6)), d / np.linalg.norm(d))


def test_mvcnr_constant_noise_response(rng):
    ncm = random_pd(rng, 6)
    inv = hermitian_inverse(ncm)
    for zeta in (0.3, 1.0, 2.5):
        for _ in range(5):
            w = mvcnr_weights(crandn(rng, 6), inv, zeta)
            assert noise_response(w, ncm) == pytest.approx(zeta ** 2, rel=1e-12)


def test_mvcnr_constraint(rng):
    ncm_inv = hermitian_inverse(random_pd(rng, 4))
    h = crandn(rng, 4)
    w = mvcnr_weights(h, ncm_inv, 1.7)
    assert np.vdot(w, h) == pytest.approx(1.7 * np.sqrt(np.vdot(h, ncm_inv @ h).real), rel=1e-12)


def test_mvcnr_psd_closed_form_matches_weights(rng):
    ncm_inv = hermitian_inverse(random_pd(rng, 5))
    scm = random_pd(rng, 5)
    d = crandn(rng, 5)
    w = mvcnr_weights(d, ncm_inv, 0.8)
    assert mvcnr_psd(d, scm, ncm_inv, 0.8) == pytest.approx(_psd(w, scm), rel=1e-12)


def test_mvcnr_scaling_invariance(rng):
    ncm_inv = hermitian_inverse(random_pd(rng, 5))
    scm = random_pd(rng, 5)
    d = crandn(rng, 5)
    a = mvcnr_psd(d, scm, ncm_inv)
    assert mvcnr_psd((0.3 + 0.4j) * d, scm, ncm_inv) == pytest.approx(a, rel=1e-10)


def test_mvcnr_noise_only_and_signal(rng):
    ncm = random_pd(rng, 4)
    inv = hermitian_inverse(ncm)
    assert mvcnr_psd(crandn(rng, 4), ncm, inv, 2.0) == pytest.approx(4.0, rel=1e-12)
    h = crandn(rng, 4)
    phi = 3.0
    scm = phi * np.outer(h, h.conj()) + ncm
    expected = 4.0 * (phi * np.vdot(h, inv @ h).real + 1)
    assert mvcnr_psd(h, scm, inv, 2.0) == pytest.approx(expected, rel=1e-12)


def test_mvcnr_orthogonal_steering():
    h = np.array([1, 0])
    scm = np.outer(h, h) + np.eye(2)
    assert mvcnr_psd(np.array([0, 1]), scm, np.eye(2)) == pytest.approx(1.0)


def test_mvcnr_maximum_source_response(rng):
    ncm = random_pd(rng, 6)
    inv = hermitian_inverse(ncm)
    h = crandn(rng, 6)
    scm = 0.5 * np.outer(h, h.conj()) + ncm
    at_source = mvcnr_psd(h, scm, inv)
    others = mvcnr_psd(crandn(rng, 200, 6), scm, inv)
    assert np.all(others <= at_source * (1 + 1e-12))


def test_nmf_cases(rng):
    d = crandn(rng, 4)
    assert nmf_psd(d, np.eye(4), 1.0) == pytest.approx(1.0)
    assert nmf_psd(d, np.outer(d, d.conj()), 2.0, 3.0) == pytest.approx(np.vdot(d, d).real * 9 / 2)
    ncm = 2.5 * np.eye(4)
    scm = random_pd(rng, 4)
    assert nmf_psd(d, scm, 2.5) == pytest.approx(mvcnr_psd(d, scm, hermitian_inverse(ncm)), rel=1e-12)
    w = nmf_weights(d, 2.5, 1.5)
    assert _psd(w, scm) == pytest.approx(nmf_psd(d, scm, 2.5, 1.5), rel=1e-12)
    with pytest.raises(ValueError):
        nmf_psd(d, scm, 0.0)


def test_mpcnr(rng):
    ncm = random_pd(rng, 5)
    ncm_inv = hermitian_inverse(ncm)
    d = crandn(rng, 5)
    assert mpcnr_psd(d, ncm_inv, ncm_inv, ncm, 1.3) == pytest.approx(1.69, rel=1e-12)
    h = crandn(rng, 5)
    scm = 2.0 * np.outer(h, h.conj()) + ncm
    scm_inv = hermitian_inverse(scm)
    closed = np.vdot(d, ncm_inv @ d).real / np.vdot(d, scm_inv @ d).real
    assert mpcnr_psd(d, scm_inv, ncm_inv, scm) == pytest.approx(closed, rel=1e-10)
    assert mpcnr_psd(h, scm_inv, ncm_inv, scm) == pytest.approx(mvcnr_psd(h, scm, ncm_inv), rel=1e-8)
    w = mpcnr_weights(d, scm_inv, ncm_inv, 1.0)
    assert noise_response(w, ncm) > 0


def test_degenerate_steering_raises():
    with pytest.raises(DegenerateSteeringError):
        mvdr_weights(np.zeros(3), np.eye(3))
    with pytest.raises(DegenerateSteeringError):
        nmf_psd(np.zeros(3), np.eye(3), 1.0)


def test_narrowband_zero_steering_is_zero(rng):
    d = crandn(rng, 2, 3, 4)
    d[1, 2] = 0
    scm = random_pd(rng, 4, k=2)
    inv = hermitian_inverse(scm)
    for kind in BeamformerKind:
        psd, n_zero = narrowband_psd(kind, d, scm, ncm_inv=inv, scm_inv=inv, sigma_v2=np.ones(2))
        assert n_zero == 1
        assert psd[1, 2] == 0
        assert np.all(psd[[0, 1, 0], [0, 0, 2]] > 0)


def test_narrowband_batched_matches_single(rng):
    d = crandn(rng, 3, 7, 4)
    scm = random_pd(rng, 4, k=3)
    ncm = random_pd(rng, 4, k=3)
    ncm_inv, scm_inv = hermitian_inverse(ncm), hermitian_inverse(scm)
    s2 = np.array([0.5, 1.0, 2.0])
    single = {
        "ds": lambda k, p: ds_psd(d[k, p], scm[k]),
        "mvdr": lambda k, p: mvdr_psd(d[k, p], scm[k], ncm_inv[k]),
        "mpdr": lambda k, p: mpdr_psd(d[k, p], scm[k], scm_inv[k]),
        "mvcnr": lambda k, p: mvcnr_psd(d[k, p], scm[k], ncm_inv[k]),
        "nmf": lambda k, p: nmf_psd(d[k, p], scm[k], s2[k]),
        "mpcnr": lambda k, p: mpcnr_psd(d[k, p], scm_inv[k], ncm_inv[k], scm[k]),
    }
    for kind, fn in single.items():
        psd, _ = narrowband_psd(kind, d, scm, ncm_inv, scm_inv, s2)
        for k in range(3):
            for p in range(7):
                assert psd[k, p] == pytest.approx(fn(k, p), rel=1e-12)


def test_criterion1_trivial_cases(rng):
    a = random_pd(rng, 4)
    h = crandn(rng, 4)
    assert criterion1_check(a, h, [h])
    assert criterion1_check(np.eye(2), np.array([1, 0]), [[0, 1]])


def test_criterion1_candidate_scaling_is_irrelevant():
    # alpha normalizes away the candidate's scale, so a scaled copy of h_s ties
    h_s = np.array([1.0, 0.0])
    assert criterion1_check(np.eye(2), h_s, [[10.0, 0.0], [1e-3j, 0.0]])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.sampled_from([2, 6, 12]))
def test_property_criterion1(seed, m):
    r = np.random.default_rng(seed)
    assert criterion1_check(random_pd(r, m), crandn(r, m), crandn(r, 3, m), zeta=r.uniform(0.1, 5))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 8))
def test_property_psd_nonnegative_and_constant_noise(seed, m):
    r = np.random.default_rng(seed)
    ncm = random_pd(r, m)
    scm = random_pd(r, m)
    inv = hermitian_inverse(ncm)
    d = crandn(r, 5, m)
    for kind in BeamformerKind:
        psd, _ = narrowband_psd(kind, d, scm, inv, hermitian_inverse(scm), 1.0)
        assert np.all(psd >= 0)
    w = mvcnr_weights(d, inv)
    np.testing.assert_allclose(noise_response(w, ncm), 1.0, rtol=1e-12)
    w = mpcnr_weights(d, inv, inv, 1.0)
    np.testing.assert_allclose(noise_response(w, ncm), 1.0, rtol=1e-10)
