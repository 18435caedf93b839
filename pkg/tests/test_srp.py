import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_pd
from gsrp.acoustic_models import ArrayGeometry, NearFieldModel
from gsrp.errors import ConfigError, DegenerateSteeringError, NotPositiveDefiniteError, NumericalError
from gsrp.srp import AzimuthGrid, PlanarGrid, SrpMap, argmax, average_maps, compute_map, requires_ncm


@pytest.fixture
def scene(rng):
    geom = ArrayGeometry(rng.uniform(-0.4, 0.4, (5, 3)))
    grid = PlanarGrid((-1, 1), (-1, 1), 0.0, 0.25)
    freqs = np.linspace(200, 4000, 8)
    d = NearFieldModel().steering(geom, grid, freqs)
    return geom, grid, freqs, d


def test_planar_grid_layout():
    g = PlanarGrid((-1, 1), (0, 0.5), 0.2, 0.5)
    assert g.shape == (2, 5)
    assert len(g) == 10
    np.testing.assert_array_equal(g.points[:6, :2], [[-1, 0], [-0.5, 0], [0, 0], [0.5, 0], [1, 0], [-1, 0.5]])
    assert np.all(g.points[:, 2] == 0.2)
    assert g.kind == "planar_3d" and not g.plane_wave
    assert g.half_diagonal == pytest.approx(0.5 * np.hypot(2, 0.5))


def test_planar_round_trip():
    g = PlanarGrid((-3, 3), (-3, 3), 0.0, 0.05)
    assert g.shape == (121, 121)
    for i in (0, 1, 120, 121, 7320, len(g) - 1):
        assert g.index_of(g.coordinates(i)) == i
        np.testing.assert_array_equal(g.coordinates(i), g.points[i])
    assert g.index_of([0.0, 0.0]) == 60 * 121 + 60
    assert np.array_equal(g.coordinates(g.index_of([0.1, -0.05])), [0.1, -0.05, 0.0])


def test_grid_validation():
    with pytest.raises(ValueError):
        PlanarGrid((1, -1), (0, 1))
    with pytest.raises(ValueError):
        PlanarGrid((0, 1), (0, 1), spacing=0)
    with pytest.raises(ValueError):
        AzimuthGrid(0.0)
    with pytest.raises(ValueError):
        AzimuthGrid(5.0, radius=-1.0)


def test_azimuth_grid():
    g = AzimuthGrid(5.0)
    assert len(g) == 72
    assert g.angles[0] == 0 and g.angles[-1] == 355
    assert g.plane_wave and g.kind == "azimuth_1d"
    np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0)
    assert g.index_of(358.0) == 0
    assert g.index_of(-10.0) == 70
    ring = AzimuthGrid(90.0, radius=2.0, center=(1.0, 0.0, 0.0))
    np.testing.assert_allclose(ring.points, [[3, 0, 0], [1, 2, 0], [-1, 0, 0], [1, -2, 0]], atol=1e-12)
    assert not ring.plane_wave


def test_argmax_cases(rng):
    g = AzimuthGrid(10.0)
    assert argmax(SrpMap(g, np.arange(36.0))).index == 35
    assert argmax(SrpMap(g, np.ones(36))).index == 0
    vals = rng.uniform(size=36)
    best = 0
    for i in range(36):
        if vals[i] > vals[best]:
            best = i
    pk = argmax(SrpMap(g, vals))
    assert pk.index == best and pk.value == vals[best] and pk.point == g.angles[best]
    with pytest.raises(NumericalError):
        argmax(SrpMap(g, np.full(36, np.nan)))
    with pytest.raises(ValueError):
        argmax(SrpMap(g, np.array([])))


def test_average_maps(rng):
    g = AzimuthGrid(90.0)
    a = SrpMap(g, rng.uniform(size=4))
    b = SrpMap(g, rng.uniform(size=4))
    np.testing.assert_array_equal(average_maps([a]).values, a.values)
    np.testing.assert_array_equal(average_maps([a, a]).values, a.values)
    np.testing.assert_allclose(average_maps([a, b]).values, (a.values + b.values) / 2)
    with pytest.raises(ValueError):
        average_maps([])


def test_noise_only_mvcnr_map_is_flat(scene, rng):
    _, grid, freqs, d = scene
    ncm = random_pd(rng, 5, k=len(freqs))
    mask = np.ones(len(freqs))
    mask[:2] = 0
    for w in ("none", "flat"):
        m = compute_map(ncm, d, "mvcnr", w, ncm=ncm, mask=mask, grid=grid)
        assert m.values.max() / m.values.min() - 1 < 1e-9
        # the flat value equals the sum of the weights over active bins
        assert m.values[0] == pytest.approx(mask.sum(), rel=1e-12)


def test_single_bin_nmf_peaks_at_source(scene):
    _, grid, freqs, d = scene
    p_star = 13
    h = d[:1, p_star]
    scm = np.einsum("ki,kj->kij", h, h.conj())
    m = compute_map(scm, d[:1], "nmf", ncm=np.eye(5)[None], grid=grid)
    assert argmax(m).index == p_star


def test_nmf_frob_closed_form(scene, rng):
    _, grid, freqs, d = scene
    scm = random_pd(rng, 5, k=len(freqs))
    ncm = 0.3 * random_pd(rng, 5, k=len(freqs))
    m = compute_map(scm, d, "nmf", "frob", ncm=ncm, eps_reg=0.01)
    dd = np.sum(np.abs(d) ** 2, axis=-1)
    num = np.einsum("kpi,kij,kpj->kp", d.conj(), scm, d).real
    expected = np.sum(num / dd / np.linalg.norm(scm, axis=(1, 2))[:, None], axis=0)
    np.testing.assert_allclose(m.values, expected, rtol=1e-12)
    # without a noise estimate NMF-frob is the same map
    np.testing.assert_allclose(compute_map(scm, d, "nmf", "frob").values, expected, rtol=1e-12)


def test_global_weight_scaling_keeps_shape(scene, rng):
    _, grid, freqs, d = scene
    scm = random_pd(rng, 5, k=len(freqs))
    ncm = random_pd(rng, 5, k=len(freqs))
    a = compute_map(scm, d, "mvcnr", "frob", ncm=ncm, eps_reg=0.01, grid=grid)
    b = compute_map(scm, d, "mvcnr", "frob", ncm=ncm, eps_reg=0.01, grid=grid, mask=np.full(len(freqs), 3.5))
    assert argmax(a).index == argmax(b).index
    np.testing.assert_allclose(a.normalized().values, b.normalized().values, rtol=1e-12)


def test_threads_and_chunks_do_not_change_result(scene, rng, monkeypatch):
    _, grid, freqs, d = scene
    scm = random_pd(rng, 5, k=len(freqs))
    ncm = random_pd(rng, 5, k=len(freqs))
    args = (scm, d, "mpcnr", "flat")
    ref = compute_map(*args, ncm=ncm, eps_reg=0.01, chunk_elements=200).values
    monkeypatch.setenv("GSRP_THREADS", "3")
    threaded = compute_map(*args, ncm=ncm, eps_reg=0.01, chunk_elements=200).values
    np.testing.assert_array_equal(threaded, ref)
    whole = compute_map(*args, ncm=ncm, eps_reg=0.01).values
    np.testing.assert_allclose(whole, ref, rtol=1e-13)


def test_requires_ncm():
    assert requires_ncm("mvcnr", "none")
    assert requires_ncm("ds", "flat")
    assert requires_ncm("nmf", "snr")
    assert not requires_ncm("nmf", "frob")
    assert not requires_ncm("ds", "phat")
    assert not requires_ncm("mpdr", "none")


def test_config_errors(scene, rng):
    _, grid, freqs, d = scene
    scm = random_pd(rng, 5, k=len(freqs))
    with pytest.raises(ConfigError):
        compute_map(scm, d, "mvcnr")
    with pytest.raises(ConfigError):
        compute_map(scm, d, "nmf", "phat", ncm=scm)
    with pytest.raises(ValueError):
        compute_map(scm, d[:, :, :3], "ds")


def test_numerical_errors_are_annotated(scene, rng):
    _, grid, freqs, d = scene
    scm = random_pd(rng, 5, k=len(freqs))
    bad = scm.copy()
    bad[5] = -np.eye(5)
    with pytest.raises(NotPositiveDefiniteError, match="bin 5"):
        compute_map(scm, d, "mvdr", ncm=bad)
    # steering vector in the null space of a rank-deficient inverse
    ncm_inv_null = np.zeros_like(scm)
    with pytest.raises(NumericalError):
        compute_map(scm, d, "mvdr", ncm=ncm_inv_null)


def test_degenerate_steering_reports_bin_and_point():
    from gsrp.beamformers import narrowband_psd
    d = np.ones((2, 3, 2), dtype=complex)
    inv = np.stack([np.eye(2), np.diag([1.0, -1.0])])
    with pytest.raises(DegenerateSteeringError):
        narrowband_psd("mvdr", d, np.stack([np.eye(2)] * 2), ncm_inv=inv)


def test_zero_steering_counted(scene, rng):
    _, grid, freqs, d = scene
    d = d.copy()
    d[:, 4] = 0
    scm = random_pd(rng, 5, k=len(freqs))
    m = compute_map(scm, d, "mvcnr", ncm=scm)
    assert m.n_zero_steering == len(freqs)
    assert m.values[4] == 0


def test_empty_mask_gives_zero_map(scene, rng):
    _, grid, freqs, d = scene
    m = compute_map(random_pd(rng, 5, k=len(freqs)), d, "ds", mask=np.zeros(len(freqs)))
    assert not np.any(m.values)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_property_weight_scale_invariance(seed, scale):
    r = np.random.default_rng(seed)
    d = crandn(r, 4, 20, 3)
    scm = random_pd(r, 3, k=4)
    a = compute_map(scm, d, "nmf", "frob")
    b = compute_map(scm, d, "nmf", "frob", mask=np.full(4, scale))
    assert argmax(a).index == argmax(b).index
    np.testing.assert_allclose(a.normalized().values, b.normalized().values, rtol=1e-10)
