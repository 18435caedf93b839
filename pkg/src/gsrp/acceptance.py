"""Acceptance suite: one check per criterion, each returning pass/fail and detail.

Used by ``tests/test_acceptance.py`` and by ``gsrp selftest``.
"""

import filecmp
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acoustic_models import ArrayGeometry, FarFieldModel, NearFieldModel, steer_plane_wave
from .beamformers import criterion1_check, mpcnr_psd, mvcnr_psd
from .covariance import regularize_ncm, smoothed_scms
from .numerics import hermitian_inverse
from .scenarios import desk_nearfield, nearfield_failure, uca_cardioid, weighting_curves
from .simulator import render_stft_scene
from .srp import AzimuthGrid, PlanarGrid, argmax, compute_map
from .stft import StftParams
from .weighting import band_mask

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "random_pd", "format_line"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed_s: float = 0.0


def random_pd(rng, m, k=None, cond_floor=0.05):
    """Seeded random Hermitian PD matrix (or stack of ``k``) with unit average diagonal."""
    shape = (m, m) if k is None else (k, m, m)
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    a = b @ np.conj(np.swapaxes(b, -1, -2)) / m + cond_floor * np.eye(m)
    return a / (np.trace(a, axis1=-2, axis2=-1).real / m)[..., None, None]


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rel_spread(values):
    v = np.asarray(values)
    return float((v.max() - v.min()) / v.max())


def _from_assertions(assertions):
    ok = all(a.passed for a in assertions)
    detail = "; ".join(f"{a.name}: {'ok' if a.passed else 'FAIL'} ({a.detail})" for a in assertions)
    return ok, detail


def criterion_1():
    return _from_assertions(nearfield_failure())


def _random_array(rng, m, extent=0.3):
    return ArrayGeometry(rng.uniform(-extent, extent, size=(m, 3)) * np.array([1, 1, 0.2]))


def _diffuse_coherence(geom, freqs, floor=0.05):
    """Spherically isotropic coherence ``sinc(2 f r_mn / c)`` plus a white floor."""
    r = np.linalg.norm(geom.mic_positions[:, None] - geom.mic_positions[None], axis=-1)
    g = np.sinc(2.0 * freqs[:, None, None] * r[None] / geom.speed_of_sound)
    return g + floor * np.eye(geom.n_mics)


def criterion_2(seed=2):
    rng = np.random.default_rng(seed)
    geom = _random_array(rng, 6)
    freqs = np.linspace(200.0, 6000.0, 24)
    ncm = _diffuse_coherence(geom, freqs)
    grids = [
        (PlanarGrid((-1.0, 1.0), (-1.0, 1.0), 0.5, 0.1), NearFieldModel()),
        (AzimuthGrid(5.0), FarFieldModel()),
    ]
    spreads = []
    for grid, model in grids:
        d = model.steering(geom, grid, freqs)
        for bf in ("mvcnr", "mpcnr"):
            m = compute_map(ncm, d, bf, ncm=ncm, eps_reg=0.0, grid=grid)
            spreads.append(_rel_spread(m.values))
    worst = max(spreads)
    return worst < 1e-9, f"max (max-min)/max over 2 grids x 2 beamformers = {worst:.2e}"


def criterion_3(seed=3):
    rng = np.random.default_rng(seed)
    geom = _random_array(rng, 6)
    freqs = np.linspace(300.0, 5000.0, 16)
    grid = PlanarGrid((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.1)
    d = NearFieldModel().steering(geom, grid, freqs)
    worst = 0.0
    for s2 in (1e-4, 1.0, 1e4):
        scm = random_pd(rng, 6, len(freqs)) * s2 * rng.uniform(0.5, 5.0, size=(len(freqs), 1, 1))
        ncm = s2 * np.broadcast_to(np.eye(6), scm.shape)
        a = compute_map(scm, d, "nmf", ncm=ncm, eps_reg=0.01).values
        b = compute_map(scm, d, "mvcnr", ncm=ncm, eps_reg=0.01).values
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(b))))
    return worst < 1e-10, f"max per-point relative difference = {worst:.2e}"


def criterion_4():
    return _from_assertions(weighting_curves())


def criterion_5(seed=5, draws=1000, n_candidates=4):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    failures = 0
    total = 0
    for m in (2, 6, 12):
        for _ in range(draws):
            a = random_pd(rng, m, cond_floor=rng.uniform(1e-3, 1.0))
            h_s = _crandn(rng, m)
            cands = _crandn(rng, n_candidates, m)
            zeta = rng.uniform(0.1, 10.0)
            total += 1
            failures += not criterion1_check(a, h_s, cands, zeta=zeta)
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 5.0
    return ok, f"{failures} violations in {total} draws, {elapsed:.2f} s (limit 5 s)"


def criterion_6(seed=6):
    rng = np.random.default_rng(seed)
    geom = _random_array(rng, 5)
    freqs = np.linspace(250.0, 7000.0, 20)
    grid = PlanarGrid((-1.0, 1.0), (-1.0, 1.0), 0.0, 0.1)
    d = NearFieldModel().steering(geom, grid, freqs)
    scale = (rng.uniform(0.2, 5.0, len(freqs)) * np.exp(2j * np.pi * rng.uniform(size=len(freqs))))
    d2 = d * scale[:, None, None]
    scm = random_pd(rng, 5, len(freqs))
    ncm = random_pd(rng, 5, len(freqs)) * 0.3
    worst = 0.0
    for bf in ("mvcnr", "nmf", "mpcnr"):
        for w in ("none", "frob"):
            a = compute_map(scm, d, bf, w, ncm=ncm, eps_reg=0.01).values
            b = compute_map(scm, d2, bf, w, ncm=ncm, eps_reg=0.01).values
            worst = max(worst, float(np.max(np.abs(a - b) / np.abs(a))))
    return worst < 1e-10, f"max relative change under per-bin complex model scaling = {worst:.2e}"


def criterion_7(seed=7, seconds=3.0, doa_deg=37.3):
    rng = np.random.default_rng(seed)
    a = 2 * np.pi * np.arange(5) / 5
    geom = ArrayGeometry(np.column_stack([0.05 * np.cos(a), 0.05 * np.sin(a), np.zeros(5)]))
    params = StftParams()
    freqs = params.frequencies
    bins = np.flatnonzero(band_mask(freqs, (100.0, 8000.0)))
    n_frames = int((seconds * params.sample_rate - params.frame_size) // params.frame_shift) + 1
    u = np.array([np.cos(np.deg2rad(doa_deg)), np.sin(np.deg2rad(doa_deg)), 0.0])
    h = steer_plane_wave(geom, u[None], freqs[bins])[:, 0, :]
    tiles = render_stft_scene(_crandn(rng, n_frames, len(bins)), h)
    grid = AzimuthGrid(5.0)
    d = FarFieldModel().steering(geom, grid, freqs[bins])
    mismatched = 0
    for _, scm in smoothed_scms(tiles, 0.2):
        p = argmax(compute_map(scm, d, "ds", "phat", grid=grid)).index
        q = argmax(compute_map(scm, d, "nmf", "frob", grid=grid)).index
        mismatched += p != q
    return mismatched == 0, f"{mismatched} of {n_frames} frames with differing argmax"


def criterion_8(seed=8, draws=300):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(draws):
        m = (2, 4, 6, 12)[i % 4]
        ncm = random_pd(rng, m) * 10 ** rng.uniform(-3, 3)
        h = _crandn(rng, m)
        phi_ss = 10 ** rng.uniform(-3, 3)
        scm = phi_ss * np.outer(h, np.conj(h)) + ncm
        ncm_inv = hermitian_inverse(ncm)
        a = mvcnr_psd(h, scm, ncm_inv)
        b = mpcnr_psd(h, hermitian_inverse(scm), ncm_inv, scm)
        worst = max(worst, abs(a - b) / abs(a))
    return worst < 1e-8, f"max relative MPCNR/MVCNR difference at the source = {worst:.2e}"


def criterion_9():
    return _from_assertions(uca_cardioid())


def criterion_10():
    """Golden runs repeated with the same seed must give byte-identical CSVs."""
    mismatched = []
    compared = 0
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        for outdir in (a, b):
            outdir.mkdir()
            desk_nearfield(outdir, seed=10)
            weighting_curves(outdir, seed=10)
        for f in sorted(a.iterdir()):
            compared += 1
            if not filecmp.cmp(f, b / f.name, shallow=False):
                mismatched.append(f.name)
    return not mismatched and compared > 0, f"{compared} CSVs compared, mismatched: {mismatched or 'none'}"


def criterion_11(seed=11, n_matrices=20, n_vectors=50):
    rng = np.random.default_rng(seed)
    worst = 1.0
    for _ in range(n_matrices):
        m = int(rng.integers(2, 13))
        sigma_y2 = 10 ** rng.uniform(-2, 2)
        ncm = random_pd(rng, m) * 1e-6 * sigma_y2
        inv = hermitian_inverse(regularize_ncm(ncm, sigma_y2, 0.01))
        d = _crandn(rng, n_vectors, m)
        u = d @ inv.T
        cos = np.abs(np.sum(np.conj(d) * u, axis=-1)) / (np.linalg.norm(d, axis=-1) * np.linalg.norm(u, axis=-1))
        worst = min(worst, float(cos.min()))
    return worst > 0.999, f"min direction cosine = {worst:.6f}"


CRITERIA = {
    1: ("near-field failure and repair", criterion_1),
    2: ("constant noise response", criterion_2),
    3: ("NMF equals MVCNR in white noise", criterion_3),
    4: ("frequency-weighting curves", criterion_4),
    5: ("maximum source response inequality", criterion_5),
    6: ("model-scaling invariance", criterion_6),
    7: ("PHAT / NMF-frob argmax coincidence", criterion_7),
    8: ("MPCNR / MVCNR coincidence at the source", criterion_8),
    9: ("UCA cardioid trend", criterion_9),
    10: ("pipeline determinism", criterion_10),
    11: ("regularization limit", criterion_11),
}


def run_criterion(number):
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t0)


def format_line(result):
    status = "PASS" if result.passed else "FAIL"
    return f"criterion {result.number:2d} [{status}] {result.title} ({result.elapsed_s:.1f} s): {result.detail}"


def run_all(numbers=None, echo=None):
    results = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n)
        if echo is not None:
            echo(format_line(r))
        results.append(r)
    return results
