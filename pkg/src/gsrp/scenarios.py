"""Built-in golden scenarios with machine-checkable assertions.

Each scenario returns a list of :class:`Assertion` records tagged with the
acceptance-criterion number they support, and optionally writes its
per-method estimates and a summary CSV to an output directory.
"""

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acoustic_models import ArrayGeometry, NearFieldModel
from .config import build_config
from .covariance import estimate_ncm
from .errors import ConfigError
from .pipeline import format_number, localize_run, write_report
from .simulator import NoiseSpec, SceneSpec, SourceSpec, simulate_scene
from .srp import PlanarGrid, argmax, compute_map
from .stft import StftParams, analyze
from .weighting import band_mask

__all__ = [
    "Assertion",
    "GoldenResult",
    "SCENARIOS",
    "run_golden",
    "nearfield_failure",
    "weighting_curves",
    "uca_cardioid",
    "desk_nearfield",
    "UCA_BASE",
    "UCA_METHODS",
]


@dataclass
class Assertion:
    criterion: int
    name: str
    passed: bool
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)


@dataclass
class GoldenResult:
    name: str
    assertions: list
    elapsed_s: float

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# four distributed microphones, source in the middle, near-field model

NEARFIELD_METHODS = ("ds", "mvdr", "mpdr", "mvcnr", "nmf", "mpcnr")


def nearfield_maps(side=2.0, extent=3.0, spacing=0.05, seed=0, source_seconds=1.0, eps_reg=0.01,
                   methods=NEARFIELD_METHODS):
    """Maps of each beamformer for a noiseless source at the square centre.

    The SCM is the average over all frames of the source segment. The NCM is
    zero, so the regularized NCM is ``eps_reg * sigma_y2 * I``.
    """
    h = 0.5 * side
    geom = ArrayGeometry([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]])
    source = np.zeros(3)
    spec = SceneSpec(geom, SourceSpec(source), NoiseSpec("none", None), noise_seconds=0.0,
                     source_seconds=source_seconds, seed=seed)
    params = StftParams()
    stft = analyze(simulate_scene(spec).samples, params)
    bins = np.flatnonzero(band_mask(stft.frequencies, (100.0, 8000.0)))
    scm = estimate_ncm(stft.tiles[:, bins], slice(0, stft.n_frames))
    grid = PlanarGrid((-extent, extent), (-extent, extent), 0.0, spacing)
    steering = NearFieldModel().steering(geom, grid, stft.frequencies[bins])
    ncm = np.zeros_like(scm)
    maps = {m: compute_map(scm, steering, m, ncm=ncm, eps_reg=eps_reg, grid=grid) for m in methods}
    return geom, grid, source, maps


def nearfield_failure(outdir=None, seed=0):
    """DS peaks at a microphone, MVDR at the grid boundary, GSRP at the source."""
    t0 = time.perf_counter()
    geom, grid, source, maps = nearfield_maps(seed=seed)
    elapsed = time.perf_counter() - t0
    peaks = {m: argmax(v) for m, v in maps.items()}
    src_idx = grid.index_of(source)
    out = []

    ds = peaks["ds"].point
    cheb = np.min(np.max(np.abs(geom.mic_positions[:, :2] - ds[:2]), axis=1))
    out.append(Assertion(1, "ds_at_microphone", bool(cheb <= grid.spacing + 1e-9),
                         f"DS peak {ds[:2].tolist()}, {cheb:.3f} m from nearest microphone cell"))
    dist = float(np.linalg.norm(peaks["mvdr"].point - source))
    limit = 0.9 * grid.half_diagonal
    out.append(Assertion(1, "mvdr_at_boundary", dist > limit,
                         f"MVDR peak {dist:.3f} m from source (needs > {limit:.3f})"))
    for m in ("mvcnr", "nmf", "mpcnr"):
        ok = peaks[m].index == src_idx
        out.append(Assertion(1, f"{m}_at_source", ok, f"{m.upper()} peak {peaks[m].point[:2].tolist()}"))
    out.append(Assertion(1, "runtime", elapsed < 30.0, f"{elapsed:.1f} s (limit 30 s)"))

    if outdir is not None:
        rows = []
        for m, pk in peaks.items():
            rows.append([m] + [format_number(v) for v in pk.point] + [format_number(pk.value),
                                                                     format_number(np.linalg.norm(pk.point - source))])
        _write_rows(Path(outdir) / "nearfield_failure_estimates.csv",
                    ["method", "est_x_m", "est_y_m", "est_z_m", "value", "error"], rows)
    return out


# ---------------------------------------------------------------------------
# frequency-weighting curves over the narrowband SNR

def weighting_table(snrs_db, n_mics=6, n_candidates=200, seed=0, sigma_v2=1.0):
    """Peak MVCNR PSDs and the frob/flat weight ratio versus narrowband SNR.

    The source is a seeded random rank-one ``Phi_xx = phi h h^H`` scaled so
    that ``tr(Phi_xx) / tr(Phi_vv)`` equals the SNR; ``Phi_vv = sigma_v2 I``.
    Candidates are ``h`` itself followed by random vectors.
    """
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal(n_mics) + 1j * rng.standard_normal(n_mics)) / np.sqrt(2)
    cands = (rng.standard_normal((n_candidates, n_mics)) + 1j * rng.standard_normal((n_candidates, n_mics))) / np.sqrt(2)
    steering = np.concatenate([h[None], cands])[None]  # one bin
    ncm = sigma_v2 * np.eye(n_mics)[None]
    rows = []
    for snr_db in snrs_db:
        snr = 10.0 ** (snr_db / 10.0)
        phi = snr * n_mics * sigma_v2 / np.vdot(h, h).real
        scm = phi * np.outer(h, np.conj(h))[None] + ncm
        vals = {w: compute_map(scm, steering, "mvcnr", w, ncm=ncm).values for w in ("snr", "flat", "frob")}
        z_flat = 1.0 / (snr * n_mics + 1.0)
        z_frob = sigma_v2 / np.linalg.norm(scm[0])
        rows.append({
            "snr_db": float(snr_db),
            "snr": snr,
            "psd_snr_max": float(np.max(vals["snr"])),
            "psd_snr_at_source": float(vals["snr"][0]),
            "psd_flat_max": float(np.max(vals["flat"])),
            "psd_frob_max": float(np.max(vals["frob"])),
            "frob_over_flat": float(z_frob / z_flat),
        })
    return rows


def weighting_curves(outdir=None, seed=0):
    snrs = np.arange(-40.0, 21.0, 5.0)
    rows = weighting_table(snrs, seed=seed)
    by = {r["snr_db"]: r for r in rows}
    M = 6
    out = []
    for s in (-20.0, 0.0, 20.0):
        r = by[s]
        err = abs(r["psd_snr_max"] - (r["snr"] + 1.0 / M))
        out.append(Assertion(4, f"snr_line_{s:+.0f}dB", err < 1e-6 and r["psd_snr_max"] == r["psd_snr_at_source"],
                             f"max PSD {r['psd_snr_max']:.9g} vs SNR + 1/M = {r['snr'] + 1 / M:.9g}"))
    worst = max(abs(r["psd_flat_max"] - 1.0) for r in rows)
    out.append(Assertion(4, "flat_unity", worst < 1e-9, f"max |P_flat - 1| = {worst:.3g}"))
    hi = by[20.0]["frob_over_flat"]
    out.append(Assertion(4, "frob_high_snr", abs(hi - 1.0) <= 0.1, f"ratio at +20 dB = {hi:.4f}"))
    lo = by[-40.0]["frob_over_flat"]
    target = 1.0 / np.sqrt(M)
    out.append(Assertion(4, "frob_low_snr", abs(lo - target) <= 0.02 * target,
                         f"ratio at -40 dB = {lo:.4f} (1/sqrt(6) = {target:.4f})"))
    if outdir is not None:
        keys = ["snr_db", "psd_snr_max", "psd_flat_max", "psd_frob_max", "frob_over_flat"]
        _write_rows(Path(outdir) / "weighting_curves.csv", keys,
                    [[format_number(r[k]) for k in keys] for r in rows])
    return out


# ---------------------------------------------------------------------------
# 5-mic, 5 cm UCA of outward cardioids; random DOAs in diffuse noise

UCA_BASE = {
    "array.preset": "uca",
    "array.n_mics": "5",
    "array.diameter": "0.05",
    "array.orientation": "outward",
    "array.directivity": "cardioid",
    "source.azimuth_deg": "random",
    "source.distance": "1.5",
    "noise.kind": "shaped",
    "noise.spectrum": "pink",
    "noise.snr_db": "0",
    "scene.noise_seconds": "1.0",
    "scene.source_seconds": "1.0",
    "grid.kind": "azimuth",
    "grid.spacing_deg": "5",
}

# GSRP uses the far-field model with cardioid gains; the baselines the plain far-field model
UCA_METHODS = {
    "mvcnr_frob": {"beamformer": "mvcnr", "weighting.kind": "frob", "model.kind": "composed"},
    "srp_phat": {"beamformer": "ds", "weighting.kind": "phat", "model.kind": "far_field"},
    "csrp": {"beamformer": "ds", "weighting.kind": "none", "model.kind": "far_field"},
}


def uca_mle(n_doas=20, snr_db=0.0, seed0=0, methods=None):
    """MLE in degrees per method, pooled over frames of ``n_doas`` seeded scenes."""
    methods = UCA_METHODS if methods is None else methods
    result = {}
    rows = []
    for name, overrides in methods.items():
        errors = []
        for i in range(n_doas):
            values = dict(UCA_BASE, **overrides)
            values["noise.snr_db"] = repr(float(snr_db))
            values["scene.seed"] = str(seed0 + i)
            cfg = build_config(values)
            rep = localize_run(cfg)
            errors.extend(rep.errors.tolist())
            rows.append([name, str(seed0 + i), format_number(rep.truth), str(rep.n_frames), format_number(rep.mle)])
        result[name] = float(np.mean(errors))
    return result, rows


def uca_cardioid(outdir=None, seed=0):
    t0 = time.perf_counter()
    mle, rows = uca_mle(seed0=seed)
    elapsed = time.perf_counter() - t0
    out = [
        Assertion(9, "mvcnr_frob_le_phat", mle["mvcnr_frob"] <= mle["srp_phat"],
                  f"MVCNR-frob {mle['mvcnr_frob']:.3f} deg, SRP-PHAT {mle['srp_phat']:.3f} deg"),
        Assertion(9, "csrp_ge_2x_mvcnr_frob", mle["csrp"] >= 2.0 * mle["mvcnr_frob"],
                  f"CSRP {mle['csrp']:.3f} deg vs 2 x MVCNR-frob {2 * mle['mvcnr_frob']:.3f} deg"),
        Assertion(9, "runtime", elapsed < 180.0, f"{elapsed:.1f} s (limit 180 s)"),
    ]
    if outdir is not None:
        _write_rows(Path(outdir) / "uca_cardioid_runs.csv", ["method", "seed", "doa_deg", "frames", "mle_deg"], rows)
    return out


# ---------------------------------------------------------------------------
# desk-scale pipeline run: noiseless centred source, 0.5 m square

DESK_BASE = {
    "array.preset": "square",
    "array.side": "0.5",
    "source.position": "0, 0, 0",
    "noise.kind": "none",
    "noise.snr_db": "none",
    "scene.noise_seconds": "0.5",
    "scene.source_seconds": "1.0",
    "model.kind": "near_field",
    "grid.kind": "planar",
    "grid.x": "-0.5, 0.5",
    "grid.y": "-0.5, 0.5",
    "grid.spacing": "0.05",
}


def desk_nearfield(outdir=None, seed=0):
    """Frame-wise pipeline: MVCNR hits the source cell, DS drifts to a microphone."""
    out = []
    reports = {}
    for bf in ("mvcnr", "ds"):
        cfg = build_config(dict(DESK_BASE, beamformer=bf, **{"scene.seed": str(seed)}))
        reports[bf] = localize_run(cfg)
        if outdir is not None:
            write_report(reports[bf], Path(outdir) / f"desk_nearfield_{bf}_report.csv")
    mv = reports["mvcnr"]
    hit = float(np.mean(mv.errors == 0.0)) if mv.n_frames else 0.0
    out.append(Assertion(1, "mvcnr_exact_cell", hit >= 0.95, f"{hit:.1%} of {mv.n_frames} frames on the source cell"))
    half = 0.5 * np.hypot(0.25, 0.25)
    ds = reports["ds"].mle
    out.append(Assertion(1, "ds_fails", ds > half, f"DS MLE {ds:.3f} m (needs > {half:.3f})"))
    return out


SCENARIOS = {
    "nearfield_failure": nearfield_failure,
    "weighting_curves": weighting_curves,
    "uca_cardioid": uca_cardioid,
    "desk_nearfield": desk_nearfield,
}


def run_golden(name, outdir=None, seed=0):
    """Run a registered scenario and write ``<name>_summary.csv`` to ``outdir``."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    assertions = SCENARIOS[name](outdir, seed)
    result = GoldenResult(name, assertions, time.perf_counter() - t0)
    if outdir is not None:
        _write_rows(Path(outdir) / f"{name}_summary.csv", ["scenario", "criterion", "assertion", "passed", "detail"],
                    [[name, a.criterion, a.name, "pass" if a.passed else "fail", a.detail] for a in assertions])
    return result
