"""End-to-end localization runs, error metrics and CSV export."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covariance import estimate_ncm, smoothed_scms
from .errors import ConfigError
from .simulator import read_wav, simulate_scene
from .srp import AzimuthGrid, PlanarGrid, SrpMap, argmax, average_maps, compute_map, requires_ncm
from .stft import analyze
from .weighting import band_mask

__all__ = [
    "FrameEstimate",
    "RunReport",
    "localize_run",
    "compute_error",
    "truth_for_grid",
    "active_frames",
    "export_heatmap",
    "read_heatmap",
    "write_report",
    "format_number",
]


def format_number(v):
    """9 significant digits, '.' decimal point."""
    return f"{float(v):.9g}"


@dataclass
class FrameEstimate:
    frame: int
    time_s: float
    estimate: object
    value: float
    error: float


@dataclass
class RunReport:
    """Per-frame estimates over active source frames and summary statistics."""

    grid: object
    truth: object
    frames: list = field(default_factory=list)
    average_map: Optional[SrpMap] = None
    last_map: Optional[SrpMap] = None
    n_zero_steering: int = 0

    @property
    def errors(self):
        return np.array([f.error for f in self.frames], dtype=float)

    @property
    def n_frames(self):
        return len(self.frames)

    @property
    def mle(self):
        """Mean localization error over active frames (NaN when there are none)."""
        e = self.errors
        return float(np.mean(e)) if e.size else float("nan")

    @property
    def quartiles(self):
        """Lower quartile, median and upper quartile of the per-frame error."""
        e = self.errors
        if not e.size:
            return (float("nan"),) * 3
        return tuple(float(q) for q in np.percentile(e, [25, 50, 75]))


def compute_error(estimate, truth, kind):
    """Euclidean distance (``planar_3d``) or wrapped angle in degrees (``azimuth_1d``)."""
    if kind == "planar_3d":
        a = np.asarray(estimate, dtype=float)
        b = np.asarray(truth, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError("planar error needs two points of the same dimension")
        return float(np.linalg.norm(a - b))
    if kind == "azimuth_1d":
        if np.ndim(estimate) or np.ndim(truth):
            raise ValueError("azimuth error needs two scalar angles")
        d = abs(float(estimate) - float(truth)) % 360.0
        return float(min(d, 360.0 - d))
    raise ValueError(f"unknown grid kind {kind!r}")


def truth_for_grid(grid, position):
    """Ground truth in grid coordinates: the point itself or its azimuth in degrees."""
    position = np.asarray(position, dtype=float)
    if isinstance(grid, AzimuthGrid):
        rel = position - np.asarray(grid.center, dtype=float)
        return float(np.degrees(np.arctan2(rel[1], rel[0])) % 360.0)
    return position


def active_frames(clean_tiles, frames, threshold_db):
    """Frames whose clean-reference energy is within ``threshold_db`` of the peak.

    An all-zero reference marks every frame active.
    """
    frames = np.asarray(frames, dtype=int)
    if clean_tiles is None or frames.size == 0:
        return frames
    energy = np.sum(np.abs(clean_tiles[frames]) ** 2, axis=(1, 2))
    peak = np.max(energy)
    if peak <= 0:
        return frames
    return frames[energy >= peak * 10.0 ** (-threshold_db / 10.0)]


def _load_input(config):
    if config.scene is not None:
        scene = simulate_scene(config.scene)
        truth = truth_for_grid(config.grid, scene.source_position)
        return scene.samples, scene.clean, truth
    samples, rate = read_wav(config.input_wav)
    if abs(rate - config.stft.sample_rate) > 1e-9:
        raise ConfigError(f"{config.input_wav}: sample rate {rate} does not match stft rate {config.stft.sample_rate}")
    return samples, None, config.truth


def localize_run(config, keep_maps=False):
    """Localize the source frame by frame.

    The NCM is the average over frames that lie fully inside the leading
    noise segment. SCM smoothing starts at the first frame that begins at or
    after the end of that segment. Maps are computed for active frames only.

    Returns
    -------
    RunReport
        With ``keep_maps`` the report also holds the average of all frame
        maps; the last frame map is always kept.
    """
    samples, clean, truth = _load_input(config)
    geom = config.geometry
    if samples.shape[1] != geom.n_mics:
        raise ConfigError(f"input has {samples.shape[1]} channels, array has {geom.n_mics} microphones")
    params = config.stft
    stft = analyze(samples, params)
    clean_tiles = analyze(clean, params).tiles if clean is not None else None

    n_noise_samples = int(round(config.noise_segment * params.sample_rate))
    n_noise_frames = 0
    if n_noise_samples >= params.frame_size:
        n_noise_frames = min((n_noise_samples - params.frame_size) // params.frame_shift + 1, stft.n_frames)
    first = min(-(-n_noise_samples // params.frame_shift), stft.n_frames)

    bins = np.flatnonzero(band_mask(stft.frequencies, config.band))
    if bins.size == 0:
        raise ConfigError("frequency band contains no STFT bins")
    tiles = stft.tiles[:, bins, :]
    ncm = estimate_ncm(tiles, slice(0, n_noise_frames)) if n_noise_frames else None
    if ncm is None and requires_ncm(config.beamformer, config.weighting):
        raise ConfigError(f"{config.beamformer.value} with {config.weighting.value} weighting needs a "
                          "noise-only segment of at least one frame")
    steering = config.model.steering(geom, config.grid, stft.frequencies[bins])

    kind = config.grid.kind
    report = RunReport(config.grid, truth)
    active = set(active_frames(clean_tiles, range(first, stft.n_frames), config.activity_threshold_db).tolist())
    maps = []
    for l, scm in smoothed_scms(tiles, config.smoothing.alpha_sm, start=first):
        if l not in active:
            continue
        m = compute_map(scm, steering, config.beamformer, config.weighting, ncm=ncm,
                        eps_reg=config.eps_reg, grid=config.grid, frame=l)
        peak = argmax(m)
        report.frames.append(FrameEstimate(l, stft.frame_time(l), peak.point, peak.value,
                                           compute_error(peak.point, truth, kind)))
        report.n_zero_steering += m.n_zero_steering
        report.last_map = m
        if keep_maps:
            maps.append(m)
    if maps:
        report.average_map = average_maps(maps)
    return report


def _point_columns(grid, prefix):
    if isinstance(grid, AzimuthGrid):
        return [f"{prefix}_theta_deg"]
    return [f"{prefix}_x_m", f"{prefix}_y_m", f"{prefix}_z_m"]


def _point_values(point):
    return [format_number(v) for v in np.atleast_1d(point)]


def write_report(report, path):
    """Per-frame CSV ``frame,time_s,est_*,truth_*,error``."""
    header = ["frame", "time_s"] + _point_columns(report.grid, "est") + _point_columns(report.grid, "truth") + ["error"]
    lines = [",".join(header)]
    truth = _point_values(report.truth)
    for f in report.frames:
        lines.append(",".join([str(f.frame), format_number(f.time_s)] + _point_values(f.estimate) + truth
                              + [format_number(f.error)]))
    _write_lf(path, lines)


def _write_lf(path, lines):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_heatmap(srp_map, path, normalize=True):
    """Write ``x_m,y_m,value`` (planar) or ``theta_deg,value`` (azimuth) rows."""
    m = srp_map.normalized() if normalize else srp_map
    grid = m.grid
    if isinstance(grid, AzimuthGrid):
        lines = ["theta_deg,value"]
        lines += [f"{format_number(a)},{format_number(v)}" for a, v in zip(grid.angles, m.values)]
    elif isinstance(grid, PlanarGrid):
        lines = ["x_m,y_m,value"]
        pts = grid.points
        lines += [f"{format_number(p[0])},{format_number(p[1])},{format_number(v)}" for p, v in zip(pts, m.values)]
    else:
        raise ValueError("heatmap export needs a planar or azimuth grid")
    _write_lf(path, lines)


def read_heatmap(path):
    """Read a heatmap CSV back as ``(header, rows)`` with float rows."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    return header, rows
