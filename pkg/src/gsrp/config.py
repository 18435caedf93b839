"""Run configuration: a flat ``key = value`` text format.

The first non-comment line must be the header ``gsrp-config 1``. Keys use
dotted section names; ``#`` starts a comment. Example::

    gsrp-config 1
    array.preset = square
    array.side = 2.0
    source.position = 0, 0, 0
    noise.kind = none
    model.kind = near_field
    beamformer = mvcnr
    grid.kind = planar
    grid.x = -1.5, 1.5
    grid.y = -1.5, 1.5

Relative file paths are resolved against the directory of the config file.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .acoustic_models import (
    ArrayGeometry,
    DirectivityModel,
    FarFieldModel,
    NearFieldModel,
    TableModel,
    load_atf_table,
    load_geometry,
    steer_plane_wave,
    compose_directivity,
    cardioid_gains,
)
from .beamformers import BeamformerKind
from .covariance import SmoothingParams
from .errors import ConfigError
from .simulator import NoiseSpec, SceneSpec, SourceSpec, diffuse_ncm
from .srp import AzimuthGrid, PlanarGrid
from .stft import StftParams
from .weighting import WeightingKind

__all__ = [
    "HEADER",
    "DEFAULTS",
    "RunConfig",
    "parse_config",
    "format_config",
    "load_config",
    "build_config",
]

HEADER = "gsrp-config 1"

DEFAULTS = {
    "array.preset": "square",
    "array.side": "2.0",
    "array.n_mics": "5",
    "array.diameter": "0.05",
    "array.orientation": "none",
    "array.directivity": "none",
    "array.path": "",
    "array.speed_of_sound": "343",
    "source.position": "",
    "source.azimuth_deg": "",
    "source.distance": "1.0",
    "source.signal": "white_noise",
    "source.tone_hz": "1000",
    "source.path": "",
    "noise.kind": "spatially_white",
    "noise.snr_db": "0",
    "noise.spectrum": "pink",
    "scene.sample_rate": "16000",
    "scene.noise_seconds": "1.0",
    "scene.source_seconds": "2.0",
    "scene.seed": "0",
    "input.wav": "",
    "input.truth": "",
    "model.kind": "near_field",
    "model.r_min": "0.05",
    "model.base": "far_field",
    "model.directivity": "cardioid",
    "model.path": "",
    "beamformer": "mvcnr",
    "weighting.kind": "none",
    "weighting.band": "100, 8000",
    "stft.frame_size": "512",
    "stft.frame_shift": "256",
    "stft.window": "hann",
    "grid.kind": "planar",
    "grid.x": "-1.5, 1.5",
    "grid.y": "-1.5, 1.5",
    "grid.z": "0",
    "grid.spacing": "0.05",
    "grid.spacing_deg": "5",
    "grid.radius": "",
    "smoothing.alpha": "0.2",
    "smoothing.tau": "0.075",
    "eps_reg": "0.01",
    "noise_segment": "",
    "activity_threshold_db": "40",
    "eval.snr_db": "",
    "eval.seeds": "",
}

# diffuse noise: directions on the horizontal ring and the pink-spectrum floor
DIFFUSE_DIRECTIONS = 72
PINK_FLOOR_HZ = 50.0


def parse_config(text, source="<config>"):
    """Parse config text into a ``{key: value}`` dict of raw strings."""
    values = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line != HEADER:
                raise ConfigError(f"{source}:{lineno}: expected header {HEADER!r}, got {line!r}")
            header_seen = True
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    if not header_seen:
        raise ConfigError(f"{source}: missing header {HEADER!r}")
    return values


def format_config(values):
    """Serialize a mapping of keys to values, header first, keys sorted."""
    lines = [HEADER]
    for key in sorted(values):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        lines.append(f"{key} = {values[key]}")
    return "\n".join(lines) + "\n"


def _float(values, key):
    try:
        return float(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {values[key]!r}") from exc


def _int(values, key):
    try:
        return int(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {values[key]!r}") from exc


def _floats(values, key, n=None):
    text = values[key]
    try:
        out = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(out) != n:
        raise ConfigError(f"{key}: expected {n} values, got {len(out)}")
    return out


def _opt_float(values, key):
    v = values[key].strip().lower()
    if v in ("", "none"):
        return None
    return _float(values, key)


def _choice(values, key, options):
    v = values[key].strip().lower()
    if v not in options:
        raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {v!r}")
    return v


def _path(values, key, base):
    p = Path(values[key])
    return p if p.is_absolute() else Path(base) / p


@dataclass
class RunConfig:
    """Validated run description.

    Either ``scene`` (simulated input) or ``input_wav`` (recorded input with
    ``truth``) is set.
    """

    geometry: ArrayGeometry
    model: object
    beamformer: BeamformerKind
    weighting: WeightingKind
    band: tuple
    stft: StftParams
    grid: object
    smoothing: SmoothingParams
    eps_reg: float
    noise_segment: float
    activity_threshold_db: float
    scene: Optional[SceneSpec] = None
    input_wav: Optional[Path] = None
    truth: object = None
    azimuth_random: bool = False
    source_distance: float = 1.0
    eval_snr_db: list = field(default_factory=list)
    eval_seeds: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.scene.seed if self.scene is not None else 0

    def with_seed(self, seed):
        """Copy with another scene seed (re-drawing a random source azimuth)."""
        if self.scene is None:
            return self
        scene = replace(self.scene, seed=int(seed))
        if self.azimuth_random:
            scene.source = replace(scene.source, position=_random_azimuth_position(
                self.geometry, int(seed), self.source_distance))
        return replace(self, scene=scene)

    def with_snr(self, snr_db):
        if self.scene is None:
            raise ConfigError("SNR override needs a simulated scene")
        noise = replace(self.scene.noise, snr_db=snr_db)
        return replace(self, scene=replace(self.scene, noise=noise))


def _geometry(values, base):
    preset = _choice(values, "array.preset", ("square", "uca", "file"))
    c = _float(values, "array.speed_of_sound")
    if preset == "file":
        if not values["array.path"]:
            raise ConfigError("array.path is required for array.preset = file")
        return load_geometry(_path(values, "array.path", base), c)
    orientation = _choice(values, "array.orientation", ("none", "outward"))
    if preset == "square":
        h = 0.5 * _float(values, "array.side")
        pos = np.array([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]], dtype=float)
    else:
        n = _int(values, "array.n_mics")
        if n < 2:
            raise ConfigError("array.n_mics must be at least 2")
        a = 2 * np.pi * np.arange(n) / n
        r = 0.5 * _float(values, "array.diameter")
        pos = np.column_stack([r * np.cos(a), r * np.sin(a), np.zeros(n)])
    ori = None
    if orientation == "outward":
        xy = pos.copy()
        xy[:, 2] = 0
        norms = np.linalg.norm(xy, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ConfigError("outward orientation undefined for a microphone at the array centre")
        ori = xy / norms
    try:
        return ArrayGeometry(pos, ori, c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _random_azimuth_position(geometry, seed, distance):
    theta = np.random.default_rng([int(seed), 0xD0A]).uniform(0.0, 360.0)
    return geometry.centroid + distance * np.array([np.cos(np.deg2rad(theta)), np.sin(np.deg2rad(theta)), 0.0])


def _model(values, base):
    kind = _choice(values, "model.kind", ("far_field", "near_field", "composed", "atf_table"))
    if kind == "far_field":
        return FarFieldModel()
    if kind == "near_field":
        return NearFieldModel(_float(values, "model.r_min"))
    if kind == "composed":
        base_kind = _choice(values, "model.base", ("far_field", "near_field"))
        inner = FarFieldModel() if base_kind == "far_field" else NearFieldModel(_float(values, "model.r_min"))
        return DirectivityModel(inner, values["model.directivity"].strip().lower())
    if not values["model.path"]:
        raise ConfigError("model.path is required for model.kind = atf_table")
    return TableModel(load_atf_table(_path(values, "model.path", base)))


def _grid(values, geometry):
    kind = _choice(values, "grid.kind", ("planar", "azimuth"))
    try:
        if kind == "planar":
            return PlanarGrid(tuple(_floats(values, "grid.x", 2)), tuple(_floats(values, "grid.y", 2)),
                              _float(values, "grid.z"), _float(values, "grid.spacing"))
        radius = _opt_float(values, "grid.radius")
        return AzimuthGrid(_float(values, "grid.spacing_deg"), radius=radius,
                           center=tuple(geometry.centroid))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _noise(values, geometry):
    kind = _choice(values, "noise.kind", ("none", "spatially_white", "shaped"))
    snr = _opt_float(values, "noise.snr_db")
    if kind != "shaped":
        return NoiseSpec(kind, snr)
    dirs = np.deg2rad(np.arange(DIFFUSE_DIRECTIONS) * 360.0 / DIFFUSE_DIRECTIONS)
    u = np.column_stack([np.cos(dirs), np.sin(dirs), np.zeros_like(dirs)])
    gains = None
    if _choice(values, "array.directivity", ("none", "cardioid")) == "cardioid":
        gains = cardioid_gains(geometry, directions=u)

    def ring(freqs):
        h = steer_plane_wave(geometry, u, freqs)
        return h if gains is None else compose_directivity(h, gains[None])

    def pink(freqs):
        return 1.0 / np.maximum(freqs, PINK_FLOOR_HZ)

    spectrum = _choice(values, "noise.spectrum", ("pink", "flat"))
    return NoiseSpec("shaped", snr, diffuse_ncm(ring, pink if spectrum == "pink" else None))


def build_config(values, base_dir="."):
    """Build a :class:`RunConfig` from raw key/value strings (defaults filled in)."""
    v = dict(DEFAULTS)
    v.update(values)
    geometry = _geometry(v, base_dir)
    try:
        stft = StftParams(_int(v, "stft.frame_size"), _int(v, "stft.frame_shift"),
                          _choice(v, "stft.window", ("hann", "rectangular")), _float(v, "scene.sample_rate"))
        smoothing = SmoothingParams(_float(v, "smoothing.alpha"), _float(v, "smoothing.tau"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        beamformer = BeamformerKind(v["beamformer"].strip().lower())
        weighting = WeightingKind(v["weighting.kind"].strip().lower())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    band = tuple(_floats(v, "weighting.band", 2))
    if band[0] >= band[1]:
        raise ConfigError("weighting.band must be increasing")
    eps_reg = _float(v, "eps_reg")
    if eps_reg < 0:
        raise ConfigError("eps_reg must be non-negative")
    grid = _grid(v, geometry)
    model = _model(v, base_dir)
    if isinstance(model, TableModel) and model.table.gains.shape[2] != geometry.n_mics:
        raise ConfigError("ATF table microphone count does not match the array")

    noise_seconds = _float(v, "scene.noise_seconds")
    seg = _opt_float(v, "noise_segment")
    cfg = RunConfig(
        geometry=geometry, model=model, beamformer=beamformer, weighting=weighting, band=band,
        stft=stft, grid=grid, smoothing=smoothing, eps_reg=eps_reg,
        noise_segment=noise_seconds if seg is None else seg,
        activity_threshold_db=_float(v, "activity_threshold_db"),
        source_distance=_float(v, "source.distance"),
        eval_snr_db=[None if s.strip().lower() == "none" else float(s)
                     for s in v["eval.snr_db"].split(",") if s.strip()],
        eval_seeds=[int(s) for s in v["eval.seeds"].split(",") if s.strip()],
        values=dict(values),
    )

    if v["input.wav"]:
        cfg.input_wav = _path(v, "input.wav", base_dir)
        if not v["input.truth"]:
            raise ConfigError("input.truth is required with input.wav")
        truth = _floats(v, "input.truth")
        cfg.truth = truth[0] if isinstance(grid, AzimuthGrid) else np.array(truth + [0.0] * (3 - len(truth)))
        return cfg

    if v["source.azimuth_deg"].strip().lower() == "random":
        cfg.azimuth_random = True
        position = _random_azimuth_position(geometry, _int(v, "scene.seed"), cfg.source_distance)
    elif v["source.azimuth_deg"]:
        theta = np.deg2rad(_float(v, "source.azimuth_deg"))
        position = geometry.centroid + cfg.source_distance * np.array([np.cos(theta), np.sin(theta), 0.0])
    elif v["source.position"]:
        p = _floats(v, "source.position")
        if len(p) not in (2, 3):
            raise ConfigError("source.position needs 2 or 3 coordinates")
        position = np.array(p + [0.0] * (3 - len(p)))
    else:
        raise ConfigError("source.position or source.azimuth_deg is required")
    directivity = _choice(v, "array.directivity", ("none", "cardioid"))
    signal = _choice(v, "source.signal", ("white_noise", "tone", "file", "none"))
    src_path = str(_path(v, "source.path", base_dir)) if v["source.path"] else None
    source = SourceSpec(position, signal, _float(v, "source.tone_hz"), src_path,
                        None if directivity == "none" else directivity)
    if directivity == "cardioid" and geometry.mic_orientations is None:
        raise ConfigError("cardioid directivity needs microphone orientations")
    cfg.scene = SceneSpec(geometry, source, _noise(v, geometry), _float(v, "scene.sample_rate"),
                          noise_seconds, _float(v, "scene.source_seconds"), _int(v, "scene.seed"),
                          _float(v, "model.r_min"))
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config(text, str(path)), path.parent)
