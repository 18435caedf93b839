"""Steering vectors for candidate points under different propagation models.

Point-based functions take a single point ``(3,)`` or an array ``(P, 3)``
and a scalar frequency or an array ``(K,)``. Array inputs produce a steering
tensor of shape ``(K, P, M)``; scalar inputs collapse the matching axes.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "SPEED_OF_SOUND",
    "ArrayGeometry",
    "steer_far_field",
    "steer_plane_wave",
    "steer_near_field",
    "cardioid_gain",
    "cardioid_gains",
    "compose_directivity",
    "AtfTable",
    "load_atf_table",
    "save_atf_table",
    "load_geometry",
    "save_geometry",
    "steer_from_table",
    "FarFieldModel",
    "NearFieldModel",
    "DirectivityModel",
    "TableModel",
]

SPEED_OF_SOUND = 343.0


@dataclass
class ArrayGeometry:
    """Microphone positions in meters, optional unit orientations."""

    mic_positions: np.ndarray
    mic_orientations: np.ndarray = None
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=float))
        if pos.shape[1] == 2:
            pos = np.column_stack([pos, np.zeros(len(pos))])
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("mic_positions must have shape (M, 3)")
        if pos.shape[0] < 2:
            raise ValueError("at least two microphones are required")
        self.mic_positions = pos
        if self.mic_orientations is not None:
            ori = np.atleast_2d(np.asarray(self.mic_orientations, dtype=float))
            if ori.shape[1] == 2:
                ori = np.column_stack([ori, np.zeros(len(ori))])
            if ori.shape != pos.shape:
                raise ValueError("mic_orientations must match mic_positions in shape")
            norms = np.linalg.norm(ori, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("mic_orientations must be unit vectors")
            self.mic_orientations = ori
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")

    @property
    def n_mics(self):
        return self.mic_positions.shape[0]

    @property
    def centroid(self):
        return self.mic_positions.mean(axis=0)

    def distances(self, points):
        """Distances ``(P, M)`` (or ``(M,)`` for one point) to every microphone."""
        p = np.asarray(points, dtype=float)
        return np.linalg.norm(p[..., None, :] - self.mic_positions, axis=-1)


def _shape_out(values, point_scalar, freq_scalar):
    if point_scalar:
        values = values[:, 0]
    if freq_scalar:
        values = values[0]
    return values


def _prepare(points, freqs):
    p = np.asarray(points, dtype=float)
    point_scalar = p.ndim == 1
    f = np.asarray(freqs, dtype=float)
    freq_scalar = f.ndim == 0
    return np.atleast_2d(p), np.atleast_1d(f), point_scalar, freq_scalar


def steer_far_field(geom, points, freqs):
    """Pure-delay model: element ``m`` is ``exp(-j 2 pi f r_m / c)``."""
    p, f, ps, fs = _prepare(points, freqs)
    r = geom.distances(p)  # (P, M)
    phase = -2j * np.pi * f[:, None, None] * r[None] / geom.speed_of_sound
    return _shape_out(np.exp(phase), ps, fs)


def steer_plane_wave(geom, directions, freqs):
    """Far-field limit for unit direction vectors pointing towards the source.

    Delays are relative to the array centroid, so element ``m`` is
    ``exp(j 2 pi f u . (p_m - centroid) / c)``. This is the distance model
    with a common phase removed, as the source distance goes to infinity.
    """
    u, f, ps, fs = _prepare(directions, freqs)
    proj = u @ (geom.mic_positions - geom.centroid).T  # (P, M)
    phase = 2j * np.pi * f[:, None, None] * proj[None] / geom.speed_of_sound
    return _shape_out(np.exp(phase), ps, fs)


def steer_near_field(geom, points, freqs, r_min=0.05):
    """Spherical-wave model ``exp(-j 2 pi f r / c) / (4 pi r)``.

    Distances below ``r_min`` are clamped to ``r_min``; pass ``r_min=0`` to
    disable the clamp.
    """
    if r_min < 0:
        raise ValueError("r_min must be non-negative")
    p, f, ps, fs = _prepare(points, freqs)
    r = geom.distances(p)
    r = np.maximum(r, r_min)
    phase = -2j * np.pi * f[:, None, None] * r[None] / geom.speed_of_sound
    return _shape_out(np.exp(phase) / (4.0 * np.pi * r[None]), ps, fs)


def cardioid_gain(orientation, direction):
    """``0.5 * (1 + cos(angle))`` between mic orientation and source direction."""
    o = np.asarray(orientation, dtype=float)
    d = np.asarray(direction, dtype=float)
    cos = np.sum(o * d, axis=-1) / (np.linalg.norm(o, axis=-1) * np.linalg.norm(d, axis=-1))
    return 0.5 * (1.0 + np.clip(cos, -1.0, 1.0))


def cardioid_gains(geom, points=None, directions=None):
    """Per-mic cardioid gains ``(P, M)`` for candidate points or plane-wave directions."""
    if geom.mic_orientations is None:
        raise ConfigError("cardioid directivity requires microphone orientations")
    if directions is not None:
        u = np.atleast_2d(np.asarray(directions, dtype=float))
        to_src = np.broadcast_to(u[:, None, :], (len(u), geom.n_mics, 3))
    else:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        to_src = p[:, None, :] - geom.mic_positions[None]
    return cardioid_gain(geom.mic_orientations[None], to_src)


def compose_directivity(d, gains):
    """Element-wise product of steering values and real non-negative gains."""
    gains = np.asarray(gains, dtype=float)
    if np.any(gains < 0):
        raise ValueError("directivity gains must be non-negative")
    return np.asarray(d) * gains


# ---------------------------------------------------------------------------
# Tabulated acoustic transfer functions

@dataclass
class AtfTable:
    """Complex gains ``(P, K, M)`` on an explicit point grid and frequency grid."""

    points: np.ndarray
    frequencies: np.ndarray
    gains: np.ndarray
    geometry: ArrayGeometry = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.gains = np.asarray(self.gains, dtype=complex)
        P, K = len(self.points), len(self.frequencies)
        if self.gains.ndim != 3 or self.gains.shape[:2] != (P, K):
            raise ValueError(f"gains must have shape ({P}, {K}, M), got {self.gains.shape}")
        if self.gains.shape[2] < 2:
            raise ValueError("an ATF table needs at least two microphones")
        if self.geometry is not None and self.geometry.n_mics != self.gains.shape[2]:
            raise ValueError("table microphone count does not match geometry")

    def bin_indices(self, freqs, tol=1e-6):
        """Indices of table frequencies matching ``freqs`` exactly (within ``tol`` Hz)."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        idx = np.searchsorted(self.frequencies, freqs)
        idx = np.clip(idx, 0, len(self.frequencies) - 1)
        lower = np.clip(idx - 1, 0, len(self.frequencies) - 1)
        pick = np.where(np.abs(self.frequencies[lower] - freqs) < np.abs(self.frequencies[idx] - freqs), lower, idx)
        bad = np.abs(self.frequencies[pick] - freqs) > tol
        if np.any(bad):
            raise ConfigError(f"ATF table has no entry for frequency {freqs[bad][0]:.6g} Hz")
        return pick


def steer_from_table(table, point_index, bin):
    """Steering vector ``(M,)`` of one table point at one table frequency bin."""
    if not 0 <= point_index < len(table.points):
        raise IndexError(f"unknown point index {point_index}")
    if not 0 <= bin < len(table.frequencies):
        raise IndexError(f"unknown bin {bin}")
    return table.gains[point_index, bin].copy()


_TABLE_HEADER = ["point_index", "x", "y", "z", "freq_hz", "mic_index", "re", "im"]


def load_geometry(path, speed_of_sound=SPEED_OF_SOUND):
    """Read ``mic_index,x,y,z[,ox,oy,oz]`` CSV."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if cols[:4] != ["mic_index", "x", "y", "z"]:
            raise ConfigError(f"{path}: geometry header must start with mic_index,x,y,z")
        has_ori = {"ox", "oy", "oz"} <= set(cols)
        for row in reader:
            m = int(row["mic_index"])
            if m in rows:
                raise ConfigError(f"{path}: duplicate mic_index {m}")
            pos = [float(row[k]) for k in ("x", "y", "z")]
            ori = [float(row[k]) for k in ("ox", "oy", "oz")] if has_ori else None
            rows[m] = (pos, ori)
    if sorted(rows) != list(range(len(rows))):
        raise ConfigError(f"{path}: mic indices must be 0..M-1")
    pos = np.array([rows[m][0] for m in range(len(rows))])
    ori = np.array([rows[m][1] for m in range(len(rows))]) if rows and rows[0][1] is not None else None
    if ori is not None:
        ori = ori / np.linalg.norm(ori, axis=1, keepdims=True)
    try:
        return ArrayGeometry(pos, ori, speed_of_sound)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_geometry(geom, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["mic_index", "x", "y", "z"]
        if geom.mic_orientations is not None:
            header += ["ox", "oy", "oz"]
        w.writerow(header)
        for m in range(geom.n_mics):
            row = [m] + [f"{v:.9g}" for v in geom.mic_positions[m]]
            if geom.mic_orientations is not None:
                row += [f"{v:.9g}" for v in geom.mic_orientations[m]]
            w.writerow(row)


def load_atf_table(path, geometry_path=None):
    """Load a table CSV; every (point, frequency, mic) triple must appear once."""
    path = Path(path)
    entries = {}
    coords = {}
    freqs = set()
    mics = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _TABLE_HEADER:
            raise ConfigError(f"{path}: header must be {','.join(_TABLE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                p = int(row[0])
                xyz = tuple(float(v) for v in row[1:4])
                f = float(row[4])
                m = int(row[5])
                g = complex(float(row[6]), float(row[7]))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed row") from exc
            if coords.setdefault(p, xyz) != xyz:
                raise ConfigError(f"{path}:{lineno}: inconsistent coordinates for point {p}")
            key = (p, f, m)
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate entry {key}")
            entries[key] = g
            freqs.add(f)
            mics.add(m)
    n_points = len(coords)
    if sorted(coords) != list(range(n_points)):
        raise ConfigError(f"{path}: point indices must be 0..P-1")
    if sorted(mics) != list(range(len(mics))):
        raise ConfigError(f"{path}: mic indices must be 0..M-1")
    if len(mics) < 2:
        raise ConfigError(f"{path}: an ATF table needs at least two microphones")
    freq_list = sorted(freqs)
    expected = n_points * len(freq_list) * len(mics)
    if len(entries) != expected:
        raise ConfigError(f"{path}: incomplete table ({len(entries)} of {expected} entries)")
    gains = np.empty((n_points, len(freq_list), len(mics)), dtype=complex)
    for k, f in enumerate(freq_list):
        for p in range(n_points):
            for m in range(len(mics)):
                gains[p, k, m] = entries[(p, f, m)]
    geometry = load_geometry(geometry_path) if geometry_path is not None else None
    points = np.array([coords[p] for p in range(n_points)])
    try:
        return AtfTable(points, np.array(freq_list), gains, geometry)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_atf_table(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_TABLE_HEADER)
        P, K, M = table.gains.shape
        for p in range(P):
            xyz = [repr(float(v)) for v in table.points[p]]
            for k in range(K):
                for m in range(M):
                    g = table.gains[p, k, m]
                    w.writerow([p, *xyz, repr(float(table.frequencies[k])), m, repr(float(g.real)), repr(float(g.imag))])


# ---------------------------------------------------------------------------
# Model objects used by the localization pipeline. ``steering`` returns the
# full ``(K, P, M)`` tensor for a candidate grid.

def _grid_targets(grid):
    """``('points', P x 3)`` or ``('directions', P x 3)`` for a candidate grid."""
    if getattr(grid, "plane_wave", False):
        return "directions", grid.directions
    return "points", grid.points


@dataclass
class FarFieldModel:
    """Pure-delay model; plane waves on azimuth grids without a radius."""

    name: str = field(default="far_field", init=False)

    def steering(self, geom, grid, freqs):
        kind, targets = _grid_targets(grid)
        if kind == "directions":
            return steer_plane_wave(geom, targets, np.atleast_1d(freqs))
        return steer_far_field(geom, targets, np.atleast_1d(freqs))


@dataclass
class NearFieldModel:
    r_min: float = 0.05
    name: str = field(default="near_field", init=False)

    def steering(self, geom, grid, freqs):
        kind, targets = _grid_targets(grid)
        if kind == "directions":
            raise ConfigError("near-field model needs candidate points; give the azimuth grid a radius")
        return steer_near_field(geom, targets, np.atleast_1d(freqs), self.r_min)


@dataclass
class DirectivityModel:
    """A base model multiplied by frequency-independent microphone gains."""

    base: object
    directivity: str = "cardioid"
    name: str = field(default="composed", init=False)

    def __post_init__(self):
        if self.directivity != "cardioid":
            raise ConfigError(f"unknown directivity {self.directivity!r}")

    def gains(self, geom, grid):
        kind, targets = _grid_targets(grid)
        if kind == "directions":
            return cardioid_gains(geom, directions=targets)
        return cardioid_gains(geom, points=targets)

    def steering(self, geom, grid, freqs):
        d = self.base.steering(geom, grid, freqs)
        return compose_directivity(d, self.gains(geom, grid)[None])


@dataclass
class TableModel:
    """Exact point-index lookup into an :class:`AtfTable`."""

    table: AtfTable
    name: str = field(default="atf_table", init=False)

    def steering(self, geom, grid, freqs):
        pts = grid.points
        if pts.shape != self.table.points.shape or not np.allclose(pts, self.table.points, atol=1e-9, rtol=0):
            raise ConfigError("candidate grid does not coincide with the ATF table grid")
        if geom.n_mics != self.table.gains.shape[2]:
            raise ConfigError("ATF table microphone count does not match the array")
        k = self.table.bin_indices(freqs)
        return np.transpose(self.table.gains[:, k, :], (1, 0, 2))
