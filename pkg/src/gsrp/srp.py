"""Candidate grids, broadband SRP maps and the grid-search argmax."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .beamformers import BeamformerKind, narrowband_psd
from .covariance import regularize_ncm, signal_power
from .errors import ConfigError, DegenerateSteeringError, NotPositiveDefiniteError, NumericalError
from .numerics import hermitian_inverse
from .weighting import WeightingKind, phat_transform, zeta2_flat, zeta2_frob, zeta2_snr

__all__ = [
    "PlanarGrid",
    "AzimuthGrid",
    "SrpMap",
    "Peak",
    "compute_map",
    "argmax",
    "average_maps",
    "thread_count",
    "requires_ncm",
]

THREADS_ENV = "GSRP_THREADS"


@dataclass(frozen=True)
class PlanarGrid:
    """Rectangular grid of points at height ``z``, ordered x-fastest (row-major)."""

    x_range: tuple
    y_range: tuple
    z: float = 0.0
    spacing: float = 0.05
    kind = "planar_3d"
    plane_wave = False

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.x_range[1] < self.x_range[0] or self.y_range[1] < self.y_range[0]:
            raise ValueError("grid ranges must be increasing")

    @cached_property
    def shape(self):
        nx = int(round((self.x_range[1] - self.x_range[0]) / self.spacing)) + 1
        ny = int(round((self.y_range[1] - self.y_range[0]) / self.spacing)) + 1
        return ny, nx

    @cached_property
    def x(self):
        # rounding removes accumulation residue so on-grid points compare exactly
        return np.round(self.x_range[0] + self.spacing * np.arange(self.shape[1]), 12)

    @cached_property
    def y(self):
        return np.round(self.y_range[0] + self.spacing * np.arange(self.shape[0]), 12)

    @cached_property
    def points(self):
        xx, yy = np.meshgrid(self.x, self.y)
        return np.column_stack([xx.ravel(), yy.ravel(), np.full(xx.size, float(self.z))])

    def __len__(self):
        return self.shape[0] * self.shape[1]

    def coordinates(self, index):
        iy, ix = divmod(int(index), self.shape[1])
        return np.array([self.x[ix], self.y[iy], float(self.z)])

    def index_of(self, point):
        """Index of the grid cell nearest to ``point`` (x, y only)."""
        ix = int(np.clip(round((point[0] - self.x_range[0]) / self.spacing), 0, self.shape[1] - 1))
        iy = int(np.clip(round((point[1] - self.y_range[0]) / self.spacing), 0, self.shape[0] - 1))
        return iy * self.shape[1] + ix

    @property
    def half_diagonal(self):
        return 0.5 * np.hypot(self.x_range[1] - self.x_range[0], self.y_range[1] - self.y_range[0])


@dataclass(frozen=True)
class AzimuthGrid:
    """Ascending azimuths in degrees, counter-clockwise from +x.

    Without ``radius`` the candidates are plane-wave directions; with a
    radius they are points on a horizontal circle around ``center``.
    """

    spacing_deg: float = 5.0
    start_deg: float = 0.0
    stop_deg: float = 360.0
    radius: Optional[float] = None
    center: tuple = (0.0, 0.0, 0.0)
    kind = "azimuth_1d"

    def __post_init__(self):
        if self.spacing_deg <= 0:
            raise ValueError("azimuth spacing must be positive")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("azimuth grid radius must be positive")

    @property
    def plane_wave(self):
        return self.radius is None

    @cached_property
    def angles(self):
        n = int(np.ceil((self.stop_deg - self.start_deg) / self.spacing_deg - 1e-9))
        return self.start_deg + self.spacing_deg * np.arange(n)

    @cached_property
    def directions(self):
        a = np.deg2rad(self.angles)
        return np.column_stack([np.cos(a), np.sin(a), np.zeros_like(a)])

    @cached_property
    def points(self):
        if self.radius is None:
            return self.directions
        return np.asarray(self.center, dtype=float) + self.radius * self.directions

    def __len__(self):
        return len(self.angles)

    def coordinates(self, index):
        return float(self.angles[int(index)])

    def index_of(self, theta_deg):
        diff = (np.asarray(self.angles) - theta_deg + 180.0) % 360.0 - 180.0
        return int(np.argmin(np.abs(diff)))


@dataclass
class SrpMap:
    grid: object
    values: np.ndarray
    frame: Optional[int] = None
    n_zero_steering: int = 0

    def normalized(self):
        peak = np.max(self.values)
        values = self.values / peak if peak > 0 else np.ones_like(self.values)
        return SrpMap(self.grid, values, self.frame, self.n_zero_steering)


class Peak(NamedTuple):
    index: int
    point: object
    value: float


def thread_count():
    """Worker threads for map evaluation, from ``GSRP_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def requires_ncm(beamformer, weighting):
    """Whether a beamformer/weighting pair uses the noise covariance."""
    beamformer = BeamformerKind(beamformer)
    weighting = WeightingKind(weighting)
    if beamformer.needs_ncm:
        return True
    if weighting is WeightingKind.FLAT:
        return True
    if weighting is WeightingKind.FROB and beamformer is not BeamformerKind.NMF:
        return True
    if weighting is WeightingKind.SNR and beamformer is BeamformerKind.NMF:
        return True
    return False


def compute_map(scm, steering, beamformer, weighting="none", *, ncm=None, eps_reg=0.0,
                mask=None, grid=None, frame=None, chunk_elements=4_000_000):
    """Broadband SRP map ``sum_k mask(k) zeta^2(k) P(k, p)``.

    Parameters
    ----------
    scm : ndarray, shape (K, M, M)
        Signal covariance per bin.
    steering : ndarray, shape (K, P, M)
        Model steering vectors for the same bins.
    beamformer : BeamformerKind or str
    weighting : WeightingKind or str
        ``phat`` transforms the SCM (DS only); the others are scalar weights.
    ncm : ndarray, shape (K, M, M), optional
        Noise covariance. It is loaded with ``eps_reg * tr(scm)/M * I``
        before use. MP beamformers invert the SCM with the same loading.
    mask : ndarray, shape (K,), optional
        Per-bin 0/1 band mask.

    Returns
    -------
    SrpMap

    Raises
    ------
    ConfigError
        When the beamformer/weighting pair needs a noise covariance and none
        was given, or PHAT is combined with a non-DS beamformer.
    NumericalError
        Singular covariances or degenerate steering, annotated with the bin
        (and point) where it happened.
    """
    beamformer = BeamformerKind(beamformer)
    weighting = WeightingKind(weighting)
    scm = np.asarray(scm, dtype=complex)
    steering = np.asarray(steering)
    if steering.ndim != 3 or steering.shape[0] != scm.shape[0] or steering.shape[2] != scm.shape[-1]:
        raise ValueError(f"steering shape {steering.shape} inconsistent with SCM shape {scm.shape}")
    if weighting is WeightingKind.PHAT and beamformer is not BeamformerKind.DS:
        raise ConfigError("PHAT weighting is only available with the DS beamformer")

    bins = np.arange(scm.shape[0])
    weight = np.ones(scm.shape[0])
    if mask is not None:
        mask = np.asarray(mask, dtype=float)
        bins = np.flatnonzero(mask > 0)
        weight = mask[bins]
        scm = scm[bins]
        steering = steering[bins]
        if ncm is not None:
            ncm = np.asarray(ncm)[bins]
    n_points = steering.shape[1]
    if len(bins) == 0:
        return SrpMap(grid, np.zeros(n_points), frame)

    M = scm.shape[-1]
    if requires_ncm(beamformer, weighting) and ncm is None:
        raise ConfigError(f"{beamformer.value} with {weighting.value} weighting needs a noise covariance")

    try:
        sigma_y2 = signal_power(scm)
        ncm_eff = ncm_inv = scm_inv = None
        sigma_v2 = np.ones(len(bins))
        if ncm is not None:
            ncm_eff = regularize_ncm(ncm, sigma_y2, eps_reg)
            sigma_v2 = signal_power(ncm_eff)
            if beamformer.needs_ncm or weighting is WeightingKind.FLAT:
                ncm_inv = hermitian_inverse(ncm_eff)
        if beamformer.needs_scm_inverse:
            scm_inv = hermitian_inverse(regularize_ncm(scm, sigma_y2, eps_reg))
    except NotPositiveDefiniteError as exc:
        b = int(bins[exc.index[0]]) if exc.index else None
        raise NotPositiveDefiniteError(exc.pivot, exc.index,
                                       f"covariance not positive definite at bin {b} (pivot {exc.pivot})") from exc

    if weighting is WeightingKind.SNR:
        zeta2 = np.full(len(bins), zeta2_snr(M))
    elif weighting is WeightingKind.FLAT:
        zeta2 = zeta2_flat(ncm_inv, scm)
    elif weighting is WeightingKind.FROB:
        zeta2 = zeta2_frob(sigma_v2, scm)
    else:
        zeta2 = np.ones(len(bins))
    scm_used = phat_transform(scm) if weighting is WeightingKind.PHAT else scm

    per_chunk = max(1, chunk_elements // max(1, len(bins) * M))
    chunks = [slice(s, min(s + per_chunk, n_points)) for s in range(0, n_points, per_chunk)]

    def run(sl):
        try:
            psd, nz = narrowband_psd(beamformer, steering[:, sl], scm_used, ncm_inv=ncm_inv,
                                     scm_inv=scm_inv, sigma_v2=sigma_v2)
        except DegenerateSteeringError as exc:
            k, p = (exc.index + (None, None))[:2]
            raise DegenerateSteeringError(
                str(exc), bin=None if k is None else int(bins[k]),
                point=None if p is None else int(p + sl.start)) from exc
        return (weight * zeta2) @ psd, nz

    threads = thread_count()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(sl) for sl in chunks]
    values = np.concatenate([r[0] for r in results])
    n_zero = sum(r[1] for r in results)
    if not np.all(np.isfinite(values)):
        raise NumericalError("SRP map contains non-finite values")
    return SrpMap(grid, values, frame, n_zero)


def argmax(srp_map):
    """Grid point with the largest value; ties go to the lowest index."""
    values = np.asarray(srp_map.values, dtype=float)
    if values.size == 0:
        raise ValueError("empty SRP map")
    if np.all(np.isnan(values)):
        raise NumericalError("SRP map is all NaN")
    idx = int(np.nanargmax(values))
    point = srp_map.grid.coordinates(idx) if srp_map.grid is not None else idx
    return Peak(idx, point, float(values[idx]))


def average_maps(maps):
    """Point-wise mean of maps over the same grid."""
    maps = list(maps)
    if not maps:
        raise ValueError("no maps to average")
    values = np.mean([m.values for m in maps], axis=0)
    return SrpMap(maps[0].grid, values, None, sum(m.n_zero_steering for m in maps))
