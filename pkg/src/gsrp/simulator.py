"""Free-field multichannel scene synthesis.

A scene is a leading noise-only segment followed by a segment where one point
source is active. Propagation is applied in the frequency domain as an exact
(fractional) delay ``r_m / c`` and a ``g_m / (4 pi r_m)`` gain per
microphone. Noise is spatially white or colored per frequency with a target
cross-spectral matrix.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.io import wavfile

from .acoustic_models import ArrayGeometry, cardioid_gains
from .errors import ConfigError, NotPositiveDefiniteError
from .numerics import cholesky, hermitize

__all__ = [
    "SourceSpec",
    "NoiseSpec",
    "SceneSpec",
    "SceneOutput",
    "rng_streams",
    "source_signal",
    "render_source",
    "render_noise",
    "noise_gain_for_snr",
    "mix_at_snr",
    "simulate_scene",
    "render_stft_scene",
    "diffuse_ncm",
    "read_wav",
    "write_wav",
]


@dataclass
class SourceSpec:
    """Point source. ``signal`` is ``white_noise``, ``tone``, ``file`` or ``none``.

    ``directivity`` is ``None`` (omni), ``"cardioid"`` (gains from the mic
    orientations) or an explicit array of per-mic gains.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    signal: str = "white_noise"
    tone_hz: float = 1000.0
    path: Optional[str] = None
    directivity: object = None
    level: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.signal not in ("white_noise", "tone", "file", "none"):
            raise ConfigError(f"unknown source signal kind {self.signal!r}")
        if self.signal == "file" and not self.path:
            raise ConfigError("file source needs a path")


@dataclass
class NoiseSpec:
    """Additive noise. ``kind`` is ``none``, ``spatially_white`` or ``shaped``.

    For ``shaped`` noise, ``ncm`` maps an array of frequencies ``(F,)`` to
    target cross-spectral matrices ``(F, M, M)`` in per-sample units.
    ``snr_db=None`` leaves the noise unscaled.
    """

    kind: str = "spatially_white"
    snr_db: Optional[float] = 0.0
    ncm: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("none", "spatially_white", "shaped"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "shaped" and self.ncm is None:
            raise ConfigError("shaped noise needs a target NCM function")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite (use None for no scaling)")


@dataclass
class SceneSpec:
    geometry: ArrayGeometry
    source: SourceSpec = field(default_factory=SourceSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sample_rate: float = 16000.0
    noise_seconds: float = 1.0
    source_seconds: float = 2.0
    seed: int = 0
    r_min: float = 0.05

    def __post_init__(self):
        if self.noise_seconds < 0 or self.source_seconds <= 0:
            raise ConfigError("segment durations must be positive")

    @property
    def n_samples(self):
        return int(round((self.noise_seconds + self.source_seconds) * self.sample_rate))

    @property
    def source_start(self):
        return int(round(self.noise_seconds * self.sample_rate))


@dataclass
class SceneOutput:
    samples: np.ndarray
    sample_rate: float
    source_position: np.ndarray
    clean: np.ndarray
    noise_seconds: float
    closest_mic_snr_db: Optional[float] = None


def rng_streams(seed, n_channels):
    """Independent generators: one for the source, one per noise channel."""
    children = np.random.SeedSequence(seed).spawn(n_channels + 1)
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def read_wav(path):
    """Read a WAV file as float samples ``(n, channels)`` and its rate.

    Integer PCM is scaled to [-1, 1).
    """
    rate, data = wavfile.read(path)
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(float) / float(-np.iinfo(data.dtype).min)
    else:
        data = data.astype(float)
    if data.ndim == 1:
        data = data[:, None]
    return data, float(rate)


def write_wav(path, samples, sample_rate):
    """Write float32 multichannel WAV."""
    wavfile.write(path, int(round(sample_rate)), np.asarray(samples, dtype=np.float32))


def source_signal(spec, rng):
    """Dry source waveform for the active segment."""
    n = int(round(spec.source_seconds * spec.sample_rate))
    src = spec.source
    if src.signal == "white_noise":
        s = rng.standard_normal(n)
    elif src.signal == "tone":
        t = np.arange(n) / spec.sample_rate
        s = np.sqrt(2.0) * np.cos(2 * np.pi * src.tone_hz * t)
    elif src.signal == "file":
        data, rate = read_wav(src.path)
        if abs(rate - spec.sample_rate) > 1e-9:
            raise ConfigError(f"{src.path}: sample rate {rate} does not match scene rate {spec.sample_rate}")
        mono = data[:, 0]
        if mono.size == 0:
            raise ConfigError(f"{src.path}: empty audio file")
        s = np.resize(mono, n)
    else:
        s = np.zeros(n)
    return src.level * s


def _source_gains(spec):
    g = spec.source.directivity
    M = spec.geometry.n_mics
    if g is None:
        return np.ones(M)
    if isinstance(g, str):
        if g != "cardioid":
            raise ConfigError(f"unknown source directivity {g!r}")
        return cardioid_gains(spec.geometry, points=spec.source.position)[0]
    g = np.asarray(g, dtype=float)
    if g.shape != (M,):
        raise ConfigError("explicit directivity gains must have one value per microphone")
    return g


def render_source(spec, signal=None, rng=None):
    """Clean microphone signals ``(n_samples, M)``.

    The dry signal occupies the source segment; each channel is the
    frequency-domain delayed and attenuated copy. The FFT length is padded
    beyond the largest delay so that the circular shift does not wrap.
    """
    geom = spec.geometry
    r = geom.distances(spec.source.position)
    if np.min(r) < spec.r_min:
        raise ConfigError(f"source is within r_min={spec.r_min} m of microphone {int(np.argmin(r))}")
    if signal is None:
        if rng is None:
            rng, _ = rng_streams(spec.seed, geom.n_mics)
        signal = source_signal(spec, rng)
    n = spec.n_samples
    dry = np.zeros(n)
    start = spec.source_start
    dry[start:start + len(signal)] = signal[: n - start]
    delays = r / geom.speed_of_sound
    pad = int(np.ceil(np.max(delays) * spec.sample_rate)) + 512
    nfft = n + pad
    nfft += nfft % 2
    spectrum = np.fft.rfft(dry, nfft)
    f = np.fft.rfftfreq(nfft, 1.0 / spec.sample_rate)
    gains = _source_gains(spec) / (4.0 * np.pi * r)
    transfer = gains[None, :] * np.exp(-2j * np.pi * f[:, None] * delays[None, :])
    out = np.fft.irfft(spectrum[:, None] * transfer, nfft, axis=0)
    return out[:n]


def render_noise(spec, n_samples=None, rngs=None):
    """Noise ``(n_samples, M)`` with unit per-sample power per channel (white).

    Shaped noise is generated in the frequency domain: independent complex
    Gaussian spectra per channel are colored by the Cholesky factor of the
    target matrix at every FFT bin, so its cross-spectral matrix in
    per-sample units equals the target.
    """
    M = spec.geometry.n_mics
    n = spec.n_samples if n_samples is None else n_samples
    if rngs is None:
        _, rngs = rng_streams(spec.seed, M)
    if spec.noise.kind == "none":
        return np.zeros((n, M))
    if spec.noise.kind == "spatially_white":
        return np.column_stack([g.standard_normal(n) for g in rngs])
    nfft = n + n % 2
    f = np.fft.rfftfreq(nfft, 1.0 / spec.sample_rate)
    nb = len(f)
    z = np.empty((nb, M), dtype=complex)
    for m, g in enumerate(rngs):
        z[:, m] = (g.standard_normal(nb) + 1j * g.standard_normal(nb)) / np.sqrt(2.0)
    z[0] = z[0].real * np.sqrt(2.0)
    z[-1] = z[-1].real * np.sqrt(2.0)
    target = hermitize(np.asarray(spec.noise.ncm(f), dtype=complex))
    jitter = 1e-12 * np.maximum(np.trace(target, axis1=-2, axis2=-1).real / M, 1e-300)
    try:
        L = cholesky(target + jitter[:, None, None] * np.eye(M))
    except NotPositiveDefiniteError as exc:
        raise ConfigError(f"shaped-noise target is not positive definite near {f[exc.index[0]]:.1f} Hz") from exc
    spectrum = np.sqrt(nfft) * np.einsum("kij,kj->ki", L, z)
    return np.fft.irfft(spectrum, nfft, axis=0)[:n]


def noise_gain_for_snr(clean, noise, snr_db):
    """Amplitude factor for ``noise`` so that total power ratio equals ``snr_db``."""
    pc = float(np.sum(np.square(clean)))
    pn = float(np.sum(np.square(noise)))
    if pc <= 0 or pn <= 0:
        raise ValueError("clean and noise signals must have nonzero power")
    return np.sqrt(pc / (pn * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(clean, noise, snr_db):
    """``clean + g * noise`` with ``g`` set from the microphone-summed powers.

    ``snr_db=None`` returns the clean signal.
    """
    clean = np.asarray(clean, dtype=float)
    if snr_db is None:
        return clean.copy()
    return clean + noise_gain_for_snr(clean, noise, snr_db) * np.asarray(noise, dtype=float)


def simulate_scene(spec):
    """Render a full scene. The SNR is measured over the source segment."""
    src_rng, noise_rngs = rng_streams(spec.seed, spec.geometry.n_mics)
    clean = render_source(spec, rng=src_rng)
    noise = render_noise(spec, rngs=noise_rngs)
    start = spec.source_start
    closest = None
    if spec.noise.kind == "none":
        mixture = clean.copy()
    elif spec.noise.snr_db is None:
        mixture = clean + noise
    else:
        if not np.any(clean[start:]):
            raise ConfigError("SNR is undefined for a silent source; set the SNR to none")
        g = noise_gain_for_snr(clean[start:], noise[start:], spec.noise.snr_db)
        noise = g * noise
        mixture = clean + noise
    if spec.noise.kind != "none" and np.any(clean[start:]):
        m = int(np.argmin(spec.geometry.distances(spec.source.position)))
        pc = np.sum(clean[start:, m] ** 2)
        pn = np.sum(noise[start:, m] ** 2)
        closest = 10 * np.log10(pc / pn) if pn > 0 else None
    return SceneOutput(mixture, spec.sample_rate, spec.source.position.copy(), clean,
                       spec.noise_seconds, closest)


def render_stft_scene(source_tiles, steering):
    """Multichannel STFT tiles of a source filtered by a fixed transfer vector.

    ``source_tiles`` is ``(L, K)``, ``steering`` is ``(K, M)``; the result is
    ``(L, K, M)`` with every frame exactly ``s(k, l) * steering[k]``.
    """
    return np.asarray(source_tiles)[:, :, None] * np.asarray(steering)[None, :, :]


def diffuse_ncm(model_steering, spectrum=None, jitter=1e-9):
    """Cylindrically isotropic noise matrix from a ring of steering vectors.

    ``model_steering(freqs)`` returns ``(F, D, M)`` transfer vectors for ``D``
    evenly spaced directions. The matrix is the direction average of
    ``h h^H``, normalized to unit average diagonal, scaled by
    ``spectrum(freqs)`` and loaded with ``jitter`` on the diagonal.
    """

    def ncm(freqs):
        freqs = np.asarray(freqs, dtype=float)
        h = model_steering(freqs)
        phi = np.einsum("fdi,fdj->fij", h, np.conj(h)) / h.shape[1]
        M = phi.shape[-1]
        p = np.trace(phi, axis1=-2, axis2=-1).real / M
        phi = phi / np.maximum(p, 1e-300)[:, None, None] + jitter * np.eye(M)
        if spectrum is not None:
            phi = phi * np.asarray(spectrum(freqs), dtype=float)[:, None, None]
        return phi

    return ncm
