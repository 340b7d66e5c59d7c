"""Synthetic reference/surveillance dwells for a two-band passive receiver.

Every dwell gets its own band-limited pseudo-random baseband waveform. The
reference channel carries the line-of-sight copy; the surveillance channel
carries static clutter plus, when the surveillance beam points at the
blocker, a delayed and Doppler-shifted copy. All random draws come from
``numpy.random.SeedSequence`` keyed on ``(seed, band, sweep, beam)``, so any
dwell can be regenerated on its own and in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import AdoaPair

# Reference-beam leakage of the scattered signal, relative to the target path.
REF_LEAK_DB = -20.0

_STREAM_WAVEFORM = 0
_STREAM_NOISE_REF = 1
_STREAM_NOISE_SUR = 2
_STREAM_PHASE = 3


@dataclass(frozen=True)
class PathSpec:
    """One propagation path: complex amplitude and integer-sample delay."""

    gain: complex
    delay: int = 0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("path delay must be non-negative")


@dataclass(frozen=True)
class ClutterPath:
    """Static scatterer seen by the surveillance beam.

    ``band``/``beam`` of ``None`` apply the path to every band/beam. The power
    is given relative to the noise floor.
    """

    power_db: float
    delay_samples: int = 0
    phase_deg: float = 0.0
    band: int | None = None
    beam: int | None = None

    def applies(self, band: int, beam: int) -> bool:
        return (self.band is None or self.band == band) and (self.beam is None or self.beam == beam)


@dataclass
class Scenario:
    d_true: float
    adoa: AdoaPair
    carriers: tuple[float, float]
    baseband_bandwidth: float
    sample_period: float
    dwell: float
    beam_grid: tuple[float, ...]
    beamwidth: float
    snr_los_db: tuple[float, float] = (40.0, 40.0)
    snr_target_db: tuple[float, float] = (10.0, 10.0)
    clutter: list[ClutterPath] = field(default_factory=list)
    cfo: tuple[float, float] = (0.0, 0.0)
    ref_beam_target_leak: bool = False
    noise_seed: int = 0
    waveform_seed: int = 0
    max_speed: float = 3.0
    aoa_half_plane: int = 1
    noise_power: float = 1.0

    def __post_init__(self):
        self.carriers = tuple(float(c) for c in self.carriers)
        self.beam_grid = tuple(float(b) for b in self.beam_grid)
        self.snr_los_db = tuple(float(v) for v in self.snr_los_db)
        self.snr_target_db = tuple(float(v) for v in self.snr_target_db)
        self.cfo = tuple(float(v) for v in self.cfo)
        if len(self.beam_grid) < 1:
            raise ValueError("beam grid must hold at least one direction")
        if self.beamwidth <= 0:
            raise ValueError("beamwidth must be positive")
        if self.aoa_half_plane not in (1, -1):
            raise ValueError("aoa_half_plane must be +1 or -1")
        ratio = self.dwell / self.sample_period
        if abs(ratio - round(ratio)) > 1e-6 * ratio or round(ratio) < 16:
            raise ValueError("dwell / sample_period must be an integer >= 16")

    @property
    def n_samples(self) -> int:
        return int(round(self.dwell / self.sample_period))

    @property
    def Q(self) -> int:
        return len(self.beam_grid)

    @property
    def sweep_period(self) -> float:
        return self.Q * self.dwell

    @property
    def wavelengths(self) -> tuple[float, float]:
        return tuple(geometry.wavelength(c) for c in self.carriers)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.n_samples * self.sample_period)

    @property
    def tx_positions(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([self.d_true, 0.0]), geometry.tx2_position(self.adoa, self.d_true)

    def covering_beam(self, p) -> int | None:
        """0-based index of the beam that sees a blocker at ``p``, if any.

        Beams are ideal sectors of ``beamwidth`` on the ``aoa_half_plane`` side
        of the RX->TX1 axis; overlaps go to the nearest beam center.
        """
        p = np.asarray(p, dtype=float)
        if p[1] * self.aoa_half_plane < 0:
            return None
        angle = geometry.aoa(p)
        offsets = np.abs(np.asarray(self.beam_grid) - angle)
        q = int(np.argmin(offsets))
        return q if offsets[q] <= self.beamwidth / 2 else None


@dataclass
class TruthTrack:
    """Blocker position and velocity at the start of each sweep."""

    positions: np.ndarray
    velocities: np.ndarray
    sweep_period: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have the same length")

    @property
    def K(self) -> int:
        return len(self.positions)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K) * self.sweep_period

    @classmethod
    def straight(cls, start, velocity, K: int, sweep_period: float) -> "TruthTrack":
        start = np.asarray(start, dtype=float)
        velocity = np.asarray(velocity, dtype=float)
        t = np.arange(K) * sweep_period
        return cls(start + t[:, None] * velocity, np.tile(velocity, (K, 1)), sweep_period)


@dataclass
class DwellCapture:
    band: int
    sweep: int
    beam: int
    reference: np.ndarray
    surveillance: np.ndarray


@dataclass
class SweepCapture:
    sweep: int
    dwells: dict[tuple[int, int], DwellCapture]
    truth: tuple[np.ndarray, np.ndarray] | None = None

    def dwell(self, band: int, beam: int) -> DwellCapture:
        return self.dwells[(band, beam)]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def _shift(s: np.ndarray, delay: int) -> np.ndarray:
    """``s[n - delay]`` with zeros before the start."""
    if delay == 0:
        return s.copy()
    out = np.zeros_like(s)
    if delay < len(s):
        out[delay:] = s[: len(s) - delay]
    return out


def _noise(rng: np.random.Generator, n: int, power: float) -> np.ndarray:
    if power == 0:
        return np.zeros(n, dtype=np.complex128)
    return np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def make_baseband(seed, n_samples: int, bandwidth: float, sample_period: float) -> np.ndarray:
    """Unit-power complex noise confined to ``|f| <= bandwidth / 2``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if bandwidth > 1.0 / (2 * sample_period):
        raise ValueError(
            f"bandwidth {bandwidth:g} Hz exceeds half the sample rate {1 / (2 * sample_period):g} Hz"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    spec = rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
    spec[np.abs(np.fft.fftfreq(n_samples, sample_period)) > bandwidth / 2] = 0
    s = np.fft.ifft(spec)
    return s / np.sqrt(np.mean(np.abs(s) ** 2))


def _cfo_rotator(n: int, cfo_hz: float, sample_period: float) -> np.ndarray | None:
    if cfo_hz == 0:
        return None
    return np.exp(2j * np.pi * cfo_hz * sample_period * np.arange(n))


def synth_reference(
    s: np.ndarray,
    los: PathSpec,
    noise_power: float,
    seed,
    *,
    cfo_hz: float = 0.0,
    sample_period: float = 1.0,
    leak: tuple[PathSpec, float] | None = None,
) -> np.ndarray:
    """Reference-beam samples: delayed, scaled LoS copy plus noise.

    ``leak`` optionally adds a Doppler-shifted scattered copy picked up by the
    reference beam.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = los.gain * _shift(s, los.delay)
    if leak is not None:
        path, f_tar = leak
        n = np.arange(len(s))
        y = y + path.gain * _shift(s, path.delay) * np.exp(-2j * np.pi * f_tar * n * sample_period)
    rot = _cfo_rotator(len(s), cfo_hz, sample_period)
    if rot is not None:
        y = y * rot
    return y + _noise(rng, len(s), noise_power)


def synth_surveillance(
    s: np.ndarray,
    target: tuple[PathSpec, float] | None,
    clutter: list[PathSpec],
    noise_power: float,
    seed,
    *,
    sample_period: float,
    cfo_hz: float = 0.0,
) -> np.ndarray:
    """Surveillance-beam samples: Doppler-shifted target, static clutter, noise.

    The target Doppler ``f_tar`` enters as ``exp(-j 2 pi f_tar n T_s)`` and is
    held constant over the dwell.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = np.zeros(len(s), dtype=np.complex128)
    if target is not None:
        path, f_tar = target
        n = np.arange(len(s))
        y += path.gain * _shift(s, path.delay) * np.exp(-2j * np.pi * f_tar * n * sample_period)
    for path in clutter:
        y += path.gain * _shift(s, path.delay)
    rot = _cfo_rotator(len(s), cfo_hz, sample_period)
    if rot is not None:
        y *= rot
    return y + _noise(rng, len(s), noise_power)


def target_delay_samples(p, p_tx, sample_period: float) -> int:
    """Excess bistatic path of the blocker echo, rounded to whole samples."""
    p = np.asarray(p, dtype=float)
    p_tx = np.asarray(p_tx, dtype=float)
    excess = np.linalg.norm(p - p_tx) + np.linalg.norm(p) - np.linalg.norm(p_tx)
    return int(round(excess / geometry.SPEED_OF_LIGHT / sample_period))


def simulate_dwell(
    scenario: Scenario, track: TruthTrack, k: int, band: int, q: int
) -> DwellCapture:
    """One (band, beam) dwell of sweep ``k`` (1-based); ``q`` is 0-based."""
    sc = scenario
    n0 = sc.n_samples
    m = band - 1
    p_k = track.positions[k - 1]
    v_k = track.velocities[k - 1]
    tx = sc.tx_positions[m]

    s = make_baseband(_rng(sc.waveform_seed, _STREAM_WAVEFORM, band, k, q), n0,
                      sc.baseband_bandwidth, sc.sample_period)
    phase_rng = _rng(sc.waveform_seed, _STREAM_PHASE, band, k, q)
    los_phase, tar_phase = phase_rng.uniform(0, 2 * np.pi, size=2)
    amp_los = np.sqrt(sc.noise_power * 10 ** (sc.snr_los_db[m] / 10))
    amp_tar = np.sqrt(sc.noise_power * 10 ** (sc.snr_target_db[m] / 10))
    los = PathSpec(amp_los * np.exp(1j * los_phase), 0)

    target = None
    if sc.covering_beam(p_k) == q:
        t_mid = (q + 0.5) * sc.dwell
        p_mid = p_k + v_k * t_mid
        f_tar = geometry.bistatic_doppler(p_mid, v_k, tx, sc.wavelengths[m])
        delay = target_delay_samples(p_mid, tx, sc.sample_period)
        target = (PathSpec(amp_tar * np.exp(1j * tar_phase), delay), f_tar)

    clutter = [
        PathSpec(np.sqrt(sc.noise_power * 10 ** (c.power_db / 10)) * np.exp(1j * np.radians(c.phase_deg)),
                 c.delay_samples)
        for c in sc.clutter
        if c.applies(band, q + 1)
    ]

    leak = None
    if sc.ref_beam_target_leak and target is not None:
        path, f_tar = target
        leak = (PathSpec(path.gain * 10 ** (REF_LEAK_DB / 20), path.delay), f_tar)

    reference = synth_reference(
        s, los, sc.noise_power, _rng(sc.noise_seed, _STREAM_NOISE_REF, band, k, q),
        cfo_hz=sc.cfo[m], sample_period=sc.sample_period, leak=leak,
    )
    surveillance = synth_surveillance(
        s, target, clutter, sc.noise_power, _rng(sc.noise_seed, _STREAM_NOISE_SUR, band, k, q),
        sample_period=sc.sample_period, cfo_hz=sc.cfo[m],
    )
    return DwellCapture(band, k, q + 1, reference, surveillance)


def simulate_sweep(scenario: Scenario, track: TruthTrack, k: int) -> SweepCapture:
    """Full 2 x Q dwell grid of sweep ``k`` (1-based)."""
    if not 1 <= k <= track.K:
        raise IndexError(f"sweep {k} outside the truth track (1..{track.K})")
    dwells = {}
    for band in (1, 2):
        for q in range(scenario.Q):
            dwells[(band, q + 1)] = simulate_dwell(scenario, track, k, band, q)
    truth = (track.positions[k - 1].copy(), track.velocities[k - 1].copy())
    return SweepCapture(k, dwells, truth)
