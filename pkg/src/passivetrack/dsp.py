"""Passive-sensing front end: clutter cancellation, CAF, detection, features."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import block_products


class ClutterCancellationError(RuntimeError):
    pass


class SmoothingWarning(UserWarning):
    pass


@dataclass
class DetectorConfig:
    doppler_max: float = 1000.0
    decimation: int | None = None
    gamma: float = 3.0
    train_half_width: int = 16
    guard_halfwidth: int = 2
    clutter_taps: int = 64
    delay_search_max: int = 64

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if self.train_half_width < 1:
            raise ValueError("train_half_width must be >= 1")
        if self.decimation is not None and self.decimation < 1:
            raise ValueError("decimation must be >= 1")
        if self.clutter_taps < 1 or self.delay_search_max < 0:
            raise ValueError("clutter_taps must be >= 1 and delay_search_max >= 0")

    def decimation_for(self, n_samples: int, sample_period: float) -> int:
        """Decimation factor for a dwell of ``n_samples``.

        Without an explicit ``decimation``, picks the largest divisor of
        ``n_samples`` keeping the block duration at or below 1/(10 doppler_max).
        """
        if self.decimation is not None:
            r = self.decimation
        else:
            limit = max(1, int(1.0 / (10 * self.doppler_max * sample_period)))
            r = max(d for d in range(1, min(limit, n_samples) + 1) if n_samples % d == 0)
        if 1.0 / (r * sample_period) < 2 * self.doppler_max:
            raise ValueError(
                f"decimated rate {1 / (r * sample_period):g} Hz is below 2*doppler_max"
            )
        return r


@dataclass
class DopplerAngleMap:
    band: int
    sweep: int
    magnitudes: np.ndarray  # (Q, N_f)
    doppler_bins: np.ndarray  # (N_f,) Hz

    @property
    def resolution(self) -> float:
        return float(self.doppler_bins[1] - self.doppler_bins[0]) if len(self.doppler_bins) > 1 else np.inf


@dataclass(frozen=True)
class Detection:
    doppler: float
    beam: int  # 0-based row of the map
    magnitude: float


@dataclass
class FeatureVector:
    """Per-sweep measurement; invalid entries are NaN."""

    sweep: int
    t_start: float
    aoa: float = np.nan
    f1: float = np.nan
    f2: float = np.nan
    peak1: float = np.nan
    peak2: float = np.nan

    @property
    def aoa_valid(self) -> bool:
        return bool(np.isfinite(self.aoa))

    @property
    def f1_valid(self) -> bool:
        return bool(np.isfinite(self.f1))

    @property
    def f2_valid(self) -> bool:
        return bool(np.isfinite(self.f2))

    @property
    def valid(self) -> bool:
        return self.aoa_valid or self.f1_valid or self.f2_valid

    def as_row(self) -> np.ndarray:
        return np.array([self.aoa, self.f1, self.f2])


def clutter_cancel(surveillance, reference, taps: int) -> np.ndarray:
    """Project the surveillance signal off ``taps`` delayed reference copies.

    Column ``i`` of the regression matrix is ``reference[n - i]`` (zero-filled).
    The normal equations are assembled from lagged correlations, so the
    ``N x taps`` matrix is never formed.
    """
    y = np.asarray(surveillance, dtype=np.complex128)
    x = np.asarray(reference, dtype=np.complex128)
    n = len(y)
    if len(x) != n:
        raise ValueError("surveillance and reference lengths differ")
    if taps < 1 or taps >= n:
        raise ValueError("need 1 <= taps < N")
    energy = float(np.vdot(x, x).real)
    if not np.isfinite(energy) or energy == 0.0:
        raise ClutterCancellationError(
            "reference channel has zero energy; delayed-reference matrix is rank deficient"
        )

    # rhs[i] = sum_n conj(x[n-i]) y[n]
    rhs = block_products(y, x, taps - 1, n)[:, 0]
    # lag[l] = sum_m x[m+l] conj(x[m]) over the full overlap
    lag = block_products(x, x, taps - 1, n)[:, 0]
    # tails[i, l] = sum_{n=N-i}^{N-1} x[n] conj(x[n-l]); the part of lag[l]
    # that zero-filled column i no longer overlaps.
    end = x[n - taps:]
    tails = np.zeros((taps, taps), dtype=np.complex128)
    for l in range(taps):
        idx = np.arange(n - taps, n)
        valid = idx - l >= 0
        prod = np.zeros(taps, dtype=np.complex128)
        prod[valid] = end[valid] * np.conj(x[idx[valid] - l])
        # cumulative sum from the end: tails[i, l] sums the last i products
        tails[1:, l] = np.cumsum(prod[::-1])[: taps - 1]
    i, j = np.triu_indices(taps)
    gram = np.zeros((taps, taps), dtype=np.complex128)
    gram[i, j] = np.conj(lag[j - i] - tails[i, j - i])
    gram[j, i] = np.conj(gram[i, j])

    w, v = scipy.linalg.eigh(gram)
    keep = w > w[-1] * 1e-13
    coef = v[:, keep] @ ((v[:, keep].conj().T @ rhs) / w[keep])
    clutter = np.convolve(x, coef)[:n]
    return y - clutter


def doppler_grid(doppler_max: float, resolution: float) -> np.ndarray:
    half = int(np.floor(doppler_max / resolution + 1e-9))
    return np.arange(-half, half + 1) * resolution


def caf(surveillance, reference, cfg: DetectorConfig, sample_period: float,
        doppler_bins: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Cross-ambiguity magnitude over the Doppler grid, maximized over delay.

    The conjugate product at each trial delay is integrated over blocks of
    ``R`` samples, and a DFT over the block sums gives the Doppler response.
    The block integration's amplitude droop is divided out.

    Returns ``(doppler_bins, magnitudes)``.
    """
    y = np.asarray(surveillance, dtype=np.complex128)
    x = np.asarray(reference, dtype=np.complex128)
    n = len(y)
    if len(x) != n:
        raise ValueError("surveillance and reference lengths differ")
    resolution = 1.0 / (n * sample_period)
    f = doppler_grid(cfg.doppler_max, resolution) if doppler_bins is None else np.asarray(doppler_bins)
    r = cfg.decimation_for(n, sample_period)

    blocks = block_products(y, x, min(cfg.delay_search_max, n - 1), r)  # (delays, nb)
    nb = blocks.shape[1]
    t_block = np.arange(nb) * r * sample_period
    steer = np.exp(2j * np.pi * np.outer(f, t_block))  # (N_f, nb)
    spectra = np.abs(steer @ blocks.T)  # (N_f, delays)
    # block-sum response: |(1/R) sum_i exp(j 2 pi f i T_s)|
    phase = np.pi * f * sample_period
    with np.errstate(invalid="ignore", divide="ignore"):
        droop = np.abs(np.sin(r * phase) / (r * np.sin(phase)))
    droop[phase == 0] = 1.0
    return f, spectra.max(axis=1) / droop


def adaptive_threshold(row, cfg: DetectorConfig) -> np.ndarray:
    """Cell-averaging threshold: gamma times the local mean over +-W bins.

    Windows clipped at the edges average over the cells that exist.
    """
    row = np.asarray(row, dtype=float)
    w = cfg.train_half_width
    if len(row) < 2 * w + 1:
        raise ValueError(f"row of {len(row)} bins is shorter than the {2 * w + 1}-bin window")
    c = np.concatenate([[0.0], np.cumsum(row)])
    idx = np.arange(len(row))
    lo = np.maximum(idx - w, 0)
    hi = np.minimum(idx + w + 1, len(row))
    return cfg.gamma * (c[hi] - c[lo]) / (hi - lo)


def doppler_angle_map(dwells, cfg: DetectorConfig, sample_period: float,
                      band: int = 1, sweep: int = 0) -> DopplerAngleMap:
    """CAF rows for one band over all beam directions.

    ``dwells`` is a sequence of ``(reference, surveillance)`` pairs in beam order.
    """
    rows = []
    bins = None
    for ref, sur in dwells:
        cleaned = clutter_cancel(sur, ref, cfg.clutter_taps)
        bins, row = caf(cleaned, ref, cfg, sample_period)
        rows.append(row)
    return DopplerAngleMap(band, sweep, np.vstack(rows), bins)


def detect_band(dmap: DopplerAngleMap, cfg: DetectorConfig) -> Detection | None:
    """Strongest above-threshold cell outside the zero-Doppler guard, if any."""
    mags = dmap.magnitudes
    thresholds = np.vstack([adaptive_threshold(row, cfg) for row in mags])
    guard = cfg.guard_halfwidth * dmap.resolution
    passing = (mags >= thresholds) & (np.abs(dmap.doppler_bins) > guard + 1e-9 * dmap.resolution)
    if not passing.any():
        return None
    masked = np.where(passing, mags, -np.inf)
    q, i = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return Detection(float(dmap.doppler_bins[i]), int(q), float(mags[q, i]))


def fuse_bands(det1: Detection | None, det2: Detection | None, beam_grid,
               sweep: int = 0, t_start: float = 0.0) -> FeatureVector:
    """Merge the two band detections; AoA comes from the stronger peak."""
    fv = FeatureVector(sweep, t_start)
    if det1 is not None:
        fv.f1, fv.peak1 = det1.doppler, det1.magnitude
    if det2 is not None:
        fv.f2, fv.peak2 = det2.doppler, det2.magnitude
    best = max((d for d in (det1, det2) if d is not None), key=lambda d: d.magnitude, default=None)
    if best is not None:
        fv.aoa = float(beam_grid[best.beam])
    return fv


def smooth_aoa(features: list[FeatureVector], degree: int = 3) -> list[FeatureVector]:
    """Replace valid AoAs by a least-squares polynomial fit over time.

    With fewer than ``degree + 1`` valid AoAs the input is returned unchanged
    and a :class:`SmoothingWarning` is issued.
    """
    out = [FeatureVector(**vars(f)) for f in features]
    valid = [f for f in out if f.aoa_valid]
    if len(valid) < degree + 1:
        if valid:
            warnings.warn(
                f"{len(valid)} valid AoAs cannot support a degree-{degree} fit; left unsmoothed",
                SmoothingWarning,
                stacklevel=2,
            )
        return out
    t = np.array([f.t_start for f in valid])
    a = np.array([f.aoa for f in valid])
    fit = np.polynomial.Polynomial.fit(t, a, degree)
    for f, value in zip(valid, np.clip(fit(t), 0.0, 180.0)):
        f.aoa = float(value)
    return out


def process_sweep(capture, cfg: DetectorConfig, beam_grid, sample_period: float,
                  sweep_period: float) -> tuple[FeatureVector, list[DopplerAngleMap]]:
    """Feature vector and the two Doppler-angle maps of one sweep capture."""
    maps = []
    dets = []
    for band in (1, 2):
        pairs = [(capture.dwell(band, q + 1).reference, capture.dwell(band, q + 1).surveillance)
                 for q in range(len(beam_grid))]
        dmap = doppler_angle_map(pairs, cfg, sample_period, band=band, sweep=capture.sweep)
        maps.append(dmap)
        dets.append(detect_band(dmap, cfg))
    fv = fuse_bands(dets[0], dets[1], beam_grid, capture.sweep, (capture.sweep - 1) * sweep_period)
    return fv, maps
