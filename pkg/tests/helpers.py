"""Shared oracles and scenario builders for the test-suite."""

import numpy as np

from passivetrack import geometry
from passivetrack.config import default_scenario_document, parse_scenario
from passivetrack.waveform import PathSpec, make_baseband, synth_reference, synth_surveillance

TS = 1e-6
N0 = 50_000


def desk_scenario(**changes):
    from dataclasses import replace

    sc, spec = parse_scenario(default_scenario_document())
    return replace(sc, **changes), spec


def direct_caf(surveillance, reference, doppler_bins, delays, sample_period):
    """|sum_n y[n] conj(x[n - tau]) exp(j 2 pi f n T_s)| maximized over ``delays``.

    Plain per-delay matrix products: no decimation, no block sums.
    """
    y = np.asarray(surveillance, dtype=complex)
    x = np.asarray(reference, dtype=complex)
    n = np.arange(len(y))
    steer = np.exp(2j * np.pi * np.outer(doppler_bins, n) * sample_period)
    best = np.zeros(len(doppler_bins))
    for tau in delays:
        xs = np.zeros_like(x)
        xs[tau:] = x[: len(x) - tau]
        best = np.maximum(best, np.abs(steer @ (y * np.conj(xs))))
    return best


def target_dwell(f_tar, snr_db=10.0, los_db=40.0, delay=3, seed=0, clutter=(), cfo=0.0,
                 n=N0, ts=TS, noise_power=1.0):
    """One reference/surveillance pair with a target at ``f_tar`` Hz."""
    rng = np.random.default_rng(seed)
    s = make_baseband(rng, n, 5e5, ts)
    los = PathSpec(np.sqrt(10 ** (los_db / 10)) * np.exp(1j * rng.uniform(0, 2 * np.pi)), 0)
    target = None
    if f_tar is not None:
        target = (PathSpec(np.sqrt(10 ** (snr_db / 10)) * np.exp(1j * rng.uniform(0, 2 * np.pi)), delay), f_tar)
    ref = synth_reference(s, los, noise_power, rng, cfo_hz=cfo, sample_period=ts)
    sur = synth_surveillance(s, target, list(clutter), noise_power, rng, sample_period=ts, cfo_hz=cfo)
    return ref, sur


LAMBDAS = (geometry.wavelength(60.98e9), geometry.wavelength(60.985e9))
DESK_ADOA = geometry.adoa_from_positions([2.7, 0.0], [1.8, -1.4])
