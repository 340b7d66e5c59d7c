"""Built-in scenario A: the desk-scale two-transmitter geometry with a
straight blocker track crossing the surveillance beams.

Trials differ in their seeds and in a randomized track: the point where the
track crosses the RX-TX1 line, its heading, and how long after the last
sweep the crossing happens are drawn from fixed ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import TrackSpec, parse_scenario, default_scenario_document
from .waveform import Scenario

SPEED = 0.8
K_SWEEPS = 15
CROSSING_X = (1.2, 2.0)  # m along the RX-TX1 line
HEADING_DEG = (60.0, 75.0)  # direction the blocker comes from, from +x
CROSSING_AFTER = (0.2, 0.6)  # s after the last sweep start


@dataclass(frozen=True)
class Trial:
    scenario: Scenario
    track: TrackSpec
    crossing_x: float
    heading_deg: float
    crossing_after: float


def crossing_track(crossing_x: float, heading_deg: float, crossing_after: float,
                   sweep_period: float, K: int = K_SWEEPS, speed: float = SPEED) -> TrackSpec:
    """Straight track reaching ``[crossing_x, 0]`` ``crossing_after`` s after sweep K starts."""
    u = np.array([np.cos(np.radians(heading_deg)), np.sin(np.radians(heading_deg))])
    travel = speed * ((K - 1) * sweep_period + crossing_after)
    start = np.array([crossing_x, 0.0]) + travel * u
    return TrackSpec(tuple(start), tuple(-speed * u), K)


def scenario_a(trial: int = 0, base: Scenario | None = None) -> Trial:
    """Seeded scenario-A trial; ``trial`` picks both the track and the noise."""
    if base is None:
        base, _ = parse_scenario(default_scenario_document())
    rng = np.random.default_rng([20261019, trial])
    xc = rng.uniform(*CROSSING_X)
    beta = rng.uniform(*HEADING_DEG)
    tc = rng.uniform(*CROSSING_AFTER)
    sc = replace(base, noise_seed=1000 + trial, waveform_seed=2000 + trial)
    return Trial(sc, crossing_track(xc, beta, tc, sc.sweep_period), xc, beta, tc)
