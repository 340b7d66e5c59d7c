"""Line-of-sight blockage prediction by straight-line extrapolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RX = np.zeros(2)


class SingularGeometryError(ValueError):
    """The extrapolated path is parallel to the LoS segment."""


@dataclass
class PredictorConfig:
    window: int = 3

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass
class LinkPrediction:
    blocked: int
    time: float | None = None
    mu: float | None = None
    degenerate: bool = False


@dataclass
class BlockagePrediction:
    links: list[LinkPrediction]
    v_bar: np.ndarray
    p_last: np.ndarray


def _det(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def average_velocity(velocities, n: int) -> np.ndarray:
    """Mean of the last ``n`` velocity estimates."""
    V = np.asarray(velocities, dtype=float).reshape(-1, 2)
    if not 1 <= n <= len(V):
        raise ValueError(f"window {n} outside 1..{len(V)}")
    return V[-n:].mean(axis=0)


def blockage_time(p_hat, v_bar, p_tx) -> tuple[float, float]:
    """``(mu, t)`` with ``p_hat + v_bar t = mu p_tx``."""
    p_hat = np.asarray(p_hat, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    p_tx = np.asarray(p_tx, dtype=float)
    A = np.column_stack([p_tx, -v_bar])
    scale = np.linalg.norm(p_tx) * np.linalg.norm(v_bar)
    if scale == 0 or abs(np.linalg.det(A)) <= 1e-12 * scale:
        raise SingularGeometryError("velocity is parallel to the LoS direction")
    mu, t = np.linalg.solve(A, p_hat)
    return float(mu), float(t)


def predict_link(p_hat, v_bar, p_tx) -> LinkPrediction:
    p_hat = np.asarray(p_hat, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    p_tx = np.asarray(p_tx, dtype=float)
    if not np.any(v_bar):
        return LinkPrediction(0)
    sides = _det(v_bar, RX - p_hat) * _det(v_bar, p_tx - p_hat)
    try:
        mu, t = blockage_time(p_hat, v_bar, p_tx)
    except SingularGeometryError:
        return LinkPrediction(0, degenerate=True)
    # the determinant test alone also fires for a blocker moving away
    if sides < 0 and t >= 0 and 0 <= mu <= 1:
        return LinkPrediction(1, t, mu)
    return LinkPrediction(0)


def blockage_indicator(p_hat, v_bar, p_tx) -> int:
    return predict_link(p_hat, v_bar, p_tx).blocked


def predict(positions, velocities, tx_positions, cfg: PredictorConfig) -> BlockagePrediction:
    """Blockage outlook for every link, timed from the last estimated position."""
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    V = np.asarray(velocities, dtype=float).reshape(-1, 2)
    v_bar = average_velocity(V, cfg.window)
    links = [predict_link(P[-1], v_bar, tx) for tx in tx_positions]
    return BlockagePrediction(links, v_bar, P[-1].copy())
