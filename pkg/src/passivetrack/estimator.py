"""Joint estimate of the TX1 distance and the blocker trajectory.

The unknown vector is ``x = [d, p1x, p1y, v1x, v1y, ..., vKx, vKy]``. Measured
features are an array ``Z`` of shape (K, 3) holding (AoA deg, f1 Hz, f2 Hz)
per sweep, with NaN for entries that were not detected. The fit minimizes
the weighted squared feature mismatch with a projected Levenberg-Marquardt
loop started from several initial guesses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import AdoaPair, MotionParams, tx2_position, tx2_unit_position


class EstimationError(RuntimeError):
    pass


def default_weights(beamwidth_deg: float, doppler_resolution: float) -> tuple[float, float, float]:
    """Inverse-variance weights: one beamwidth of AoA, one Doppler bin."""
    sigma_aoa = np.radians(beamwidth_deg)
    return (1.0 / sigma_aoa**2, 1.0 / doppler_resolution**2, 1.0 / doppler_resolution**2)


@dataclass
class EstimatorConfig:
    weights: tuple[float, float, float] = (1.0 / np.radians(10.0) ** 2, 1.0 / 400.0, 1.0 / 400.0)
    starts: int = 16
    max_iters: int = 200
    damping_init: float = 1e-3
    step_tol: float = 1e-10
    objective_tol: float = 1e-12
    d_bounds: tuple[float, float] = (0.5, 10.0)
    speed_bound: float = 3.0
    seed: int = 0
    init_range: tuple[float, float] = (0.5, 5.0)
    aoa_half_plane: int = 1
    # weight on squared sweep-to-sweep velocity changes, 1/(m/s)^2; 0 disables
    velocity_smoothness: float = 300.0

    def __post_init__(self):
        self.weights = tuple(float(w) for w in self.weights)
        self.d_bounds = tuple(float(b) for b in self.d_bounds)
        self.init_range = tuple(float(b) for b in self.init_range)
        if len(self.weights) != 3 or min(self.weights) <= 0:
            raise ValueError("three positive weights are required")
        if not 0 < self.d_bounds[0] < self.d_bounds[1]:
            raise ValueError("d_bounds must satisfy 0 < lo < hi")
        if self.starts < 1 or self.max_iters < 1:
            raise ValueError("starts and max_iters must be >= 1")
        if self.aoa_half_plane not in (1, -1):
            raise ValueError("aoa_half_plane must be +1 or -1")
        if self.velocity_smoothness < 0:
            raise ValueError("velocity_smoothness must be >= 0")


@dataclass
class LMResult:
    params: MotionParams
    objective: float
    converged: bool
    iterations: int
    history: list[float] = field(default_factory=list)


@dataclass
class Estimate:
    params: MotionParams
    objective: float
    per_start_objectives: list[float]
    converged: bool
    tx2: np.ndarray
    first_sweep: int = 1

    @property
    def K(self) -> int:
        return self.params.K


def feature_matrix(features) -> np.ndarray:
    """Stack FeatureVector objects (or rows) into a (K, 3) array."""
    rows = [f.as_row() if hasattr(f, "as_row") else f for f in features]
    return np.asarray(rows, dtype=float).reshape(-1, 3)


class TrackingProblem:
    """Weighted residuals and their Jacobian for a fixed set of measurements."""

    def __init__(self, Z, adoa: AdoaPair, wavelengths, T_d: float, weights, offsets=None,
                 smoothness: float = 0.0):
        self.Z = np.asarray(Z, dtype=float).reshape(-1, 3)
        # time into sweep k at which its Doppler was observed; AoA refers to the sweep start
        self.offsets = np.zeros(len(self.Z)) if offsets is None else np.asarray(offsets, dtype=float)
        self.adoa = adoa
        self.lam = np.asarray(wavelengths, dtype=float)
        self.T_d = float(T_d)
        self.sqrt_w = np.sqrt(np.asarray(weights, dtype=float))
        self.mask = np.isfinite(self.Z)
        self.K = len(self.Z)
        if self.mask.any(axis=1).sum() < 3:
            raise EstimationError(
                f"{int(self.mask.any(axis=1).sum())} valid sweeps; at least 3 are needed"
            )
        self.tx2_unit = tx2_unit_position(adoa)
        self.sqrt_s = np.sqrt(float(smoothness))
        # measured AoA in radians, Doppler in Hz
        self.z = np.where(self.mask, self.Z, 0.0)
        self.z[:, 0] = np.radians(self.z[:, 0])

    @property
    def n_params(self) -> int:
        return 3 + 2 * self.K

    def _unpack(self, x):
        """``(d, P, V, P_dop)``: sweep-start positions and Doppler observation points."""
        x = np.asarray(x, dtype=float)
        d = x[0]
        p1 = x[1:3]
        V = x[3:].reshape(self.K, 2)
        P = np.vstack([p1, p1 + np.cumsum(V[:-1], axis=0) * self.T_d])
        return d, P, V, P + self.offsets[:, None] * V

    def features(self, x) -> np.ndarray:
        """Model features with AoA in radians, shape (K, 3)."""
        d, P, V, Pd = self._unpack(x)
        txs = (np.array([d, 0.0]), d * self.tx2_unit)
        r = np.hypot(Pd[:, 0], Pd[:, 1])
        if np.any(r == 0) or np.any(np.hypot(P[:, 0], P[:, 1]) == 0):
            raise ValueError("blocker at the receiver")
        h = np.empty((self.K, 3))
        h[:, 0] = np.arctan2(np.abs(P[:, 1]), P[:, 0])
        u_rx = Pd / r[:, None]
        for m, tx in enumerate(txs):
            dp = Pd - tx
            rt = np.hypot(dp[:, 0], dp[:, 1])
            if np.any(rt == 0):
                raise ValueError("blocker at a transmitter")
            h[:, 1 + m] = np.sum((dp / rt[:, None] + u_rx) * V, axis=1) / self.lam[m]
        return h

    def residuals(self, x) -> np.ndarray:
        h = self.features(x)
        r = ((self.z - h) * self.sqrt_w)[self.mask]
        if self.sqrt_s:
            V = np.asarray(x, dtype=float)[3:].reshape(self.K, 2)
            r = np.concatenate([r, self.sqrt_s * np.diff(V, axis=0).ravel()])
        return r

    def objective(self, x) -> float:
        r = self.residuals(x)
        return float(r @ r)

    def jacobian(self, x) -> np.ndarray:
        """d(residuals)/dx, analytic. Row order matches :meth:`residuals`."""
        d, P, V, Pd = self._unpack(x)
        K = self.K
        r2 = P[:, 0] ** 2 + P[:, 1] ** 2
        # dh/dp (K, 3, 2) at each row's observation point, and dh/dd (K, 3)
        dh_dp = np.zeros((K, 3, 2))
        dh_dd = np.zeros((K, 3))
        g = np.zeros((K, 3, 2))  # dh/dv_k for the same sweep (Doppler rows)
        dh_dp[:, 0, 0] = -np.abs(P[:, 1]) / r2
        dh_dp[:, 0, 1] = np.sign(P[:, 1]) * P[:, 0] / r2

        def proj(u, w):
            # (I - u u^T) w, row-wise
            return w - u * np.sum(u * w, axis=1, keepdims=True)

        r = np.hypot(Pd[:, 0], Pd[:, 1])
        u_rx = Pd / r[:, None]
        txs = (np.array([d, 0.0]), d * self.tx2_unit)
        dtx_dd = (np.array([1.0, 0.0]), self.tx2_unit)
        for m in range(2):
            dp = Pd - txs[m]
            rt = np.hypot(dp[:, 0], dp[:, 1])
            u_tx = dp / rt[:, None]
            a = proj(u_tx, V) / rt[:, None]
            dh_dp[:, 1 + m] = (a + proj(u_rx, V) / r[:, None]) / self.lam[m]
            dh_dd[:, 1 + m] = -(a @ dtx_dd[m]) / self.lam[m]
            g[:, 1 + m] = (u_tx + u_rx) / self.lam[m] + self.offsets[:, None] * dh_dp[:, 1 + m]

        J = np.zeros((K, 3, self.n_params))
        J[:, :, 0] = dh_dd
        J[:, :, 1:3] = dh_dp
        # p_k depends on v_n for n < k through T_d
        earlier = np.tril(np.ones((K, K)), -1) * self.T_d  # [k, n]
        Jv = earlier[:, None, :, None] * dh_dp[:, :, None, :]  # (K, 3, K, 2)
        idx = np.arange(K)
        Jv[idx, :, idx, :] += g
        J[:, :, 3:] = Jv.reshape(K, 3, 2 * K)
        J *= -self.sqrt_w[None, :, None]
        J = J[self.mask]
        if self.sqrt_s:
            D = np.zeros((2 * (K - 1), self.n_params))
            rows = np.arange(2 * (K - 1))
            D[rows, 3 + rows] = -self.sqrt_s
            D[rows, 5 + rows] = self.sqrt_s
            J = np.vstack([J, D])
        return J


def _project(x, cfg: EstimatorConfig) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[0] = np.clip(x[0], *cfg.d_bounds)
    V = x[3:].reshape(-1, 2)
    speed = np.hypot(V[:, 0], V[:, 1])
    too_fast = speed > cfg.speed_bound
    V[too_fast] *= (cfg.speed_bound / speed[too_fast])[:, None]
    x[3:] = V.ravel()
    return x


def _safe_objective(problem: TrackingProblem, x) -> float:
    try:
        value = problem.objective(x)
    except ValueError:
        return np.inf
    return value if np.isfinite(value) else np.inf


def lm_fit(init: MotionParams, problem: TrackingProblem, cfg: EstimatorConfig) -> LMResult:
    """Projected Levenberg-Marquardt from ``init``.

    Solves ``(J^T J + lam I) delta = -J^T r`` each iteration; a step is kept
    only if the objective (after clamping to the bounds) drops, otherwise the
    damping grows tenfold. ``lam`` starts at ``damping_init`` times the mean
    diagonal of ``J^T J`` at ``init``, so rescaling all weights leaves the
    iterates unchanged.
    """
    x = _project(init.to_vector(), cfg)
    if len(x) != problem.n_params:
        raise ValueError("initial guess does not match the number of sweeps")
    f = _safe_objective(problem, x)
    if not np.isfinite(f):
        raise EstimationError("objective is undefined at the initial guess")
    J0 = problem.jacobian(x)
    scale = float(np.mean(np.sum(J0 * J0, axis=0))) or 1.0
    lam = cfg.damping_init * scale
    lam_min = 1e-12 * scale
    history = [f]
    eye = np.eye(len(x))
    converged = False
    it = 0
    while it < cfg.max_iters and not converged:
        it += 1
        if f <= cfg.objective_tol**2:
            converged = True
            break
        r = problem.residuals(x)
        J = problem.jacobian(x)
        grad = J.T @ r
        JtJ = J.T @ J
        while True:
            try:
                delta = np.linalg.solve(JtJ + lam * eye, -grad)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                x_new = _project(x + delta, cfg)
                step = np.linalg.norm(x_new - x)
                f_new = _safe_objective(problem, x_new)
                if f_new < f:
                    converged = (step <= cfg.step_tol * (np.linalg.norm(x) + cfg.step_tol)
                                 or f - f_new <= cfg.objective_tol * f)
                    x, f = x_new, f_new
                    history.append(f)
                    lam = max(lam / 10, lam_min)
                    break
                if step <= cfg.step_tol * (np.linalg.norm(x) + cfg.step_tol):
                    # no descent left at this resolution: a stationary point
                    converged = True
                    break
            lam *= 10
            if lam > 1e16 * scale:
                return LMResult(MotionParams.from_vector(x), f, False, it, history)
    return LMResult(MotionParams.from_vector(x), f, converged, it, history)


def _doppler_velocity(p, d, adoa, wavelengths, f1, f2) -> np.ndarray:
    """Velocity reproducing both Doppler readings at position ``p``, or zero."""
    if not (np.isfinite(f1) and np.isfinite(f2)):
        return np.zeros(2)
    A = np.empty((2, 2))
    for m, tx in enumerate((np.array([d, 0.0]), tx2_position(adoa, d))):
        dp = p - tx
        A[m] = (dp / np.hypot(*dp) + p / np.hypot(*p)) / wavelengths[m]
    if np.linalg.cond(A) > 1e6:
        return np.zeros(2)
    return np.linalg.solve(A, [f1, f2])


def init_candidates(Z, adoa: AdoaPair, wavelengths, cfg: EstimatorConfig) -> list[MotionParams]:
    """Stratified initial guesses.

    ``d`` and the range of p1 along the first measured AoA ray are drawn from
    a jittered grid; every velocity starts at the constant value that explains
    the first sweep's Doppler pair.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, 3)
    K = len(Z)
    if not np.isfinite(Z).any():
        raise EstimationError("no valid features to initialize from")
    rng = np.random.default_rng(cfg.seed)
    aoa_rows = np.flatnonzero(np.isfinite(Z[:, 0]))
    phi = np.radians(Z[aoa_rows[0], 0]) if len(aoa_rows) else np.pi / 4
    f1, f2 = Z[0, 1], Z[0, 2]

    S = cfg.starts
    n_d = int(np.ceil(np.sqrt(S)))
    n_r = int(np.ceil(S / n_d))
    lo, hi = cfg.d_bounds
    r_lo, r_hi = cfg.init_range
    cands = []
    for s in range(S):
        i, j = divmod(s, n_r)
        d0 = lo + (hi - lo) * (i % n_d + rng.uniform()) / n_d
        r0 = r_lo + (r_hi - r_lo) * (j + rng.uniform()) / n_r
        p1 = r0 * np.array([np.cos(phi), cfg.aoa_half_plane * np.sin(phi)])
        v0 = _doppler_velocity(p1, d0, adoa, wavelengths, f1, f2)
        x = _project(np.concatenate([[d0], p1, np.tile(v0, K)]), cfg)
        cands.append(MotionParams.from_vector(x))
    return cands


def valid_span(Z) -> tuple[int, int]:
    """First and one-past-last rows holding any valid feature."""
    rows = np.flatnonzero(np.isfinite(np.asarray(Z, dtype=float)).any(axis=1))
    if len(rows) == 0:
        raise EstimationError("no valid features")
    return int(rows[0]), int(rows[-1]) + 1


def estimate(Z, adoa: AdoaPair, wavelengths, T_d: float, cfg: EstimatorConfig,
             offsets=None) -> Estimate:
    """Multi-start fit over the span of sweeps that carry measurements.

    Leading and trailing sweeps without any detection are dropped; the
    returned ``first_sweep`` is the 1-based index of the sweep that ``p1``
    refers to. ``offsets`` (seconds, one per sweep) shift each sweep's
    observation instant past the sweep start, e.g. to the middle of the
    dwell that produced the detection.
    """
    Z = feature_matrix(Z) if not isinstance(Z, np.ndarray) else Z.reshape(-1, 3)
    start, stop = valid_span(Z)
    Zw = Z[start:stop]
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)[start:stop]
    problem = TrackingProblem(Zw, adoa, wavelengths, T_d, cfg.weights, offsets,
                              cfg.velocity_smoothness)
    results = []
    for cand in init_candidates(Zw, adoa, wavelengths, cfg):
        try:
            results.append(lm_fit(cand, problem, cfg))
        except EstimationError:
            results.append(None)
    objectives = [r.objective if r is not None else np.inf for r in results]
    if not np.isfinite(objectives).any():
        raise EstimationError(f"all {len(results)} starts failed")
    best = results[int(np.argmin(objectives))]
    return Estimate(
        params=best.params,
        objective=best.objective,
        per_start_objectives=objectives,
        converged=best.converged,
        tx2=tx2_position(adoa, best.params.d),
        first_sweep=start + 1,
    )
