from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple
import numpy as np
import scipy.linalg
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from rigidnet.exceptions import NonFinite, TooFewPoints

RANK_TOLERANCE = 1e-8
ZERO_MATRIX_TOLERANCE = 1e-12
DIVERGENCE_BOUND = 1e9
RNG_ALGORITHM = "PCG64"


@dataclass
class OdeSystem:
    """Autonomous or time dependent ODE x' = f(t, x) with an optional projection.

    Parameters
    ----------
    dimension: int
        Length of the state vector.
    rhs: callable
        f(t, x) -> dx/dt.
    project: callable, optional
        g(t, x) -> x applied after every accepted step. Used to pin anchor
        values and to wrap angles.
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    project: Optional[Callable[[float, np.ndarray], np.ndarray]] = None


@dataclass
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class FitResult:
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "r_squared": float(self.r_squared),
        }


def svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full singular value decomposition.

    Parameters
    ----------
    matrix: numpy.ndarray
        m x n real matrix.

    Returns
    -------
    u: numpy.ndarray
        m x m orthogonal matrix.
    sigma: numpy.ndarray
        min(m, n) singular values, descending.
    vt: numpy.ndarray
        n x n orthogonal matrix.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("Matrix has non-finite entries; cannot decompose.")
    if matrix.size == 0:
        rows, cols = matrix.shape
        return np.eye(rows), np.zeros(0), np.eye(cols)
    return scipy.linalg.svd(matrix, full_matrices=True)


def rank_threshold(sigma: np.ndarray, tau_rel: float = RANK_TOLERANCE) -> float:
    """Absolute singular value cutoff: tau_rel * sigma_max, or 1e-12 for a zero matrix."""
    sigma_max = float(np.max(sigma)) if len(sigma) > 0 else 0.0
    if sigma_max == 0.0:
        return ZERO_MATRIX_TOLERANCE
    return tau_rel * sigma_max


def rank_from_svd(sigma: np.ndarray, tau_rel: float = RANK_TOLERANCE) -> int:
    sigma = np.asarray(sigma, dtype=float)
    return int(np.sum(sigma > rank_threshold(sigma, tau_rel)))


def null_space_basis(matrix: np.ndarray, tau_rel: float = RANK_TOLERANCE) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical null space of a matrix."""
    matrix = np.asarray(matrix, dtype=float)
    _, sigma, vt = svd(matrix)
    rank = rank_from_svd(sigma, tau_rel)
    return vt[rank:].T.copy()


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spans of a and b."""
    return scipy.linalg.subspace_angles(np.asarray(a, float), np.asarray(b, float))


def rk4_step(system: OdeSystem, state: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = system.rhs(t, state)
    k2 = system.rhs(t + h / 2, state + 0.5 * h * k1)
    k3 = system.rhs(t + h / 2, state + 0.5 * h * k2)
    k4 = system.rhs(t + h, state + h * k3)
    return state + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_state(state: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(state)):
        raise NonFinite("State became non-finite at t = %.6g" % t)
    if np.max(np.abs(state), initial=0.0) > DIVERGENCE_BOUND:
        raise NonFinite(
            "State exceeded divergence bound %.1e at t = %.6g" % (DIVERGENCE_BOUND, t)
        )


def integrate(
    system: OdeSystem,
    state0: np.ndarray,
    t0: float,
    t1: float,
    h: float,
    stride: int = 1,
    observer: Optional[Callable[[float, np.ndarray], None]] = None,
) -> OdeTrajectory:
    """Fixed step RK4 integration from t0 to t1.

    Parameters
    ----------
    system: OdeSystem
        System to integrate. Its projection hook runs after every step.
    state0: numpy.ndarray
        Initial state; the projection hook is applied to it first.
    t0, t1: float
        Start and end time.
    h: float
        Step size. The number of steps is round((t1 - t0) / h).
    stride: int, optional
        Record every stride-th step. The initial and final states are always recorded.
    observer: callable, optional
        Called as observer(t, state) on every recorded sample.

    Returns
    -------
    trajectory: OdeTrajectory
        Recorded times and states (one row per sample).
    """
    if h <= 0:
        raise ValueError("Step size must be positive, got %g" % h)
    if stride < 1:
        raise ValueError("Sampling stride must be at least 1, got %d" % stride)
    n_steps = int(round((t1 - t0) / h))
    state = np.array(state0, dtype=float)
    if system.project is not None:
        state = system.project(t0, state)
    _check_state(state, t0)

    times: List[float] = [t0]
    states: List[np.ndarray] = [state.copy()]
    if observer is not None:
        observer(t0, state)
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * h
        state = rk4_step(system, state, t, h)
        t_next = t0 + step * h
        if system.project is not None:
            state = system.project(t_next, state)
        _check_state(state, t_next)
        if step % stride == 0 or step == n_steps:
            times.append(t_next)
            states.append(state.copy())
            if observer is not None:
                observer(t_next, state)
    return OdeTrajectory(times=np.array(times), states=np.array(states))


def linear_tail_fit(xs, ys, tail_fraction: float = 0.5) -> FitResult:
    """Least squares line through the last tail_fraction of the samples.

    Parameters
    ----------
    xs, ys: array-like
        Samples, in order.
    tail_fraction: float, optional
        Fraction of the samples (taken from the end) used in the fit. Default 0.5.

    Returns
    -------
    fit: FitResult
        Slope, intercept and coefficient of determination clipped to [0, 1].
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same shape")
    n_tail = int(np.ceil(len(xs) * tail_fraction))
    if n_tail < 3:
        raise TooFewPoints(
            "Need at least 3 tail points for a line fit, got %d" % n_tail
        )
    x_tail = xs[-n_tail:].reshape(-1, 1)
    y_tail = ys[-n_tail:]
    model = LinearRegression().fit(x_tail, y_tail)
    if np.ptp(y_tail) == 0.0:
        # a flat tail is fitted exactly by the horizontal line
        r_squared = 1.0
    else:
        r_squared = float(np.clip(r2_score(y_tail, model.predict(x_tail)), 0.0, 1.0))
    return FitResult(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r_squared=r_squared,
    )


def log_error_tail_fit(
    times, errors, tail_fraction: float = 0.5, floor: float = 1e-11
) -> FitResult:
    """Line fit of log(error) against time over the tail of a convergent run.

    Samples at or below floor (the machine precision plateau) are dropped before
    the tail is taken.
    """
    times = np.asarray(times, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > floor
    return linear_tail_fit(times[keep], np.log(errors[keep]), tail_fraction)


def seeded_rng(seed: int) -> np.random.Generator:
    """64-bit deterministic generator (PCG64) for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds, one per sample, derived from a parent seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
