"""Trajectory generation: adaptive 5(4) pair with dense output, fixed RK4.

The adaptive pair replaces the external reference solver used to produce
training data, keeping the repository self-contained and deterministic;
its quartic interpolant supplies equidistant samples at any grid size
without re-integrating.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import MismatchedGrids, NonFiniteState, StepUnderflow

Field = Callable[[np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order weights minus the embedded fourth-order ones
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output weights
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_UNDERFLOW = 1e-14


@dataclass(frozen=True)
class TrajectoryData:
    """Equidistant samples x_n at t_n = n*h, n = 0..N."""

    h: float
    N: int
    states: np.ndarray  # (N+1, d)
    origin: str = "synthetic"

    def __post_init__(self):
        if self.states.shape[0] != self.N + 1:
            raise ValueError("states must hold N+1 rows")

    @property
    def T(self) -> float:
        return self.h * self.N

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.N + 1)


@dataclass(frozen=True)
class MultiTrajectoryData:
    """A bundle of trajectories sharing h and N: states[n', n, :]."""

    h: float
    N: int
    states: np.ndarray  # (N', N+1, d)
    origin: str = "integrated"

    @property
    def n_trajectories(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def trajectory(self, i: int) -> TrajectoryData:
        return TrajectoryData(self.h, self.N, self.states[i], self.origin)


def stack_trajectories(trajectories: Sequence[TrajectoryData]) -> MultiTrajectoryData:
    h, N = trajectories[0].h, trajectories[0].N
    for t in trajectories[1:]:
        if t.N != N or abs(t.h - h) > 1e-12 * max(abs(h), 1.0):
            raise MismatchedGrids("trajectories disagree in h or N")
    return MultiTrajectoryData(h, N, np.stack([t.states for t in trajectories]))


class DenseTrajectory:
    """Accepted steps of one adaptive integration plus a quartic interpolant."""

    def __init__(self, times: np.ndarray, states: np.ndarray, rcont: np.ndarray):
        self.times = times
        self.states = states
        self._rcont = rcont  # (n_steps, 5, d)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def evaluate(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t_arr, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 2)
        h = self.times[idx + 1] - self.times[idx]
        theta = ((t_arr - self.times[idx]) / h)[:, None]
        r = self._rcont[idx]
        out = r[:, 0] + theta * (
            r[:, 1] + (1.0 - theta) * (r[:, 2] + theta * (r[:, 3] + (1.0 - theta) * r[:, 4]))
        )
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def _initial_step(f: Field, x0: np.ndarray, T: float, reltol: float, abstol: float) -> float:
    f0 = f(x0)
    scale = abstol + reltol * np.max(np.abs(x0))
    d0 = np.max(np.abs(x0)) / scale
    d1 = np.max(np.abs(f0)) / scale
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, T)
    f1 = f(x0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0)) / scale / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, T)


def integrate_adaptive(
    f: Field,
    x0,
    T: float,
    reltol: float = 1e-13,
    abstol: float = 1e-13,
) -> DenseTrajectory:
    """Integrate x' = f(x) over [0, T] with the embedded 5(4) pair.

    Error per step is held below abstol + reltol*||x||_inf with safety
    factor 0.9 and step ratios clamped to [0.2, 5].
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if not (0 < reltol <= 1e-2 and 0 < abstol <= 1e-2):
        raise ValueError("tolerances must lie in (0, 1e-2]")
    y = np.asarray(x0, dtype=float).copy()
    d = y.size
    t = 0.0
    k = np.empty((7, d))
    k[0] = f(y)
    h = _initial_step(f, y, T, reltol, abstol)

    times = [0.0]
    states = [y.copy()]
    rconts = []

    while t < T:
        h = min(h, T - t)
        if h < _UNDERFLOW * T:
            raise StepUnderflow(f"step {h:.3e} below floor at t={t:.6g}")
        for i in range(1, 7):
            k[i] = f(y + h * (_A[i - 1] @ k[:i]))
        y_new = y + h * (_B @ k)
        err = h * (_E @ k)
        scale = abstol + reltol * max(np.max(np.abs(y)), np.max(np.abs(y_new)))
        err_norm = np.max(np.abs(err)) / scale
        if err_norm <= 1.0:
            ydiff = y_new - y
            bspl = h * k[0] - ydiff
            rconts.append(
                np.stack([y, ydiff, bspl, ydiff - h * k[6] - bspl, h * (_D @ k)])
            )
            t += h
            y = y_new
            k[0] = k[6]  # FSAL
            times.append(t)
            states.append(y.copy())
            factor = _MAX_FACTOR if err_norm == 0.0 else _SAFETY * err_norm ** -0.2
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            h *= min(1.0, max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2))

    return DenseTrajectory(np.array(times), np.array(states), np.array(rconts))


def sample_equidistant(traj: DenseTrajectory, N: int) -> TrajectoryData:
    """States at t_n = n*T/N through the dense interpolant."""
    if N < 1:
        raise ValueError("N must be >= 1")
    T = traj.T
    ts = np.arange(N + 1) * (T / N)
    states = traj.evaluate(ts)
    return TrajectoryData(T / N, N, np.asarray(states), origin="integrated")


def integrate_fixed_rk4(f: Field, x0, T: float, steps: int) -> TrajectoryData:
    """Classical fourth-order method at a fixed step; cheap and deterministic."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    h = T / steps
    y = np.asarray(x0, dtype=float).copy()
    out = np.empty((steps + 1, y.size))
    out[0] = y
    for n in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"state became non-finite at step {n + 1}")
        out[n + 1] = y
    return TrajectoryData(h, steps, out, origin="integrated")


def write_trajectory_csv(path, data: TrajectoryData, comments: Sequence[str] = ()) -> None:
    """Trajectory CSV: n, t, x_1..x_d (also the ingestion format)."""
    d = data.dim
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "t"] + [f"x_{j + 1}" for j in range(d)])
        for n in range(data.N + 1):
            writer.writerow(
                [n, repr(float(n * data.h))] + [repr(float(v)) for v in data.states[n]]
            )


def read_trajectory_csv(path) -> TrajectoryData:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        if header[:2] != ["n", "t"]:
            raise ValueError("trajectory CSV must start with columns n, t")
        for row in reader:
            rows.append([float(v) for v in row[1:]])
    arr = np.array(rows)
    times, states = arr[:, 0], arr[:, 1:]
    N = len(times) - 1
    if N < 1:
        raise ValueError("trajectory CSV needs at least two samples")
    h = (times[-1] - times[0]) / N
    steps = np.diff(times)
    if np.max(np.abs(steps - h)) > 1e-9 * max(abs(h), 1.0):
        raise ValueError("trajectory samples are not equidistant")
    return TrajectoryData(float(h), N, states, origin="synthetic")
