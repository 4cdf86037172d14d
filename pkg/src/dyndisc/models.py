"""Benchmark systems with ground-truth fields and data generation.

Fields act on the last axis, so one evaluator serves single points and
whole sample batches.  The trig system samples its closed-form state
directly (exact data); every other model integrates at tight tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .exceptions import DomainError
from .integrate import (
    DenseTrajectory,
    MultiTrajectoryData,
    TrajectoryData,
    integrate_adaptive,
    sample_equidistant,
    stack_trajectories,
)

REFERENCE_RELTOL = 1e-13
REFERENCE_ABSTOL = 1e-13

GLYCOLYTIC_PARAMS: dict[str, float] = {
    "J0": 2.5,
    "k1": 100.0,
    "k2": 6.0,
    "k3": 16.0,
    "k4": 100.0,
    "k5": 1.28,
    "k6": 12.0,
    "K1": 0.52,
    "q": 4.0,
    "N": 1.0,
    "A": 4.0,
    "kappa": 13.0,
    "psi": 0.1,
    "k": 1.8,
}


@dataclass(frozen=True)
class DynamicalModel:
    name: str
    dim: int
    field: Callable[[np.ndarray], np.ndarray]
    default_T: float
    default_x0: np.ndarray
    analytic_state: Optional[Callable[[float], np.ndarray]] = None
    params: Mapping[str, float] = dc_field(default_factory=dict)


@dataclass(frozen=True)
class RegionSpec:
    """A segment of initial points and the time horizon of the swept region."""

    start: np.ndarray
    end: np.ndarray
    n_trajectories: int
    T: float

    def __post_init__(self):
        if self.n_trajectories < 2:
            raise ValueError("need at least the two boundary trajectories")
        if np.allclose(self.start, self.end):
            raise ValueError("segment endpoints must be distinct")

    def initial_points(self, n: Optional[int] = None) -> np.ndarray:
        n = self.n_trajectories if n is None else n
        frac = np.linspace(0.0, 1.0, n)[:, None]
        return (1.0 - frac) * self.start[None, :] + frac * self.end[None, :]

    def point_at(self, frac) -> np.ndarray:
        frac = np.asarray(frac, dtype=float)[..., None]
        return (1.0 - frac) * self.start + frac * self.end


def trig_model() -> DynamicalModel:
    def field(x):
        x = np.asarray(x, dtype=float)
        x2 = x[..., 1]
        if np.any(x2 == 0.0):
            raise DomainError("third component field 1/x_2^2 undefined at x_2 = 0")
        return np.stack([x2, -x[..., 0], 1.0 / x2**2], axis=-1)

    def state(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.sin(t), np.cos(t), np.tan(t)], axis=-1)

    return DynamicalModel(
        name="trig",
        dim=3,
        field=field,
        default_T=1.0,
        default_x0=np.array([0.0, 1.0, 0.0]),
        analytic_state=state,
    )


def lorenz_model() -> DynamicalModel:
    def field(x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [10.0 * (x2 - x1), x1 * (28.0 - x3) - x2, x1 * x2 - 8.0 * x3 / 3.0],
            axis=-1,
        )

    return DynamicalModel(
        name="lorenz",
        dim=3,
        field=field,
        default_T=25.0,
        default_x0=np.array([-8.0, 7.0, 27.0]),
    )


def glycolytic_model(overrides: Optional[Mapping[str, float]] = None) -> DynamicalModel:
    p = dict(GLYCOLYTIC_PARAMS)
    if overrides:
        unknown = set(overrides) - set(p)
        if unknown:
            raise ValueError(f"unknown glycolytic parameters: {sorted(unknown)}")
        p.update(overrides)

    def field(x):
        x = np.asarray(x, dtype=float)
        s1, s2, s3, s4, s5, s6, s7 = (x[..., i] for i in range(7))
        hill = 1.0 + (s6 / p["K1"]) ** p["q"]
        if np.any(hill == 0.0):
            raise DomainError("glycolytic Hill denominator vanished")
        v1 = p["k1"] * s1 * s6 / hill
        v2 = p["k2"] * s2 * (p["N"] - s5)
        v3 = p["k3"] * s3 * (p["A"] - s6)
        v4 = p["k4"] * s4 * s5
        v6 = p["k6"] * s2 * s5
        exch = p["kappa"] * (s4 - s7)
        return np.stack(
            [
                p["J0"] - v1,
                2.0 * v1 - v2 - v6,
                v2 - v3,
                v3 - v4 - exch,
                v2 - v4 - v6,
                -2.0 * v1 + 2.0 * v3 - p["k5"] * s6,
                p["psi"] * exch - p["k"] * s7,
            ],
            axis=-1,
        )

    return DynamicalModel(
        name="glycolytic",
        dim=7,
        field=field,
        default_T=10.0,
        default_x0=np.array([1.125, 0.95, 0.075, 0.16, 0.265, 0.7, 0.092]),
        params=p,
    )


def planar_model() -> DynamicalModel:
    def field(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([2.0 * x1 * x2, x1 + x2], axis=-1)

    return DynamicalModel(
        name="planar",
        dim=2,
        field=field,
        default_T=1.0,
        default_x0=np.array([-0.5, 0.75]),
    )


def default_region_spec(n_trajectories: int = 10, T: float = 1.0) -> RegionSpec:
    return RegionSpec(
        start=np.array([-0.5, 0.5]),
        end=np.array([-0.5, 1.0]),
        n_trajectories=n_trajectories,
        T=T,
    )


def network_governed_model(nets: Sequence, x0=None, T: float = 1.0) -> DynamicalModel:
    """System whose right-hand side is a tuple of trained scalar networks."""
    from .fnn import forward_batch

    nets = list(nets)
    d = len(nets)

    def field(x):
        x = np.asarray(x, dtype=float)
        batch = np.atleast_2d(x)
        out = np.stack([forward_batch(net, batch) for net in nets], axis=-1)
        return out[0] if x.ndim == 1 else out.reshape(x.shape[:-1] + (d,))

    return DynamicalModel(
        name="network_governed",
        dim=d,
        field=field,
        default_T=T,
        default_x0=np.array([0.0, 1.0, 0.0]) if x0 is None else np.asarray(x0, float),
    )


_REGISTRY: dict[str, Callable[[], DynamicalModel]] = {
    "trig": trig_model,
    "lorenz": lorenz_model,
    "glycolytic": glycolytic_model,
    "planar": planar_model,
}


def model_names() -> list[str]:
    return sorted(_REGISTRY)


def get_model(name: str, params: Optional[Mapping[str, float]] = None) -> DynamicalModel:
    if name not in _REGISTRY:
        raise ValueError(f"unknown model {name!r}; available: {model_names()}")
    if name == "glycolytic":
        return glycolytic_model(params)
    model = _REGISTRY[name]()
    if params:
        raise ValueError(f"model {name!r} takes no parameters")
    return model


def reference_trajectory(model: DynamicalModel, T: Optional[float] = None, x0=None) -> DenseTrajectory:
    T = model.default_T if T is None else T
    x0 = model.default_x0 if x0 is None else np.asarray(x0, dtype=float)
    return integrate_adaptive(model.field, x0, T, REFERENCE_RELTOL, REFERENCE_ABSTOL)


def sample_model(
    model: DynamicalModel,
    N: int,
    T: Optional[float] = None,
    x0=None,
    force_integration: bool = False,
) -> TrajectoryData:
    """Equidistant samples; analytic when the model has a closed-form state.

    Analytic sampling is only valid from the model's own initial point.
    """
    T = model.default_T if T is None else T
    use_analytic = (
        model.analytic_state is not None
        and not force_integration
        and (x0 is None or np.allclose(x0, model.default_x0))
    )
    if use_analytic:
        ts = np.arange(N + 1) * (T / N)
        states = np.asarray(model.analytic_state(ts), dtype=float)
        return TrajectoryData(T / N, N, states, origin="analytic")
    dense = reference_trajectory(model, T, x0)
    return sample_equidistant(dense, N)


def region_dataset(model: DynamicalModel, spec: RegionSpec, N: int) -> MultiTrajectoryData:
    """Trajectories from equidistant initial points on the segment, sampled N+1 times."""
    if model.dim != spec.start.size:
        raise ValueError("segment dimension does not match the model")
    trajectories = [
        sample_equidistant(integrate_adaptive(model.field, p, spec.T, REFERENCE_RELTOL, REFERENCE_ABSTOL), N)
        for p in spec.initial_points()
    ]
    return stack_trajectories(trajectories)


class RegionSampler:
    """Uniform sampler in the (segment-parameter, time) chart of the region.

    Both integrals of a relative region error use the same draw, so the
    chart's area distortion cancels out of the reported ratio.  Several
    time draws share one integrated trajectory (the pairs stay uniform in
    the chart; only the Monte Carlo clustering changes), which keeps the
    integration count at n_samples / times_per_trajectory.
    """

    def __init__(
        self,
        model: DynamicalModel,
        spec: RegionSpec,
        times_per_trajectory: int = 8,
        reltol: float = 1e-10,
        abstol: float = 1e-10,
    ):
        self.model = model
        self.spec = spec
        self.times_per_trajectory = times_per_trajectory
        self.reltol = reltol
        self.abstol = abstol

    def sample(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        m = self.times_per_trajectory
        n_traj = -(-n_samples // m)
        fracs = rng.uniform(0.0, 1.0, size=n_traj)
        points = np.empty((n_samples, self.model.dim))
        row = 0
        for fr in fracs:
            take = min(m, n_samples - row)
            dense = integrate_adaptive(
                self.model.field, self.spec.point_at(float(fr)), self.spec.T,
                self.reltol, self.abstol,
            )
            ts = rng.uniform(0.0, self.spec.T, size=take)
            points[row : row + take] = dense.evaluate(ts)
            row += take
        return points


def region_boundary_polygon(
    model: DynamicalModel, spec: RegionSpec, samples_per_edge: int = 200
) -> np.ndarray:
    """Closed polygon tracing the region: segment, extreme trajectories, end curve.

    The trajectory edges come from dense interpolants and are sampled 10x
    more finely than the end curve (each end-curve point costs one
    integration), keeping chord sagitta below ~1e-6 at the default setting.
    """
    fr = np.linspace(0.0, 1.0, samples_per_edge)
    lower = integrate_adaptive(model.field, spec.start, spec.T, REFERENCE_RELTOL, REFERENCE_ABSTOL)
    upper = integrate_adaptive(model.field, spec.end, spec.T, REFERENCE_RELTOL, REFERENCE_ABSTOL)
    ts = np.linspace(0.0, spec.T, 10 * samples_per_edge)
    end_curve = np.stack(
        [
            integrate_adaptive(model.field, spec.point_at(f), spec.T, REFERENCE_RELTOL, REFERENCE_ABSTOL).evaluate(spec.T)
            for f in fr
        ]
    )
    segment = spec.point_at(fr)
    path = np.concatenate(
        [
            segment,                       # along the segment start -> end
            upper.evaluate(ts)[1:],        # upper trajectory forward in time
            end_curve[::-1][1:],           # end-time curve back to the lower trajectory
            lower.evaluate(ts)[::-1][1:],  # lower trajectory back to the segment start
        ]
    )
    return path
