"""Scheme-residual loss functionals and the network training driver.

Each loss is the squared residual of the discovery linear system with the
candidate's point values substituted for the grid unknowns, so the exact
grid solution drives the augmented loss to the floating-point floor, and
gradients flow through one banded operator application.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import fnn
from .assembly import assemble_A, assemble_B, assemble_rhs
from .exceptions import MismatchedGrids, NonFiniteGradient
from .fnn import AdamState, FnnArchitecture, FnnParams, LrSchedule
from .integrate import MultiTrajectoryData, TrajectoryData
from .lmm import FdmStencil, LmmScheme, fdm_stencil, scheme_indices

UEval = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LossSpec:
    scheme: LmmScheme
    with_aux: bool = True
    stencil: Optional[FdmStencil] = None


def make_loss_spec(scheme: LmmScheme, with_aux: bool = True) -> LossSpec:
    stencil = fdm_stencil(scheme.order) if with_aux else None
    return LossSpec(scheme, with_aux, stencil)


PROFILES = {
    "desk": {"width": 64, "depth": 3, "epochs": 5000},
    "paper": {"width": 640, "depth": 5, "epochs": 30000},
}


@dataclass(frozen=True)
class TrainConfig:
    architecture: FnnArchitecture
    epochs: int
    seed: int = 0
    record_every: int = 100
    schedule: Optional[LrSchedule] = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    @property
    def lr_schedule(self) -> LrSchedule:
        return self.schedule if self.schedule is not None else LrSchedule(self.epochs)

    @classmethod
    def profile(cls, name: str, input_dim: int, seed: int = 0, **overrides) -> "TrainConfig":
        if name not in PROFILES:
            raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        p = dict(PROFILES[name])
        p.update(overrides)
        arch = FnnArchitecture.uniform(input_dim, p["depth"], p["width"])
        return cls(arch, p["epochs"], seed=seed, record_every=p.get("record_every", 100))


class _Design:
    """Residual operator of one trajectory and one component."""

    def __init__(self, data: TrajectoryData, component: int, spec: LossSpec):
        scheme = spec.scheme
        idx = scheme_indices(scheme, data.N)
        self.points = data.states[idx.first : idx.last + 1]
        c, q = assemble_rhs(scheme, data, component, spec.stencil)
        if spec.with_aux:
            self.operator = assemble_A(scheme, data.N)
            self.rhs = np.concatenate([c, q])
            self.norm = float(idx.count)
        else:
            self.operator = assemble_B(scheme, data.N)
            self.rhs = q
            self.norm = float(data.N - scheme.steps + 1)

    def value_and_outgrad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        r = self.operator.matvec(u) - self.rhs
        value = float(np.dot(r, r)) / self.norm
        return value, (2.0 / self.norm) * self.operator.rmatvec(r)

    def value(self, u: np.ndarray) -> float:
        r = self.operator.matvec(u) - self.rhs
        return float(np.dot(r, r)) / self.norm


def _point_values(u: UEval, points: np.ndarray) -> np.ndarray:
    if callable(u):
        return np.asarray(u(points), dtype=float).reshape(-1)
    vals = np.asarray(u, dtype=float).reshape(-1)
    if vals.shape[0] != points.shape[0]:
        raise ValueError("precomputed values must match the involved grid points")
    return vals


def loss_plain(u: UEval, data: TrajectoryData, component: int, scheme: LmmScheme) -> float:
    """Mean squared scheme residual without auxiliary terms."""
    design = _Design(data, component, LossSpec(scheme, with_aux=False))
    return design.value(_point_values(u, design.points))


def loss_augmented(u: UEval, data: TrajectoryData, component: int, spec: LossSpec) -> float:
    """Scheme residual plus auxiliary forward-difference residuals, over t(N)."""
    if not spec.with_aux:
        raise ValueError("loss_augmented needs a spec with with_aux=True")
    design = _Design(data, component, spec)
    return design.value(_point_values(u, design.points))


def loss_multi(
    u: UEval, data: MultiTrajectoryData, component: int, spec: LossSpec
) -> float:
    """Mean of the per-trajectory augmented losses."""
    total = 0.0
    for i in range(data.n_trajectories):
        total += loss_augmented(u, data.trajectory(i), component, spec)
    return total / data.n_trajectories


@dataclass
class HistoryRecord:
    epoch: int
    loss: float
    grid_error: float
    test_error: float


@dataclass
class DiscoveryResult:
    nets: list[FnnParams]
    history: list[HistoryRecord]
    component_losses: np.ndarray  # final per-component loss values
    config: TrainConfig
    spec: LossSpec
    aborted: bool = False

    def evaluators(self) -> list[Callable[[np.ndarray], np.ndarray]]:
        return [
            (lambda X, net=net: fnn.forward_batch(net, X)) for net in self.nets
        ]

    def field(self) -> Callable[[np.ndarray], np.ndarray]:
        def f(X):
            X = np.asarray(X, dtype=float)
            batch = np.atleast_2d(X)
            out = np.stack([fnn.forward_batch(net, batch) for net in self.nets], axis=-1)
            return out[0] if X.ndim == 1 else out.reshape(X.shape[:-1] + (len(self.nets),))

        return f


def _designs_for(
    data: Union[TrajectoryData, MultiTrajectoryData], component: int, spec: LossSpec
) -> list[_Design]:
    if isinstance(data, MultiTrajectoryData):
        return [_Design(data.trajectory(i), component, spec) for i in range(data.n_trajectories)]
    return [_Design(data, component, spec)]


def train_discovery(
    data: Union[TrajectoryData, MultiTrajectoryData],
    spec: LossSpec,
    config: TrainConfig,
    truth: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    test_metric: Optional[Callable[[list[FnnParams]], float]] = None,
) -> DiscoveryResult:
    """Adam-train one network per component against the scheme-residual loss.

    Components train sequentially with derived seeds (seed + component), so a
    single-component rerun reproduces its slice of a full run exactly.  When
    `truth` is given the history carries the relative l2 grid error; the
    optional `test_metric` callback fills the test-error column.
    """
    d = data.dim
    sched = config.lr_schedule
    designs = [_designs_for(data, j, spec) for j in range(d)]
    slices = []
    offset = 0
    for ds in designs[0]:
        n = ds.points.shape[0]
        slices.append(slice(offset, offset + n))
        offset += n
    X_all = np.concatenate([ds.points for ds in designs[0]])

    truth_vals = None
    truth_sumsq = None
    if truth is not None:
        truth_vals = np.asarray(truth(X_all), dtype=float)
        truth_sumsq = np.sum(truth_vals**2, axis=0)

    nets: list[Optional[FnnParams]] = [None] * d
    per_comp_hist: list[list[tuple[int, float, float]]] = []
    aborted = False
    n_traj = len(designs[0])

    for j in range(d):
        params = fnn.init_params(config.architecture, config.seed + j)
        state = AdamState.zeros_like(params)
        comp_designs = designs[j]
        records: list[tuple[int, float, float]] = []

        def evaluate(params_j):
            u = fnn.forward_batch(params_j, X_all)
            value = 0.0
            out_grad = np.zeros_like(u)
            for ds, sl in zip(comp_designs, slices):
                v, g = ds.value_and_outgrad(u[sl])
                value += v
                out_grad[sl] += g
            return u, value / n_traj, out_grad / n_traj

        def grid_err(u):
            if truth_vals is None:
                return float("nan")
            diff = u - truth_vals[:, j]
            return float(np.sqrt(np.sum(diff**2) / truth_sumsq[j]))

        try:
            for epoch in range(config.epochs):
                u, value, out_grad = evaluate(params)
                if epoch % config.record_every == 0:
                    records.append((epoch, value, grid_err(u)))
                grad = fnn.backprop(params, X_all, out_grad)
                params, state = fnn.adam_step(params, state, grad, sched.rate(epoch))
        except NonFiniteGradient:
            aborted = True
        u, value, _ = evaluate(params)
        records.append((config.epochs, value, grid_err(u)))
        nets[j] = params
        per_comp_hist.append(records)
        if aborted:
            break

    final_nets = [n for n in nets if n is not None]
    # align per-component records into one aggregated history
    history: list[HistoryRecord] = []
    if per_comp_hist and not aborted:
        for i in range(len(per_comp_hist[0])):
            epoch = per_comp_hist[0][i][0]
            loss = float(sum(h[i][1] for h in per_comp_hist))
            if truth_vals is None:
                ge = float("nan")
            else:
                ge = float(np.sqrt(np.mean([h[i][2] ** 2 for h in per_comp_hist])))
            history.append(HistoryRecord(epoch, loss, ge, float("nan")))
    elif per_comp_hist:
        for rec in per_comp_hist[-1]:
            history.append(HistoryRecord(rec[0], rec[1], rec[2], float("nan")))

    result = DiscoveryResult(
        nets=final_nets,
        history=history,
        component_losses=np.array([h[-1][1] for h in per_comp_hist]),
        config=config,
        spec=spec,
        aborted=aborted,
    )
    if test_metric is not None and not aborted and history:
        history[-1].test_error = float(test_metric(final_nets))
    return result
