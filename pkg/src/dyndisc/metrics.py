"""Relative l2 error metrics and convergence-order estimation.

Grid error compares an approximant with the truth at the involved sample
points; testing errors integrate the same ratio along the continuous
trajectory (arc-length weighted Gauss quadrature) or over a swept region
(Monte Carlo in the sampler's chart).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exceptions import DegenerateFit, ZeroDenominator
from .integrate import DenseTrajectory, MultiTrajectoryData, TrajectoryData
from .lmm import LmmScheme, scheme_indices

Evaluator = Callable[[np.ndarray], np.ndarray]
# an approximant is a batch evaluator returning (n, d), a list of d scalar
# evaluators, or precomputed values on the involved grid
Approx = Union[Evaluator, Sequence[Evaluator], np.ndarray]


@dataclass(frozen=True)
class ErrorRecord:
    scheme_label: str
    h: float
    grid_error: float
    test_error: Optional[float] = None
    per_component: Optional[np.ndarray] = None


@dataclass(frozen=True)
class OrderFit:
    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r2: float
    window: tuple[int, int]


def _evaluate(approx: Approx, X: np.ndarray, d: int) -> np.ndarray:
    if isinstance(approx, np.ndarray):
        if approx.shape != (X.shape[0], d):
            raise ValueError("precomputed values must be shaped (points, components)")
        return approx
    if callable(approx):
        out = np.asarray(approx(X), dtype=float)
        if out.shape != (X.shape[0], d):
            raise ValueError("batch evaluator must return one row per point")
        return out
    cols = [np.asarray(fj(X), dtype=float).reshape(-1) for fj in approx]
    return np.stack(cols, axis=-1)


def relative_l2(apx: np.ndarray, tru: np.ndarray) -> tuple[float, np.ndarray]:
    """Componentwise relative l2 ratios and their root-mean-square aggregate."""
    num = np.sum((apx - tru) ** 2, axis=0)
    den = np.sum(tru**2, axis=0)
    if np.any(den == 0.0):
        dead = [int(j) for j in np.nonzero(den == 0.0)[0]]
        raise ZeroDenominator(f"truth component(s) {dead} vanish on the whole grid")
    per = np.sqrt(num / den)
    return float(np.sqrt(np.mean(num / den))), per


_relative_l2 = relative_l2


def grid_error(
    approx: Approx,
    truth: Evaluator,
    data: Union[TrajectoryData, MultiTrajectoryData],
    scheme: LmmScheme,
) -> float:
    """Relative l2 error at the involved grid points, averaged over components.

    For multi-trajectory data both sums run over all trajectories.
    """
    idx = scheme_indices(scheme, data.N)
    if isinstance(data, MultiTrajectoryData):
        X = data.states[:, idx.first : idx.last + 1, :].reshape(-1, data.dim)
    else:
        X = data.states[idx.first : idx.last + 1]
    apx = _evaluate(approx, X, data.dim)
    tru = np.asarray(truth(X), dtype=float)
    return _relative_l2(apx, tru)[0]


def grid_error_components(
    approx: Approx,
    truth: Evaluator,
    data: Union[TrajectoryData, MultiTrajectoryData],
    scheme: LmmScheme,
) -> np.ndarray:
    idx = scheme_indices(scheme, data.N)
    if isinstance(data, MultiTrajectoryData):
        X = data.states[:, idx.first : idx.last + 1, :].reshape(-1, data.dim)
    else:
        X = data.states[idx.first : idx.last + 1]
    apx = _evaluate(approx, X, data.dim)
    tru = np.asarray(truth(X), dtype=float)
    return _relative_l2(apx, tru)[1]


def _gauss_panels(T: float, panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, T, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    ts = (mid[:, None] + half[:, None] * xg[None, :]).reshape(-1)
    ws = (half[:, None] * wg[None, :]).reshape(-1)
    return ts, ws


def test_error_trajectory(
    approx: Approx,
    truth: Evaluator,
    dense: DenseTrajectory,
    panels: int = 200,
    nodes: int = 5,
) -> float:
    """Arc-length-weighted relative l2 error along the continuous trajectory."""
    ts, ws = _gauss_panels(dense.T, panels, nodes)
    X = dense.evaluate(ts)
    tru = np.asarray(truth(X), dtype=float)
    apx = _evaluate(approx, X, tru.shape[1])
    speed = np.linalg.norm(tru, axis=1)
    num = np.sum(ws[:, None] * (apx - tru) ** 2 * speed[:, None], axis=0)
    den = np.sum(ws[:, None] * tru**2 * speed[:, None], axis=0)
    if np.any(den == 0.0):
        raise ZeroDenominator("truth component vanishes along the trajectory")
    return float(np.sqrt(np.mean(num / den)))


def test_error_region(
    approx: Approx,
    truth: Evaluator,
    sampler,
    n_samples: int = 2000,
    seed: int = 0,
) -> float:
    """Monte Carlo relative l2 error over a swept region.

    The numerator and denominator use the same chart-uniform draw, so the
    chart weighting cancels from the ratio.  Deterministic given the seed.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    rng = np.random.default_rng(seed)
    X = sampler.sample(n_samples, rng)
    tru = np.asarray(truth(X), dtype=float)
    apx = _evaluate(approx, X, tru.shape[1])
    num = np.mean((apx - tru) ** 2, axis=0)
    den = np.mean(tru**2, axis=0)
    if np.any(den == 0.0):
        raise ZeroDenominator("truth component vanishes on the sample set")
    return float(np.sqrt(np.mean(num / den)))


def convergence_order(
    points: Sequence[tuple[float, float]],
    window: Optional[tuple[int, int]] = None,
) -> OrderFit:
    """Least-squares slope through (log10 h, log10 error) over a point window.

    The window (start, stop) indexes the h-sorted points; callers use it to
    exclude floors where another error source dominates.
    """
    pts = sorted(((float(h), float(e)) for h, e in points), key=lambda p: p[0])
    if window is None:
        window = (0, len(pts))
    lo, hi = window
    sel = pts[lo:hi]
    if len(sel) < 2:
        raise DegenerateFit("need at least two points in the fit window")
    hs = np.array([p[0] for p in sel])
    es = np.array([p[1] for p in sel])
    if np.any(es <= 0.0) or np.any(hs <= 0.0):
        raise ValueError("h and error values must be positive")
    if np.all(hs == hs[0]):
        raise DegenerateFit("all h values equal")
    lx, ly = np.log10(hs), np.log10(es)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return OrderFit(tuple(pts), float(slope), float(intercept), r2, window)
