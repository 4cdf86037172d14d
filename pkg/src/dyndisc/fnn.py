"""ReLU feed-forward networks with exact reverse-mode gradients and Adam.

Everything runs in float64: the convergence studies push discovery errors
to 1e-4..1e-6 where single-precision noise would contaminate fitted slopes.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import NonFiniteGradient


@dataclass(frozen=True)
class FnnArchitecture:
    input_dim: int
    widths: tuple[int, ...]  # one entry per hidden layer

    def __post_init__(self):
        if len(self.widths) < 1 or min(self.widths) < 1 or self.input_dim < 1:
            raise ValueError("need at least one hidden layer of positive width")

    @property
    def depth(self) -> int:
        return len(self.widths)

    @classmethod
    def uniform(cls, input_dim: int, depth: int, width: int) -> "FnnArchitecture":
        return cls(input_dim, (width,) * depth)


@dataclass
class FnnParams:
    """Per-layer weights/biases plus the linear output vector."""

    weights: list[np.ndarray]  # W_l of shape (widths[l], widths[l-1])
    biases: list[np.ndarray]
    out: np.ndarray            # (widths[-1],)

    @property
    def architecture(self) -> FnnArchitecture:
        return FnnArchitecture(self.weights[0].shape[1], tuple(w.shape[0] for w in self.weights))

    def copy(self) -> "FnnParams":
        return FnnParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.out.copy())

    def flat_arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases + [self.out]


def init_params(
    arch: FnnArchitecture, seed: int, literal_range: bool = False
) -> FnnParams:
    """Uniform initialization on (-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.

    `literal_range` widens the interval to (-sqrt(fan_in), sqrt(fan_in)),
    kept only for fidelity experiments; it is untrainable at real widths.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    fan_in = arch.input_dim
    for width in arch.widths:
        bound = np.sqrt(fan_in) if literal_range else 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(width, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=width))
        fan_in = width
    bound = np.sqrt(fan_in) if literal_range else 1.0 / np.sqrt(fan_in)
    out = rng.uniform(-bound, bound, size=fan_in)
    return FnnParams(weights, biases, out)


def forward(params: FnnParams, x: np.ndarray) -> float:
    return float(forward_batch(params, np.asarray(x, dtype=float)[None, :])[0])


def forward_batch(params: FnnParams, X: np.ndarray) -> np.ndarray:
    """Scalar outputs for a batch of input rows."""
    A = np.asarray(X, dtype=float)
    for W, b in zip(params.weights, params.biases):
        A = np.maximum(A @ W.T + b, 0.0)
    return A @ params.out


def _forward_cached(params: FnnParams, X: np.ndarray):
    activations = [np.asarray(X, dtype=float)]
    for W, b in zip(params.weights, params.biases):
        activations.append(np.maximum(activations[-1] @ W.T + b, 0.0))
    return activations[-1] @ params.out, activations


def backprop(params: FnnParams, X: np.ndarray, out_grad: np.ndarray) -> FnnParams:
    """Gradient of sum_n out_grad[n] * u(X[n]) with respect to every parameter.

    The ReLU subgradient at exactly zero is taken as 0, which keeps
    gradients deterministic.
    """
    _, acts = _forward_cached(params, X)
    d_out = acts[-1].T @ out_grad
    dA = out_grad[:, None] * params.out[None, :]
    g_w: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    g_b: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]
    for layer in range(len(params.weights) - 1, -1, -1):
        dZ = dA * (acts[layer + 1] > 0.0)
        g_w[layer] = dZ.T @ acts[layer]
        g_b[layer] = dZ.sum(axis=0)
        if layer > 0:
            dA = dZ @ params.weights[layer]
    grad = FnnParams(g_w, g_b, d_out)
    if not all(np.all(np.isfinite(a)) for a in grad.flat_arrays()):
        raise NonFiniteGradient("non-finite entry in parameter gradient")
    return grad


def loss_gradient(
    params: FnnParams,
    X: np.ndarray,
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
) -> tuple[float, FnnParams]:
    """Value and exact parameter gradient of a functional of batch outputs.

    `loss_fn` maps the output vector u to (value, d value / d u).
    """
    u = forward_batch(params, X)
    value, du = loss_fn(u)
    return float(value), backprop(params, X, np.asarray(du, dtype=float))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: FnnParams, **hyper) -> "AdamState":
        arrays = params.flat_arrays()
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
            **hyper,
        )


def adam_step(
    params: FnnParams, state: AdamState, grad: FnnParams, rate: float
) -> tuple[FnnParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_arrays = []
    for i, (theta, g) in enumerate(zip(params.flat_arrays(), grad.flat_arrays())):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        new_arrays.append(theta - rate * m_hat / (np.sqrt(v_hat) + state.eps))
    L = len(params.weights)
    return FnnParams(new_arrays[:L], new_arrays[L : 2 * L], new_arrays[2 * L]), state


@dataclass(frozen=True)
class LrSchedule:
    """Rate 10^(-2 - 2n/N_I): geometric decay from 1e-2 at n=0 to 1e-4 at n=N_I."""

    total_epochs: int

    def rate(self, n: int) -> float:
        if not (0 <= n <= self.total_epochs):
            raise ValueError(f"epoch {n} outside [0, {self.total_epochs}]")
        return 10.0 ** (-2.0 - 2.0 * n / self.total_epochs)


def lr_at(schedule: LrSchedule, n: int) -> float:
    return schedule.rate(n)


def save_params(path, nets: Sequence[FnnParams], meta: Optional[dict] = None) -> None:
    """All weights in full 64-bit precision plus a JSON metadata record."""
    arrays = {}
    for i, net in enumerate(nets):
        for l, (W, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"net{i}_W{l}"] = W
            arrays[f"net{i}_b{l}"] = b
        arrays[f"net{i}_out"] = net.out
    header = {
        "count": len(nets),
        "architectures": [
            {"input_dim": n.architecture.input_dim, "widths": list(n.architecture.widths)}
            for n in nets
        ],
        "meta": meta or {},
    }
    arrays["header_json"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_params(path) -> tuple[list[FnnParams], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["header_json"]).decode())
        nets = []
        for i, arch in enumerate(header["architectures"]):
            L = len(arch["widths"])
            nets.append(
                FnnParams(
                    [data[f"net{i}_W{l}"] for l in range(L)],
                    [data[f"net{i}_b{l}"] for l in range(L)],
                    data[f"net{i}_out"],
                )
            )
    return nets, header["meta"]
