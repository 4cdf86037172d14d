"""Linear multistep scheme coefficients in exact rational arithmetic.

Schemes follow the normalized form

    sum_{m=0}^{M} alpha_m x_{n-m} = h * sum_{m=0}^{M} beta_m f(x_{n-m})

with alpha_0 = 1.  Coefficients are generated by solving the moment
(order-condition) equations over :class:`fractions.Fraction`, never copied
from printed tables, so a transcription slip is impossible; tests pin a
golden table of the generated rationals instead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .exceptions import TooFewSamples, UnsupportedOrder, UnsupportedSteps

MAX_STEPS = 6
MAX_FDM_ORDER = 7


class SchemeFamily(enum.Enum):
    ADAMS_BASHFORTH = "ab"
    ADAMS_MOULTON = "am"
    BDF = "bdf"

    @classmethod
    def parse(cls, text: str) -> "SchemeFamily":
        key = text.strip().lower().replace("-", "")
        aliases = {
            "ab": cls.ADAMS_BASHFORTH,
            "adamsbashforth": cls.ADAMS_BASHFORTH,
            "am": cls.ADAMS_MOULTON,
            "adamsmoulton": cls.ADAMS_MOULTON,
            "bdf": cls.BDF,
        }
        if key not in aliases:
            raise ValueError(f"unknown scheme family {text!r}")
        return aliases[key]

    @property
    def label(self) -> str:
        return {"ab": "A-B", "am": "A-M", "bdf": "BDF"}[self.value]


@dataclass(frozen=True)
class LmmScheme:
    """One linear M-step method with exact rational coefficients."""

    family: SchemeFamily
    steps: int
    alpha: tuple[Fraction, ...]
    beta: tuple[Fraction, ...]
    order: int

    @property
    def label(self) -> str:
        return f"{self.family.label} {self.steps}"

    @property
    def alpha_float(self) -> np.ndarray:
        return np.array([float(a) for a in self.alpha])

    @property
    def beta_float(self) -> np.ndarray:
        return np.array([float(b) for b in self.beta])


@dataclass(frozen=True)
class SchemeIndices:
    """Index bookkeeping for the unknowns f_s..f_{e(N)} of a scheme at size N."""

    first: int
    last: int
    count: int
    aux_count: int


@dataclass(frozen=True)
class FdmStencil:
    """One-sided first-derivative stencil f'(t_n) ~ (1/h) sum_m gamma_m x_{n+m}."""

    order: int
    gamma: tuple[Fraction, ...]

    @property
    def gamma_float(self) -> np.ndarray:
        return np.array([float(g) for g in self.gamma])


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination over Fractions (small square systems only)."""
    n = len(rhs)
    aug = [list(row) + [rhs[i]] for i, row in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular moment system")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1, 1) / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][n] for i in range(n)]


def order_condition_residuals(scheme: LmmScheme, k_max: int) -> list[Fraction]:
    """Taylor moment residuals C_0..C_{k_max} of a scheme, exactly.

    C_0 = sum alpha_m and, for k >= 1,
    C_k = sum (-m)^k alpha_m - k * sum (-m)^(k-1) beta_m.
    A scheme has order p iff C_0..C_p vanish and C_{p+1} does not.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out = [sum(scheme.alpha, Fraction(0))]
    for k in range(1, k_max + 1):
        ca = sum((Fraction(-m) ** k) * a for m, a in enumerate(scheme.alpha))
        cb = sum((Fraction(-m) ** (k - 1)) * b for m, b in enumerate(scheme.beta))
        out.append(ca - k * cb)
    return out


def _adams_alpha(M: int) -> list[Fraction]:
    alpha = [Fraction(0)] * (M + 1)
    alpha[0], alpha[1] = Fraction(1), Fraction(-1)
    return alpha


def build_scheme(family: SchemeFamily, M: int) -> LmmScheme:
    """Generate the coefficients of the M-step scheme of a family.

    Adams families fix alpha = (1, -1, 0, ...) and solve the moment
    equations for beta; BDF fixes beta_1..beta_M = 0 and solves for
    alpha_1..alpha_M and beta_0.  All solves are exact.
    """
    if not (1 <= M <= MAX_STEPS):
        raise UnsupportedSteps(f"M={M} outside supported range [1, {MAX_STEPS}]")

    if family is SchemeFamily.ADAMS_BASHFORTH:
        alpha = _adams_alpha(M)
        # C_k = 0 for k=1..M with beta_0 = 0:
        #   sum_{m>=1} (-m)^(k-1) beta_m = (-1)^(k+1) / k
        rows = [[Fraction(-m) ** (k - 1) for m in range(1, M + 1)] for k in range(1, M + 1)]
        rhs = [Fraction((-1) ** (k + 1), k) for k in range(1, M + 1)]
        beta = [Fraction(0)] + _solve_exact(rows, rhs)
        order = M
    elif family is SchemeFamily.ADAMS_MOULTON:
        alpha = _adams_alpha(M)
        rows = [[Fraction(-m) ** (k - 1) for m in range(0, M + 1)] for k in range(1, M + 2)]
        rhs = [Fraction((-1) ** (k + 1), k) for k in range(1, M + 2)]
        beta = _solve_exact(rows, rhs)
        order = M + 1
    elif family is SchemeFamily.BDF:
        # Unknowns alpha_1..alpha_M, beta_0; equations C_0..C_M = 0.
        rows: list[list[Fraction]] = []
        rhs = []
        rows.append([Fraction(1)] * M + [Fraction(0)])
        rhs.append(Fraction(-1))
        for k in range(1, M + 1):
            row = [Fraction(-m) ** k for m in range(1, M + 1)]
            row.append(Fraction(-k) if k == 1 else Fraction(0))
            rows.append(row)
            rhs.append(Fraction(0))
        sol = _solve_exact(rows, rhs)
        alpha = [Fraction(1)] + sol[:M]
        beta = [sol[M]] + [Fraction(0)] * M
        order = M
    else:  # pragma: no cover - enum is closed
        raise ValueError(family)

    scheme = LmmScheme(family, M, tuple(alpha), tuple(beta), order)
    residuals = order_condition_residuals(scheme, order + 1)
    assert all(c == 0 for c in residuals[: order + 1]) and residuals[order + 1] != 0
    return scheme


def all_schemes(max_steps: int = MAX_STEPS) -> list[LmmScheme]:
    return [build_scheme(f, M) for f in SchemeFamily for M in range(1, max_steps + 1)]


def scheme_indices(scheme: LmmScheme, N: int) -> SchemeIndices:
    """First/last involved unknown index, their count, and the auxiliary count."""
    M = scheme.steps
    if N < M:
        raise TooFewSamples(f"N={N} < M={M}")
    if scheme.family is SchemeFamily.ADAMS_BASHFORTH:
        first, last = 0, N - 1
    elif scheme.family is SchemeFamily.ADAMS_MOULTON:
        first, last = 0, N
    else:
        first, last = M, N
    count = last - first + 1
    aux = count - (N - M + 1)
    return SchemeIndices(first, last, count, aux)


def fdm_stencil(p: int) -> FdmStencil:
    """One-sided forward-difference first-derivative stencil of order p.

    Solves the Vandermonde moment system sum_m m^k gamma_m = [k == 1]
    for k = 0..p over the nodes m = 0..p.
    """
    if not (1 <= p <= MAX_FDM_ORDER):
        raise UnsupportedOrder(f"p={p} outside supported range [1, {MAX_FDM_ORDER}]")
    rows = [[Fraction(m) ** k for m in range(p + 1)] for k in range(p + 1)]
    rhs = [Fraction(1) if k == 1 else Fraction(0) for k in range(p + 1)]
    gamma = _solve_exact(rows, rhs)
    return FdmStencil(p, tuple(gamma))


def local_truncation_error(
    scheme: LmmScheme,
    x: Callable[[float], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    h: float,
    n: int,
) -> np.ndarray:
    """Residual of the exact path in the discrete scheme at index n.

    tau_{h,n} = (1/h) sum_m alpha_m x(t_{n-m}) - sum_m beta_m f(x(t_{n-m}))
    with t_j = j*h.
    """
    M = scheme.steps
    if n < M:
        raise TooFewSamples(f"n={n} < M={M}")
    states = [np.asarray(x((n - m) * h), dtype=float) for m in range(M + 1)]
    alpha = scheme.alpha_float
    beta = scheme.beta_float
    acc = sum(alpha[m] * states[m] for m in range(M + 1)) / h
    acc -= sum(beta[m] * f(states[m]) for m in range(M + 1) if beta[m] != 0.0)
    return acc


def max_truncation_error(
    scheme: LmmScheme,
    x: Callable[[float], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    h: float,
    N: int,
) -> float:
    """max_{M <= n <= N} ||tau_{h,n}||_inf over a whole grid."""
    return max(
        float(np.max(np.abs(local_truncation_error(scheme, x, f, h, n))))
        for n in range(scheme.steps, N + 1)
    )
