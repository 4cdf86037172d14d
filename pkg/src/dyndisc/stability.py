"""Root-condition classification and condition-number growth measurement.

A scheme's augmented discovery matrix stays uniformly well conditioned as
the grid grows exactly when every root of the beta-window polynomial lies
strictly inside the unit circle; this module classifies schemes by that
criterion and measures kappa_2 growth empirically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .assembly import (
    AugmentedSystem,
    BandedLowerMatrix,
    assemble_A,
    forward_substitution,
    transpose_back_substitution,
)
from .lmm import LmmScheme, SchemeFamily

TOL_ROOT = 1e-8
EXACT_SIZE_LIMIT = 512
_ITER_TOL = 1e-6
_ITER_CAP = 100_000


class Stability(enum.Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class CharPolynomial:
    """Beta-window polynomial, coefficients highest degree first."""

    coeffs: np.ndarray
    degree: int


@dataclass(frozen=True)
class StabilityReport:
    scheme_label: str
    roots: np.ndarray
    max_modulus: float
    classification: Stability


@dataclass(frozen=True)
class ConditionSample:
    N: int
    kappa2: float


def characteristic_polynomial(scheme: LmmScheme) -> CharPolynomial:
    """p(z) = sum_i beta_i z^(hi - i) over the involved beta indices lo..hi.

    lo = N - e(N) and hi = M - s are N-independent per family; BDF collapses
    to the constant beta_0 (no roots).
    """
    M = scheme.steps
    if scheme.family is SchemeFamily.ADAMS_BASHFORTH:
        lo, hi = 1, M
    elif scheme.family is SchemeFamily.ADAMS_MOULTON:
        lo, hi = 0, M
    else:
        lo, hi = 0, 0
    coeffs = scheme.beta_float[lo : hi + 1]
    return CharPolynomial(coeffs.copy(), hi - lo)


def polynomial_roots(poly: CharPolynomial) -> np.ndarray:
    """All complex roots via companion-matrix eigenvalues; empty for constants."""
    if poly.degree == 0:
        return np.zeros(0, dtype=complex)
    c = poly.coeffs / poly.coeffs[0]
    n = poly.degree
    comp = np.zeros((n, n))
    comp[0, :] = -c[1:]
    if n > 1:
        comp[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    return np.linalg.eigvals(comp)


def classify(scheme: LmmScheme, tol_root: float = TOL_ROOT) -> StabilityReport:
    poly = characteristic_polynomial(scheme)
    roots = polynomial_roots(poly)
    max_mod = float(np.max(np.abs(roots))) if roots.size else 0.0
    if roots.size == 0 or max_mod < 1.0 - tol_root:
        cls = Stability.STABLE
    elif max_mod <= 1.0 + tol_root:
        cls = Stability.MARGINAL
    else:
        cls = Stability.UNSTABLE
    return StabilityReport(scheme.label, roots, max_mod, cls)


def _as_matrix(A: Union[AugmentedSystem, BandedLowerMatrix]) -> BandedLowerMatrix:
    return A.matrix if isinstance(A, AugmentedSystem) else A


def condition_number_exact(A: Union[AugmentedSystem, BandedLowerMatrix]) -> float:
    sv = np.linalg.svd(_as_matrix(A).dense(), compute_uv=False)
    return float(sv[0] / sv[-1])


def condition_number_iterative(
    A: Union[AugmentedSystem, BandedLowerMatrix],
    tol: float = _ITER_TOL,
) -> float:
    """sigma_max by power iteration on A^T A, sigma_min by inverse iteration.

    The inverse step costs two triangular solves per iteration (transpose
    back substitution then forward substitution).
    """
    matrix = _as_matrix(A)
    n = matrix.n_cols
    rng = np.random.default_rng(0)

    def dominant(apply_op):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        sigma = 0.0
        for _ in range(_ITER_CAP):
            y = apply_op(x)
            ny = float(np.linalg.norm(y))
            if ny == 0.0:
                return 0.0
            x_new = y / ny
            sigma_new = np.sqrt(ny)
            if abs(sigma_new - sigma) <= tol * sigma_new:
                return sigma_new
            x, sigma = x_new, sigma_new
        return sigma

    sigma_max = dominant(lambda v: matrix.rmatvec(matrix.matvec(v)))
    # (A^T A)^{-1} v: back substitution with A^T, then forward with A
    inv_sigma_min = dominant(
        lambda v: forward_substitution(
            matrix, transpose_back_substitution(matrix, v)
        )
    )
    return float(sigma_max * inv_sigma_min)


def condition_number(A: Union[AugmentedSystem, BandedLowerMatrix]) -> float:
    """kappa_2 = sigma_max / sigma_min of the augmented matrix.

    Exact dense decomposition up to size 512, iterative estimation above.
    """
    matrix = _as_matrix(A)
    if matrix.n_cols <= EXACT_SIZE_LIMIT:
        return condition_number_exact(matrix)
    return condition_number_iterative(matrix)


def boundedness_scan(scheme: LmmScheme, Ns: Sequence[int]) -> list[ConditionSample]:
    if list(Ns) != sorted(Ns):
        raise ValueError("Ns must be ascending")
    return [ConditionSample(N, condition_number(assemble_A(scheme, N))) for N in Ns]
