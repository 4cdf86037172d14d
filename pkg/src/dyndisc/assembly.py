"""Banded linear systems of the grid-function discovery path.

The scheme relation over a sampled trajectory is a Toeplitz band block
(one shifted copy of the beta window per row); stacking identity rows for
the auxiliary forward-difference conditions on top yields a square lower
triangular system whose solution is the governing function on the grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .exceptions import IndexOutOfRange, NotConverged, SingularMatrix, TooFewSamples
from .lmm import FdmStencil, LmmScheme, fdm_stencil, scheme_indices

if TYPE_CHECKING:  # pragma: no cover
    from .integrate import TrajectoryData


class StructureTag(enum.Enum):
    LMM_BLOCK = "lmm_block"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class BandedLowerMatrix:
    """Sliding-window band matrix, optionally with identity rows stacked on top.

    Row ``aux_count + r`` carries ``window[j]`` at column ``r + j``; the first
    ``aux_count`` rows are unit rows picking out the leading unknowns.  For the
    augmented structure the matrix is square lower triangular with nonzero
    diagonal ``window[-1]``.
    """

    tag: StructureTag
    n_rows: int
    n_cols: int
    window: np.ndarray
    aux_count: int = 0

    @property
    def bandwidth(self) -> int:
        return len(self.window) - 1

    @property
    def band_rows(self) -> int:
        return self.n_rows - self.aux_count

    def matvec(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        nb = self.band_rows
        out = np.zeros(self.n_rows)
        out[: self.aux_count] = u[: self.aux_count]
        acc = np.zeros(nb)
        for j, w in enumerate(self.window):
            acc += w * u[j : j + nb]
        out[self.aux_count :] = acc
        return out

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        nb = self.band_rows
        out = np.zeros(self.n_cols)
        out[: self.aux_count] += r[: self.aux_count]
        rb = r[self.aux_count :]
        for j, w in enumerate(self.window):
            out[j : j + nb] += w * rb
        return out

    def dense(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_cols))
        for i in range(self.aux_count):
            A[i, i] = 1.0
        for r in range(self.band_rows):
            A[self.aux_count + r, r : r + len(self.window)] = self.window
        return A


@dataclass(frozen=True)
class AugmentedSystem:
    """Square discovery system A f = [c; q] for one state component."""

    matrix: BandedLowerMatrix
    rhs: np.ndarray
    aux_count: int
    scheme: LmmScheme
    h: float


def _window(scheme: LmmScheme, N: int) -> np.ndarray:
    idx = scheme_indices(scheme, N)
    lo = N - idx.last          # first involved beta index
    hi = scheme.steps - idx.first
    beta = scheme.beta_float
    return beta[lo : hi + 1][::-1].copy()


def assemble_B(scheme: LmmScheme, N: int) -> BandedLowerMatrix:
    """The (N-M+1) x t(N) Toeplitz band of shifted beta windows."""
    idx = scheme_indices(scheme, N)
    return BandedLowerMatrix(
        tag=StructureTag.LMM_BLOCK,
        n_rows=N - scheme.steps + 1,
        n_cols=idx.count,
        window=_window(scheme, N),
        aux_count=0,
    )


def assemble_A(scheme: LmmScheme, N: int) -> BandedLowerMatrix:
    """Identity rows for the aux conditions stacked over the beta band; square."""
    idx = scheme_indices(scheme, N)
    return BandedLowerMatrix(
        tag=StructureTag.AUGMENTED,
        n_rows=idx.count,
        n_cols=idx.count,
        window=_window(scheme, N),
        aux_count=idx.aux_count,
    )


def assemble_rhs(
    scheme: LmmScheme,
    data: "TrajectoryData",
    component: int,
    stencil: Optional[FdmStencil] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Aux targets c and scheme targets q for one component.

    q_n = (1/h) sum_m alpha_m x_{n-m} for n = M..N; c_n = (1/h) sum_m
    gamma_m x_{n+m} at the leading aux_count indices, using the one-sided
    stencil whose order matches the scheme.
    """
    M = scheme.steps
    N = data.N
    idx = scheme_indices(scheme, N)
    x = np.asarray(data.states[:, component], dtype=float)
    h = data.h

    alpha = scheme.alpha_float
    q = np.zeros(N - M + 1)
    for m in range(M + 1):
        q += alpha[m] * x[M - m : N - m + 1]
    q /= h

    if idx.aux_count == 0:
        return np.zeros(0), q

    if stencil is None:
        stencil = fdm_stencil(scheme.order)
    p = stencil.order
    last_needed = idx.first + idx.aux_count - 1 + p
    if last_needed > N:
        raise IndexOutOfRange(
            f"aux stencil reaches sample {last_needed} but trajectory ends at {N}"
        )
    gamma = stencil.gamma_float
    c = np.zeros(idx.aux_count)
    for m in range(p + 1):
        c += gamma[m] * x[idx.first + m : idx.first + idx.aux_count + m]
    c /= h
    return c, q


def build_augmented_system(
    scheme: LmmScheme,
    data: "TrajectoryData",
    component: int,
    stencil: Optional[FdmStencil] = None,
) -> AugmentedSystem:
    if data.N < scheme.steps:
        raise TooFewSamples(f"N={data.N} < M={scheme.steps}")
    c, q = assemble_rhs(scheme, data, component, stencil)
    matrix = assemble_A(scheme, data.N)
    return AugmentedSystem(matrix, np.concatenate([c, q]), len(c), scheme, data.h)


def truncation_residuals(scheme: LmmScheme, data: "TrajectoryData", field) -> np.ndarray:
    """Scheme residuals q - B f_true of the exact field, shape (N-M+1, d).

    Vectorized equivalent of evaluating the local truncation error at every
    index M..N; tests pin it against the pointwise definition.
    """
    idx = scheme_indices(scheme, data.N)
    B = assemble_B(scheme, data.N)
    f_true = np.asarray(field(data.states[idx.first : idx.last + 1]), dtype=float)
    out = np.empty((data.N - scheme.steps + 1, data.states.shape[1]))
    for j in range(out.shape[1]):
        _, q = assemble_rhs(scheme, data, j)
        out[:, j] = q - B.matvec(f_true[:, j])
    return out


def solve_forward_substitution(system: AugmentedSystem) -> np.ndarray:
    """Triangular solve in increasing row order."""
    return forward_substitution(system.matrix, system.rhs)


def forward_substitution(matrix: BandedLowerMatrix, b: np.ndarray) -> np.ndarray:
    if matrix.tag is not StructureTag.AUGMENTED:
        raise ValueError("forward substitution needs the square augmented structure")
    w = matrix.window
    diag = w[-1]
    if diag == 0.0:
        raise SingularMatrix("zero diagonal in band window")
    na = matrix.aux_count
    bw = matrix.bandwidth
    x = np.empty(matrix.n_cols)
    x[:na] = b[:na]
    for r in range(matrix.band_rows):
        acc = b[na + r]
        if bw:
            acc -= np.dot(w[:bw], x[r : r + bw])
        x[na + r] = acc / diag
    return x


def transpose_back_substitution(matrix: BandedLowerMatrix, b: np.ndarray) -> np.ndarray:
    """Solve A^T y = b for the augmented structure (upper triangular)."""
    if matrix.tag is not StructureTag.AUGMENTED:
        raise ValueError("transpose solve needs the square augmented structure")
    w = matrix.window
    diag = w[-1]
    if diag == 0.0:
        raise SingularMatrix("zero diagonal in band window")
    na = matrix.aux_count
    bw = matrix.bandwidth
    nb = matrix.band_rows
    t = matrix.n_cols
    y = np.empty(t)
    for i in range(t - 1, -1, -1):
        acc = b[i]
        # column i of A holds window[j] in band row r = i - j (strictly
        # below the transpose diagonal when na + r > i, i.e. j < na)
        for j in range(bw):
            r = i - j
            if 0 <= r < nb and na + r > i:
                acc -= w[j] * y[na + r]
        y[i] = acc / (diag if i >= na else 1.0)
    return y


def solve_gmres(
    system: AugmentedSystem,
    tol: float,
    max_iter: Optional[int] = None,
    restart: int = 50,
) -> np.ndarray:
    """Restarted GMRES from the zero initial guess.

    Stops when the relative residual ||b - Ax||_2 / ||b||_2 drops to `tol`;
    raises :class:`NotConverged` (carrying the best iterate) once the total
    inner-iteration budget `max_iter` (default 10 * size) is spent.
    """
    matrix = system.matrix
    b = np.asarray(system.rhs, dtype=float)
    n = matrix.n_rows
    if max_iter is None:
        max_iter = 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)

    x = np.zeros(n)
    best_x = x.copy()
    best_res = 1.0
    total = 0
    while total < max_iter:
        r = b - matrix.matvec(x)
        beta = float(np.linalg.norm(r))
        rel = beta / bnorm
        if rel < best_res:
            best_res, best_x = rel, x.copy()
        if rel <= tol:
            return x
        m = min(restart, max_iter - total)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            wv = matrix.matvec(V[k])
            for i in range(k + 1):
                H[i, k] = np.dot(V[i], wv)
                wv -= H[i, k] * V[i]
            hk1 = float(np.linalg.norm(wv))
            H[k + 1, k] = hk1
            if hk1 > 0.0:
                V[k + 1] = wv / hk1
            for i in range(k):
                hi = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = hi
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_used = k + 1
            if abs(g[k + 1]) / bnorm <= tol or hk1 == 0.0 or total >= max_iter:
                break
        y = np.zeros(k_used)
        for i in range(k_used - 1, -1, -1):
            y[i] = (g[i] - np.dot(H[i, i + 1 : k_used], y[i + 1 : k_used])) / H[i, i]
        x = x + V[:k_used].T @ y
    r = b - matrix.matvec(x)
    rel = float(np.linalg.norm(r)) / bnorm
    if rel < best_res:
        best_res, best_x = rel, x.copy()
    if best_res <= tol:
        return best_x
    raise NotConverged(
        f"GMRES stalled at relative residual {best_res:.3e} after {total} iterations",
        best_iterate=best_x,
        residual=best_res,
        iterations=total,
    )


@dataclass
class GridDiscoveryResult:
    """Per-component grid values of the recovered field at indices s..e(N)."""

    scheme: LmmScheme
    first: int
    last: int
    values: np.ndarray            # shape (t(N), d)
    converged: list[bool] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)


def grid_discovery(
    scheme: LmmScheme,
    data: "TrajectoryData",
    solver: str = "fs",
    tol: float = 1e-4,
    max_iter: Optional[int] = None,
    restart: int = 50,
) -> GridDiscoveryResult:
    """Solve the augmented system for every component of the field.

    `solver` is "fs" (forward substitution) or "gmres".  A GMRES run that
    hits its iteration cap contributes its best iterate and is flagged in
    `converged`, so sweeps over pathological schemes still produce data.
    """
    if solver not in ("fs", "gmres"):
        raise ValueError(f"unknown solver {solver!r}")
    idx = scheme_indices(scheme, data.N)
    d = data.states.shape[1]
    values = np.empty((idx.count, d))
    converged: list[bool] = []
    residuals: list[float] = []
    for j in range(d):
        system = build_augmented_system(scheme, data, j)
        if solver == "fs":
            x = solve_forward_substitution(system)
            ok = True
            res = 0.0
        else:
            try:
                x = solve_gmres(system, tol=tol, max_iter=max_iter, restart=restart)
                ok = True
                res = float(
                    np.linalg.norm(system.rhs - system.matrix.matvec(x))
                    / np.linalg.norm(system.rhs)
                )
            except NotConverged as exc:
                x = exc.best_iterate
                ok = False
                res = exc.residual
        values[:, j] = x
        converged.append(ok)
        residuals.append(res)
    return GridDiscoveryResult(scheme, idx.first, idx.last, values, converged, residuals)
