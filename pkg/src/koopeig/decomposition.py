"""Greedy construction of least-squares-optimal eigenfunction dictionaries.

A characteristic grid S[i, j] = rho_{r_j}(embed(s_i)) turns the continuous
fit  min_{lambda, h} || phi_{lambda,h} - q ||  into a sequence of structured
least-squares problems: for fixed lambda the design matrix is E(lambda)
kron I, so the fit decouples into one scalar normal equation per manifold
node.  Sweeping lambda and repeatedly fitting the residual yields a small
dictionary of genuine eigenfunctions tailored to the target observable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import DEFAULT_TOL, VectorField, flow
from .eigenfunctions import OpenEigenfunction
from .errors import EmptyTargetError
from .manifolds import DataFunction, DataManifold

__all__ = [
    "CharacteristicGrid",
    "TargetSample",
    "FitResult",
    "SweepResult",
    "Term",
    "DecompositionResult",
    "build_grid",
    "fit_h",
    "sweep_lambda",
    "greedy_decompose",
    "default_candidates",
]

COEFF_FLOOR = 1e-14
DEGENERATE_FLOOR = 1e-300
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CharacteristicGrid:
    """Flow images S[i, j] of the manifold nodes s_i at the time nodes r_j."""

    s_nodes: np.ndarray  # n+1 parameters on the manifold
    r_nodes: np.ndarray  # m+1 times spanning the window, r_nodes[0] = t1
    points: np.ndarray  # (n+1, m+1, d) states
    field: VectorField
    manifold: DataManifold
    t_window: tuple[float, float]

    @property
    def n_s(self) -> int:
        return self.s_nodes.size

    @property
    def n_r(self) -> int:
        return self.r_nodes.size


def build_grid(
    field: VectorField,
    manifold: DataManifold,
    t_window: tuple[float, float],
    n: int,
    m: int,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
) -> CharacteristicGrid:
    """Uniform (n+1) x (m+1) characteristic grid over the window.

    Each time column continues the integration of the previous one instead
    of restarting from the manifold, so the cost is one traversal of the
    window per node.
    """
    if n < 0 or m < 0:
        raise ValueError("n and m must be non-negative")
    t1, t2 = float(t_window[0]), float(t_window[1])
    if t2 < t1:
        raise ValueError("t_window must be increasing")
    s_nodes = (
        np.linspace(manifold.s_min, manifold.s_max, n + 1)
        if n > 0
        else np.array([manifold.s_min])
    )
    r_nodes = np.linspace(t1, t2, m + 1) if m > 0 else np.array([t1])
    d = manifold.dim
    points = np.empty((s_nodes.size, r_nodes.size, d))
    fwd = np.nonzero(r_nodes >= 0.0)[0]
    bwd = np.nonzero(r_nodes < 0.0)[0][::-1]  # walk 0 -> t1
    for i, s in enumerate(s_nodes):
        anchor = np.asarray(manifold.embed(s), dtype=float)
        y, r_prev = anchor, 0.0
        for j in fwd:
            y = flow(field, y, r_nodes[j] - r_prev, tol, method=method).state
            r_prev = r_nodes[j]
            points[i, j] = y
        y, r_prev = anchor, 0.0
        for j in bwd:
            y = flow(field, y, r_nodes[j] - r_prev, tol, method=method).state
            r_prev = r_nodes[j]
            points[i, j] = y
    return CharacteristicGrid(s_nodes, r_nodes, points, field, manifold, (t1, t2))


@dataclass(frozen=True)
class TargetSample:
    """Target observable sampled on a characteristic grid."""

    q_values: np.ndarray  # (n+1, m+1) complex

    def __post_init__(self):
        q = np.asarray(self.q_values, dtype=complex)
        if q.ndim != 2:
            raise ValueError("q_values must be a 2-d array")
        object.__setattr__(self, "q_values", q)

    @classmethod
    def from_function(cls, grid: CharacteristicGrid, q: Callable[[np.ndarray], complex]) -> "TargetSample":
        vals = np.empty((grid.n_s, grid.n_r), dtype=complex)
        for i in range(grid.n_s):
            for j in range(grid.n_r):
                vals[i, j] = complex(q(grid.points[i, j]))
        return cls(vals)

    @property
    def b(self) -> np.ndarray:
        """Column-major flattening matching the block structure of E kron I."""
        return self.q_values.flatten(order="F")


@dataclass(frozen=True)
class FitResult:
    lam: complex
    h_values: np.ndarray
    residual_norm: float
    degenerate: bool  # all-node e^{lambda r} column collapsed below floor


def _time_weights(lam: complex, r_nodes: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        e = np.exp(complex(lam) * r_nodes)
    if not np.all(np.isfinite(e.view(float))):
        raise ValueError(f"e^(lambda r) overflows for lambda={lam}")
    return e


def fit_h(
    grid: CharacteristicGrid,
    target: TargetSample,
    lam: complex,
    *,
    method: str = "decoupled",
) -> FitResult:
    """Least-squares-optimal data values for one eigenvalue.

    The decoupled path solves the per-node normal equation
    h_i = sum_j conj(e^{lambda r_j}) q_ij / sum_j |e^{lambda r_j}|^2;
    the dense path assembles E kron I and calls a generic solver, and
    exists to cross-check the closed form.
    """
    q = target.q_values
    if q.shape != (grid.n_s, grid.n_r):
        raise ValueError(f"target shaped {q.shape}, grid is {(grid.n_s, grid.n_r)}")
    e = _time_weights(lam, grid.r_nodes)
    denom = float(np.sum(np.abs(e) ** 2))
    degenerate = denom < DEGENERATE_FLOOR
    if degenerate:
        h = np.zeros(grid.n_s, dtype=complex)
    elif method == "decoupled":
        h = (q @ np.conj(e)) / denom
    elif method == "dense":
        a = np.kron(e.reshape(-1, 1), np.eye(grid.n_s))
        h = np.linalg.lstsq(a, target.b, rcond=None)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.linalg.norm(np.outer(h, e) - q))
    return FitResult(complex(lam), h, residual, degenerate)


@dataclass(frozen=True)
class SweepResult:
    best_lambda: complex
    best_fit: FitResult
    best_index: int
    candidates: np.ndarray
    residual_curve: np.ndarray


def default_candidates(lo: float = -5.0, hi: float = 5.0, count: int = 101) -> np.ndarray:
    return np.linspace(lo, hi, count).astype(complex)


def sweep_lambda(
    grid: CharacteristicGrid,
    target: TargetSample,
    candidates: Sequence[complex],
    *,
    threads: int = 1,
) -> SweepResult:
    """Fit every candidate eigenvalue and keep the argmin.

    Ties break toward the smallest |lambda|, then the smallest |Im lambda|.
    """
    cands = np.asarray(candidates, dtype=complex)
    if cands.size == 0:
        raise ValueError("candidate list is empty")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(lambda lam: fit_h(grid, target, lam), cands))
    else:
        fits = [fit_h(grid, target, lam) for lam in cands]
    curve = np.array([f.residual_norm for f in fits])
    best = min(
        range(cands.size),
        key=lambda k: (curve[k], abs(cands[k]), abs(cands[k].imag)),
    )
    return SweepResult(complex(cands[best]), fits[best], best, cands, curve)


@dataclass(frozen=True)
class Term:
    eigenvalue: complex
    data: DataFunction
    coefficient: float
    phi_grid: np.ndarray  # normalized eigenfunction samples, (n+1, m+1)
    eigenfunction: OpenEigenfunction


@dataclass(frozen=True)
class DecompositionResult:
    terms: list[Term]
    residual_norms: np.ndarray  # ||R_k|| for k = 0..K, residual_norms[0] = ||b||
    grid: CharacteristicGrid
    lambda_curves: list[SweepResult]
    b: np.ndarray  # flattened target
    final_residual: np.ndarray  # flattened R_K

    def reconstruction_defect(self) -> float:
        """|| b - sum_k c_k phi_k - R_K ||: bookkeeping exactness of the recursion."""
        total = np.zeros(self.grid.n_s * self.grid.n_r, dtype=complex)
        for term in self.terms:
            total += term.coefficient * term.phi_grid.flatten(order="F")
        return float(np.linalg.norm(self.b - total - self.final_residual))


def _refine_lambda(
    grid: CharacteristicGrid,
    target: TargetSample,
    cands: np.ndarray,
    best_idx: int,
    width_tol: float = 1e-3,
) -> Optional[FitResult]:
    """Golden-section polish of the residual over real lambda near the argmin."""
    lo = float(cands[max(best_idx - 1, 0)].real)
    hi = float(cands[min(best_idx + 1, cands.size - 1)].real)
    if hi <= lo:
        return None
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fit_c = fit_h(grid, target, c)
    fit_d = fit_h(grid, target, d)
    best = min(fit_c, fit_d, key=lambda f: f.residual_norm)
    while b - a > width_tol:
        if fit_c.residual_norm < fit_d.residual_norm:
            b, d, fit_d = d, c, fit_c
            c = b - GOLDEN * (b - a)
            fit_c = fit_h(grid, target, c)
        else:
            a, c, fit_c = c, d, fit_d
            d = a + GOLDEN * (b - a)
            fit_d = fit_h(grid, target, d)
        cur = fit_c if fit_c.residual_norm < fit_d.residual_norm else fit_d
        if cur.residual_norm < best.residual_norm:
            best = cur
    return best


def greedy_decompose(
    grid: CharacteristicGrid,
    target: TargetSample,
    candidates: Sequence[complex],
    K: int,
    stop_tol: float = 1e-9,
    *,
    refine: bool = True,
    threads: int = 1,
    eig_tol: float = DEFAULT_TOL,
) -> DecompositionResult:
    """Successively fit the residual with the best single eigenfunction.

    Per stage: sweep the candidate eigenvalues against the current residual,
    take p_k = E(lambda_k) kron h_k, normalize by c_k = ||p_k||, subtract.
    Stops early when c_k underflows or ||R_k||/||b|| < stop_tol.  Every term
    is returned as a full eigenfunction object so the eigen-relation can be
    certified downstream.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    cands = np.asarray(candidates, dtype=complex)
    b = target.b
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        raise EmptyTargetError("target sample is identically zero")
    all_real = bool(np.all(cands.imag == 0.0))
    term_manifold = grid.manifold.with_samples(grid.n_s)

    residual_q = target.q_values.copy()
    residual_norms = [b_norm]
    terms: list[Term] = []
    curves: list[SweepResult] = []
    for _ in range(K):
        stage_target = TargetSample(residual_q)
        sweep = sweep_lambda(grid, stage_target, cands, threads=threads)
        best = sweep.best_fit
        if refine and all_real and cands.size > 1:
            polished = _refine_lambda(grid, stage_target, cands, sweep.best_index)
            if polished is not None and polished.residual_norm < best.residual_norm:
                best = polished
        curves.append(sweep)
        e = _time_weights(best.lam, grid.r_nodes)
        p = np.outer(best.h_values, e)
        c = float(np.linalg.norm(p))
        if c < COEFF_FLOOR:
            break
        phi_bar = p / c
        residual_q = residual_q - p
        residual_norms.append(float(np.linalg.norm(residual_q)))
        data = DataFunction(grid.s_nodes.copy(), best.h_values.copy())
        eig = OpenEigenfunction(
            best.lam, data, term_manifold, grid.field, grid.t_window, tol=eig_tol
        )
        terms.append(Term(best.lam, data, c, phi_bar, eig))
        if residual_norms[-1] / b_norm < stop_tol:
            break
    return DecompositionResult(
        terms,
        np.array(residual_norms),
        grid,
        curves,
        b,
        residual_q.flatten(order="F"),
    )
