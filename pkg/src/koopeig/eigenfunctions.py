"""Eigenfunction construction by characteristic pullback and its consistency checks.

An open eigenfunction on the swept domain U = union_{t in [t1,t2]} rho_t(Lambda)
is evaluated pointwise as  phi(x) = h(s*(x)) * exp(lambda * r*(x)),  where
(r*, s*) locate the unique intersection of the orbit through x with the data
manifold.  Everything downstream (residual certification, the algebraic
semigroup of powers, data restatement, level-set transversality) builds on
that single evaluation primitive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_BLOWUP_BOUND,
    DEFAULT_TOL,
    VectorField,
    find_crossings,
    flow,
)
from .errors import (
    AmbiguousCrossingError,
    BlowUpError,
    BranchCutError,
    NotInDomainError,
    StepUnderflowError,
)
from .manifolds import DataFunction, DataManifold

__all__ = [
    "Pullback",
    "pullback",
    "OpenEigenfunction",
    "ClosedFormEigenfunction",
    "ProductEigenfunction",
    "algebraic_combine",
    "eig_power",
    "koopman_residual",
    "orbit_scaling_defect",
    "restate_data",
    "levelset_transversality",
    "same_primary_class",
    "evaluate_points",
    "PointValue",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PRIMARY_CLASS_THRESHOLD = 1e-4


@dataclass(frozen=True)
class Pullback:
    """Time of flight r*, manifold parameter s* and foot point of a pullback."""

    r_star: float
    s_star: float
    foot: np.ndarray


def _golden_min(f: Callable[[float], float], lo: float, hi: float, iters: int = 70) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < 1e-14 * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _recover_parameter(manifold: DataManifold, foot: np.ndarray) -> float:
    """Nearest grid node, then golden-section refinement of |embed(s) - foot|."""
    grid = manifold.parameter_grid()
    if grid.size == 1:
        return float(grid[0])
    pts = manifold.sample_points()
    i = int(np.argmin(np.linalg.norm(pts - foot, axis=1)))
    ds = grid[1] - grid[0]
    lo, hi = grid[i] - ds, grid[i] + ds
    if not manifold.closed:
        lo, hi = max(lo, manifold.s_min), min(hi, manifold.s_max)

    def dist2(s):
        d = np.asarray(manifold.embed(s), float) - foot
        return float(d @ d)

    s = _golden_min(dist2, lo, hi)
    return manifold.wrap(s)


def pullback(
    field: VectorField,
    manifold: DataManifold,
    t_window: tuple[float, float],
    x,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
    check_ambiguity: bool = True,
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> Pullback:
    """Locate the in-window intersection of the orbit through x with the manifold.

    Searches backward over the downstream part of the window first and, when
    t1 < 0 and the backward search fails, forward over the upstream part.
    Raises NotInDomainError when no intersection exists in the window and
    AmbiguousCrossingError when the orbit meets the manifold more than once
    in the same direction (a nonrecurrence violation).
    """
    if manifold.surface is None:
        raise ValueError("manifold carries no supporting-surface distance")
    t1, t2 = float(t_window[0]), float(t_window[1])
    if not (t1 <= 0.0 <= t2):
        raise ValueError("t_window must contain 0")
    x = np.asarray(x, dtype=float).reshape(-1)
    span = t2 - t1
    slack = max(1e-9, 1e-3 * span)
    on_tol = max(1e-9, 1e-6 * manifold.extent())

    def on_manifold(state: np.ndarray) -> Optional[float]:
        s = _recover_parameter(manifold, state)
        if np.linalg.norm(np.asarray(manifold.embed(s), float) - state) <= on_tol:
            return s
        return None

    if abs(manifold.surface(x)) < tol:
        s = on_manifold(x)
        if s is not None:
            return Pullback(0.0, s, x.copy())

    def search(sign: float, budget: float) -> list[tuple[float, np.ndarray, float]]:
        if budget <= 0.0:
            return []
        try:
            crossings = find_crossings(
                field, x, manifold.surface, sign, budget, tol,
                method=method, blowup_bound=blowup_bound,
                max_count=4 if check_ambiguity else 1,
            )
        except (BlowUpError, StepUnderflowError):
            # Orbit escapes before meeting the manifold: nothing on this side.
            return []
        hits = []
        for tau, state in crossings:
            s = on_manifold(state)
            if s is not None:
                hits.append((tau, state, s))
                if not check_ambiguity:
                    break
        return hits

    hits = search(-1.0, t2 + slack)
    direction = 1.0
    if not hits and t1 < 0.0:
        hits = search(1.0, -t1 + slack)
        direction = -1.0
    if not hits:
        raise NotInDomainError(
            "orbit does not meet the data manifold inside the time window"
        )
    if check_ambiguity and len(hits) > 1:
        raise AmbiguousCrossingError(
            f"orbit meets the data manifold {len(hits)} times in one direction"
        )
    tau, state, s = hits[0]
    return Pullback(direction * tau, s, state)


class _EigenfunctionBase:
    """Pointwise-evaluable eigenfunction: has .eigenvalue, .field, __call__."""

    eigenvalue: complex
    field: VectorField

    def __call__(self, x) -> complex:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class OpenEigenfunction(_EigenfunctionBase):
    """Eigenfunction defined by data on a transverse manifold over a time window."""

    eigenvalue: complex
    data: DataFunction
    manifold: DataManifold
    field: VectorField
    t_window: tuple[float, float]
    tol: float = DEFAULT_TOL
    method: str = "auto"
    check_ambiguity: bool = True
    name: str = ""

    def __post_init__(self):
        t1, t2 = self.t_window
        if not (t1 <= 0.0 <= t2):
            raise ValueError("t_window must contain 0")
        object.__setattr__(self, "eigenvalue", complex(self.eigenvalue))

    def pullback(self, x) -> Pullback:
        return pullback(
            self.field,
            self.manifold,
            self.t_window,
            x,
            self.tol,
            method=self.method,
            check_ambiguity=self.check_ambiguity,
        )

    def __call__(self, x) -> complex:
        pb = self.pullback(x)
        return self.data(pb.s_star) * cmath.exp(self.eigenvalue * pb.r_star)


@dataclass(frozen=True)
class ClosedFormEigenfunction(_EigenfunctionBase):
    eigenvalue: complex
    fn: Callable[[np.ndarray], complex]
    field: VectorField
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "eigenvalue", complex(self.eigenvalue))

    def __call__(self, x) -> complex:
        return complex(self.fn(np.asarray(x, dtype=float)))


def _safe_power(z: complex, alpha: float) -> complex:
    """Principal-branch-safe power; non-integer exponents need z on [0, inf)."""
    if alpha == 0.0:
        return 1.0 + 0.0j
    if float(alpha).is_integer():
        if z == 0 and alpha < 0:
            raise BranchCutError("negative integer power of zero")
        return complex(z) ** int(alpha)
    im_tol = 1e-12 * max(abs(z), 1.0)
    if abs(z.imag) > im_tol or z.real < 0.0:
        raise BranchCutError(
            f"non-integer power {alpha:g} of non-positive-real value {z:.6g}"
        )
    if z.real == 0.0:
        if alpha < 0:
            raise BranchCutError("negative power of zero")
        return 0.0 + 0.0j
    return complex(z.real ** alpha)


@dataclass(frozen=True)
class ProductEigenfunction(_EigenfunctionBase):
    """Pointwise product of powers of eigenfunctions; eigenvalues combine linearly."""

    factors: tuple[tuple[_EigenfunctionBase, float], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("need at least one factor")
        base = self.factors[0][0].field
        for eig, _ in self.factors[1:]:
            if eig.field is not base:
                raise ValueError("factors must share the same vector field")

    @property
    def eigenvalue(self) -> complex:
        return sum(alpha * complex(eig.eigenvalue) for eig, alpha in self.factors)

    @property
    def field(self) -> VectorField:
        return self.factors[0][0].field

    def __call__(self, x) -> complex:
        out = 1.0 + 0.0j
        for eig, alpha in self.factors:
            if alpha == 0.0:
                continue
            out *= _safe_power(complex(eig(x)), alpha)
        return out


def algebraic_combine(
    eig1: _EigenfunctionBase, alpha1: float, eig2: _EigenfunctionBase, alpha2: float
) -> ProductEigenfunction:
    """Semigroup combinator: phi1^a1 * phi2^a2 with eigenvalue a1*l1 + a2*l2."""
    return ProductEigenfunction(((eig1, float(alpha1)), (eig2, float(alpha2))))


def eig_power(eig: _EigenfunctionBase, p: float) -> ProductEigenfunction:
    """phi^p with eigenvalue p*lambda."""
    return ProductEigenfunction(((eig, float(p)),))


def koopman_residual(
    eig: _EigenfunctionBase,
    points: Sequence,
    t: float = 0.1,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
) -> float:
    """Worst relative defect of phi(rho_t(x)) = e^{lambda t} phi(x) over the points.

    This is the universal certificate that an object is a genuine
    eigenfunction; it propagates NotInDomainError when a point or its
    t-image leaves the domain.
    """
    lam = complex(eig.eigenvalue)
    factor = cmath.exp(lam * t)
    worst = 0.0
    for x in points:
        phi_x = complex(eig(x))
        y = flow(eig.field, x, t, tol, method=method).state
        phi_y = complex(eig(y))
        defect = abs(phi_y - factor * phi_x) / max(1.0, abs(phi_x))
        worst = max(worst, defect)
    return worst


def orbit_scaling_defect(
    eig: _EigenfunctionBase,
    x,
    r: float,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
) -> float:
    """Absolute defect |phi(rho_r(x)) - phi(x) e^{lambda r}| for one orbit hop."""
    y = flow(eig.field, x, r, tol, method=method).state
    return abs(complex(eig(y)) - complex(eig(x)) * cmath.exp(complex(eig.eigenvalue) * r))


def restate_data(eig: OpenEigenfunction, target: DataManifold) -> DataFunction:
    """Read the eigenfunction on another transverse manifold as a new data function.

    The eigenfunction rebuilt from (lambda, restated data, target manifold)
    agrees with the original wherever their domains overlap.
    """
    values = np.array([complex(eig(p)) for p in target.sample_points()])
    return DataFunction.from_samples(target, values)


def _grad(eig: _EigenfunctionBase, x: np.ndarray, h: float) -> np.ndarray:
    g = np.empty(2, dtype=complex)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        g[i] = (complex(eig(x + e)) - complex(eig(x - e))) / (2.0 * h)
    return g


def levelset_transversality(
    eig1: _EigenfunctionBase,
    eig2: _EigenfunctionBase,
    points: Sequence,
    fd_step: Optional[float] = None,
) -> np.ndarray:
    """|grad(phi1) . perp-grad(phi2)| at each point, by central differences.

    Near-zero everywhere means the two candidates share level sets (one
    primary class); systematically nonzero level-set crossings separate them.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("level-set transversality is defined for planar states")
    if fd_step is None:
        diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        fd_step = 1e-5 * max(diag, 1.0)
    out = np.empty(pts.shape[0])
    for k, x in enumerate(pts):
        g1 = _grad(eig1, x, fd_step)
        g2 = _grad(eig2, x, fd_step)
        out[k] = abs(g1[0] * g2[1] - g1[1] * g2[0])
    return out


def same_primary_class(
    eig1: _EigenfunctionBase,
    eig2: _EigenfunctionBase,
    points: Sequence,
    threshold: float = PRIMARY_CLASS_THRESHOLD,
) -> bool:
    """Numerical level-set equivalence: transversality below threshold everywhere."""
    return bool(np.all(levelset_transversality(eig1, eig2, points) <= threshold))


@dataclass(frozen=True)
class PointValue:
    x: np.ndarray
    phi: complex
    r_star: float
    s_star: float


def evaluate_points(eig: OpenEigenfunction, points: Sequence) -> list[Optional[PointValue]]:
    """Evaluate on many points; None marks points outside the domain."""
    out: list[Optional[PointValue]] = []
    for x in points:
        x = np.asarray(x, dtype=float)
        try:
            pb = eig.pullback(x)
        except (NotInDomainError, AmbiguousCrossingError):
            out.append(None)
            continue
        phi = eig.data(pb.s_star) * cmath.exp(complex(eig.eigenvalue) * pb.r_star)
        out.append(PointValue(x, phi, pb.r_star, pb.s_star))
    return out
