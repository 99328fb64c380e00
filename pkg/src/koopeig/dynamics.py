"""Vector fields, adaptive flow integration, event detection, benchmark systems.

The numerical integrator is the Dormand-Prince 5(4) embedded pair
(scipy's ``RK45``) driven through an explicit stepping loop so that step
counts, blow-up detection and step-underflow detection stay under our
control.  Systems that admit a closed-form flow expose it on the
``VectorField``; ``flow(..., method="auto")`` prefers it when present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.integrate import RK45

from .errors import BlowUpError, NoCrossingError, StepUnderflowError
from . import manifolds

__all__ = [
    "VectorField",
    "FlowResult",
    "BenchmarkSystem",
    "flow",
    "flow_to_event",
    "make_system",
    "system_names",
    "DEFAULT_TOL",
    "DEFAULT_BLOWUP_BOUND",
]

DEFAULT_TOL = 1e-10
DEFAULT_BLOWUP_BOUND = 1e12
STEP_FLOOR = 1e-14
BISECT_CAP = 80
# Sampling resolution of the event scan used on closed-form trajectories.
CLOSED_SCAN_POINTS = 128


@dataclass(frozen=True)
class VectorField:
    """Right-hand side of an autonomous ODE on a d-dimensional state space."""

    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    name: str = "field"
    closed_form_flow: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class FlowResult:
    state: np.ndarray
    time_elapsed: float
    steps_taken: int


@dataclass(frozen=True)
class BenchmarkSystem:
    """A named vector field bundled with a default data manifold and, when
    one is known in closed form, a reference eigenfunction for certification."""

    field: VectorField
    default_manifold: Optional["manifolds.DataManifold"]
    default_t_window: tuple[float, float]
    oracle_eigenfunction: Optional[object] = None


def _check_state(field: VectorField, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (field.dim,):
        raise ValueError(f"state has dimension {x0.shape[0]}, field expects {field.dim}")
    return x0


def _closed_eval(field: VectorField, x0: np.ndarray, t: float, blowup_bound: float) -> np.ndarray:
    y = field.closed_form_flow(x0, t)
    n2 = float(y @ y)
    if not math.isfinite(n2) or n2 > blowup_bound * blowup_bound:
        raise BlowUpError(
            f"closed-form flow of '{field.name}' left the bound {blowup_bound:g} at t={t:g}",
            time=t,
            state=y,
        )
    return y


def _march(
    field: VectorField,
    x0: np.ndarray,
    sign: float,
    span: float,
    tol: float,
    blowup_bound: float,
    max_steps: int = 1_000_000,
) -> Iterator[tuple[float, np.ndarray, float, np.ndarray, RK45]]:
    """Step the Dormand-Prince pair over tau in [0, span] along sign*F.

    Yields (tau_old, y_old, tau_new, y_new, solver) per accepted step; the
    solver's dense output interpolates the step just taken.
    """
    rhs = field.rhs

    def f(_t, y):
        d = np.asarray(rhs(y), dtype=float)
        return d if sign > 0 else -d

    solver = RK45(f, 0.0, x0, t_bound=span, rtol=tol, atol=tol)
    steps = 0
    while solver.status == "running":
        tau_old, y_old = solver.t, solver.y.copy()
        msg = solver.step()
        steps += 1
        y = solver.y
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > blowup_bound:
            raise BlowUpError(
                f"trajectory of '{field.name}' exceeded the bound {blowup_bound:g} "
                f"at tau={solver.t:g}",
                time=sign * solver.t,
                state=y.copy(),
            )
        if solver.status == "failed" or (
            solver.status == "running" and solver.step_size is not None and solver.step_size < STEP_FLOOR
        ):
            # A collapsing step with an already-enormous state is the numerical
            # signature of finite-time blow-up, not of a pathological field.
            if np.linalg.norm(y) > 1e-2 * blowup_bound:
                raise BlowUpError(
                    f"trajectory of '{field.name}' is blowing up near tau={solver.t:g}",
                    time=sign * solver.t,
                    state=y.copy(),
                )
            raise StepUnderflowError(
                msg or f"step size below {STEP_FLOOR:g} at tau={solver.t:g}"
            )
        if steps > max_steps:
            raise StepUnderflowError(f"exceeded {max_steps} steps before tau={span:g}")
        yield tau_old, y_old, solver.t, y.copy(), solver


def flow(
    field: VectorField,
    x0,
    t: float,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    max_steps: int = 1_000_000,
) -> FlowResult:
    """Advance x0 by time t along the field.

    Negative t integrates the reversed field.  ``method`` is "auto"
    (closed form when the field has one, else numeric), "rk45", or "exact".
    """
    x0 = _check_state(field, x0)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "exact" if field.closed_form_flow is not None else "rk45"
    if method == "exact":
        if field.closed_form_flow is None:
            raise ValueError(f"field '{field.name}' has no closed-form flow")
        if t == 0.0:
            return FlowResult(x0.copy(), 0.0, 0)
        return FlowResult(_closed_eval(field, x0, t, blowup_bound), t, 0)
    if method != "rk45":
        raise ValueError(f"unknown method {method!r}")
    if t == 0.0:
        return FlowResult(x0.copy(), 0.0, 0)
    sign = 1.0 if t > 0 else -1.0
    steps = 0
    y = x0
    for _, _, _, y, _ in _march(field, x0, sign, abs(t), tol, blowup_bound, max_steps):
        steps += 1
    return FlowResult(y, t, steps)


def _bisect_event(
    event: Callable[[np.ndarray], float],
    state_at: Callable[[float], np.ndarray],
    lo: float,
    hi: float,
    g_lo: float,
    tol: float,
) -> tuple[float, np.ndarray]:
    """Shrink [lo, hi] with a sign change of event(state_at(.)) until |event| < tol."""
    tau, y = hi, state_at(hi)
    g = event(y)
    for _ in range(BISECT_CAP):
        if abs(g) < tol:
            break
        mid = 0.5 * (lo + hi)
        y_mid = state_at(mid)
        g_mid = event(y_mid)
        if g_lo * g_mid <= 0.0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
        tau, y, g = mid, y_mid, g_mid
    return tau, y


def find_crossings(
    field: VectorField,
    x0,
    event: Callable[[np.ndarray], float],
    sign: float,
    budget: float,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
    max_count: int = 1,
) -> list[tuple[float, np.ndarray]]:
    """Locate up to max_count sign changes of event along sign*F over [0, budget].

    Each crossing is refined by bisection to |event| < tol.  Blow-up or step
    underflow occurring after at least one crossing means the orbit left the
    domain and simply ends the scan; before any crossing it propagates.
    """
    x0 = _check_state(field, x0)
    if method == "auto":
        method = "exact" if field.closed_form_flow is not None else "rk45"
    found: list[tuple[float, np.ndarray]] = []

    if method == "exact":
        # Adaptive scan: bound the state jump per step and halve on blow-up,
        # so crossings right before a finite-time escape are still bracketed.
        dt0 = budget / CLOSED_SCAN_POINTS
        dt_max = budget / 16.0
        tau_prev, y_prev, g_prev = 0.0, x0, event(x0)
        dt = dt0
        blew_up = None
        while tau_prev < budget:
            tau = min(tau_prev + dt, budget)
            try:
                y = _closed_eval(field, x0, sign * tau, blowup_bound)
            except BlowUpError as exc:
                if dt < 1e-15 * budget:
                    blew_up = exc
                    break  # orbit escapes here; nothing beyond is reachable
                dt *= 0.5
                continue
            if np.linalg.norm(y - y_prev) > 0.25 * (1.0 + np.linalg.norm(y_prev)):
                if dt < 1e-15 * budget:
                    blew_up = BlowUpError("state jump does not resolve", time=tau)
                    break
                dt *= 0.5
                continue
            g = event(y)
            if g_prev * g <= 0.0 and (g_prev != 0.0 or g != 0.0):
                tau_c, y_c = _bisect_event(
                    event,
                    lambda s: _closed_eval(field, x0, sign * s, blowup_bound),
                    tau_prev,
                    tau,
                    g_prev,
                    tol,
                )
                found.append((tau_c, y_c))
                if len(found) >= max_count:
                    return found
            tau_prev, y_prev, g_prev = tau, y, g
            dt = min(dt * 1.4, dt_max)
        if blew_up is not None and not found:
            raise blew_up
        return found

    g_prev = event(x0)
    try:
        for tau_old, _y_old, tau_new, y_new, solver in _march(
            field, x0, sign, budget, tol, blowup_bound
        ):
            g = event(y_new)
            if g_prev * g <= 0.0 and (g_prev != 0.0 or g != 0.0):
                dense = solver.dense_output()
                tau_c, y_c = _bisect_event(
                    event, lambda s: dense(s), tau_old, tau_new, g_prev, tol
                )
                found.append((tau_c, y_c))
                if len(found) >= max_count:
                    return found
            g_prev = g
    except (BlowUpError, StepUnderflowError):
        if not found:
            raise
    return found


def flow_to_event(
    field: VectorField,
    x0,
    event: Callable[[np.ndarray], float],
    direction: str = "backward",
    t_max: float = 10.0,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
    blowup_bound: float = DEFAULT_BLOWUP_BOUND,
) -> tuple[np.ndarray, float]:
    """Integrate until the event function changes sign; refine by bisection.

    Returns (crossing state, time of flight).  The time of flight is the
    non-negative elapsed flow time; the direction carries its sign.
    """
    x0 = _check_state(field, x0)
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if abs(event(x0)) < tol:
        return x0.copy(), 0.0
    sign = -1.0 if direction == "backward" else 1.0
    crossings = find_crossings(
        field, x0, event, sign, t_max, tol,
        method=method, blowup_bound=blowup_bound, max_count=1,
    )
    if not crossings:
        raise NoCrossingError(
            f"event did not change sign within {t_max:g} time units ({direction})"
        )
    tau, y = crossings[0]
    return y, tau


# ---------------------------------------------------------------------------
# Benchmark systems
# ---------------------------------------------------------------------------


def _lin1d(a: float = 1.0) -> BenchmarkSystem:
    a = float(a)

    def rhs(x):
        return a * x

    def closed(x, t):
        g = a * t
        if g > 700.0:
            raise BlowUpError("linear growth overflowed", time=t)
        return x * math.exp(g)

    fld = VectorField(1, rhs, name=f"lin1d(a={a:g})", closed_form_flow=closed)
    mani = manifolds.point_manifold(1.0, name="lin1d-anchor")
    from .eigenfunctions import ClosedFormEigenfunction

    oracle = ClosedFormEigenfunction(complex(a), lambda x: complex(x[0]), fld, name="state-observer")
    return BenchmarkSystem(fld, mani, (-1.0, 1.0), oracle)


def _lin2d(a1: float = 1.0, a2: float = 2.0) -> BenchmarkSystem:
    a = np.array([float(a1), float(a2)])

    def rhs(x):
        return a * x

    def closed(x, t):
        g = a * t
        if np.max(g) > 700.0:
            raise BlowUpError("linear growth overflowed", time=t)
        return x * np.exp(g)

    fld = VectorField(2, rhs, name=f"lin2d(a=({a1:g},{a2:g}))", closed_form_flow=closed)
    mani = manifolds.segment_manifold(
        (0.3, 1.0), (2.2, 1.0), n=121, s_range=(0.3, 2.2), name="horizontal-line"
    )
    from .eigenfunctions import ClosedFormEigenfunction

    oracle = ClosedFormEigenfunction(complex(a2), lambda x: complex(x[1]), fld, name="x2-observer")
    return BenchmarkSystem(fld, mani, (0.0, 1.2), oracle)


def _hopf(mu: float = 1.0) -> BenchmarkSystem:
    mu = float(mu)

    def rhs(x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([-x[1] + x[0] * (mu - r2), x[0] + x[1] * (mu - r2)])

    closed = None
    if mu > 0:

        def closed(x, t):
            r0 = math.hypot(x[0], x[1])
            if r0 == 0.0:
                return np.zeros(2)
            th = math.atan2(x[1], x[0]) + t
            if t >= 0.0:
                denom = (mu - r0 * r0) * math.exp(-2.0 * mu * t) + r0 * r0
                r = math.sqrt(mu) * r0 / math.sqrt(denom)
            else:
                if 2.0 * mu * t < -700.0:
                    e2 = 0.0
                else:
                    e2 = math.exp(2.0 * mu * t)
                denom = mu - r0 * r0 + e2 * r0 * r0
                if denom <= 0.0:
                    raise BlowUpError(
                        "backward Hopf orbit escapes in finite time", time=t
                    )
                r = math.exp(mu * t) * math.sqrt(mu) * r0 / math.sqrt(denom)
            return np.array([r * math.cos(th), r * math.sin(th)])

    fld = VectorField(2, rhs, name=f"hopf(mu={mu:g})", closed_form_flow=closed)
    mani = manifolds.circle_manifold((0.0, 0.0), 5.0, n=257, name="R5-circle")
    return BenchmarkSystem(fld, mani, (0.0, 4.0), None)


def _vdp() -> BenchmarkSystem:
    def rhs(x):
        return np.array([x[1], x[1] * (1.0 - x[0] * x[0]) - x[0]])

    fld = VectorField(2, rhs, name="vdp")
    mani = manifolds.segment_manifold(
        (1.0, 0.5), (2.0, 1.5), n=121, name="vdp-segment"
    )
    return BenchmarkSystem(fld, mani, (0.0, 2.0), None)


def _blowup() -> BenchmarkSystem:
    def rhs(x):
        return x * x

    def closed(x, t):
        denom = 1.0 - x[0] * t
        if denom <= 1e-300:
            raise BlowUpError("quadratic growth blows up in finite time", time=t)
        return x / denom

    fld = VectorField(1, rhs, name="blowup", closed_form_flow=closed)
    mani = manifolds.point_manifold(1.0, name="blowup-anchor")
    from .eigenfunctions import ClosedFormEigenfunction

    oracle = ClosedFormEigenfunction(
        1.0 + 0.0j, lambda x: complex(math.exp(-1.0 / x[0])), fld, name="exp(-1/x)"
    )
    return BenchmarkSystem(fld, mani, (-1.0, 0.5), oracle)


def _action_angle() -> BenchmarkSystem:
    def rhs(x):
        return np.array([0.0, x[0]])

    def closed(x, t):
        return np.array([x[0], x[1] + x[0] * t])

    fld = VectorField(2, rhs, name="action_angle", closed_form_flow=closed)
    mani = manifolds.segment_manifold(
        (0.5, 0.2), (2.5, 0.2), n=121, s_range=(0.5, 2.5), name="radial-ray"
    )
    return BenchmarkSystem(fld, mani, (0.0, 0.8), None)


_REGISTRY: dict[str, Callable[..., BenchmarkSystem]] = {
    "lin1d": _lin1d,
    "lin2d": _lin2d,
    "hopf": _hopf,
    "vdp": _vdp,
    "blowup": _blowup,
    "action_angle": _action_angle,
}


def system_names() -> list[str]:
    return sorted(_REGISTRY)


def make_system(name: str, **params) -> BenchmarkSystem:
    """Instantiate a benchmark system by name with optional parameters."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; available: {', '.join(system_names())}"
        ) from None
    return factory(**params)
