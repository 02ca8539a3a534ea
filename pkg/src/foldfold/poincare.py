"""Half-maps, limit-cycle search, cycle measurement and the time-map fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .bifurcation import (
    BifurcationCoefficients,
    FoldFoldPoint,
    predict_fixed_points,
    predict_z_offset,
)
from .errors import (
    ConvergenceError,
    FoldFoldError,
    GridDesignError,
    InsufficientDataError,
    NoReturnError,
    PreconditionError,
)
from .integrator import IntegrationOptions, Trajectory, flow_to_section, integrate
from .system import MINUS, PLUS, PiecewiseSystem, State, surface_lift, switching_velocity

_CYCLE_OPTS = IntegrationOptions(rtol=1e-12, atol=1e-15)


def half_map(sys: PiecewiseSystem, region: int, x: float, z: float, eps: float,
             opts: IntegrationOptions | None = None, *, reverse: bool = False):
    """Return ``(x', z', T)``: the next surface point along the region field."""
    hit = flow_to_section(sys, region, x, z, eps, opts or _CYCLE_OPTS, reverse=reverse)
    return hit.state.x, hit.state.z, hit.T


@dataclass(frozen=True)
class LimitCycle:
    fixed_point: tuple[float, float]
    partner_point: tuple[float, float]
    period: float
    transit_times: tuple[float, float]
    first_region: int
    eigenvalues: tuple[complex, complex]
    eps: float
    residual: float
    iterations: int

    @property
    def eigenvalue_moduli(self) -> tuple[float, float]:
        return tuple(abs(v) for v in self.eigenvalues)

    @property
    def stable(self) -> bool:
        return max(self.eigenvalue_moduli) < 1.0


def _return_map(sys, first: int, eps: float, opts):
    second = MINUS if first == PLUS else PLUS

    def P(u):
        x1, z1, t1 = half_map(sys, first, u[0], u[1], eps, opts)
        x2, z2, t2 = half_map(sys, second, x1, z1, eps, opts)
        return np.array([x2, z2]), (x1, z1), (t1, t2)

    return P


def first_region_at(sys: PiecewiseSystem, x: float, z: float, eps: float) -> int:
    """Region a cycle through the surface point above ``(x, z)`` enters first."""
    s = State(x, surface_lift(sys.surface, z), z)
    sm = switching_velocity(sys, MINUS, s, eps)
    sp = switching_velocity(sys, PLUS, s, eps)
    if sm > 0 and sp > 0:
        return PLUS
    if sm < 0 and sp < 0:
        return MINUS
    raise PreconditionError(
        f"surface point is not in the crossing region (sigma-={sm!r}, sigma+={sp!r})")


def find_cycle(sys: PiecewiseSystem, p: FoldFoldPoint, eps: float,
               seed: Sequence[float] | None = None, *,
               coeffs: BifurcationCoefficients | None = None,
               opts: IntegrationOptions | None = None,
               step: float | None = None, max_iter: int = 40) -> LimitCycle:
    """Newton search for a fixed point of the composed half-maps.

    The seed defaults to the predicted lower fixed point, which needs
    ``coeffs``.  The finite-difference step defaults to ``1e-3`` times the
    predicted z-offset (or ``1e-3 sqrt(eps)`` without coefficients).
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    sys = sys.with_param(p.param_value) if (sys.rebuild and p.param_value is not None) else sys
    opts = opts or _CYCLE_OPTS
    scale = predict_z_offset(coeffs, eps) if coeffs is not None else math.sqrt(eps)
    if seed is None:
        if coeffs is None:
            raise PreconditionError("a seed or the bifurcation coefficients are required")
        seed = predict_fixed_points(coeffs, p, eps)[0]
    u = np.array(seed, dtype=float)
    first = first_region_at(sys, u[0], u[1], eps)
    P = _return_map(sys, first, eps, opts)
    h = 1e-3 * scale if step is None else step

    def R(v):
        pv, _, _ = P(v)
        return pv - v

    def jac(v):
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[:, j] = (R(v + e) - R(v - e)) / (2 * h)
        return J

    r = R(u)
    tol = 1e-10 * scale + 1e-14 * (1.0 + np.abs(u).max())
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(r).max() <= tol:
            break
        J = jac(u)
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular return-map Jacobian: {exc}")
        lam = 1.0
        while True:
            try:
                rt = R(u + lam * du)
                if np.linalg.norm(rt) < np.linalg.norm(r) or lam < 1e-3:
                    break
            except (FoldFoldError, ValueError):
                pass
            lam *= 0.5
            if lam < 1e-6:
                raise ConvergenceError("return-map Newton step could not reduce the residual")
        u = u + lam * du
        r = rt
    else:
        if np.abs(r).max() > tol:
            raise ConvergenceError(f"no convergence after {max_iter} iterations (|R|={np.abs(r).max():.3e})")
    J = jac(u)
    ev = np.linalg.eigvals(J + np.eye(2))
    _, partner, (t1, t2) = P(u)
    tm, tp = (t2, t1) if first == PLUS else (t1, t2)
    return LimitCycle(
        fixed_point=(float(u[0]), float(u[1])),
        partner_point=(float(partner[0]), float(partner[1])),
        period=float(t1 + t2), transit_times=(float(tm), float(tp)), first_region=first,
        eigenvalues=(complex(ev[0]), complex(ev[1])), eps=float(eps),
        residual=float(np.abs(r).max()), iterations=it,
    )


# ---------------------------------------------------------------------------
# long simulation


@dataclass(frozen=True)
class CycleMeasurement:
    period: float
    period_std: float
    z_amplitude: float
    z_mean: float
    n_cycles: int


def measure_cycle(sys: PiecewiseSystem, eps: float, init: State, t_max: float, *,
                  transient: float = 0.5, opts: IntegrationOptions | None = None) -> CycleMeasurement:
    """Measure period and z-amplitude of the oscillation reached from ``init``.

    The period is the mean time between upward crossings of the level
    ``z = mean(z)`` over the retained tail.
    """
    if not 0.0 <= transient < 1.0:
        raise PreconditionError("transient fraction must lie in [0, 1)")
    if opts is None:
        opts = IntegrationOptions(max_step=t_max / 20000)
    return measure_trajectory(integrate(sys, init, eps, t_max, opts), transient)


def measure_trajectory(traj: Trajectory, transient: float = 0.5) -> CycleMeasurement:
    """Period and z-amplitude over the tail of an existing trajectory."""
    if not 0.0 <= transient < 1.0:
        raise PreconditionError("transient fraction must lie in [0, 1)")
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    keep = traj.t >= t0 + transient * (t1 - t0)
    t = traj.t[keep]
    z = traj.states[keep, 2]
    if t.size < 3:
        raise InsufficientDataError("too few samples in the retained tail")
    zmax, zmin = float(z.max()), float(z.min())
    zmean = float(np.mean(z))
    if zmax - zmin <= 1e-12 * (1.0 + abs(zmean)):
        raise InsufficientDataError("no sustained oscillation in z")
    zmid = 0.5 * (zmax + zmin)
    d = z - zmid
    idx = np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]
    tc = t[idx] - d[idx] * (t[idx + 1] - t[idx]) / (d[idx + 1] - d[idx])
    if tc.size < 6:
        raise InsufficientDataError(f"only {max(tc.size - 1, 0)} complete cycles in the tail")
    periods = np.diff(tc)
    return CycleMeasurement(
        period=float(periods.mean()), period_std=float(periods.std()),
        z_amplitude=0.5 * (zmax - zmin), z_mean=zmean, n_cycles=int(periods.size),
    )


# ---------------------------------------------------------------------------
# time-map fit


@dataclass(frozen=True)
class TimeMapFit:
    region: int
    alpha: float
    beta: float
    gamma: float
    eta: float
    residual: float
    n_points: int


def signed_transit_time(sys: PiecewiseSystem, region: int, x: float, z: float, eps: float,
                        opts: IntegrationOptions | None = None) -> float:
    """Transit time of the region field between two surface points.

    Unlike :func:`flow_to_section` the arc may be virtual: when the field
    leaves the region's half-space the orbit is followed backwards and a
    negative time is returned.
    """
    opts = opts or _CYCLE_OPTS
    y = surface_lift(sys.surface, z)
    u0 = np.array([x, y, z])
    rhs = sys.rhs(region, eps)
    ab, mb = sys.surface.gradient
    a, b = sys.surface.a, sys.surface.b

    def sig(u):
        v = rhs(0.0, u)
        return ab * v[1] + mb * v[2]

    v0 = rhs(0.0, u0)
    s0 = ab * v0[1] + mb * v0[2]
    dt = 1e-7 / max(np.abs(v0).max(), 1e-300)
    sdot = (sig(u0 + dt * v0) - sig(u0 - dt * v0)) / (2 * dt)
    if sdot == 0 or s0 == 0:
        raise PreconditionError("transit time undefined at an exact tangency")
    guess = -2.0 * s0 / sdot
    d = 1.0 if guess > 0 else -1.0
    fun = rhs if d > 0 else (lambda t, u: -rhs(t, u))
    span = abs(guess)
    kw = dict(method=opts.method, rtol=opts.rtol, atol=opts.atol)
    first = solve_ivp(fun, (0.0, 0.5 * span), u0, **kw)
    ev = lambda t, u: (a + b) * u[1] - a - b * u[2]
    ev.terminal = True
    sol = solve_ivp(fun, (0.5 * span, 5.0 * span), first.y[:, -1], events=[ev], **kw)
    if sol.status != 1:
        raise NoReturnError("virtual arc does not return to the surface")
    return d * float(sol.t_events[0][0])


_NUISANCE = ("d3", "d*x", "d*e", "d4", "d2*x", "d2*e", "x2", "x*e", "e2")


def _design(dx, dz, ep):
    cols = [dx, dz, ep, dz ** 2,
            dz ** 3, dz * dx, dz * ep, dz ** 4, dz ** 2 * dx, dz ** 2 * ep,
            dx ** 2, dx * ep, ep ** 2]
    return np.column_stack(cols)


def fit_timemap(sys: PiecewiseSystem, p: FoldFoldPoint, region: int,
                eps_grid: Sequence[float], offset_grid: Sequence[float] = (0.0, -1.0, -0.5, 0.5, 1.0), *,
                z_scale: float | None = None, x_scale: float | None = None,
                opts: IntegrationOptions | None = None) -> TimeMapFit:
    """Least-squares estimate of the time-map coefficients of one region.

    z-offsets are ``offset * z_scale`` (default ``sqrt(max eps)``) and
    x-offsets ``offset * x_scale`` (default ``max eps``), because x and eps
    enter the expansion at the order of the squared z-offset.  Higher-order
    monomials up to that weighted degree four are fitted alongside and
    discarded.
    """
    sys = sys.with_param(p.param_value) if (sys.rebuild and p.param_value is not None) else sys
    eps_grid = np.asarray(list(eps_grid), dtype=float)
    offs = np.asarray(list(offset_grid), dtype=float)
    emax = float(np.max(np.abs(eps_grid))) if eps_grid.size else 0.0
    zs = math.sqrt(emax) if z_scale is None else z_scale
    xs = emax if x_scale is None else x_scale
    rows, times = [], []
    for e in eps_grid:
        for ox in offs:
            for oz in offs:
                dx, dz = ox * xs, oz * zs
                if dx == 0 and dz == 0 and e == 0:
                    continue
                try:
                    T = signed_transit_time(sys, region, p.x0 + dx, p.z0 + dz, float(e), opts)
                except (FoldFoldError, ValueError):
                    continue
                rows.append((dx, dz, e))
                times.append(T)
    if not rows:
        raise GridDesignError("no grid point produced a transit time")
    dx, dz, ep = (np.array(c) for c in zip(*rows))
    X = _design(dx, dz, ep)
    T = np.asarray(times)
    norms = np.abs(X).max(axis=0)
    if np.any(norms == 0):
        raise GridDesignError("a basis column vanishes on the grid (degenerate offsets)")
    Xn = X / norms
    rank = np.linalg.matrix_rank(Xn)
    if rank < X.shape[1] or X.shape[0] <= X.shape[1]:
        raise GridDesignError(f"design matrix has rank {rank} < {X.shape[1]} columns")
    coef, *_ = np.linalg.lstsq(Xn, T, rcond=None)
    coef = coef / norms
    res = T - X @ coef
    rel = float(np.sqrt(np.mean(res ** 2)) / max(np.sqrt(np.mean(T ** 2)), 1e-300))
    return TimeMapFit(region=region, alpha=float(coef[0]), beta=float(coef[1]),
                      gamma=float(coef[2]), eta=float(coef[3]), residual=rel,
                      n_points=int(T.size))


__all__ = [
    "CycleMeasurement", "LimitCycle", "TimeMapFit", "find_cycle", "first_region_at",
    "fit_timemap", "half_map", "measure_cycle", "signed_transit_time",
]
