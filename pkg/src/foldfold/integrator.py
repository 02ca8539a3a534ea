"""Event-detecting integration of two-zone systems with Filippov sliding."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    IntegrationError,
    NoReturnError,
    PreconditionError,
    RunawayChatterError,
    TangencyAmbiguityError,
    TangencyStallError,
)
from .system import (
    MINUS,
    PLUS,
    BoundaryClass,
    PiecewiseSystem,
    State,
    classify_boundary,
    default_tolerance,
    field_eval,
    sliding_weight,
    surface_eval,
    surface_lift,
)

SLIDING = 0
_LABELS = {MINUS: "minus", PLUS: "plus", SLIDING: "sliding"}

EVENT_KINDS = ("entry_crossing", "exit_to_minus", "exit_to_plus", "sliding_start", "sliding_end")


@dataclass(frozen=True)
class IntegrationOptions:
    """Solver settings.

    ``t_min`` and ``t_max`` only affect :func:`flow_to_section`; when left as
    ``None`` they are derived from ``eps`` and the local rate of the
    z-equation.
    """

    rtol: float = 1e-10
    atol: float = 1e-13
    max_step: float = math.inf
    event_tol: float = 1e-12
    t_min: float | None = None
    t_max: float | None = None
    max_events: int = 200_000
    method: str = "DOP853"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.event_tol > 0 and self.max_step > 0):
            raise PreconditionError("tolerances and max_step must be positive")

    def halved(self) -> "IntegrationOptions":
        return replace(self, rtol=self.rtol / 2, atol=self.atol / 2)


@dataclass(frozen=True)
class Event:
    t: float
    state: State
    kind: str


@dataclass(frozen=True)
class Trajectory:
    """Samples at accepted solver steps plus switching events.

    ``regions`` holds -1, +1 or 0 (sliding) per sample.
    """

    t: np.ndarray
    states: np.ndarray
    regions: np.ndarray
    events: tuple[Event, ...]

    def H(self, surface) -> np.ndarray:
        return (surface.a + surface.b) * self.states[:, 1] - surface.a - surface.b * self.states[:, 2]

    def to_csv(self, path, surface) -> None:
        H = self.H(surface)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "region", "H"])
            for t, s, r, h in zip(self.t, self.states, self.regions, H):
                w.writerow([_fmt(t), _fmt(s[0]), _fmt(s[1]), _fmt(s[2]), _LABELS[int(r)], _fmt(h)])

    def events_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "kind"])
            for e in self.events:
                w.writerow([_fmt(e.t), _fmt(e.state.x), _fmt(e.state.y), _fmt(e.state.z), e.kind])


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class SectionHit:
    T: float
    state: State
    region: int


def _H(sys: PiecewiseSystem):
    a, b = sys.surface.a, sys.surface.b
    s = a + b

    def H(t, u):
        return s * u[1] - a - b * u[2]

    return H


def _rk4(fun, t, u, dt):
    k1 = fun(t, u)
    k2 = fun(t + dt / 2, u + dt / 2 * k1)
    k3 = fun(t + dt / 2, u + dt / 2 * k2)
    k4 = fun(t + dt, u + dt * k3)
    return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _polish(sys: PiecewiseSystem, fun, t: float, u: np.ndarray, tol: float):
    """Newton iteration in time so that |H| <= tol at the returned state."""
    H = _H(sys)
    ab, mb = sys.surface.gradient
    for _ in range(30):
        h = H(t, u)
        if abs(h) <= tol:
            return t, u
        v = fun(t, u)
        dh = ab * v[1] + mb * v[2]
        if dh == 0 or not math.isfinite(dh):
            break
        dt = -h / dh
        u = _rk4(fun, t, u, dt)
        t += dt
    if abs(H(t, u)) <= tol:
        return t, u
    raise TangencyStallError("cannot locate the switching surface to event_tol", t, u)


def _start_mode(sys: PiecewiseSystem, u: np.ndarray, eps: float, tol: float) -> int:
    h = surface_eval(sys.surface, u[1], u[2])
    if abs(h) > tol:
        return PLUS if h > 0 else MINUS
    return _mode_on_surface(sys, State.from_array(u), eps, None)


def _sigmas(sys: PiecewiseSystem, s: State, eps: float) -> tuple[float, float]:
    ab, mb = sys.surface.gradient
    fm = field_eval(sys, MINUS, s, eps)
    fp = field_eval(sys, PLUS, s, eps)
    return ab * fm[1] + mb * fm[2], ab * fp[1] + mb * fp[2]


def _mode_on_surface(sys: PiecewiseSystem, s: State, eps: float, came_from: int | None) -> int:
    sm, sp = _sigmas(sys, s, eps)
    tol = default_tolerance(sys, s, eps)
    cls = classify_boundary(sys, s, eps, tol=max(tol, 1e-9))
    if cls == BoundaryClass.CROSSING_UP:
        return PLUS
    if cls == BoundaryClass.CROSSING_DOWN:
        return MINUS
    if cls == BoundaryClass.SLIDING_ATTRACTING:
        return SLIDING
    if cls == BoundaryClass.SLIDING_REPELLING:
        # non-unique continuation; follow the faster departing field
        return PLUS if abs(sp) >= abs(sm) else MINUS
    if cls == BoundaryClass.TANGENT_MINUS:
        return PLUS if sp > 0 else MINUS
    if cls == BoundaryClass.TANGENT_PLUS:
        return MINUS if sm < 0 else PLUS
    raise TangencyStallError("both fields are tangent to the switching surface", 0.0, tuple(s))


def _sliding_rhs(sys: PiecewiseSystem, eps: float):
    ab, mb = sys.surface.gradient
    fm_, fp_ = sys.rhs(MINUS, eps), sys.rhs(PLUS, eps)

    def fun(t, u):
        fm = fm_(t, u)
        fp = fp_(t, u)
        sm = ab * fm[1] + mb * fm[2]
        sp = ab * fp[1] + mb * fp[2]
        lam = sliding_weight(sm, sp)
        return lam * fp + (1.0 - lam) * fm

    return fun


def _sigma_event(sys: PiecewiseSystem, region: int, eps: float, direction: int):
    ab, mb = sys.surface.gradient
    rhs = sys.rhs(region, eps)

    def ev(t, u):
        v = rhs(t, u)
        return ab * v[1] + mb * v[2]

    ev.terminal = True
    ev.direction = direction
    return ev


def integrate(sys: PiecewiseSystem, init: State, eps: float, t_end: float,
              opts: IntegrationOptions | None = None) -> Trajectory:
    """Integrate from ``init`` over ``[0, t_end]`` switching regions at the surface."""
    opts = opts or IntegrationOptions()
    if not t_end > 0:
        raise PreconditionError("t_end must be positive")
    u = np.asarray(init.as_array(), dtype=float)
    t = 0.0
    mode = _start_mode(sys, u, eps, opts.event_tol)
    ts, us, rs = [t], [u.copy()], [mode]
    events: list[Event] = []
    H = _H(sys)
    kw = dict(method=opts.method, rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step)

    while t < t_end:
        if len(events) > opts.max_events:
            raise RunawayChatterError(f"more than {opts.max_events} switching events before t={t!r}")
        if mode == SLIDING:
            fun = _sliding_rhs(sys, eps)
            evs = [_sigma_event(sys, PLUS, eps, +1), _sigma_event(sys, MINUS, eps, -1)]
        else:
            fun = sys.rhs(mode, eps)
            # offset into the region so a start on the surface is not re-detected
            shift = 2.0 * opts.event_tol * mode
            ev = lambda tt, uu, _k=shift: H(tt, uu) + _k
            ev.terminal = True
            ev.direction = -mode
            evs = [ev]
        sol = solve_ivp(fun, (t, t_end), u, events=evs, **kw)
        if sol.status == -1:
            raise TangencyStallError(f"integrator failed ({sol.message})", sol.t[-1], sol.y[:, -1])
        seg_t = sol.t[1:]
        seg_u = sol.y[:, 1:].T
        if sol.status == 1:
            which = next(i for i, te in enumerate(sol.t_events) if len(te))
            te = float(sol.t_events[which][0])
            ue = np.array(sol.y_events[which][0], dtype=float)
            if mode != SLIDING:
                te, ue = _polish(sys, fun, te, ue, opts.event_tol)
                seg_t = np.append(seg_t[seg_t < te], te)
                seg_u = np.vstack([seg_u[: len(seg_t) - 1], ue])
                s = State.from_array(ue)
                new = _mode_on_surface(sys, s, eps, mode)
                kind = "sliding_start" if new == SLIDING else "entry_crossing"
            else:
                new = PLUS if which == 0 else MINUS
                kind = "exit_to_plus" if new == PLUS else "exit_to_minus"
                s = State.from_array(ue)
        if len(seg_t):
            keep = seg_t > ts[-1]
            ts.extend(seg_t[keep])
            us.extend(seg_u[keep])
            rs.extend([mode] * int(np.count_nonzero(keep)))
        if sol.status != 1:
            if mode == SLIDING and ts[-1] >= t_end:
                events.append(Event(ts[-1], State.from_array(us[-1]), "sliding_end"))
            break
        events.append(Event(te, s, kind))
        t, u, mode = te, ue, new

    return Trajectory(np.asarray(ts, dtype=float), np.asarray(us, dtype=float),
                      np.asarray(rs, dtype=int), tuple(events))


# ---------------------------------------------------------------------------
# flow to the switching surface


def _characteristic_time(sys: PiecewiseSystem, s: State, eps: float) -> tuple[float, float]:
    hm = abs(sys.h_minus(s.y, s.z, eps))
    hp = abs(sys.h_plus(s.y, s.z, eps))
    root = math.sqrt(max(eps, 1e-12))
    hmin = max(min(hm, hp), 1e-300)
    return root / max(hm, hp, 1e-300), root / hmin


def flow_to_section(sys: PiecewiseSystem, region: int, x: float, z: float, eps: float,
                    opts: IntegrationOptions | None = None, *, reverse: bool = False) -> SectionHit:
    """Follow the region field from the surface point above ``(x, z)`` back to the surface.

    With ``reverse=True`` the field is followed backwards in time; the
    returned ``T`` is then the (positive) elapsed backward time.
    """
    opts = opts or IntegrationOptions()
    region = MINUS if region == MINUS else PLUS
    y = surface_lift(sys.surface, z)
    s0 = State(x, y, z)
    u0 = s0.as_array()
    base = sys.rhs(region, eps)
    fun = base if not reverse else (lambda t, u: -base(t, u))
    ab, mb = sys.surface.gradient
    v0 = fun(0.0, u0)
    sigma = ab * v0[1] + mb * v0[2]
    tol = default_tolerance(sys, s0, eps)
    if sigma * region < -tol:
        raise PreconditionError(
            f"region {region:+d} field points out of its half-space at the start "
            f"(sigma={sigma!r}); the arc would be virtual")
    tshort, tlong = _characteristic_time(sys, s0, eps)
    t_min = opts.t_min if opts.t_min is not None else 1e-3 * tshort
    t_max = opts.t_max if opts.t_max is not None else 1e4 * tlong
    if abs(sigma) <= tol:
        dt = 1e-6 * tshort
        v1 = fun(dt, u0 + dt * v0)
        sdot = (ab * v1[1] + mb * v1[2] - sigma) / dt
        if sdot * region <= 0:
            raise TangencyAmbiguityError(
                f"start is tangent to the surface and curves out of region {region:+d}")
    kw = dict(method=opts.method, rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step)
    H = _H(sys)
    if t_min > 0:
        first = solve_ivp(fun, (0.0, t_min), u0, **kw)
        if first.status != 0:
            raise IntegrationError(f"integration failed: {first.message}")
        u1 = first.y[:, -1]
        if H(0.0, u1) * region <= 0:
            raise TangencyAmbiguityError(
                f"orbit re-intersects the surface within t_min={t_min!r}")
    else:
        u1 = u0
    ev = lambda t, u: H(t, u)
    ev.terminal = True
    ev.direction = -region
    sol = solve_ivp(fun, (t_min, t_max), u1, events=[ev], **kw)
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    if sol.status != 1:
        raise NoReturnError(f"no return to the surface within t_max={t_max!r} (region {region:+d})")
    te = float(sol.t_events[0][0])
    ue = np.array(sol.y_events[0][0], dtype=float)
    te, ue = _polish(sys, fun, te, ue, opts.event_tol)
    return SectionHit(te, State.from_array(ue), region)


__all__ = [
    "Event", "IntegrationOptions", "SLIDING", "SectionHit", "Trajectory",
    "flow_to_section", "integrate",
]
