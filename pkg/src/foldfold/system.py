"""Two-zone piecewise-smooth systems in normal form.

The phase space is (x, y, z) and the switching surface is the plane
``H(y, z) = (a + b) y - a - b z = 0``.  On either side the dynamics read::

    x' = f(x, y)
    y' = g(x, y) + g_i(eps)
    z' = h_i(y, z, eps)

with ``i`` the region label (-1 where ``H < 0``, +1 where ``H > 0``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateSlidingError,
    DerivativeError,
    EvaluationError,
    PreconditionError,
)

MINUS = -1
PLUS = 1
REGIONS = (MINUS, PLUS)

_EPS = np.finfo(float).eps
_STEP1 = _EPS ** (1.0 / 3.0)
_STEP2 = _EPS ** (1.0 / 6.0)


def parse_region(region) -> int:
    """Normalise a region label (``-1``/``+1``, ``'-'``/``'+'``, ``'minus'``/``'plus'``)."""
    if isinstance(region, str):
        key = region.strip().lower()
        if key in ("-", "minus", "-1", "m"):
            return MINUS
        if key in ("+", "plus", "+1", "1", "p"):
            return PLUS
    elif region in (MINUS, PLUS):
        return int(region)
    raise ConfigurationError(f"unknown region {region!r}")


def region_name(region: int) -> str:
    return "minus" if parse_region(region) == MINUS else "plus"


def region_symbol(region: int) -> str:
    return "-" if parse_region(region) == MINUS else "+"


@dataclass(frozen=True)
class SurfaceParams:
    """Constants of the switching plane ``(a + b) y - a - b z = 0``."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigurationError("surface constants must be finite")
        if self.a + self.b == 0:
            raise ConfigurationError("degenerate surface: a + b = 0")
        if self.b == 0:
            raise ConfigurationError("degenerate surface: b = 0")

    @property
    def gradient(self) -> tuple[float, float]:
        """Constant gradient of H with respect to (y, z)."""
        return (self.a + self.b, -self.b)

    @property
    def lift_slope(self) -> float:
        """Derivative of the lift z -> y along the surface."""
        return self.b / (self.a + self.b)


@dataclass(frozen=True)
class State:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise EvaluationError(f"state.{name}", v)
            object.__setattr__(self, name, float(v))

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, v) -> "State":
        return cls(float(v[0]), float(v[1]), float(v[2]))


def surface_eval(p: SurfaceParams, y: float, z: float) -> float:
    # same as (a + b) y - a - b z, with less cancellation near the surface
    return p.a * (y - 1.0) + p.b * (y - z)


def surface_lift(p: SurfaceParams, z: float) -> float:
    """Return the y coordinate of the point of the surface above ``z``."""
    s = p.a + p.b
    if s == 0:
        raise ConfigurationError("degenerate surface: a + b = 0")
    return (p.a + p.b * z) / s


# Keys understood by :class:`Derivatives`.  Region dependent entries carry a
# trailing ``-`` or ``+``.
SMOOTH_KEYS = ("f_x", "f_y", "f_yy", "g_x", "g_y", "g_yy")
REGION_KEYS = ("gshift_eps", "h_y", "h_z", "h_yy", "h_yz", "h_zz", "h_eps")


@dataclass(frozen=True)
class Derivatives:
    """Analytic partial derivatives.

    ``funcs`` maps names such as ``"f_y"`` (signature ``(x, y)``),
    ``"gshift_eps-"`` (signature ``(eps,)``) or ``"h_yz+"`` (signature
    ``(y, z, eps)``) to callables.  Missing entries fall back to central
    finite differences.
    """

    funcs: Mapping[str, Callable[..., float]] = field(default_factory=dict)

    def __post_init__(self):
        allowed = set(SMOOTH_KEYS) | {k + s for k in REGION_KEYS for s in "-+"}
        unknown = set(self.funcs) - allowed
        if unknown:
            raise ConfigurationError(f"unknown derivative keys: {sorted(unknown)}")
        object.__setattr__(self, "funcs", MappingProxyType(dict(self.funcs)))

    def get(self, key: str):
        return self.funcs.get(key)


@dataclass(frozen=True)
class PiecewiseSystem:
    """Immutable two-zone vector field.

    A free parameter may be wired in through ``rebuild``: a callable that
    returns the same system with the parameter set to a new value.
    """

    surface: SurfaceParams
    f: Callable[[float, float], float]
    g: Callable[[float, float], float]
    gshift_minus: Callable[[float], float]
    gshift_plus: Callable[[float], float]
    h_minus: Callable[[float, float, float], float]
    h_plus: Callable[[float, float, float], float]
    derivatives: Derivatives = field(default_factory=Derivatives)
    param_name: str | None = None
    param_value: float | None = None
    rebuild: Callable[[float], "PiecewiseSystem"] | None = None
    label: str = "system"

    def gshift(self, region: int) -> Callable[[float], float]:
        return self.gshift_minus if parse_region(region) == MINUS else self.gshift_plus

    def h(self, region: int) -> Callable[[float, float, float], float]:
        return self.h_minus if parse_region(region) == MINUS else self.h_plus

    def with_param(self, value: float) -> "PiecewiseSystem":
        if self.rebuild is None:
            raise PreconditionError(f"{self.label} has no free parameter wired in")
        if self.param_value is not None and float(value) == self.param_value:
            return self
        return self.rebuild(float(value))

    def without_derivatives(self) -> "PiecewiseSystem":
        """Copy that relies on finite differences for every partial."""
        return replace(self, derivatives=Derivatives())

    def rhs(self, region: int, eps: float) -> Callable[[float, np.ndarray], np.ndarray]:
        """Fast right-hand side ``(t, s) -> ds/dt`` for ODE solvers."""
        f, g = self.f, self.g
        shift = self.gshift(region)(eps)
        h = self.h(region)

        def fun(t, s):
            x, y, z = s
            return np.array([f(x, y), g(x, y) + shift, h(y, z, eps)])

        return fun


def _checked(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise EvaluationError(name, value)
    return value


def field_eval(sys: PiecewiseSystem, region, s: State, eps: float) -> np.ndarray:
    """Velocity of the region field at ``s``, also where H has the other sign."""
    region = parse_region(region)
    x, y, z = s
    tag = region_symbol(region)
    return np.array([
        _checked("f", sys.f(x, y)),
        _checked("g", sys.g(x, y)) + _checked(f"gshift{tag}", sys.gshift(region)(eps)),
        _checked(f"h{tag}", sys.h(region)(y, z, eps)),
    ])


def switching_velocity(sys: PiecewiseSystem, region, s: State, eps: float) -> float:
    """Rate of change of H along the region field, ``(a+b)(g+g_i) - b h_i``."""
    v = field_eval(sys, region, s, eps)
    ab, mb = sys.surface.gradient
    return ab * v[1] + mb * v[2]


class BoundaryClass(str, enum.Enum):
    CROSSING_UP = "crossing_up"
    CROSSING_DOWN = "crossing_down"
    SLIDING_ATTRACTING = "sliding_attracting"
    SLIDING_REPELLING = "sliding_repelling"
    TANGENT_MINUS = "tangent_minus"
    TANGENT_PLUS = "tangent_plus"
    TANGENT_BOTH = "tangent_both"


def default_tolerance(sys: PiecewiseSystem, s: State, eps: float) -> float:
    mag = max(
        float(np.max(np.abs(field_eval(sys, MINUS, s, eps)))),
        float(np.max(np.abs(field_eval(sys, PLUS, s, eps)))),
    )
    return 1e-9 * (1.0 + mag)


def classify_sigma(sigma_minus: float, sigma_plus: float, tol: float) -> BoundaryClass:
    tm = abs(sigma_minus) <= tol
    tp = abs(sigma_plus) <= tol
    if tm and tp:
        return BoundaryClass.TANGENT_BOTH
    if tm:
        return BoundaryClass.TANGENT_MINUS
    if tp:
        return BoundaryClass.TANGENT_PLUS
    if sigma_plus < -tol and sigma_minus > tol:
        return BoundaryClass.SLIDING_ATTRACTING
    if sigma_plus > tol and sigma_minus < -tol:
        return BoundaryClass.SLIDING_REPELLING
    return BoundaryClass.CROSSING_UP if sigma_plus > 0 else BoundaryClass.CROSSING_DOWN


def classify_boundary(sys: PiecewiseSystem, s: State, eps: float,
                      tol: float | None = None) -> BoundaryClass:
    if tol is None:
        tol = default_tolerance(sys, s, eps)
    H = surface_eval(sys.surface, s.y, s.z)
    if abs(H) > max(tol, 1e-9):
        raise PreconditionError(f"state is not on the switching surface (H={H!r})")
    return classify_sigma(
        switching_velocity(sys, MINUS, s, eps),
        switching_velocity(sys, PLUS, s, eps),
        tol,
    )


def sliding_weight(sigma_minus: float, sigma_plus: float) -> float:
    den = sigma_minus - sigma_plus
    if den == 0 or abs(den) <= 4 * _EPS * (abs(sigma_minus) + abs(sigma_plus)):
        raise DegenerateSlidingError("switching velocities coincide")
    return sigma_minus / den


def sliding_velocity(sys: PiecewiseSystem, s: State, eps: float) -> np.ndarray:
    """Filippov convex combination of the two fields, tangent to the surface."""
    fm = field_eval(sys, MINUS, s, eps)
    fp = field_eval(sys, PLUS, s, eps)
    ab, mb = sys.surface.gradient
    sm = ab * fm[1] + mb * fm[2]
    sp = ab * fp[1] + mb * fp[2]
    if sm * sp > 0:
        raise PreconditionError("state is in the crossing region, not the sliding set")
    lam = sliding_weight(sm, sp)
    return lam * fp + (1.0 - lam) * fm


# ---------------------------------------------------------------------------
# derivatives


def central_first(fun: Callable[[float], float], c: float, step: float | None = None) -> float:
    h = _STEP1 * (1.0 + abs(c)) if step is None else step
    return (fun(c + h) - fun(c - h)) / (2.0 * h)


def _second(fun, c, h):
    return (fun(c + h) - 2.0 * fun(c) + fun(c - h)) / (h * h)


def _mixed(fun2, u, v, hu, hv):
    return (fun2(u + hu, v + hv) - fun2(u + hu, v - hv)
            - fun2(u - hu, v + hv) + fun2(u - hu, v - hv)) / (4.0 * hu * hv)


def _richardson(name: str, coarse: float, fine: float, noise: float = 0.0,
                rtol: float = 1e-6) -> float:
    """Combine two step sizes; ``noise`` is the rounding floor of the finer estimate."""
    value = (4.0 * fine - coarse) / 3.0
    if abs(fine - coarse) > rtol * max(abs(value), 1.0) + noise:
        raise DerivativeError(
            f"{name}: refined-step estimates disagree ({coarse!r} vs {fine!r})")
    return value


def central_second(fun: Callable[[float], float], c: float, name: str = "d2") -> float:
    h = _STEP2 * (1.0 + abs(c))
    mag = max(abs(fun(c)), abs(fun(c + h)), abs(fun(c - h)))
    noise = 64.0 * _EPS * mag / (h * h / 4.0)
    return _richardson(name, _second(fun, c, h), _second(fun, c, h / 2), noise)


def central_mixed(fun2: Callable[[float, float], float], u: float, v: float,
                  name: str = "d2") -> float:
    hu = _STEP2 * (1.0 + abs(u))
    hv = _STEP2 * (1.0 + abs(v))
    mag = max(abs(fun2(u + su * hu, v + sv * hv)) for su in (-1, 0, 1) for sv in (-1, 0, 1))
    noise = 64.0 * _EPS * mag / (hu * hv / 4.0)
    return _richardson(name, _mixed(fun2, u, v, hu, hv), _mixed(fun2, u, v, hu / 2, hv / 2), noise)


@dataclass(frozen=True)
class LocalJet:
    """Values and partial derivatives of one region's field at a point."""

    region: int
    f: float
    f_x: float
    f_y: float
    f_yy: float
    g: float
    g_x: float
    g_y: float
    g_yy: float
    gshift: float
    gshift_eps: float
    h: float
    h_y: float
    h_z: float
    h_yy: float
    h_yz: float
    h_zz: float
    h_eps: float


def _partial(sys: PiecewiseSystem, key: str, x: float, y: float, z: float,
             eps: float, region: int) -> float:
    tag = region_symbol(region)
    rkey = key + tag if key in REGION_KEYS else key
    analytic = sys.derivatives.get(rkey)
    if analytic is not None:
        if key in SMOOTH_KEYS:
            return _checked(rkey, analytic(x, y))
        if key == "gshift_eps":
            return _checked(rkey, analytic(eps))
        return _checked(rkey, analytic(y, z, eps))
    return finite_difference(sys, key, x, y, z, eps, region)


def finite_difference(sys: PiecewiseSystem, key: str, x: float, y: float, z: float,
                      eps: float, region: int) -> float:
    """Central-difference estimate of the partial named ``key``."""
    f, g = sys.f, sys.g
    gs, h = sys.gshift(region), sys.h(region)
    if key == "f_x":
        return central_first(lambda u: f(u, y), x)
    if key == "f_y":
        return central_first(lambda u: f(x, u), y)
    if key == "f_yy":
        return central_second(lambda u: f(x, u), y, key)
    if key == "g_x":
        return central_first(lambda u: g(u, y), x)
    if key == "g_y":
        return central_first(lambda u: g(x, u), y)
    if key == "g_yy":
        return central_second(lambda u: g(x, u), y, key)
    if key == "gshift_eps":
        return central_first(gs, eps)
    if key == "h_y":
        return central_first(lambda u: h(u, z, eps), y)
    if key == "h_z":
        return central_first(lambda u: h(y, u, eps), z)
    if key == "h_eps":
        return central_first(lambda u: h(y, z, u), eps)
    if key == "h_yy":
        return central_second(lambda u: h(u, z, eps), y, key)
    if key == "h_zz":
        return central_second(lambda u: h(y, u, eps), z, key)
    if key == "h_yz":
        return central_mixed(lambda u, v: h(u, v, eps), y, z, key)
    raise KeyError(key)


def local_jet(sys: PiecewiseSystem, region, x: float, y: float, z: float,
              eps: float = 0.0) -> LocalJet:
    region = parse_region(region)
    tag = region_symbol(region)
    d = {k: _partial(sys, k, x, y, z, eps, region) for k in SMOOTH_KEYS + REGION_KEYS}
    return LocalJet(
        region=region,
        f=_checked("f", sys.f(x, y)),
        g=_checked("g", sys.g(x, y)),
        gshift=_checked(f"gshift{tag}", sys.gshift(region)(eps)),
        h=_checked(f"h{tag}", sys.h(region)(y, z, eps)),
        **d,
    )


def check_derivatives(sys: PiecewiseSystem, points: Iterable[tuple[float, float, float, float]],
                      rtol: float = 1e-6) -> float:
    """Compare every analytic partial with finite differences.

    ``points`` holds ``(x, y, z, eps)`` tuples.  Returns the worst relative
    discrepancy and raises :class:`DerivativeError` if it exceeds ``rtol``.
    """
    worst = 0.0
    for x, y, z, eps in points:
        for region in REGIONS:
            tag = region_symbol(region)
            for key in SMOOTH_KEYS + REGION_KEYS:
                rkey = key + tag if key in REGION_KEYS else key
                if sys.derivatives.get(rkey) is None:
                    continue
                exact = _partial(sys, key, x, y, z, eps, region)
                approx = finite_difference(sys, key, x, y, z, eps, region)
                err = abs(exact - approx) / max(abs(exact), abs(approx), 1.0)
                worst = max(worst, err)
                if err > rtol:
                    raise DerivativeError(
                        f"{rkey} at {(x, y, z, eps)!r}: analytic {exact!r} vs "
                        f"finite difference {approx!r}")
    return worst
