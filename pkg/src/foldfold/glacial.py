"""Glacial flip-flop model: temperature w, ice line eta, ice extent xi.

The model is mapped to the normal form of :mod:`foldfold.system` with
``x = w``, ``y = eta`` and ``z = xi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError, DomainError
from .system import MINUS, PLUS, Derivatives, PiecewiseSystem, SurfaceParams, parse_region

Q0 = 343.0

# Time-scale constant calibrated so that the leading-order period of the
# cycle born at the upper fold-fold point equals 0.149956 at eps = 1e-3
# (tau = 7, kappa_xi = 0.3 rho).  See tests/test_glacial.py for the check.
RHO_CYCLE = 0.36662516593
KAPPA_RATIO_CYCLE = 0.3


@dataclass(frozen=True)
class GlacialParams:
    """Parameters of the flip-flop model.

    ``Lc`` is the coupling constant in the ice-line threshold.  It has no
    silent default: building a system with ``Lc=None`` raises.
    ``wdot_sign`` selects ``w' = wdot_sign * tau * (w - F(eta))``; the
    default ``-1`` relaxes w towards the nullcline.
    """

    Q: float = Q0
    A: float = 202.0
    B: float = 1.9
    C: float = 3.04
    alpha0: float = 0.47
    alpha1: float = 0.32
    alpha2: float = 0.62
    s2: float = -0.482
    Lc: float | None = None
    T_minus: float = -5.5
    T_plus: float = -10.0
    Tbar_minus: float = 1.0
    Tbar_plus: float = 0.0
    a: float = 1.45
    b: float = 1.75
    b0: float = 5.0
    b1: float = 1.5
    bbar0: float = 0.0
    bbar1: float = 0.0
    tau: float = 7.0
    rho: float = 0.05
    kappa_xi: float = 1.0
    wdot_sign: int = -1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigurationError(f"{f.name} must be a finite number, got {v!r}")
        if self.B <= 0 or self.C <= 0:
            raise ConfigurationError("B and C must be positive")
        if self.a + self.b == 0 or self.b == 0:
            raise ConfigurationError("degenerate surface constants a, b")
        if self.alpha1 > self.alpha2:
            raise ConfigurationError("alpha1 must not exceed alpha2")
        if self.wdot_sign not in (-1, 1):
            raise ConfigurationError("wdot_sign must be -1 or +1")

    def to_dict(self) -> dict:
        return asdict(self)


def _cycle_preset() -> GlacialParams:
    Q, B, C = Q0, 1.9, 3.04
    return GlacialParams(
        Q=Q, A=202.0, B=B, C=C, alpha0=0.47, alpha1=0.32, alpha2=0.62, s2=-0.482,
        Lc=Q / (B + C), T_minus=-10.0, T_plus=-10.020161517411422, Tbar_minus=1.0,
        Tbar_plus=0.0, a=1.05, b=1.75, b0=1.5, b1=5.0, bbar0=0.0, bbar1=0.0, tau=7.0,
        rho=RHO_CYCLE, kappa_xi=KAPPA_RATIO_CYCLE * RHO_CYCLE,
    )


PRESETS = {
    "baseline": GlacialParams(kappa_xi=0.03),
    "cycle": _cycle_preset(),
}


def preset(name: str, **overrides) -> GlacialParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(base, **overrides) if overrides else base


def legendre2(eta: float) -> tuple[float, float]:
    """Return ``(p2, P2) = ((3 eta^2 - 1)/2, (eta^3 - eta)/2)``."""
    return 0.5 * (3.0 * eta * eta - 1.0), 0.5 * (eta ** 3 - eta)


def _nullcline_gain(p: GlacialParams) -> float:
    return p.C * p.Q / (p.B + p.C) * (p.alpha2 - p.alpha1) / p.B


def temp_nullcline_F(p: GlacialParams, eta: float) -> float:
    _, P2 = legendre2(eta)
    base = (p.Q * (1.0 - p.alpha0) - p.A) / p.B
    return base + _nullcline_gain(p) * (eta - 0.5 + p.s2 * P2)


def temp_nullcline_dF(p: GlacialParams, eta: float) -> float:
    return _nullcline_gain(p) * (1.0 + p.s2 * 0.5 * (3.0 * eta * eta - 1.0))


def temp_nullcline_d2F(p: GlacialParams, eta: float) -> float:
    return _nullcline_gain(p) * p.s2 * 3.0 * eta


def _require_Lc(p: GlacialParams) -> float:
    if p.Lc is None:
        raise ConfigurationError("Lc is not set; the model needs an explicit value")
    return p.Lc


def iceline_threshold_G(p: GlacialParams, region, eta: float) -> float:
    T = p.T_minus if parse_region(region) == MINUS else p.T_plus
    return _require_Lc(p) * p.s2 * (1.0 - p.alpha0) * legendre2(eta)[0] + T


def extent_rate_H(p: GlacialParams, region, eta: float, xi: float, eps: float = 0.0) -> float:
    if parse_region(region) == MINUS:
        bi = p.b0 + eps * p.bbar0
    else:
        bi = p.b1 + eps * p.bbar1
    return p.kappa_xi * (bi * (eta - xi) - p.a * (1.0 - eta))


def insolation_Q(e: float, Q0: float = Q0) -> float:
    """Annual mean insolation for eccentricity ``e`` (|e| < 1)."""
    if not math.isfinite(e) or abs(e) >= 1.0:
        raise DomainError(f"eccentricity must satisfy |e| < 1, got {e!r}")
    return Q0 / math.sqrt(1.0 - e * e)


def obliquity_s2(beta: float) -> float:
    c = math.cos(beta)
    return 5.0 / 16.0 * (3.0 * c * c - 1.0)


@dataclass(frozen=True)
class OrbitalSample:
    t: float
    e: float
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.e < 1.0:
            raise DomainError(f"eccentricity {self.e!r} outside [0, 1)")


class OrbitalSeriesError(ConfigurationError):
    """Malformed orbital-parameter file."""


def load_orbital_series(path) -> list[OrbitalSample]:
    """Read a CSV with header ``t,e,beta`` and return samples sorted by t."""
    path = Path(path)
    samples: list[OrbitalSample] = []
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OrbitalSeriesError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header != ["t", "e", "beta"]:
                    raise OrbitalSeriesError(f"line {lineno}: expected header 't,e,beta'")
                continue
            if len(row) != 3:
                raise OrbitalSeriesError(f"line {lineno}: expected 3 columns, got {len(row)}")
            try:
                t, e, beta = (float(c) for c in row)
            except ValueError:
                raise OrbitalSeriesError(f"line {lineno}: non-numeric value in {row!r}")
            if not all(math.isfinite(v) for v in (t, e, beta)):
                raise OrbitalSeriesError(f"line {lineno}: non-finite value")
            if not 0.0 <= e < 1.0:
                raise DomainError(f"line {lineno}: eccentricity {e!r} outside [0, 1)")
            samples.append(OrbitalSample(t, e, beta))
    if not samples:
        raise OrbitalSeriesError(f"{path}: no samples")
    samples.sort(key=lambda s: s.t)
    for prev, cur in zip(samples, samples[1:]):
        if cur.t == prev.t:
            raise OrbitalSeriesError(f"duplicate time stamp t={cur.t!r}; times must be strictly increasing")
    return samples


FREE_PARAMETERS = tuple(
    f.name for f in fields(GlacialParams) if f.name not in ("Lc", "wdot_sign")
) + ("Lc",)


def build_general_system(p: GlacialParams, free_param: str | None = "T_plus") -> PiecewiseSystem:
    """Map the glacial model onto the two-zone normal form.

    ``free_param`` names the field of ``p`` that the fold-fold search may vary.
    """
    Lc = _require_Lc(p)
    if free_param is not None and free_param not in FREE_PARAMETERS:
        raise ConfigurationError(f"unknown free parameter {free_param!r}")
    tau, rho, kap = p.tau, p.rho, p.kappa_xi
    sgn = float(p.wdot_sign)
    lam = Lc * p.s2 * (1.0 - p.alpha0)
    a = p.a

    def f(x, y):
        return sgn * tau * (x - temp_nullcline_F(p, y))

    def g(x, y):
        return rho * (x + lam * 0.5 * (3.0 * y * y - 1.0))

    def gm(eps):
        return -rho * (p.T_minus + eps * p.Tbar_minus)

    def gp(eps):
        return -rho * (p.T_plus + eps * p.Tbar_plus)

    def hm(y, z, eps):
        return kap * ((p.b0 + eps * p.bbar0) * (y - z) - a * (1.0 - y))

    def hp(y, z, eps):
        return kap * ((p.b1 + eps * p.bbar1) * (y - z) - a * (1.0 - y))

    zero3 = lambda y, z, eps: 0.0
    deriv = Derivatives({
        "f_x": lambda x, y: sgn * tau,
        "f_y": lambda x, y: -sgn * tau * temp_nullcline_dF(p, y),
        "f_yy": lambda x, y: -sgn * tau * temp_nullcline_d2F(p, y),
        "g_x": lambda x, y: rho,
        "g_y": lambda x, y: rho * lam * 3.0 * y,
        "g_yy": lambda x, y: rho * lam * 3.0,
        "gshift_eps-": lambda eps: -rho * p.Tbar_minus,
        "gshift_eps+": lambda eps: -rho * p.Tbar_plus,
        "h_y-": lambda y, z, eps: kap * (p.b0 + eps * p.bbar0 + a),
        "h_y+": lambda y, z, eps: kap * (p.b1 + eps * p.bbar1 + a),
        "h_z-": lambda y, z, eps: -kap * (p.b0 + eps * p.bbar0),
        "h_z+": lambda y, z, eps: -kap * (p.b1 + eps * p.bbar1),
        "h_yy-": zero3, "h_yy+": zero3, "h_yz-": zero3, "h_yz+": zero3,
        "h_zz-": zero3, "h_zz+": zero3,
        "h_eps-": lambda y, z, eps: kap * p.bbar0 * (y - z),
        "h_eps+": lambda y, z, eps: kap * p.bbar1 * (y - z),
    })
    rebuild = None
    value = None
    if free_param is not None:
        value = getattr(p, free_param)
        value = None if value is None else float(value)

        def rebuild(v: float, _p=p, _name=free_param):
            return build_general_system(replace(_p, **{_name: v}), _name)

    return PiecewiseSystem(
        surface=SurfaceParams(p.a, p.b), f=f, g=g, gshift_minus=gm, gshift_plus=gp,
        h_minus=hm, h_plus=hp, derivatives=deriv, param_name=free_param,
        param_value=value, rebuild=rebuild, label="glacial",
    )


def nullcline_seeds(p: GlacialParams, etas, xis, param: float | None = None,
                    free_param: str = "T_plus") -> list[tuple[float, float, float, float]]:
    """Seed grid for the fold-fold search with w placed on the temperature nullcline."""
    pv = getattr(p, free_param) if param is None else param
    return [(temp_nullcline_F(p, e), e, x, pv) for e in etas for x in xis]


__all__ = [
    "GlacialParams", "OrbitalSample", "OrbitalSeriesError", "PRESETS", "Q0",
    "RHO_CYCLE", "build_general_system", "extent_rate_H", "iceline_threshold_G",
    "insolation_Q", "legendre2", "load_orbital_series", "nullcline_seeds",
    "obliquity_s2", "preset", "temp_nullcline_F", "PLUS", "MINUS",
]
