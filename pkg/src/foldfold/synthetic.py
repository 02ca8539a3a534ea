"""Polynomial two-zone systems with a planted fold-fold point.

Writing ``u = y - y0`` with ``y0 = a/(a+b)``, the planted point is
``(x, y, z) = (0, y0, 0)`` at parameter value 0::

    f    = fx x + fy u + fyy/2 u^2
    g    = gx x + gy u + gyy/2 u^2
    g_i  = c_i + d_i eps  (+ p for the plus region)
    h_i  = h0_i + hy_i u + hz_i z + hyy_i/2 u^2 + hyz_i u z + hzz_i/2 z^2 + he_i eps

with ``c_i = b h0_i / (a + b)`` so that both fields are tangent to the
surface at the planted point.  ``time_scale`` multiplies every component.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigurationError
from .system import Derivatives, PiecewiseSystem, SurfaceParams


@dataclass(frozen=True)
class SyntheticSpec:
    a: float = 1.0
    b: float = 1.5
    fx: float = -1.0
    fy: float = 0.7
    fyy: float = 0.6
    gx: float = 0.8
    gy: float = -2.0
    gyy: float = 0.8
    h0_minus: float = -1.0
    hy_minus: float = 0.4
    hz_minus: float = -0.2
    hyy_minus: float = -0.4
    hyz_minus: float = 0.15
    hzz_minus: float = 0.5
    he_minus: float = -0.1
    d_minus: float = -0.5
    h0_plus: float = 1.0
    hy_plus: float = 0.5
    hz_plus: float = -0.3
    hyy_plus: float = 0.6
    hyz_plus: float = -0.2
    hzz_plus: float = 0.2
    he_plus: float = 0.2
    d_plus: float = 0.3
    time_scale: float = 1.0

    @property
    def y0(self) -> float:
        return self.a / (self.a + self.b)

    def to_dict(self) -> dict:
        return asdict(self)


# one-hypothesis violations used as negative controls
VARIANTS = {
    "nominal": {},
    "no_gx": {"gx": 0.0},
    "same_sign_h": {"h0_minus": 1.0, "hz_minus": 0.5},
    "flipped_slopes": {"he_minus": 0.1, "d_minus": 0.5, "he_plus": -0.2, "d_plus": -0.3},
}


def synthetic_spec(variant: str = "nominal", **overrides) -> SyntheticSpec:
    try:
        base = VARIANTS[variant]
    except KeyError:
        raise ConfigurationError(f"unknown synthetic variant {variant!r}; choose from {sorted(VARIANTS)}")
    known = {f.name for f in fields(SyntheticSpec)}
    bad = set(overrides) - known
    if bad:
        raise ConfigurationError(f"unknown synthetic keys: {sorted(bad)}")
    return replace(SyntheticSpec(), **{**base, **overrides})


def build_synthetic(spec: SyntheticSpec, param_value: float = 0.0) -> PiecewiseSystem:
    """Build the system; the free parameter ``shift`` offsets the plus-region g-shift."""
    k = spec.time_scale
    s = spec.a + spec.b
    if s == 0:
        raise ConfigurationError("degenerate surface: a + b = 0")
    y0 = spec.a / s
    cm = spec.b * spec.h0_minus / s
    cp = spec.b * spec.h0_plus / s
    sp = spec

    def f(x, y):
        u = y - y0
        return k * (sp.fx * x + sp.fy * u + 0.5 * sp.fyy * u * u)

    def g(x, y):
        u = y - y0
        return k * (sp.gx * x + sp.gy * u + 0.5 * sp.gyy * u * u)

    def gm(eps):
        return k * (cm + sp.d_minus * eps)

    def gp(eps):
        return k * (cp + sp.d_plus * eps + param_value)

    def make_h(h0, hy, hz, hyy, hyz, hzz, he):
        def h(y, z, eps):
            u = y - y0
            return k * (h0 + hy * u + hz * z + 0.5 * hyy * u * u + hyz * u * z
                        + 0.5 * hzz * z * z + he * eps)

        def h_y(y, z, eps):
            return k * (hy + hyy * (y - y0) + hyz * z)

        def h_z(y, z, eps):
            return k * (hz + hyz * (y - y0) + hzz * z)

        consts = {"h_yy": k * hyy, "h_yz": k * hyz, "h_zz": k * hzz, "h_eps": k * he}
        return h, h_y, h_z, consts

    hm, hm_y, hm_z, cmn = make_h(sp.h0_minus, sp.hy_minus, sp.hz_minus, sp.hyy_minus,
                                 sp.hyz_minus, sp.hzz_minus, sp.he_minus)
    hp, hp_y, hp_z, cpl = make_h(sp.h0_plus, sp.hy_plus, sp.hz_plus, sp.hyy_plus,
                                 sp.hyz_plus, sp.hzz_plus, sp.he_plus)

    def const3(v):
        return lambda y, z, eps: v

    funcs = {
        "f_x": lambda x, y: k * sp.fx,
        "f_y": lambda x, y: k * (sp.fy + sp.fyy * (y - y0)),
        "f_yy": lambda x, y: k * sp.fyy,
        "g_x": lambda x, y: k * sp.gx,
        "g_y": lambda x, y: k * (sp.gy + sp.gyy * (y - y0)),
        "g_yy": lambda x, y: k * sp.gyy,
        "gshift_eps-": lambda eps: k * sp.d_minus,
        "gshift_eps+": lambda eps: k * sp.d_plus,
        "h_y-": hm_y, "h_z-": hm_z, "h_y+": hp_y, "h_z+": hp_z,
    }
    for tag, consts in (("-", cmn), ("+", cpl)):
        for name, v in consts.items():
            funcs[name + tag] = const3(v)

    return PiecewiseSystem(
        surface=SurfaceParams(spec.a, spec.b), f=f, g=g, gshift_minus=gm, gshift_plus=gp,
        h_minus=hm, h_plus=hp, derivatives=Derivatives(funcs), param_name="shift",
        param_value=float(param_value), rebuild=lambda v: build_synthetic(spec, v),
        label="synthetic",
    )


def planted_point(spec: SyntheticSpec) -> tuple[float, float, float, float]:
    return (0.0, spec.y0, 0.0, 0.0)


__all__ = ["SyntheticSpec", "VARIANTS", "build_synthetic", "planted_point", "synthetic_spec"]
