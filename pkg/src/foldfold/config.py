"""Run configuration: a sectioned ``key = value`` file.

Sections and keys
-----------------
``[model]``
    ``kind``: ``glacial`` (default) or ``synthetic``.
    glacial: ``preset`` (``cycle`` or ``baseline``) plus any
    :class:`~foldfold.glacial.GlacialParams` field as an override.
    synthetic: ``variant`` (``nominal``, ``no_gx``, ``same_sign_h``,
    ``flipped_slopes``) plus any :class:`~foldfold.synthetic.SyntheticSpec`
    field.
``[surface]``
    ``a``, ``b``: override the switching-plane constants.
``[bifurcation]``
    ``free_param``: name of the parameter freed in the fold-fold search
    (glacial only; default ``T_plus``).
    ``seeds``: explicit seeds ``x, y, z, p`` separated by ``;``.
    ``seed_y``, ``seed_z``: ``lo, hi, n`` grids (used when ``seeds`` is absent);
    ``seed_x``: fixed x for grid seeds (glacial default: on the nullcline);
    ``seed_param``: parameter value for grid seeds.
    ``point``: ``x, y, z, p`` fold-fold point for check/predict/simulate/verify.
    ``point_tol``: residual gate for ``point`` before polishing (default 1e-3).
    ``epsilons``: comma-separated list of eps values.
    ``fit_eps_max``, ``fit_z_scale``, ``fit_x_scale``: time-map fit grid.
``[integration]``
    ``rtol``, ``atol``, ``event_tol``, ``max_step``, ``t_max``, ``transient``,
    ``max_events``.
``[output]``
    ``dir``: directory for reports and CSV files.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError, PreconditionError
from .glacial import GlacialParams, build_general_system, nullcline_seeds, preset
from .integrator import IntegrationOptions
from .synthetic import SyntheticSpec, build_synthetic, planted_point, synthetic_spec
from .system import PiecewiseSystem

SECTIONS = ("model", "surface", "bifurcation", "integration", "output")
_BIF_KEYS = {"free_param", "seeds", "seed_y", "seed_z", "seed_x", "seed_param", "point",
             "point_tol", "epsilons", "fit_eps_max", "fit_z_scale", "fit_x_scale"}
_INT_KEYS = {"rtol", "atol", "event_tol", "max_step", "t_max", "transient", "max_events"}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    model: GlacialParams | SyntheticSpec
    free_param: str | None = "T_plus"
    seeds: tuple[tuple[float, float, float, float], ...] = ()
    point: tuple[float, float, float, float] | None = None
    point_tol: float = 1e-3
    epsilons: tuple[float, ...] = (1e-3, 1e-4)
    fit_eps_max: float = 1e-4
    fit_z_scale: float | None = None
    fit_x_scale: float | None = None
    integration: IntegrationOptions = field(default_factory=IntegrationOptions)
    t_max: float | None = None
    transient: float = 0.5
    out_dir: Path | None = None
    source: str = ""

    def build_system(self) -> PiecewiseSystem:
        if self.kind == "glacial":
            return build_general_system(self.model, self.free_param)
        return build_synthetic(self.model)

    def model_dict(self) -> dict:
        return {"kind": self.kind, **self.model.to_dict()}


def _float(section: str, key: str, text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: not a number: {text!r}")
    if not math.isfinite(v):
        raise ConfigurationError(f"[{section}] {key}: must be finite")
    return v


def _floats(section: str, key: str, text: str) -> list[float]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return [_float(section, key, p.strip()) for p in parts]


def _grid(section: str, key: str, text: str) -> list[float]:
    vals = _floats(section, key, text)
    if len(vals) != 3 or vals[2] != int(vals[2]) or vals[2] < 0:
        raise ConfigurationError(f"[{section}] {key}: expected 'lo, hi, n'")
    lo, hi, n = vals[0], vals[1], int(vals[2])
    if n == 1:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _typed_fields(cls) -> dict:
    return {f.name: f for f in fields(cls)}


def _apply_overrides(cls, items: dict, section: str) -> dict:
    known = _typed_fields(cls)
    out = {}
    for k, v in items.items():
        if k not in known:
            raise ConfigurationError(f"[{section}] unknown key {k!r}")
        if k == "wdot_sign":
            out[k] = int(_float(section, k, v))
        else:
            out[k] = _float(section, k, v)
    return out


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"),
                                   default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}")
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigurationError(f"unknown section(s): {unknown}")
    sec = {s: dict(cp[s]) if cp.has_section(s) else {} for s in SECTIONS}

    model = dict(sec["model"])
    kind = model.pop("kind", "glacial").strip()
    surface = sec["surface"]
    bad = set(surface) - {"a", "b"}
    if bad:
        raise ConfigurationError(f"[surface] unknown key(s) {sorted(bad)}")
    surf = {k: _float("surface", k, v) for k, v in surface.items()}
    if kind == "glacial":
        name = model.pop("preset", "cycle").strip()
        over = _apply_overrides(GlacialParams, model, "model")
        params = preset(name, **over, **surf)
    elif kind == "synthetic":
        variant = model.pop("variant", "nominal").strip()
        over = _apply_overrides(SyntheticSpec, model, "model")
        params = synthetic_spec(variant, **over, **surf)
    else:
        raise ConfigurationError(f"[model] kind must be 'glacial' or 'synthetic', got {kind!r}")

    bif = sec["bifurcation"]
    bad = set(bif) - _BIF_KEYS
    if bad:
        raise ConfigurationError(f"[bifurcation] unknown key(s) {sorted(bad)}")
    free = bif.get("free_param", "T_plus").strip() if kind == "glacial" else "shift"
    if kind == "glacial" and free not in _typed_fields(GlacialParams):
        raise ConfigurationError(f"[bifurcation] free_param {free!r} is not a model parameter")
    seeds = _parse_seeds(kind, params, bif, free)
    if not seeds:
        raise ConfigurationError("[bifurcation] seed grid is empty")
    point = None
    if "point" in bif:
        pv = _floats("bifurcation", "point", bif["point"])
        if len(pv) != 4:
            raise ConfigurationError("[bifurcation] point: expected 'x, y, z, p'")
        point = tuple(pv)
    eps = tuple(_floats("bifurcation", "epsilons", bif.get("epsilons", "1e-3, 1e-4")))
    if not eps:
        raise ConfigurationError("[bifurcation] epsilons is empty")
    if any(e <= 0 for e in eps):
        raise ConfigurationError("[bifurcation] epsilons must be positive")

    integ = sec["integration"]
    bad = set(integ) - _INT_KEYS
    if bad:
        raise ConfigurationError(f"[integration] unknown key(s) {sorted(bad)}")
    okw = {}
    for k in ("rtol", "atol", "event_tol", "max_step"):
        if k in integ:
            okw[k] = _float("integration", k, integ[k])
    if "max_events" in integ:
        okw["max_events"] = int(_float("integration", "max_events", integ["max_events"]))
    try:
        opts = IntegrationOptions(**okw)
    except (ValueError, PreconditionError) as exc:
        raise ConfigurationError(f"[integration] {exc}")
    t_max = _float("integration", "t_max", integ["t_max"]) if "t_max" in integ else None
    if t_max is not None and t_max <= 0:
        raise ConfigurationError("[integration] t_max must be positive")
    transient = _float("integration", "transient", integ.get("transient", "0.5"))
    if not 0 <= transient < 1:
        raise ConfigurationError("[integration] transient must lie in [0, 1)")

    out = sec["output"]
    bad = set(out) - {"dir"}
    if bad:
        raise ConfigurationError(f"[output] unknown key(s) {sorted(bad)}")

    def opt(key):
        return _float("bifurcation", key, bif[key]) if key in bif else None

    return RunConfig(
        kind=kind, model=params, free_param=free, seeds=tuple(seeds), point=point,
        point_tol=opt("point_tol") or 1e-3, epsilons=eps,
        fit_eps_max=opt("fit_eps_max") or 1e-4, fit_z_scale=opt("fit_z_scale"),
        fit_x_scale=opt("fit_x_scale"), integration=opts, t_max=t_max, transient=transient,
        out_dir=Path(out["dir"]) if "dir" in out else None, source=source,
    )


def _parse_seeds(kind, params, bif, free) -> list[tuple[float, float, float, float]]:
    if "seeds" in bif:
        seeds = []
        for chunk in bif["seeds"].split(";"):
            if not chunk.strip():
                continue
            v = _floats("bifurcation", "seeds", chunk)
            if len(v) != 4:
                raise ConfigurationError("[bifurcation] seeds: each seed needs 'x, y, z, p'")
            seeds.append(tuple(v))
        return seeds
    if kind == "glacial":
        ys = _grid("bifurcation", "seed_y", bif.get("seed_y", "-1, 1.2, 12"))
        zs = _grid("bifurcation", "seed_z", bif.get("seed_z", "-1, 1.2, 12"))
        pv = _float("bifurcation", "seed_param", bif["seed_param"]) if "seed_param" in bif else None
        if "seed_x" in bif:
            x = _float("bifurcation", "seed_x", bif["seed_x"])
            p0 = getattr(params, free) if pv is None else pv
            return [(x, y, z, p0) for y in ys for z in zs]
        return nullcline_seeds(params, ys, zs, pv, free)
    x0, y0, z0, p0 = planted_point(params)
    ys = _grid("bifurcation", "seed_y", bif["seed_y"]) if "seed_y" in bif else [y0]
    zs = _grid("bifurcation", "seed_z", bif["seed_z"]) if "seed_z" in bif else [z0]
    x = _float("bifurcation", "seed_x", bif["seed_x"]) if "seed_x" in bif else x0
    pv = _float("bifurcation", "seed_param", bif["seed_param"]) if "seed_param" in bif else p0
    return [(x, y, z, pv) for y in ys for z in zs]


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    return parse_config(text, str(path))


__all__ = ["RunConfig", "load_config", "parse_config"]
