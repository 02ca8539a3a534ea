"""Fold-fold points, closed-form bifurcation coefficients and the theorem gate."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConsistencyError,
    DegeneracyError,
    EvaluationError,
    InapplicableError,
    PreconditionError,
)
from .system import (
    MINUS,
    PLUS,
    LocalJet,
    PiecewiseSystem,
    local_jet,
    surface_eval,
)

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEDUP_DISTANCE = 1e-6
_CROSS_RTOL = 1e-9

GTILDE_NOTE = (
    "k_tilde uses g_i(0) where one printed variant reads a tilded g_i(0); "
    "the tilde is treated as a typo"
)


@dataclass(frozen=True)
class FoldFoldPoint:
    x0: float
    y0: float
    z0: float
    param_name: str | None
    param_value: float | None
    residuals: tuple[float, float, float, float]

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals)

    def as_vector(self) -> np.ndarray:
        pv = 0.0 if self.param_value is None else self.param_value
        return np.array([self.x0, self.y0, self.z0, pv])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["residuals"] = list(self.residuals)
        return d


@dataclass(frozen=True)
class SeedFailure:
    seed: tuple[float, ...]
    reason: str
    condition: float | None = None


def _at_param(sys: PiecewiseSystem, param_value: float | None) -> PiecewiseSystem:
    if param_value is None or sys.rebuild is None:
        return sys
    return sys.with_param(param_value)


def foldfold_residual(sys: PiecewiseSystem, x0: float, y0: float, z0: float,
                      param_value: float | None = None) -> np.ndarray:
    """Return ``[H, f, sigma_minus, sigma_plus]`` at ``eps = 0``."""
    s = _at_param(sys, param_value)
    a, b = s.surface.a, s.surface.b
    g = s.g(x0, y0)
    out = np.array([
        surface_eval(s.surface, y0, z0),
        s.f(x0, y0),
        (a + b) * (g + s.gshift_minus(0.0)) - b * s.h_minus(y0, z0, 0.0),
        (a + b) * (g + s.gshift_plus(0.0)) - b * s.h_plus(y0, z0, 0.0),
    ], dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("foldfold_residual", float(np.max(np.abs(out))))
    return out


def make_point(sys: PiecewiseSystem, x0: float, y0: float, z0: float,
               param_value: float | None = None) -> FoldFoldPoint:
    if param_value is None:
        param_value = sys.param_value
    r = foldfold_residual(sys, x0, y0, z0, param_value)
    return FoldFoldPoint(float(x0), float(y0), float(z0), sys.param_name,
                         None if param_value is None else float(param_value),
                         tuple(float(v) for v in r))


def _jacobian(fun, v: np.ndarray) -> np.ndarray:
    n = v.size
    J = np.empty((n, n))
    for j in range(n):
        h = 1e-7 * (1.0 + abs(v[j]))
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (fun(v + e) - fun(v - e)) / (2.0 * h)
    return J


def _newton(fun, v0: np.ndarray, max_iter: int, tol: float):
    v = np.array(v0, dtype=float)
    r = fun(v)
    norm = float(np.linalg.norm(r))
    cond = None
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= 1e-3 * tol:
            break
        J = _jacobian(fun, v)
        cond = float(np.linalg.cond(J))
        if not math.isfinite(cond) or cond > 1e15:
            return v, r, f"singular Jacobian (condition {cond:.3e})", cond
        dv = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            try:
                trial = v + lam * dv
                rt = fun(trial)
                nt = float(np.linalg.norm(rt))
            except (EvaluationError, FloatingPointError, OverflowError):
                nt = math.inf
            if nt <= (1.0 - 1e-4 * lam) * norm or (nt < norm and lam < 1e-3):
                break
            lam *= 0.5
            if lam < 1e-12:
                break
        if not nt < math.inf or nt > norm:
            if np.max(np.abs(r)) <= tol:
                break
            return v, r, "line search failed", cond
        stalled = np.linalg.norm(lam * dv) <= 1e-15 * (1.0 + np.linalg.norm(v))
        v, r, norm = trial, rt, nt
        if stalled:
            break
    if np.max(np.abs(r)) > tol:
        return v, r, f"no convergence (max residual {np.max(np.abs(r)):.3e})", cond
    return v, r, None, cond


def find_foldfold(sys: PiecewiseSystem, seeds: Iterable[Sequence[float]], *,
                  max_iter: int = 100, tol: float = RESIDUAL_TOL,
                  failures: list | None = None) -> list[FoldFoldPoint]:
    """Damped Newton search for fold-fold points from each seed.

    Seeds are ``(x, y, z, param)``.  The free parameter must be wired into
    ``sys`` (see :meth:`PiecewiseSystem.with_param`); when it is not, the
    fourth seed component is ignored and the search runs in (x, y, z) only
    with a least-squares step.  Failed seeds are logged and, when given,
    appended to ``failures``.
    """
    free = sys.rebuild is not None

    def fun4(v):
        return foldfold_residual(sys, v[0], v[1], v[2], v[3])

    found: list[FoldFoldPoint] = []
    for seed in seeds:
        seed = tuple(float(s) for s in seed)
        if not all(math.isfinite(s) for s in seed):
            raise PreconditionError(f"non-finite seed {seed!r}")
        if free:
            v, r, err, cond = _newton(fun4, np.array(seed[:4]), max_iter, tol)
        else:
            v, r, err, cond = _newton_fixed(sys, np.array(seed[:3]), max_iter, tol)
            v = np.append(v, np.nan)
        if err is not None:
            log.debug("seed %r failed: %s", seed, err)
            if failures is not None:
                failures.append(SeedFailure(seed, err, cond))
            continue
        pv = float(v[3]) if free else sys.param_value
        point = make_point(sys, v[0], v[1], v[2], pv)
        if any(_distance(point, q) < DEDUP_DISTANCE for q in found):
            continue
        found.append(point)
    return found


def _newton_fixed(sys, v0, max_iter, tol):
    # Four equations in three unknowns: Gauss-Newton, converges only when the
    # system genuinely has a fold-fold point at the current parameter value.
    def fun(v):
        return foldfold_residual(sys, v[0], v[1], v[2], None)

    v = np.array(v0, dtype=float)
    r = fun(v)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= 1e-3 * tol:
            break
        J = np.empty((4, 3))
        for j in range(3):
            h = 1e-7 * (1.0 + abs(v[j]))
            e = np.zeros(3)
            e[j] = h
            J[:, j] = (fun(v + e) - fun(v - e)) / (2.0 * h)
        dv, *_ = np.linalg.lstsq(J, -r, rcond=None)
        v = v + dv
        r = fun(v)
        if np.linalg.norm(dv) <= 1e-15 * (1.0 + np.linalg.norm(v)):
            break
    if np.max(np.abs(r)) > tol:
        return v, r, f"no convergence (max residual {np.max(np.abs(r)):.3e})", None
    return v, r, None, None


def _distance(p: FoldFoldPoint, q: FoldFoldPoint) -> float:
    d = np.array([p.x0 - q.x0, p.y0 - q.y0, p.z0 - q.z0])
    if p.param_value is not None and q.param_value is not None:
        d = np.append(d, p.param_value - q.param_value)
    return float(np.linalg.norm(d))


def verify_point(sys: PiecewiseSystem, p: FoldFoldPoint, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Recompute the residuals of ``p`` and raise if any exceeds ``tol``."""
    r = foldfold_residual(sys, p.x0, p.y0, p.z0, p.param_value)
    if np.max(np.abs(r)) > tol:
        raise PreconditionError(
            f"point is not a fold-fold point: residuals {r.tolist()!r} exceed {tol:g}")
    return r


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class RegionCoefficients:
    """Closed-form coefficients of one region.

    The barred quantities do not depend on h0; the plain ones are the
    time-map coefficients ``T = alpha dx + beta dz + gamma eps + eta dz^2``.
    """

    h0: float
    G: float
    D: float
    alpha_bar: float
    gamma_bar: float
    k_bbar: float
    k_tilde: float
    k_hat: float
    eta_bar: float
    A: float
    B: float
    B_aux: float
    C: float
    beta: float
    alpha: float
    gamma: float
    eta: float
    k_bar: float
    jet: LocalJet = field(repr=False, compare=False)


@dataclass(frozen=True)
class BifurcationCoefficients:
    point: FoldFoldPoint
    a: float
    b: float
    minus: RegionCoefficients
    plus: RegionCoefficients
    k: float
    m: float
    K: float
    K_beta: float
    M: float
    M_beta: float
    notes: tuple[str, ...] = ()

    def region(self, region: int) -> RegionCoefficients:
        return self.minus if region == MINUS else self.plus

    @property
    def ratio(self) -> float:
        """``-M/K``; positive iff two fixed points bifurcate."""
        return -self.M / self.K

    def to_dict(self) -> dict:
        out: dict = {}
        names = ("alpha_bar", "gamma_bar", "D", "k_bbar", "k_tilde", "k_hat", "eta_bar",
                 "A", "B", "C", "beta", "h0", "alpha", "gamma", "eta")
        for tag, rc in (("minus", self.minus), ("plus", self.plus)):
            for n in names:
                out[f"{n}_{tag}"] = getattr(rc, n)
        out.update(k=self.k, m=self.m, K=self.K, M=self.M)
        return out


def _close(x: float, y: float, rtol: float) -> bool:
    if not (math.isfinite(x) and math.isfinite(y)):
        return (math.isnan(x) and math.isnan(y)) or x == y
    return abs(x - y) <= rtol * max(abs(x), abs(y), 1e-300)


def _region_coefficients(a: float, b: float, jet: LocalJet) -> RegionCoefficients:
    s = a + b
    zp = b / s
    j = jet
    G = j.g + j.gshift
    h = j.h
    D = b * j.g_y - b * b / s * j.h_y - b * j.h_z
    scale = b * abs(j.g_y) + b * b / abs(s) * abs(j.h_y) + abs(b) * abs(j.h_z)
    if abs(D) <= 1e-10 * max(scale, 1e-300):
        raise DegeneracyError(f"D vanishes in region {j.region:+d} (D={D!r})")
    if h == 0:
        raise DegeneracyError(f"h_i(y0, z0, 0) vanishes in region {j.region:+d}")
    r = s / b
    alpha_bar = -2.0 * s * j.g_x / D
    gamma_bar = -2.0 * (s * j.gshift_eps - b * j.h_eps) / D
    flow2 = j.g_x * j.f_y + j.g_yy * G + j.g_y ** 2
    hess = j.h_yy + 2.0 * r * j.h_yz + r * r * j.h_zz
    k_bbar = (s / 6.0 * flow2 - b / 6.0 * G * hess
              - b / 6.0 * (j.h_y * j.g_y + j.h_z * j.h_y + r * j.h_z ** 2))
    k_tilde = (s / 2.0 * flow2 * zp - b / 2.0 * (j.h_yy + r * j.h_yz) * G * zp
               - b / 2.0 * (j.h_y * j.g_y + j.h_z * j.h_y) * zp
               - b / 2.0 * (j.h_yz + r * j.h_zz) * G - b / 2.0 * j.h_z ** 2)
    k_hat = s / 2.0 * j.g_yy * zp ** 2 - b * (0.5 * j.h_yy * zp ** 2 + j.h_yz * zp + 0.5 * j.h_zz)
    eta_bar = -2.0 / D * (4.0 * zp * k_bbar / h - 2.0 * k_tilde / h + k_hat)

    beta = -2.0 / h
    alpha = alpha_bar / h
    gamma = gamma_bar / h
    eta = eta_bar / h
    fxf = j.f_x * j.f_y + j.f_yy * G + j.f_y * j.g_y
    A = j.f_x + 0.5 * j.f_y * zp * alpha_bar
    C = 0.5 * j.f_y * zp * gamma_bar
    B = (0.5 * j.f_y * zp * eta_bar + 4.0 * zp * fxf / (6.0 * h)
         - (j.f_x * j.f_y + j.f_y * j.g_y) * zp / h - 0.5 * j.f_yy * zp ** 2)
    B_aux = (0.5 * j.f_y * G * eta + fxf * G * beta ** 2 / 6.0
             + 0.5 * (j.f_x * j.f_y + j.f_yy * G + j.f_y * j.g_y) * zp * beta
             + 0.5 * j.f_yy * zp ** 2)
    if not _close(B, B_aux, _CROSS_RTOL):
        raise ConsistencyError(f"B in region {j.region:+d} (notation vs auxiliary form)", B, B_aux)
    return RegionCoefficients(
        h0=h, G=G, D=D, alpha_bar=alpha_bar, gamma_bar=gamma_bar, k_bbar=k_bbar,
        k_tilde=k_tilde, k_hat=k_hat, eta_bar=eta_bar, A=A, B=B, B_aux=B_aux, C=C,
        beta=beta, alpha=alpha, gamma=gamma, eta=eta, k_bar=k_bbar * G, jet=jet,
    )


def compute_coefficients(sys: PiecewiseSystem, p: FoldFoldPoint,
                         tol: float = RESIDUAL_TOL) -> BifurcationCoefficients:
    s = _at_param(sys, p.param_value)
    verify_point(s, p, tol)
    a, b = s.surface.a, s.surface.b
    rc = {i: _region_coefficients(a, b, local_jet(s, i, p.x0, p.y0, p.z0, 0.0))
          for i in (MINUS, PLUS)}
    cm, cp = rc[MINUS], rc[PLUS]
    dab = cm.alpha_bar - cp.alpha_bar
    if abs(dab) <= 1e-12 * max(1.0, abs(cm.alpha_bar), abs(cp.alpha_bar)):
        k = m = K = K_beta = M = M_beta = math.nan
    else:
        k = -(cm.eta_bar - cp.eta_bar) / dab
        m = -(cm.gamma_bar - cp.gamma_bar) / dab
        K = 2.0 * (k * cp.A + cp.B) / cp.h0 - 2.0 * (k * cm.A + cm.B) / cm.h0
        K_beta = (k * cm.A + cm.B) * cm.beta - (k * cp.A + cp.B) * cp.beta
        M = 2.0 * (m * cp.A + cp.C) / cp.h0 - 2.0 * (m * cm.A + cm.C) / cm.h0
        M_beta = (m * cm.A + cm.C) * cm.beta - (m * cp.A + cp.C) * cp.beta
        if not _close(K, K_beta, _CROSS_RTOL):
            raise ConsistencyError("K (notation vs beta form)", K, K_beta)
        if not _close(M, M_beta, _CROSS_RTOL):
            raise ConsistencyError("M (notation vs beta form)", M, M_beta)
    return BifurcationCoefficients(
        point=p, a=a, b=b, minus=cm, plus=cp, k=k, m=m, K=K, K_beta=K_beta, M=M,
        M_beta=M_beta, notes=(GTILDE_NOTE,),
    )


# ---------------------------------------------------------------------------
# theorem gate


@dataclass(frozen=True)
class Condition:
    holds: bool | None
    lhs: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "lhs": self.lhs}


CONDITION_NAMES = ("as3", "as4", "stab", "timemap", "dir1", "dir2")


@dataclass(frozen=True)
class TheoremVerdict:
    cond_as3: Condition
    cond_as4: Condition
    cond_stab: Condition
    cond_timemap: Condition
    cond_dir1: Condition
    cond_dir2: Condition
    applicable: bool
    stable_branch: str | None
    realized_branch: str
    step3_A: float
    step3_eta: float
    notes: tuple[str, ...] = ()

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(n for n in CONDITION_NAMES if getattr(self, f"cond_{n}").holds is False)

    def to_dict(self) -> dict:
        d = {f"cond_{n}": getattr(self, f"cond_{n}").to_dict() for n in CONDITION_NAMES}
        d.update(
            applicable=self.applicable, stable_branch=self.stable_branch,
            realized_branch=self.realized_branch, failed=list(self.failed),
            step3_A=self.step3_A, step3_eta=self.step3_eta, notes=list(self.notes),
        )
        return d


def check_theorem(sys: PiecewiseSystem, p: FoldFoldPoint,
                  c: BifurcationCoefficients) -> TheoremVerdict:
    """Evaluate every hypothesis of the fold-fold limit-cycle theorem."""
    cm, cp = c.minus, c.plus
    a, b = c.a, c.b
    zp = b / (a + b)
    hp, hm = cp.h0, cm.h0
    g_y = cp.jet.g_y

    dab = cm.alpha_bar - cp.alpha_bar
    as3 = Condition(bool(abs(dab) > 1e-12 * max(1.0, abs(cm.alpha_bar), abs(cp.alpha_bar))), dab)
    km = c.K * c.M
    as4 = Condition(None if math.isnan(km) else bool(km < 0), km)
    stab = Condition(bool(hp * (cp.eta_bar - cm.eta_bar) < 0), hp * (cp.eta_bar - cm.eta_bar))
    timemap = Condition(bool(hp * hm < 0), hp * hm)
    d1 = b * hp * (g_y - zp * cp.jet.h_y - cp.jet.h_z)
    d2 = b * hp * (g_y - zp * cm.jet.h_y - cm.jet.h_z)
    dir1 = Condition(bool(d1 < 0), d1)
    dir2 = Condition(bool(d2 < 0), d2)
    conds = (as3, as4, stab, timemap, dir1, dir2)
    applicable = all(x.holds is True for x in conds)

    s3a = hp * cp.A - hm * cm.A
    s3e = hp * cp.eta - hm * cm.eta
    if s3a < 0 and s3e < 0:
        stable = "lower"
    elif s3a > 0 and s3e > 0:
        stable = "upper"
    else:
        stable = None
    realized = "lower" if hp > 0 else "upper"
    notes = list(c.notes)
    eta_form_stable = (s3e < 0) if realized == "lower" else (s3e > 0)
    if eta_form_stable != stab.holds:
        notes.append(
            "stability condition in eta_bar form and the step-3 h*eta form disagree "
            f"(lhs {stab.lhs!r} vs {s3e!r})")
    if applicable and not c.ratio > 0:
        raise ConsistencyError("-M/K for an applicable verdict", c.ratio, 0.0)
    return TheoremVerdict(
        cond_as3=as3, cond_as4=as4, cond_stab=stab, cond_timemap=timemap,
        cond_dir1=dir1, cond_dir2=dir2, applicable=applicable, stable_branch=stable,
        realized_branch=realized, step3_A=s3a, step3_eta=s3e, notes=tuple(notes),
    )


def _ratio(c: BifurcationCoefficients) -> float:
    r = c.ratio
    if not (math.isfinite(r) and r > 0):
        raise InapplicableError(f"-M/K = {r!r} is not positive; no fixed points bifurcate")
    return r


def _positive_eps(eps: float) -> float:
    if not (math.isfinite(eps) and eps > 0):
        raise PreconditionError(f"eps must be positive, got {eps!r}")
    return float(eps)


def predict_z_offset(c: BifurcationCoefficients, eps: float) -> float:
    return math.sqrt(_positive_eps(eps)) * math.sqrt(_ratio(c))


def predict_transit_times(c: BifurcationCoefficients, eps: float) -> tuple[float, float]:
    """Leading-order transit times ``(T_minus, T_plus)`` of the two arcs."""
    root = math.sqrt(_positive_eps(eps) * _ratio(c))
    return 2.0 / abs(c.minus.h0) * root, 2.0 / abs(c.plus.h0) * root


def predict_period(c: BifurcationCoefficients, eps: float) -> float:
    tm, tp = predict_transit_times(c, eps)
    return tm + tp


def predict_fixed_points(c: BifurcationCoefficients, p: FoldFoldPoint,
                         eps: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Return the lower and upper fixed points ``(x, z)`` at leading order."""
    r = _ratio(c)
    eps = _positive_eps(eps)
    x = p.x0 + eps * (c.k * r + c.m)
    dz = math.sqrt(eps) * math.sqrt(r)
    return (x, p.z0 - dz), (x, p.z0 + dz)


__all__ = [
    "BifurcationCoefficients", "Condition", "FoldFoldPoint", "RegionCoefficients",
    "SeedFailure", "TheoremVerdict", "check_theorem", "compute_coefficients",
    "find_foldfold", "foldfold_residual", "make_point", "predict_fixed_points",
    "predict_period", "predict_transit_times", "predict_z_offset", "verify_point",
    "PLUS", "MINUS",
]
