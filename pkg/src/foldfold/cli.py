"""Command-line interface.

Exit codes: 0 success, 1 negative scientific result, 2 configuration
error, 3 precondition failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bifurcation import (
    FoldFoldPoint,
    check_theorem,
    compute_coefficients,
    find_foldfold,
    foldfold_residual,
    predict_fixed_points,
    predict_period,
    predict_transit_times,
    predict_z_offset,
)
from .config import RunConfig, load_config, parse_config
from .errors import (
    ConfigurationError,
    DegeneracyError,
    DomainError,
    FoldFoldError,
    InapplicableError,
    InsufficientDataError,
    PreconditionError,
)
from .glacial import insolation_Q, load_orbital_series, obliquity_s2
from .integrator import integrate
from .poincare import find_cycle, fit_timemap, measure_trajectory
from .system import MINUS, PLUS, State, region_name, surface_lift

log = logging.getLogger(__name__)

EXIT_OK, EXIT_NEGATIVE, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_NUMERICAL = range(5)

FIT_TOL = {"glacial": 1e-3, "synthetic": 1e-4}
PERIOD_TOL = {1e-3: 0.05, 1e-4: 0.03}
OFFSET_TOL = {1e-3: 0.15, 1e-4: 0.05, 1e-5: 0.02}
CYCLE_KEYS = ("epsilon", "period_predicted", "period_newton", "period_simulated",
              "z_offset_predicted", "z_offset_measured", "eigenvalue_moduli")


class CommandResult:
    def __init__(self, code: int, report: dict, text: str = ""):
        self.code = code
        self.report = report
        self.text = text


def _clean(obj):
    """Make a report JSON-safe: NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False)


def _g(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# point handling


def resolve_point(cfg: RunConfig, system, point: Sequence[float] | None) -> tuple[FoldFoldPoint, list]:
    """Gate a user-supplied point on its residuals, then polish it by Newton."""
    if point is None:
        point = cfg.point
    if point is None:
        raise ConfigurationError("no fold-fold point given (use --point or [bifurcation] point)")
    x, y, z, pv = (float(v) for v in point)
    raw = foldfold_residual(system, x, y, z, pv)
    if np.max(np.abs(raw)) > cfg.point_tol:
        raise PreconditionError(
            f"point fails the fold-fold residual gate: residuals {raw.tolist()!r} "
            f"exceed {cfg.point_tol:g}")
    found = find_foldfold(system, [(x, y, z, pv)])
    if not found:
        raise PreconditionError("point could not be polished to a fold-fold point")
    p = found[0]
    dist = np.linalg.norm(p.as_vector() - np.array([x, y, z, pv]))
    if dist > 10 * cfg.point_tol * (1.0 + np.linalg.norm([x, y, z, pv])):
        raise PreconditionError(f"polishing moved the point by {dist:g}")
    return p, raw.tolist()


def _model_report(cfg: RunConfig) -> dict:
    return {"model": cfg.model_dict(), "free_param": cfg.free_param, "config": cfg.source}


# ---------------------------------------------------------------------------
# commands


def cmd_find_foldfold(cfg: RunConfig) -> CommandResult:
    system = cfg.build_system()
    failures: list = []
    pts = find_foldfold(system, cfg.seeds, failures=failures)
    report = {
        **_model_report(cfg),
        "n_seeds": len(cfg.seeds),
        "n_failed": len(failures),
        "solutions": [p.to_dict() for p in pts],
    }
    lines = [f"{len(pts)} fold-fold point(s) from {len(cfg.seeds)} seeds"]
    for p in pts:
        lines.append(f"  x={_g(p.x0)} y={_g(p.y0)} z={_g(p.z0)} {p.param_name}={_g(p.param_value)}"
                     f" max|res|={p.max_residual:.3e}")
    return CommandResult(EXIT_OK if pts else EXIT_NEGATIVE, report, "\n".join(lines))


def _analyse(cfg: RunConfig, point):
    system = cfg.build_system()
    p, raw = resolve_point(cfg, system, point)
    c = compute_coefficients(system, p)
    v = check_theorem(system, p, c)
    return system, p, raw, c, v


def cmd_check(cfg: RunConfig, point=None) -> CommandResult:
    try:
        system, p, raw, c, v = _analyse(cfg, point)
    except DegeneracyError as exc:
        return CommandResult(EXIT_NEGATIVE, {"applicable": False, "error": str(exc)}, str(exc))
    report = {
        **_model_report(cfg),
        "point": p.to_dict(),
        "input_residuals": raw,
        "coefficients": c.to_dict(),
        "verdict": v.to_dict(),
        "applicable": v.applicable,
        "stable_branch": v.stable_branch,
    }
    lines = [f"{k:>16s} = {_g(val)}" for k, val in c.to_dict().items()]
    for name in ("as3", "as4", "stab", "timemap", "dir1", "dir2"):
        cond = getattr(v, f"cond_{name}")
        lines.append(f"{name:>16s}: {cond.holds} (lhs {_g(cond.lhs)})")
    lines.append(f"      applicable: {v.applicable}; stable branch: {v.stable_branch}")
    return CommandResult(EXIT_OK if v.applicable else EXIT_NEGATIVE, report, "\n".join(lines))


def _epsilons(cfg: RunConfig, epsilons) -> tuple[float, ...]:
    eps = tuple(epsilons) if epsilons else cfg.epsilons
    if not eps or not all(math.isfinite(e) and e > 0 for e in eps):
        raise ConfigurationError(f"eps values must be positive, got {list(eps)!r}")
    return eps


def cmd_predict(cfg: RunConfig, point=None, epsilons=None) -> CommandResult:
    epsilons = _epsilons(cfg, epsilons)
    system, p, raw, c, v = _analyse(cfg, point)
    if not v.applicable:
        return CommandResult(EXIT_NEGATIVE, {"applicable": False, "failed": list(v.failed),
                                             "verdict": v.to_dict()},
                             f"theorem not applicable: failed {', '.join(v.failed)}")
    rows = []
    for eps in epsilons:
        lo, up = predict_fixed_points(c, p, eps)
        tm, tp = predict_transit_times(c, eps)
        rows.append({
            "epsilon": eps, "T_pred": predict_period(c, eps), "T_minus": tm, "T_plus": tp,
            "z_offset_pred": predict_z_offset(c, eps),
            "fixed_point_lower": list(lo), "fixed_point_upper": list(up),
        })
    report = {**_model_report(cfg), "point": p.to_dict(), "rows": rows}
    lines = ["epsilon T_pred z_offset_pred x_fixed z_lower z_upper"]
    for r in rows:
        lines.append(" ".join(_g(v) for v in (r["epsilon"], r["T_pred"], r["z_offset_pred"],
                                                r["fixed_point_lower"][0], r["fixed_point_lower"][1],
                                                r["fixed_point_upper"][1])))
    return CommandResult(EXIT_OK, report, "\n".join(lines))


def cycle_report(system, p, c, eps: float, t_max: float | None, cfg: RunConfig,
                 init: State | None = None, write_dir: Path | None = None) -> dict:
    """Newton cycle, long simulation and predictions for one eps."""
    applicable_ratio = c.ratio > 0 if math.isfinite(c.ratio) else False
    t_pred = predict_period(c, eps) if applicable_ratio else None
    zoff = predict_z_offset(c, eps) if applicable_ratio else None
    newton = None
    if applicable_ratio:
        try:
            newton = find_cycle(system, p, eps, coeffs=c)
        except FoldFoldError as exc:
            log.warning("cycle search failed at eps=%g: %s", eps, exc)
    if init is None:
        if newton is not None:
            xs, zs = newton.fixed_point
            dz = -3.0 * (p.z0 - zs)
        else:
            xs, zs, dz = p.x0, p.z0, -math.sqrt(eps)
        z_init = p.z0 + dz if newton is not None else zs + dz
        init = State(xs, surface_lift(system.surface, z_init), z_init)
    if t_max is None:
        t_max = 400.0 * (t_pred if t_pred else 1.0)
    opts = cfg.integration
    if not math.isfinite(opts.max_step):
        step = (t_pred or t_max / 400.0) / 100.0
        opts = replace(opts, max_step=step)
    traj = integrate(system, init, eps, t_max, opts)
    meas = None
    try:
        meas = measure_trajectory(traj, cfg.transient)
    except InsufficientDataError as exc:
        log.warning("cycle measurement failed: %s", exc)
    if write_dir is not None:
        write_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(write_dir / "trajectory.csv", system.surface)
        traj.events_to_csv(write_dir / "events.csv")
    return {
        "epsilon": eps,
        "period_predicted": t_pred,
        "period_newton": newton.period if newton else None,
        "period_simulated": meas.period if meas else None,
        "period_simulated_std": meas.period_std if meas else None,
        "z_offset_predicted": zoff,
        "z_offset_measured": (p.z0 - newton.fixed_point[1]) if newton else None,
        "z_amplitude_simulated": meas.z_amplitude if meas else None,
        "n_cycles": meas.n_cycles if meas else 0,
        "eigenvalue_moduli": list(newton.eigenvalue_moduli) if newton else None,
        "fixed_point": list(newton.fixed_point) if newton else None,
        "partner_point": list(newton.partner_point) if newton else None,
        "t_max": t_max,
        "init": list(init),
    }


def cmd_simulate(cfg: RunConfig, point=None, eps: float | None = None,
                 t_max: float | None = None, out_dir: Path | None = None) -> CommandResult:
    eps = cfg.epsilons[0] if eps is None else eps
    if not (math.isfinite(eps) and eps > 0):
        raise ConfigurationError(f"eps must be positive, got {eps!r}")
    if t_max is not None and not t_max > 0:
        raise ConfigurationError("t_max must be positive")
    system, p, raw, c, v = _analyse(cfg, point)
    out_dir = out_dir or cfg.out_dir or Path("foldfold-out")
    rep = cycle_report(system, p, c, eps, t_max if t_max is not None else cfg.t_max, cfg,
                       write_dir=out_dir)
    cycle = {k: rep[k] for k in CYCLE_KEYS}
    (out_dir / "cycle.json").write_text(dumps(cycle))
    report = {**_model_report(cfg), "point": p.to_dict(), "applicable": v.applicable,
              "cycle": rep, "cycle_json": str(out_dir / "cycle.json"), "trajectory_csv": str(out_dir / "trajectory.csv"),
              "events_csv": str(out_dir / "events.csv")}
    text = (f"eps={_g(eps)} period_simulated={rep['period_simulated']} "
            f"period_predicted={rep['period_predicted']} z_amplitude={rep['z_amplitude_simulated']}")
    code = EXIT_OK if rep["period_simulated"] is not None else EXIT_NEGATIVE
    return CommandResult(code, report, text)


def _rel(a: float, b: float, floor: float = 0.0) -> float:
    return abs(a - b) / max(abs(b), floor, 1e-300)


def _offset_tol(eps: float) -> float:
    for e, tol in OFFSET_TOL.items():
        if math.isclose(eps, e, rel_tol=1e-9):
            return tol
    return 5.0 * math.sqrt(eps)


def _period_tol(eps: float) -> float:
    for e, tol in PERIOD_TOL.items():
        if math.isclose(eps, e, rel_tol=1e-9):
            return tol
    return 0.05 if eps >= 1e-3 else 0.03


def cmd_verify(cfg: RunConfig, point=None, epsilons=None) -> CommandResult:
    epsilons = _epsilons(cfg, epsilons)
    system, p, raw, c, v = _analyse(cfg, point)
    if not v.applicable:
        return CommandResult(EXIT_NEGATIVE, {"applicable": False, "failed": list(v.failed)},
                             f"theorem not applicable: failed {', '.join(v.failed)}")
    tol_fit = FIT_TOL.get(cfg.kind, 1e-3)
    rows = []

    def row(name, value, reference, err, tol, ok=None):
        ok = bool(err <= tol) if ok is None else ok
        rows.append({"name": name, "value": value, "reference": reference,
                     "error": err, "tolerance": tol, "pass": ok})

    emax = cfg.fit_eps_max
    for region in (MINUS, PLUS):
        rc = c.region(region)
        tag = region_name(region)
        fit = fit_timemap(system, p, region, [0.0, 0.5 * emax, emax],
                          z_scale=cfg.fit_z_scale, x_scale=cfg.fit_x_scale)
        for nm in ("alpha", "beta", "gamma", "eta"):
            other = c.region(-region)
            floor = max(abs(getattr(rc, nm)), abs(getattr(other, nm))) * 1e-3
            ref = getattr(rc, nm)
            row(f"fit_{nm}_{tag}", getattr(fit, nm), ref, _rel(getattr(fit, nm), ref, floor), tol_fit)
        row(f"beta_identity_{tag}", rc.beta, -2.0 / rc.h0, _rel(rc.beta, -2.0 / rc.h0), 1e-12)
    for eps in epsilons:
        t_pred = predict_period(c, eps)
        try:
            cyc = find_cycle(system, p, eps, coeffs=c)
        except FoldFoldError as exc:
            row(f"cycle_eps={eps:g}", None, None, math.inf, 0.0, ok=False)
            rows[-1]["error_message"] = str(exc)
            continue
        row(f"period_eps={eps:g}", cyc.period, t_pred, _rel(t_pred, cyc.period), _period_tol(eps))
        zo = predict_z_offset(c, eps)
        meas = p.z0 - cyc.fixed_point[1]
        row(f"z_offset_eps={eps:g}", meas, zo, _rel(meas, zo), _offset_tol(eps))
        mod = max(cyc.eigenvalue_moduli)
        row(f"eigen_modulus_eps={eps:g}", mod, 1.0, mod, 1.0, ok=bool(mod < 1.0))
    ok = all(r["pass"] for r in rows)
    report = {**_model_report(cfg), "point": p.to_dict(), "rows": rows, "all_pass": ok}
    lines = [f"{'PASS' if r['pass'] else 'FAIL'} {r['name']}: {r['value']} vs {r['reference']}"
             f" (err {r['error']:.3e}, tol {r['tolerance']:g})" for r in rows]
    return CommandResult(EXIT_OK if ok else EXIT_NEGATIVE, report, "\n".join(lines))


def cmd_forcing(series: Path, out: Path | None) -> CommandResult:
    samples = load_orbital_series(series)
    rows = [(s.t, insolation_Q(s.e), obliquity_s2(s.beta)) for s in samples]
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Q", "s2"])
            w.writerows([[_g(v) for v in r] for r in rows])
    report = {"series": str(series), "n_samples": len(rows), "output": str(out) if out else None}
    text = "t,Q,s2\n" + "\n".join(",".join(_g(v) for v in r) for r in rows) if out is None else \
        f"wrote {len(rows)} rows to {out}"
    return CommandResult(EXIT_OK, report, text)


# ---------------------------------------------------------------------------
# entry point


def _point_arg(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected 'x,y,z,param'")
    return vals


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="foldfold", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration file")
    common.add_argument("--out", type=Path, help="directory for reports and CSV output")
    common.add_argument("--json", action="store_true", help="print the JSON report")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("find-foldfold", parents=[common], help="search for fold-fold points")
    for name in ("check", "predict", "simulate", "verify"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--point", type=_point_arg, help="x,y,z,param")
        if name in ("predict", "verify"):
            sp.add_argument("--eps", type=_eps_list, help="comma-separated eps values")
        if name == "simulate":
            sp.add_argument("--eps", type=float)
            sp.add_argument("--t-max", type=float)
    fp = sub.add_parser("forcing", parents=[common], help="insolation and s2 from an orbital series")
    fp.add_argument("series", type=Path)
    fp.add_argument("-o", "--output", type=Path, help="CSV output file (default: stdout)")
    return ap


def run(argv: Sequence[str] | None = None) -> CommandResult:
    return dispatch(build_parser().parse_args(argv))


def dispatch(args: argparse.Namespace) -> CommandResult:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "forcing":
        out = args.output
        if out is None and args.out is not None:
            out = args.out / "forcing.csv"
        return cmd_forcing(args.series, out)
    if args.config is None:
        cfg = parse_config("")
    else:
        cfg = load_config(args.config)
    if args.command == "find-foldfold":
        return cmd_find_foldfold(cfg)
    if args.command == "check":
        return cmd_check(cfg, args.point)
    if args.command == "predict":
        return cmd_predict(cfg, args.point, args.eps)
    if args.command == "simulate":
        return cmd_simulate(cfg, args.point, args.eps, args.t_max, args.out)
    return cmd_verify(cfg, args.point, args.eps)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        res = dispatch(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (InapplicableError, DegeneracyError) as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except (FoldFoldError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.json:
        print(dumps(res.report))
    elif res.text:
        print(res.text)
    if args.out is not None and res.report:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{args.command}.json").write_text(dumps(res.report))
    return res.code


if __name__ == "__main__":
    sys.exit(main())
