"""Command-line interface: ``nwl <subcommand> [options]``.

Exit codes: 0 success, 1 a certified check failed, 2 numerical or resolution
failure, 3 invalid input.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import (CapabilityError, ConvergenceError, DomainError, InstabilityError,
                     NWLError, ResolutionError)

EXIT_OK, EXIT_CHECK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2, 3
SCHEMA_VERSION = "1"

DEFAULTS = {
    "n": 256,
    "M": None,
    "tol": 1e-10,
    "seed": 0,
    "theta": 0.5,
    "kernel_n": 1024,
    "cm_tolerance": 1e-12,
    "mono_tolerance": 1e-8,
    "audit_tolerance": 1e-8,
}


class InputError(NWLError):
    """Malformed configuration or arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- I/O helpers -------------------------------------------------------------------------

def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _atomic_write(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    _atomic_write(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(int(v))
                              for v in r))
    _atomic_write(path, "\n".join(lines) + "\n")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- configuration -----------------------------------------------------------------------

def load_config(args):
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
    if "kind" in cfg:  # bare symbol config
        cfg = {"symbol": cfg}
    merged = dict(DEFAULTS)
    merged.update({k: v for k, v in cfg.items() if k != "symbol"})
    merged["symbol"] = cfg.get("symbol", {"kind": "whitham"})
    for key in ("n", "M", "tol", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _symbol(cfg):
    from .symbols import symbol_from_config
    try:
        return symbol_from_config(cfg["symbol"])
    except (KeyError, TypeError, DomainError) as exc:
        raise InputError(f"invalid symbol config {cfg['symbol']!r}: {exc}") from exc


def make_manifest(command, cfg, args, started):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "symbol": cfg["symbol"],
        "n": int(cfg["n"]),
        "M": cfg["M"],
        "tolerances": {"solve": cfg["tol"], "cm": cfg["cm_tolerance"],
                       "mono": cfg["mono_tolerance"], "audit": cfg["audit_tolerance"]},
        "seed": int(cfg["seed"]),
        "threads": args.threads,
        "tool_version": __version__,
        "timestamps": {"started": started, "finished": None},
    }


def _finish(manifest):
    manifest["timestamps"]["finished"] = _now()
    return manifest


def _out_dir(args):
    out = os.environ.get("NWL_OUT") or args.out or "nwl_out"
    os.makedirs(out, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------------------

def cmd_symbol_check(cfg, args, out, manifest):
    from .symbols import assumption_S_check, symbol_order_check
    s = _symbol(cfg)
    report = {"manifest": manifest, "symbol": s.label, "kind": s.kind.value,
              "order": s.order if math.isfinite(s.order) else None}
    ok = True
    if s.homogeneous:
        report["cm"] = None
        report["cm_note"] = "homogeneous symbol: kernel decrease is checked numerically instead"
    else:
        cm = assumption_S_check(s, args.n_max, args.k_max)
        report["cm"] = cm.to_dict()
        ok &= cm.passed
    if math.isfinite(s.order):
        oc = symbol_order_check(s, n_max=4, k_max=200)
        report["order_check"] = oc.to_dict()
        ok &= oc.passed
    else:
        report["order_check"] = None
    report["passed"] = bool(ok)
    write_json(os.path.join(out, "symbol_check.json"), dict(report, manifest=_finish(manifest)))
    return EXIT_OK if ok else EXIT_CHECK


def _closed_form(s, x):
    label = s.label
    y = np.mod(x, 2.0 * np.pi)
    if label == "fkdv(-2)":
        return y**2 / 2.0 - np.pi * y + np.pi**2 / 3.0
    if label == "fkdv(-1)":
        with np.errstate(divide="ignore"):
            return -2.0 * np.log(2.0 * np.abs(np.sin(x / 2.0)))
    return None


def cmd_kernel(cfg, args, out, manifest):
    from .kernel import (build_kernel, check_monotone_half_period, check_origin_behaviour,
                         gp_positivity)
    from .spectral import PeriodicGrid
    s = _symbol(cfg)
    n = args.n or int(cfg.get("kernel_n", 1024))
    grid = PeriodicGrid(n)
    kt = build_kernel(s, grid, cfg["M"])
    manifest["M"] = kt.truncation
    x = np.asarray(grid.points)
    j0 = grid.n // 2
    rows = [(x[j], kt.values[j]) for j in range(n) if j != j0]
    write_csv(os.path.join(out, "kernel.csv"), ["x", "K"], rows)
    mono = check_monotone_half_period(kt, rel_tolerance=cfg["mono_tolerance"])
    report = {"kernel": kt.to_dict(), "monotone": mono.to_dict(),
              "gp": gp_positivity(kt, 50, int(cfg["seed"])), "evenness_defect": kt.mirror_defect()}
    if args.origin:
        report["origin"] = check_origin_behaviour(s).to_dict()
    cf = _closed_form(s, x)
    if cf is not None:
        sel = np.abs(x) >= 0.05
        sel[j0] = False
        report["closed_form_max_error"] = float(np.max(np.abs(kt.values[sel] - cf[sel])))
    ok = (mono.passed or kt.degenerate) and report["gp"]["passed"]
    if "origin" in report:
        ok &= report["origin"]["passed"]
    report["passed"] = bool(ok)
    write_json(os.path.join(out, "kernel_report.json"), dict(report, manifest=_finish(manifest)))
    return EXIT_OK if ok else EXIT_CHECK


def _write_profile(out, stem, p):
    from .spectral import write_coeffs_csv, write_profile_csv
    write_profile_csv(os.path.join(out, f"{stem}.csv"), p.phi)
    write_coeffs_csv(os.path.join(out, f"{stem}_coeffs.csv"), p.phi)


def _profile_summary(p, cfg):
    from .solver import residual_by_quadrature
    from .spectral import decay_rate
    d = p.summary()
    d["residual_quadrature"] = residual_by_quadrature(p).max_abs()
    d["decay"] = decay_rate(p.phi).to_dict()
    d["b_convention"] = "mean(phi^2)" if p.symbol.homogeneous else "zero"
    return d


def _solve_branch(cfg, theta):
    from .solver import continue_branch
    s = _symbol(cfg)
    return continue_branch(s, theta, n=int(cfg["n"]), tol=float(cfg["tol"]))


def cmd_solve(cfg, args, out, manifest):
    theta = args.theta if args.theta is not None else cfg.get("theta", 0.5)
    br = _solve_branch(cfg, theta)
    p = br.profiles[-1]
    _write_profile(out, "profile", p)
    ok = br.terminated_reason.value == "target_height" and p.residual_norm <= cfg["tol"]
    report = {"profile": _profile_summary(p, cfg), "theta": theta,
              "termination": br.terminated_reason.value, "converged": bool(ok)}
    write_json(os.path.join(out, "solve.json"), dict(report, manifest=_finish(manifest)))
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_branch(cfg, args, out, manifest):
    theta = args.theta if args.theta is not None else cfg.get("theta", 0.9)
    br = _solve_branch(cfg, theta)
    write_csv(os.path.join(out, "branch.csv"), ["step", "height", "c", "residual"],
              [(r["step"], r["height"], r["c"], r["residual"]) for r in br.rows()])
    p = br.profiles[-1]
    _write_profile(out, "profile", p)
    ok = br.terminated_reason.value == "target_height"
    report = {"steps": len(br.profiles), "theta": theta,
              "termination": br.terminated_reason.value,
              "max_residual": max(q.residual_norm for q in br.profiles),
              "final": _profile_summary(p, cfg)}
    write_json(os.path.join(out, "branch.json"), dict(report, manifest=_finish(manifest)))
    return EXIT_OK if ok else EXIT_NUMERIC


def _load_profile(cfg, args):
    """Profile from --profile/--manifest, or a fresh solve at ``theta``."""
    from .solver import WaveProfile
    from .spectral import read_profile_csv
    s = _symbol(cfg)
    if args.profile:
        try:
            f = read_profile_csv(args.profile)
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"cannot read profile {args.profile}: {exc}") from exc
        c = args.speed
        if c is None and args.manifest:
            try:
                with open(args.manifest) as fh:
                    meta = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read manifest {args.manifest}: {exc}") from exc
            c = (meta.get("profile") or meta.get("final") or {}).get("c")
        if c is None:
            raise InputError("the wave speed is needed: pass --speed or --manifest")
        return WaveProfile.build(s, f, float(c))
    theta = args.theta if getattr(args, "theta", None) is not None else cfg.get("theta", 0.5)
    return _solve_branch(cfg, theta).profiles[-1]


def cmd_symmetry(cfg, args, out, manifest):
    from .symmetry import full_symmetry_audit
    p = _load_profile(cfg, args)
    rep = full_symmetry_audit(p, solve_tolerance=cfg["tol"], audit_tol=cfg["audit_tolerance"])
    d = rep.to_dict()
    write_json(os.path.join(out, "symmetry.json"), dict(report=d, manifest=_finish(manifest)))
    return EXIT_OK if rep.verdict == "consistent" else EXIT_CHECK


def cmd_verify(cfg, args, out, manifest):
    from .solver import WaveProfile
    from .symmetry import verify_boundary_point, verify_touching
    p = _load_profile(cfg, args)
    s = p.symbol
    lam = args.lam
    if args.which == "touching":
        lam = -0.3 if lam is None else lam
        xbar = args.xbar if args.xbar is not None else lam + np.pi / 2
        q = WaveProfile.build(s, p.phi.reflect(lam), p.c)
        v = verify_touching(p, q, lam, xbar)
    else:
        lam = 0.0 if lam is None else lam
        shift = args.shift
        a = WaveProfile.build(s, p.phi.shift(lam + shift), p.c)
        b = WaveProfile.build(s, p.phi.shift(lam - shift), p.c)
        v = verify_boundary_point(a, b, lam)
    write_json(os.path.join(out, f"verify_{args.which}.json"),
               dict(report=v.to_dict(), check=args.which, manifest=_finish(manifest)))
    return EXIT_OK if v.passed else EXIT_CHECK


def cmd_evolve(cfg, args, out, manifest):
    from .evolution import integrate
    from .spectral import write_profile_csv
    p = _load_profile(cfg, args)
    T = args.t_end if args.t_end is not None else 2.0 * np.pi / p.c
    run = integrate(p.phi, p.symbol, args.dt, T, snapshot_every=args.stride)
    for i, (t, u) in enumerate(run.snapshots):
        write_profile_csv(os.path.join(out, f"snapshot_{i:04d}.csv"), u)
    drift = float(np.max(np.abs(run.final.values - p.phi.shift(p.c * T).values)))
    report = {"t_end": T, "dt": run.dt, "steps": run.steps, "drift": drift,
              "mean_drift": run.mean_drift, "snapshot_times": run.times, "c": p.c}
    ok = run.mean_drift <= 1e-12
    write_json(os.path.join(out, "evolve.json"), dict(report, manifest=_finish(manifest)))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_all(cfg, args, out, manifest):
    from .evolution import traveling_check
    from .solver import WaveProfile
    from .symmetry import full_symmetry_audit, verify_boundary_point, verify_touching
    summary = {}
    codes = {}
    sub = argparse.Namespace(**vars(args))
    sub.n_max, sub.k_max = 8, 50
    sub.origin = False
    for name, fn in (("symbol-check", cmd_symbol_check), ("kernel", cmd_kernel)):
        m = make_manifest(name, cfg, args, manifest["timestamps"]["started"])
        codes[name] = fn(cfg, sub, out, m)
    theta = args.theta if args.theta is not None else cfg.get("theta", 0.5)
    br = _solve_branch(cfg, theta)
    p = br.profiles[-1]
    _write_profile(out, "profile", p)
    summary["solve"] = _profile_summary(p, cfg)
    codes["solve"] = EXIT_OK if br.terminated_reason.value == "target_height" else EXIT_NUMERIC
    audit = full_symmetry_audit(p, cfg["tol"], cfg["audit_tolerance"])
    summary["symmetry"] = audit.to_dict()
    codes["symmetry"] = EXIT_OK if audit.verdict == "consistent" else EXIT_CHECK
    s = p.symbol
    q = WaveProfile.build(s, p.phi.reflect(-0.3), p.c)
    vt = verify_touching(p, q, -0.3, -0.3 + np.pi / 2)
    a = WaveProfile.build(s, p.phi.shift(0.2), p.c)
    b = WaveProfile.build(s, p.phi.shift(-0.2), p.c)
    try:
        vb = verify_boundary_point(a, b, 0.0)
        summary["verify"] = {"touching": vt.to_dict(), "boundary": vb.to_dict()}
        codes["verify"] = EXIT_OK if vt.passed and vb.passed else EXIT_CHECK
    except ResolutionError as exc:
        summary["verify"] = {"touching": vt.to_dict(), "boundary": {"error": str(exc)}}
        codes["verify"] = EXIT_NUMERIC
    summary["evolve"] = traveling_check(p)
    codes["evolve"] = EXIT_OK
    summary["exit_codes"] = codes
    worst = max(codes.values())
    summary["passed"] = worst == EXIT_OK
    write_json(os.path.join(out, "all.json"), dict(summary, manifest=_finish(manifest)))
    return worst


COMMANDS = {
    "symbol-check": cmd_symbol_check,
    "kernel": cmd_kernel,
    "solve": cmd_solve,
    "branch": cmd_branch,
    "symmetry": cmd_symmetry,
    "verify": cmd_verify,
    "evolve": cmd_evolve,
    "all": cmd_all,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (symbol and numerical settings)")
    common.add_argument("--out", help="output directory (NWL_OUT overrides)")
    common.add_argument("--n", type=int, help="grid size")
    common.add_argument("--M", type=int, help="kernel truncation")
    common.add_argument("--tol", type=float, help="solve tolerance")
    common.add_argument("--seed", type=int, help="seed for randomised checks")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads")

    profile = argparse.ArgumentParser(add_help=False)
    profile.add_argument("--profile", help="profile CSV (x,value); solved afresh if omitted")
    profile.add_argument("--manifest", help="solve/branch JSON providing the speed c")
    profile.add_argument("--speed", type=float, help="wave speed c of --profile")
    profile.add_argument("--theta", type=float, help="target max(phi)/(c/2) for fresh solves")

    p = _Parser(prog="nwl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nwl {__version__}")
    sp = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sc = sp.add_parser("symbol-check", parents=[common], help="complete monotonicity and order checks")
    sc.add_argument("--n-max", type=int, default=8)
    sc.add_argument("--k-max", type=int, default=50)
    k = sp.add_parser("kernel", parents=[common], help="kernel table and its structural checks")
    k.add_argument("--origin", action="store_true", help="also run the origin-behaviour check")
    s = sp.add_parser("solve", parents=[common], help="traveling wave at a given relative height")
    s.add_argument("--theta", type=float)
    b = sp.add_parser("branch", parents=[common], help="continuation in crest height")
    b.add_argument("--theta", type=float)
    sp.add_parser("symmetry", parents=[common, profile], help="symmetry audit of a profile")
    v = sp.add_parser("verify", parents=[common, profile], help="touching / boundary-point verifiers")
    v.add_argument("which", choices=["touching", "boundary"])
    v.add_argument("--lambda", dest="lam", type=float)
    v.add_argument("--xbar", type=float)
    v.add_argument("--shift", type=float, default=0.2, help="half-separation of the boundary pair")
    e = sp.add_parser("evolve", parents=[common, profile], help="time integration of a profile")
    e.add_argument("--dt", type=float)
    e.add_argument("--t-end", type=float)
    e.add_argument("--stride", type=int, help="snapshot every STRIDE steps")
    a = sp.add_parser("all", parents=[common], help="full pipeline for one symbol")
    a.add_argument("--theta", type=float)
    return p


def _set_threads(k):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(k)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = _now()
    try:
        cfg = load_config(args)
        if int(cfg["n"]) < 8 or int(cfg["n"]) % 2:
            raise InputError("--n must be even and at least 8")
        out = _out_dir(args)
        manifest = make_manifest(args.command, cfg, args, started)
        _set_threads(args.threads)
        return COMMANDS[args.command](cfg, args, out, manifest)
    except (InputError, DomainError) as exc:
        print(f"nwl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, ResolutionError, InstabilityError, CapabilityError) as exc:
        print(f"nwl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
