"""Command-line front end: ``nsk <command> [options]``.

Commands write CSV or JSON with 17 significant digits.  Every output file
gets a manifest (``<file>.manifest.json``) recording the command line,
kernel, seeds, tolerances and versions.  Exit status is 0 when all
requested checks pass, 1 when a check fails (named on standard error) and
2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .densities import density_grid, geometric_grid
from .errors import NSKError
from .kernels import spec_from_json
from .laplace import (GS_MIN_X, TransformPair, closed_form_transform, closed_form_transform_mp,
                      gaver_stehfest_invert, numeric_forward)
from .operators import (GeneralFormRefusal, QuadratureConfig, general_equation_check,
                        residual_sweep)
from .risk import RiskConfig, mgf_R, net_profit_check, ruin_probability
from .simulate import GENERATOR, simulation_summary, write_paths_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- formatting ------------------------------------------------------------------

def fmt(v):
    """17 significant digits; non-finite values become ``nan``/``inf``/``-inf``."""
    return f"{float(v):.17g}"


def _json_value(v):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (float, np.floating)):
        return fmt(v) if math.isfinite(v) else "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)!r}")


def dumps(obj):
    """JSON text with every float printed to 17 significant digits."""
    return _json_value(obj) + "\n"


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _manifest(args, spec=None, seeds=None, tolerances=None):
    return {
        "command": list(sys.argv) if args.argv is None else list(args.argv),
        "kernel": None if spec is None else spec.to_dict(),
        "seeds": seeds or [],
        "tolerances": tolerances or {},
        "build": {"nsk": __version__, "numpy": np.__version__,
                  "scipy": __import__("scipy").__version__,
                  "mpmath": __import__("mpmath").__version__,
                  "generator": GENERATOR},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def _write_manifest(out, manifest):
    if out:
        with open(out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(dumps(manifest))


def _fail(name, detail):
    sys.stderr.write(f"FAILED {name}: {detail}\n")


# -- argument helpers ----------------------------------------------------------

def _kernel(text):
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            text = fh.read()
    try:
        return spec_from_json(text)
    except (ValueError, TypeError, KeyError, NSKError) as exc:
        raise UsageError(f"bad kernel spec: {exc}") from exc


def _floats(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc
    return vals


def _threads(args):
    env = os.environ.get("NSK_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"NSK_THREADS must be an integer, got {env!r}") from exc
    elif args.threads is not None:
        n = args.threads
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- commands --------------------------------------------------------------------

def cmd_density(args):
    spec = _kernel(args.kernel)
    if args.x is not None:
        x = np.array(_floats(args.x))
    else:
        x = geometric_grid(args.x_min, args.x_max, args.n, include_zero=args.include_zero)
    if x.size == 0:
        raise UsageError("empty x grid")
    law, vals = density_grid(spec, args.t, x)
    header = ["x", "density", "t", "kernel_id"]
    rows = [[fmt(xi), fmt(fi), fmt(args.t), spec.label] for xi, fi in zip(x, vals)]
    status = EXIT_OK
    tolerances = {}
    if args.cross_check:
        tolerances["cross_check_rel"] = args.tol
        header.append("gs_inverse")
        worst = 0.0
        for row, xi, fi in zip(rows, x, vals):
            if xi <= 0 or (not spec.finite_origin and xi < GS_MIN_X) or args.t == 0:
                row.append("nan")
                continue
            g = gaver_stehfest_invert(lambda e: closed_form_transform_mp(spec, e, args.t), xi,
                                      args.terms, check=False)
            row.append(fmt(g))
            worst = max(worst, abs(g - fi) / max(abs(fi), 1e-300))
        if worst > args.tol:
            _fail("density cross-check", f"max relative gap {worst:.3g} > {args.tol:g}")
            status = EXIT_FAIL
        else:
            sys.stderr.write(f"cross-check max relative gap {worst:.3g}\n")
    _emit(_csv_text(header, rows), args.out)
    man = _manifest(args, spec, tolerances=tolerances)
    man.update({"t": args.t, "atom_mass": law.atom_mass, "method": law.method})
    _write_manifest(args.out, man)
    return status


def cmd_residual(args):
    spec = _kernel(args.kernel)
    xs, ts = _floats(args.x), _floats(args.t)
    if not xs or not ts:
        raise UsageError("empty residual grid")
    quad = QuadratureConfig(rel_tol=args.quad_tol)
    threads = _threads(args)
    header = ["x", "t", "lhs", "rhs", "residual", "fd_step", "kernel_id"]
    rows, refusals = [], []

    def one_t(t):
        if args.general_form:
            return [general_equation_check(spec, x, t, args.fd_step, quad) for x in xs]
        return residual_sweep(spec, xs, t, args.fd_step, quad)

    if threads > 1 and len(ts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one_t, ts))
    else:
        results = [one_t(t) for t in ts]
    worst = 0.0
    for t, reps in zip(ts, results):
        for x, r in zip(xs, reps):
            if isinstance(r, GeneralFormRefusal):
                refusals.append(r)
                rows.append([fmt(x), fmt(t), "nan", "nan", "nan", "nan", r.kernel_id])
                continue
            rows.append([fmt(r.x), fmt(r.t), fmt(r.lhs), fmt(r.rhs), fmt(r.residual),
                         fmt(r.fd_step), r.kernel_id])
            worst = max(worst, abs(r.residual))
    _emit(_csv_text(header, rows), args.out)
    _write_manifest(args.out, _manifest(args, spec, tolerances={"residual": args.tol,
                                                                "quadrature_rel": args.quad_tol}))
    if refusals:
        sys.stderr.write(f"refused: {refusals[0].reason}\n")
        return EXIT_OK
    sys.stderr.write(f"max |residual| = {worst:.3g}\n")
    if worst >= args.tol:
        _fail("residual", f"max |residual| {worst:.3g} >= {args.tol:g}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_laplace_check(args):
    spec = _kernel(args.kernel)
    etas, xs = _floats(args.eta), _floats(args.x)
    if not etas and not xs:
        raise UsageError("nothing to check")
    from .densities import law_of
    law = law_of(spec, args.t)
    pair = TransformPair(spec, args.t)
    forward_rows, inverse_rows = [], []
    worst_fwd, worst_inv = 0.0, 0.0
    for e in etas:
        val, err = numeric_forward(law.density, e, singular_origin=not spec.finite_origin)
        ref = closed_form_transform(spec, e, args.t)
        gap = abs(val - ref)
        worst_fwd = max(worst_fwd, gap)
        forward_rows.append({"eta": e, "numeric": val, "closed_form": ref, "abs_gap": gap,
                             "quad_error": err})
    for x in xs:
        g = gaver_stehfest_invert(pair.forward_mp, x, args.terms, check=False)
        f = float(law.density(x))
        rel = abs(g - f) / max(abs(f), 1e-300)
        worst_inv = max(worst_inv, rel)
        inverse_rows.append({"x": x, "series": f, "gaver_stehfest": g, "rel_gap": rel})
    ok_fwd = worst_fwd <= args.forward_tol
    ok_inv = worst_inv <= args.inverse_tol
    tol = {"forward_abs": args.forward_tol, "inverse_rel": args.inverse_tol, "terms": args.terms}
    doc = {"kernel_id": spec.label, "t": args.t, "forward": forward_rows,
           "inverse": inverse_rows, "forward_pass": ok_fwd, "inverse_pass": ok_inv,
           "manifest": _manifest(args, spec, tolerances=tol)}
    _emit(dumps(doc), args.out)
    status = EXIT_OK
    if not ok_fwd:
        _fail("forward transform", f"max gap {worst_fwd:.3g} > {args.forward_tol:g}")
        status = EXIT_FAIL
    if not ok_inv:
        _fail("Gaver-Stehfest inversion", f"max relative gap {worst_inv:.3g} > {args.inverse_tol:g}")
        status = EXIT_FAIL
    return status


def cmd_simulate(args):
    spec = _kernel(args.kernel)
    threads = _threads(args)
    summary = simulation_summary(spec, args.t, args.paths, args.seed, threads, ks=not args.no_ks)
    if args.out:
        write_paths_csv(args.out, spec, args.t, args.paths, args.seed)
        _write_manifest(args.out, _manifest(args, spec, seeds=[args.seed]))
    summary["manifest"] = _manifest(args, spec, seeds=[args.seed])
    _emit(dumps(summary), args.summary)
    status = EXIT_OK
    gap = abs(summary["zero_jump_fraction"] - summary["zero_jump_expected"])
    if gap > 3 * summary["zero_jump_sigma"]:
        _fail("zero-jump fraction", f"{summary['zero_jump_fraction']:.6g} is more than 3 sigma "
              f"from {summary['zero_jump_expected']:.6g}")
        status = EXIT_FAIL
    if "ks_scaled" in summary and summary["ks_scaled"] >= summary["ks_critical_1pct"]:
        _fail("KS", f"sqrt(n) D = {summary['ks_scaled']:.4g} >= 1.63")
        status = EXIT_FAIL
    return status


def cmd_risk(args):
    spec = _kernel(args.kernel)
    try:
        cfg = RiskConfig(args.a, args.beta, spec, args.horizon, args.paths)
    except NSKError as exc:
        raise UsageError(str(exc)) from exc
    est, hw = ruin_probability(cfg, args.seed, _threads(args))
    doc = {
        "estimate": est,
        "ci": [max(0.0, est - hw), min(1.0, est + hw)],
        "half_width_95": hw,
        "net_profit_status": net_profit_check(cfg).value,
        "seeds": [args.seed],
        "config": cfg.to_dict(),
    }
    if args.eta is not None:
        doc["mgf_full"] = mgf_R(cfg, args.eta, args.horizon, "full")
        doc["mgf_density_part"] = mgf_R(cfg, args.eta, args.horizon, "density")
    doc["manifest"] = _manifest(args, spec, seeds=[args.seed])
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_selftest(args):
    """Quick battery of oracle checks, a few seconds in total."""
    from .densities import density_exponential, density_ig
    from .kernels import Exponential, IncompleteGammaK, MittagLefflerK
    from .operators import governing_residual
    from .risk import mgf_ode_residual
    from .simulate import sample_values
    from scipy import special as sc

    checks = []

    def check(name, ok, detail):
        checks.append((name, bool(ok), detail))

    e1 = Exponential(0.5)
    d = density_exponential(1.0, 1.0, 1.0)
    ref = math.exp(-2) * sc.iv(1, 2.0)  # k t e^{-t-kx} W_{1,2}(1) = e^{-2} I_1(2)
    check("exponential density", abs(d - ref) < 1e-14, f"{d:.17g} vs {ref:.17g}")
    x = np.array([0.5, 1.0, 2.0])
    n = np.arange(1, 80)[:, None]
    # t = k = 1, rho = 1/2: e^{-1} sum_n 1/n! * gamma(n/2, 1) density
    conv = np.exp(-1.0) * np.sum(np.exp(-sc.gammaln(n + 1) + (0.5 * n - 1) * np.log(x) - x
                                        - sc.gammaln(0.5 * n)), axis=0)
    ig = density_ig(1.0, 0.5, x, 1.0)
    check("incomplete-gamma density vs gamma convolution", np.max(np.abs(ig - conv)) < 1e-10,
          f"max gap {np.max(np.abs(ig - conv)):.3g}")
    g = gaver_stehfest_invert(lambda e: 1 / (e + 1), 1.0, 20, check=False)
    check("Gaver-Stehfest known pair", abs(g - math.exp(-1)) < 1e-8, f"{g:.12g}")
    r = governing_residual(e1, 1.0, 1.0)
    check("exponential residual", abs(r.residual) < 1e-6, f"{r.residual:.3g}")
    r = governing_residual(MittagLefflerK(0.5, 0.5), 1.0, 1.0)
    check("Mittag-Leffler residual", abs(r.residual) < 1e-5, f"{r.residual:.3g}")
    res = mgf_ode_residual(RiskConfig(0.0, 1.0, IncompleteGammaK(0.5, 0.5)), 1.0, 1.0)
    check("MGF equation", abs(res) < 1e-7, f"{res:.3g}")
    vals, counts = sample_values(e1, 1.0, 20000, 2024)
    frac = float(np.mean(counts == 0))
    sig = math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / 20000)
    check("zero-jump fraction", abs(frac - math.exp(-1)) < 4 * sig, f"{frac:.5f}")
    status = EXIT_OK
    for name, ok, detail in checks:
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
        if not ok:
            _fail(name, detail)
            status = EXIT_FAIL
    return status


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="nsk", description=__doc__.split("\n")[0])
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: available cores; NSK_THREADS overrides)")
    p.add_argument("--version", action="version", version=f"nsk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    kernel_help = "kernel spec as JSON text or @file.json"

    d = sub.add_parser("density", help="density of S(t) on an x grid (CSV)")
    d.add_argument("--kernel", required=True, help=kernel_help)
    d.add_argument("--t", type=float, required=True)
    d.add_argument("--x", help="comma-separated x values (overrides the geometric grid)")
    d.add_argument("--x-min", type=float, default=1e-2)
    d.add_argument("--x-max", type=float, default=10.0)
    d.add_argument("--n", type=int, default=50)
    d.add_argument("--include-zero", action="store_true")
    d.add_argument("--cross-check", action="store_true",
                   help="add a gs_inverse column and compare within --tol")
    d.add_argument("--terms", type=int, default=16)
    d.add_argument("--tol", type=float, default=1e-4)
    d.add_argument("--out")
    d.set_defaults(func=cmd_density)

    r = sub.add_parser("residual", help="governing-equation residuals (CSV)")
    r.add_argument("--kernel", required=True, help=kernel_help)
    r.add_argument("--x", required=True, help="comma-separated x values")
    r.add_argument("--t", required=True, help="comma-separated t values")
    r.add_argument("--fd-step", type=float, default=None)
    r.add_argument("--tol", type=float, default=1e-6)
    r.add_argument("--quad-tol", type=float, default=1e-9)
    r.add_argument("--general-form", action="store_true",
                   help="use the form with the explicit f(0, t) boundary term")
    r.add_argument("--out")
    r.set_defaults(func=cmd_residual)

    lc = sub.add_parser("laplace-check", help="forward transform and inversion checks (JSON)")
    lc.add_argument("--kernel", required=True, help=kernel_help)
    lc.add_argument("--t", type=float, required=True)
    lc.add_argument("--eta", default="0.5,1,2,5")
    lc.add_argument("--x", default="0.1,0.5,1,2,5")
    lc.add_argument("--terms", type=int, default=16)
    lc.add_argument("--forward-tol", type=float, default=1e-6)
    lc.add_argument("--inverse-tol", type=float, default=1e-4)
    lc.add_argument("--out")
    lc.set_defaults(func=cmd_laplace_check)

    s = sub.add_parser("simulate", help="Monte Carlo paths (CSV) and summary (JSON)")
    s.add_argument("--kernel", required=True, help=kernel_help)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", help="path dump CSV")
    s.add_argument("--summary", help="summary JSON (default: stdout)")
    s.add_argument("--no-ks", action="store_true")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("risk", help="finite-horizon ruin probability (JSON)")
    k.add_argument("--kernel", required=True, help=kernel_help)
    k.add_argument("--a", type=float, required=True)
    k.add_argument("--beta", type=float, required=True)
    k.add_argument("--horizon", type=float, default=10.0)
    k.add_argument("--paths", type=int, default=100_000)
    k.add_argument("--seed", type=int, required=True)
    k.add_argument("--eta", type=float, default=None, help="also report E exp(eta R(horizon))")
    k.add_argument("--out")
    k.set_defaults(func=cmd_risk)

    st = sub.add_parser("selftest", help="quick oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = None if argv is None else ["nsk", *argv]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"nsk: error: {exc}\n")
        return EXIT_USAGE
    except NSKError as exc:
        sys.stderr.write(f"nsk: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
