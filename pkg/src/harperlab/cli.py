"""Command-line surface: every subcommand writes deterministic artifacts.

A resolved run configuration is hashed and the hash embedded in every
artifact, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .rationals import RationalFrequency, convergents, named_continued_fraction
from .rotation import build_rep, build_uv, hamiltonian, lam_phase, max_norm, monomial, sigma_images, rho_images
from .spectrum import (GAP_CSV_HEADER, band_edges, chambers, dual_check,
                       gap_label, gaps, ids, track_gap)
from .lyapunov import (critical_scan, gradient, hessian, lyapunov_thouless,
                       lyapunov_trace, lyapunov_transfer)
from .coefficients import (build_phi, coefficient_sheet, decay_rate,
                           recursion_sheets, symmetrized_sheet, system_residual,
                           vanishing_probe)
from .numbertheory import component_count, farey, franel_table, phi_cumulative
from .butterfly import (butterfly_fractions, compute_butterfly, parse_dataset,
                        persistence_sweep, render, serialize_dataset)

COMMANDS = ("spectrum", "gaps", "ids", "label", "lyapunov", "gradient",
            "critical-scan", "hessian", "coeffs", "recursion", "decay",
            "sigma-check", "butterfly", "render", "track", "franel", "farey",
            "count-components", "selftest")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="harperlab",
                                 description="Spectral toolkit for the Harper operator "
                                             "at rational flux")
    ap.add_argument("--version", action="version", version=f"harperlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_freq(p, required=True):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--alpha", help="rational frequency p/q")
        g.add_argument("--irrational", choices=("golden", "sqrt2", "e-based", "custom-cf"),
                       help="irrational target, expanded to convergents")
        p.add_argument("--cf-terms", help="comma-separated terms for --irrational custom-cf")
        p.add_argument("--depth", type=int, default=8,
                       help="continued-fraction depth for --irrational")

    def add_out(p):
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    for name in ("spectrum", "gaps"):
        p = sub.add_parser(name)
        add_freq(p)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--min-width", type=float, default=1e-9)
        add_out(p)

    p = sub.add_parser("ids")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--energies", required=True,
                   help="comma-separated energies, or lo:hi:n for a grid")
    add_out(p)

    p = sub.add_parser("label")
    add_freq(p)
    p.add_argument("--j", type=int, default=None, help="gap index (default: all)")
    add_out(p)

    p = sub.add_parser("lyapunov")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--z", type=str, required=True, help="energy (complex ok for trace)")
    p.add_argument("--method", choices=("transfer", "thouless", "trace", "all"),
                   default="all")
    p.add_argument("--theta-samples", type=int, default=256)
    p.add_argument("--n-steps", type=int, default=None)
    add_out(p)

    for name in ("gradient", "hessian"):
        p = sub.add_parser(name)
        add_freq(p)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--z", type=float, required=True)
        add_out(p)

    p = sub.add_parser("critical-scan")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--min-width", type=float, default=1e-9)
    p.add_argument("--margin-threshold", type=float, default=1e-8)
    add_out(p)

    p = sub.add_parser("coeffs")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--window", type=int, default=12)
    p.add_argument("--kind", choices=("c", "d", "phi", "R+", "R-"), default="c")
    add_out(p)

    p = sub.add_parser("recursion")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--window", type=int, default=12)
    p.add_argument("--side", choices=("right", "left", "both"), default="both")
    add_out(p)

    p = sub.add_parser("decay")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--window", type=int, default=12)
    p.add_argument("--kind", choices=("c", "d", "R+", "R-", "phi"), default="d")
    p.add_argument("--offsets", default="-2,-1,0,1,2")
    add_out(p)

    p = sub.add_parser("sigma-check")
    add_freq(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--theta1", type=float, default=0.0)
    p.add_argument("--theta2", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    add_out(p)

    p = sub.add_parser("butterfly")
    p.add_argument("--qmax", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--min-width", type=float, default=1e-9)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render")
    p.add_argument("--dataset", required=True, help="butterfly dataset file")
    p.add_argument("--format", choices=("svg", "ppm"), default="svg")
    p.add_argument("--width", type=int, default=900)
    p.add_argument("--height", type=int, default=600)
    p.add_argument("--no-gap-fill", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("track")
    add_freq(p)
    p.add_argument("--beta-grid", required=True, help="lo:hi:n or comma list")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    add_out(p)

    p = sub.add_parser("franel")
    p.add_argument("--nmax", type=int, required=True)
    add_out(p)

    p = sub.add_parser("farey")
    p.add_argument("--order", type=int, required=True)
    add_out(p)

    p = sub.add_parser("count-components")
    p.add_argument("--dataset", default=None, help="butterfly dataset file")
    p.add_argument("--qmax", type=int, default=None, help="compute in place instead")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--hall", type=int, required=True)
    add_out(p)

    p = sub.add_parser("selftest")
    p.add_argument("--fast", action="store_true", help="skip the slower checks")
    return ap


def _parse_grid(text):
    if ":" in text:
        lo, hi, n = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(n)))
    return [float(x) for x in text.split(",")]


def _resolve_freqs(args, parser):
    if getattr(args, "alpha", None):
        return [RationalFrequency.from_string(args.alpha)]
    name = getattr(args, "irrational", None)
    if not name:
        parser.error("one of --alpha or --irrational is required")
    if name == "custom-cf":
        if not args.cf_terms:
            parser.error("--irrational custom-cf requires --cf-terms")
        terms = [int(t) for t in args.cf_terms.split(",")]
    else:
        terms = named_continued_fraction(name, args.depth)
    out = []
    seen = set()
    for f in convergents(terms, args.depth):
        if f.q not in seen:
            seen.add(f.q)
            out.append(f)
    return out


def _config_hash(args) -> str:
    payload = {k: (v if isinstance(v, (int, float, str, bool, type(None))) else str(v))
               for k, v in sorted(vars(args).items()) if k != "out"}
    payload["tool_version"] = __version__
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


def _out_path(path: str) -> str:
    """Resolve an output path; HARPERLAB_OUT_DIR redirects relative paths."""
    base = os.environ.get("HARPERLAB_OUT_DIR")
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _emit(args, text):
    if getattr(args, "out", None):
        with open(_out_path(args.out), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(args) -> str:
    return f"# harperlab={__version__},config_hash={_config_hash(args)}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args, parser)
    except (ValueError, ArithmeticError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args, parser) -> int:
    cmd = args.command
    if cmd == "spectrum":
        lines = [_header(args), "p,q,beta,band,lo,hi"]
        for freq in _resolve_freqs(args, parser):
            bands = band_edges(chambers(freq, args.beta, verify=False))
            for i, (lo, hi) in enumerate(bands.bands, start=1):
                lines.append(f"{freq.p},{freq.q},{_fmt(args.beta)},{i},{_fmt(lo)},{_fmt(hi)}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "gaps":
        lines = [_header(args), GAP_CSV_HEADER]
        for freq in _resolve_freqs(args, parser):
            for g in gaps(freq, args.beta, min_width=args.min_width):
                lines.append(g.csv_row())
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "ids":
        freq = _resolve_freqs(args, parser)[-1]
        bands = band_edges(chambers(freq, args.beta, verify=False))
        lines = [_header(args), "E,N"]
        for e in _parse_grid(args.energies):
            lines.append(f"{_fmt(e)},{_fmt(ids(bands, e))}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "label":
        freq = _resolve_freqs(args, parser)[-1]
        lines = [_header(args), "j,ids_num,ids_den,m,n"]
        indices = [args.j] if args.j is not None else list(range(1, freq.q))
        for j in indices:
            m, n = gap_label(j, freq)
            lines.append(f"{j},{j},{freq.q},{m},{n}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "lyapunov":
        freq = _resolve_freqs(args, parser)[-1]
        z = complex(args.z)
        zr = z.real if z.imag == 0 else z
        rows = []
        if args.method in ("transfer", "all"):
            rows.append(lyapunov_transfer(freq, args.beta, zr,
                                          theta_samples=args.theta_samples,
                                          n_steps=args.n_steps))
        if args.method in ("thouless", "all"):
            bands = band_edges(chambers(freq, args.beta, verify=False))
            rows.append(lyapunov_thouless(bands, zr))
        if args.method in ("trace", "all"):
            rows.append(lyapunov_trace(freq, args.beta, zr))
        lines = [_header(args), "method,beta,z,value"]
        for r in rows:
            lines.append(f"{r.method},{_fmt(r.beta)},{r.z},{_fmt(r.value)}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "gradient":
        freq = _resolve_freqs(args, parser)[-1]
        g = gradient(freq, args.beta, args.z)
        _emit(args, json.dumps({"config_hash": _config_hash(args),
                                "p": freq.p, "q": freq.q, "beta": args.beta,
                                "z": args.z, "g0": g.g0, "g1": g.g1,
                                "dL_dbeta": 2 * g.g1}, indent=2) + "\n")
        return 0

    if cmd == "hessian":
        freq = _resolve_freqs(args, parser)[-1]
        h = hessian(freq, args.beta, args.z)
        _emit(args, json.dumps({"config_hash": _config_hash(args),
                                "p": freq.p, "q": freq.q, "beta": args.beta,
                                "z": args.z, "d2z": h.d2z, "dzdbeta": h.dzdbeta,
                                "d2beta": h.d2beta, "det": h.determinant},
                               indent=2) + "\n")
        return 0

    if cmd == "critical-scan":
        rows = []
        for freq in _resolve_freqs(args, parser):
            ch = chambers(freq, args.beta, verify=False)
            for g in gaps(freq, args.beta, min_width=args.min_width):
                if not g.is_open:
                    continue
                cp = critical_scan(freq, args.beta, g, ch=ch)
                hs = hessian(freq, args.beta, cp.s_star, ch=ch, edge_distance=0.0)
                rows.append({"p": freq.p, "q": freq.q, "beta": args.beta,
                             "m": g.label[0], "n": g.label[1],
                             "s_star": cp.s_star, "g1_abs": cp.g1_abs,
                             "hessian_det": hs.determinant, "hessian_d2z": hs.d2z,
                             "hessian_d2beta": hs.d2beta,
                             "margin_ok": cp.margin_ok(args.margin_threshold)})
        _emit(args, json.dumps({"config_hash": _config_hash(args), "rows": rows},
                               indent=2) + "\n")
        return 0

    if cmd == "coeffs":
        freq = _resolve_freqs(args, parser)[-1]
        sheet = _make_sheet(freq, args.beta, args.z, args.window, args.kind)
        _emit(args, f"{_header(args)}\n" + sheet.to_csv())
        return 0

    if cmd == "recursion":
        freq = _resolve_freqs(args, parser)[-1]
        plus, minus = recursion_sheets(freq, args.beta, args.z, window=args.window)
        parts = []
        if args.side in ("right", "both"):
            parts.append(plus.to_csv())
        if args.side in ("left", "both"):
            parts.append(minus.to_csv())
        _emit(args, f"{_header(args)}\n" + "".join(parts))
        return 0

    if cmd == "decay":
        freq = _resolve_freqs(args, parser)[-1]
        sheet = _make_sheet(freq, args.beta, args.z, args.window, args.kind)
        rows = []
        for slope in (1, -1):
            for k in (int(t) for t in args.offsets.split(",")):
                est = decay_rate(sheet, slope, k)
                rows.append({"slope": slope, "offset": k, "rho": est.rho,
                             "fit_residual": est.fit_residual,
                             "n_points": est.n_points, "all_zero": est.all_zero})
        _emit(args, json.dumps({"config_hash": _config_hash(args),
                                "kind": sheet.kind, "rows": rows}, indent=2) + "\n")
        return 0

    if cmd == "sigma-check":
        freq = _resolve_freqs(args, parser)[-1]
        report = sigma_check_report(freq, args.beta, args.theta1, args.theta2)
        report["config_hash"] = _config_hash(args)
        report["pass"] = max(v for k, v in report.items()
                             if k.startswith("residual")) <= args.tol
        _emit(args, json.dumps(report, indent=2) + "\n")
        return 0

    if cmd == "butterfly":
        ds = compute_butterfly(args.qmax, args.beta, workers=args.workers,
                               min_width=args.min_width,
                               checkpoint_path=args.checkpoint)
        with open(_out_path(args.out), "w") as fh:
            fh.write(serialize_dataset(ds))
        return 0

    if cmd == "render":
        with open(args.dataset) as fh:
            ds = parse_dataset(fh.read())
        # rows parsed from CSV have no band intervals; recompute them
        from .butterfly import compute_butterfly as _cb
        ds = _cb(ds.order, ds.beta, min_width=ds.min_width)
        render(ds, _out_path(args.out), size=(args.width, args.height),
               fmt=args.format, gap_fill=not args.no_gap_fill)
        return 0

    if cmd == "track":
        freq = _resolve_freqs(args, parser)[-1]
        tr = track_gap((args.m, args.n), freq, _parse_grid(args.beta_grid))
        lines = [_header(args), "beta,width,open"]
        for b, w, o in zip(tr.beta_grid, tr.widths, tr.open_flags):
            lines.append(f"{_fmt(b)},{_fmt(w)},{int(o)}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "franel":
        lines = [_header(args), "n,sum,n_times_sum"]
        for row in franel_table(args.nmax):
            lines.append(f"{row.n},{_fmt(row.total_float)},{_fmt(row.n_times_total)}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "farey":
        seq = farey(args.order)
        lines = [_header(args), "numerator,denominator"]
        for f in seq.fractions:
            lines.append(f"{f.numerator},{f.denominator}")
        _emit(args, "\n".join(lines) + "\n")
        return 0

    if cmd == "count-components":
        if args.dataset:
            with open(args.dataset) as fh:
                ds = parse_dataset(fh.read())
        elif args.qmax:
            ds = compute_butterfly(args.qmax, args.beta)
        else:
            parser.error("count-components needs --dataset or --qmax")
        cc = component_count(ds, args.hall)
        _emit(args, json.dumps({"config_hash": _config_hash(args), "k": cc.hall,
                                "Q": cc.order, "beta": cc.beta,
                                "predicted": cc.predicted, "observed": cc.observed,
                                "component_members": [list(map(list, m)) for m in cc.members]},
                               indent=2) + "\n")
        return 0

    if cmd == "selftest":
        return run_selftest(fast=args.fast)

    parser.error(f"unknown command {cmd}")
    return 2


def _make_sheet(freq, beta, z, window, kind):
    if kind == "c":
        return coefficient_sheet(freq, beta, z, window=window)
    plus, minus = recursion_sheets(freq, beta, z, window=window)
    if kind == "R+":
        return plus
    if kind == "R-":
        return minus
    d = symmetrized_sheet(plus, minus)
    if kind == "d":
        return d
    return build_phi(coefficient_sheet(freq, beta, z, window=window), d)


def sigma_check_report(freq, beta, theta1=0.0, theta2=0.0) -> dict:
    """Residuals of the ladder-pair and symmetry identities at one phase point."""
    rep = build_rep(freq, theta1, theta2)
    lam = lam_phase(freq)
    U, V = build_uv(rep, beta)
    eye = np.eye(freq.q)
    gamma = beta + 1.0 / beta
    res = {
        "p": freq.p, "q": freq.q, "beta": beta,
        "residual_commutation": max_norm(rep.u @ rep.v - np.exp(2j * np.pi * freq.alpha) * rep.v @ rep.u),
        "residual_ladder_twist": max_norm(U.matrix @ V.matrix - lam ** -2 * V.matrix @ U.matrix),
        "residual_ladder_twist_star": max_norm(U.matrix.conj().T @ V.matrix
                                               - lam ** 2 * V.matrix @ U.matrix.conj().T),
        "residual_ladder_product": max_norm(U.matrix.conj().T @ U.matrix
                                            - (lam * V.matrix + np.conj(lam) * V.matrix.conj().T
                                               + gamma * eye)),
        "residual_hamiltonian_split": max_norm(np.sqrt(beta) * (U.matrix + U.matrix.conj().T)
                                               - hamiltonian(rep, beta).matrix),
    }
    ru, rv = rho_images(rep, beta)
    res["residual_twist_automorphism"] = max_norm(ru.matrix + beta * rv.matrix
                                                  - (rep.u.conj().T + beta * rep.v))
    if 0 < beta < 1:
        su, sv = sigma_images(rep, beta)
        res["residual_symmetry_fixes_ladder"] = max_norm(
            beta ** -0.5 * su.matrix + beta ** 0.5 * sv.matrix - U.matrix)
        res["residual_symmetry_conjugates_twist"] = max_norm(
            np.conj(lam) * su.matrix @ sv.matrix.conj().T - V.matrix.conj().T)
    return res


def run_selftest(fast: bool = False) -> int:
    """Quick pass over the headline invariants; prints one line per check."""
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:
            checks.append((name, False, str(exc)))

    def algebra():
        for q in (2, 3, 5, 8):
            freq = RationalFrequency(1 if q == 2 else q - 3 or 1, q)
            rep = build_rep(freq, 0.37, 1.21)
            report = sigma_check_report(freq, 0.5, 0.37, 1.21)
            worst = max(v for k, v in report.items() if k.startswith("residual"))
            assert worst < 1e-10, f"algebra residual {worst:.2e} at {freq}"
            w = monomial(rep, 2, -3)
            assert max_norm(w.matrix @ w.matrix.conj().T - np.eye(q)) < 1e-12

    def spectra():
        for (p, q, beta) in ((1, 3, 0.5), (2, 5, 1.0), (5, 8, 0.25)):
            freq = RationalFrequency(p, q)
            ch = chambers(freq, beta)  # verify=True checks phase independence
            bands = band_edges(ch)
            assert len(bands.bands) == q
            rep = dual_check(freq, beta)
            assert rep.hausdorff < 1e-8, f"duality {rep.hausdorff:.2e}"
            for g in gaps(freq, beta):
                assert (g.label[1] * p - g.j) % q == 0

    def lyap():
        freq = RationalFrequency(1, 3)
        bands = band_edges(chambers(freq, 0.5, verify=False))
        for z in (3.2, -3.2, 4.0):
            lt = lyapunov_transfer(freq, 0.5, z).value
            lh = lyapunov_thouless(bands, z).value
            lr = lyapunov_trace(freq, 0.5, z).value
            assert abs(lt - lh) < 2e-3 and abs(lh - lr) < 1e-3

    def coeffs():
        freq = RationalFrequency(1, 3)
        sheet = coefficient_sheet(freq, 0.5, 4.2, window=4)
        r = system_residual(sheet, 0.5, 4.2)
        assert r.max_residual < 1e-8, f"system residual {r.max_residual:.2e}"
        assert abs(r.origin_inhomogeneity - 1.0) < 1e-8
        plus, minus = recursion_sheets(freq, 0.5, 4.2, window=8)
        d = symmetrized_sheet(plus, minus)
        assert d.value(1, 0) == 0.5
        probe = vanishing_probe(sheet)
        assert not probe.both_vanish

    def numbers():
        assert phi_cumulative(6) == 12
        seq = farey(40)
        assert len(seq) == phi_cumulative(40)
        assert all(d == 1 for d in seq.neighbor_determinants())
        from fractions import Fraction as Fr
        assert franel_table(3)[-1].total == Fr(2, 144)

    def batch():
        ds = compute_butterfly(5, 1.0)
        assert len(ds.rows) == phi_cumulative(5) + 1
        cc = component_count(ds, 1)
        assert cc.observed <= cc.predicted

    check("rotation algebra identities", algebra)
    check("spectra, duality, labels", spectra)
    check("lyapunov three methods", lyap)
    check("coefficient sheets", coeffs)
    check("number theory", numbers)
    if not fast:
        check("butterfly batch", batch)

    failed = 0
    for name, ok, msg in checks:
        status = "PASS" if ok else "FAIL"
        extra = f" ({msg})" if msg else ""
        print(f"[{status}] {name}{extra}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
