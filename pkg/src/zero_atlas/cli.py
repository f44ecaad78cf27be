"""``zero-atlas``: limit laws, zeros, comparison campaigns and potential checks.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 threshold
violation under ``--check``.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import List, Optional

import numpy as np

from . import io as zio
from .conjugate import conjugate
from .empirics import CompareConfig, compare_report, default_window, resolve_ensemble
from .limitlaw import atoms_and_gaps, density, limit_measure
from .potential import equilibrium_potential, flatness_certificate, potential_quadrature, truncated_law
from .rng import default_seed
from .roots import RootFindingError, find_roots
from .sampler import NoiseDistribution, ZeroFunctionError, instantiate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
CHECK_KS = 0.08
CHECK_POTENTIAL_GAP = 1e-4


class ConfigError(ValueError):
    pass


def _profile(args):
    try:
        return resolve_ensemble(args.ensemble, args.alpha, args.beta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _window(args, prof) -> float:
    w = args.window if args.window is not None else default_window(prof)
    if not w > 0 or w >= prof.r0:
        raise ConfigError(f"window {w} must lie in (0, {prof.r0})")
    return float(w)


def _profile_doc(prof) -> dict:
    return {"kind": prof.kind, "alpha": prof.alpha, "beta": prof.beta, "t0": prof.t0, "r0": prof.r0}


def _emit(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        zio.write_text(args.out, text)


def cmd_limit(args) -> int:
    prof = _profile(args)
    win = _window(args, prof)
    lm = limit_measure(prof, win)
    r = win * np.arange(1, 201) / 200.0
    cdf = lm.radial_cdf(r)
    total = lm.total_mass_window
    dens = np.full(r.size, math.nan)
    for i, ri in enumerate(r):
        try:
            dens[i] = density(lm, complex(ri))
        except ValueError:
            pass
    atoms, gaps = atoms_and_gaps(lm)
    if args.format == "csv":
        comments = [f"profile={prof.kind},alpha={zio.fmt_float(prof.alpha)},beta={zio.fmt_float(prof.beta)},"
                    f"window={zio.fmt_float(win)},total_mass_window={zio.fmt_float(total)}"]
        footer = [f"atom,radius={zio.fmt_float(a)},mass={zio.fmt_float(m)}" for a, m in atoms]
        footer += [f"gap,r_lo={zio.fmt_float(lo)},r_hi={zio.fmt_float(hi)}" for lo, hi in gaps]
        rows = zip(r, cdf, cdf / total if total > 0 else cdf * math.nan, dens)
        _emit(args, zio.csv_table(["r", "cdf", "cdf_normalized", "density"], rows, comments, footer))
        return EXIT_OK
    doc = {
        "profile": _profile_doc(prof),
        "window": win,
        "normalization": "raw mu(D_r) = I'(log r); cdf_normalized divides by total_mass_window",
        "total_mass_window": total,
        "table": {
            "r": r,
            "cdf": cdf,
            "cdf_normalized": cdf / total if total > 0 else [None] * r.size,
            "density": dens,
        },
        "atoms": [{"radius": a, "mass": m, "mass_normalized": m / total} for a, m in atoms],
        "gaps": [{"r_lo": lo, "r_hi": hi} for lo, hi in gaps],
    }
    _emit(args, zio.dumps(doc))
    return EXIT_OK


def _noise(args) -> NoiseDistribution:
    try:
        return NoiseDistribution(args.noise, args.gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def cmd_zeros(args) -> int:
    prof = _profile(args)
    win = _window(args, prof)
    if args.n < 1:
        raise ConfigError("n must be >= 1")
    inst = instantiate((prof, args.n), _noise(args), _seed(args), win, relative=True)
    zs = find_roots(inst)
    if args.format == "json":
        doc = {
            "header": {"degree": zs.degree, "window": win, "origin_multiplicity": zs.origin_multiplicity,
                       "seed": zs.seed, "manifest": inst.manifest()},
            "zeros": [{"re": z.real, "im": z.imag, "multiplicity": int(m), "residual": res}
                      for z, m, res in zip(zs.zeros, zs.multiplicity, zs.residual)],
        }
        _emit(args, zio.dumps(doc))
    else:
        _emit(args, zs.to_csv())
    return EXIT_OK


def cmd_compare(args) -> int:
    prof = _profile(args)
    win = _window(args, prof)
    if args.n < 1 or args.trials < 0:
        raise ConfigError("n must be >= 1 and trials >= 0")
    cfg = CompareConfig(args.ensemble, args.alpha, args.beta, _noise(args).kind, args.gamma,
                        args.n, args.trials, win, _seed(args))
    rep = compare_report(cfg, threads=args.threads)
    _emit(args, zio.dumps(rep.to_dict()))
    if args.check and args.trials > 0:
        agg = rep.aggregate
        bad = agg["n_ok"] < args.trials or agg["mean_ks_radial"] > CHECK_KS or agg["mean_ks_angular"] > CHECK_KS
        if bad:
            return EXIT_CHECK
    return EXIT_OK


def cmd_potential(args) -> int:
    prof = _profile(args)
    kappa = args.kappa if args.kappa is not None else (prof.t0 if math.isfinite(prof.t0) else 1.0)
    try:
        tl = truncated_law(prof, kappa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cert = flatness_certificate(tl)
    r_in, r_out = tl.support
    rr = np.linspace(0.02, 2.0, 50) * max(r_out, 1e-3)
    rr = rr[rr < prof.r0]
    z = rr * np.exp(1j * (0.2 + 2.0 * math.pi * np.arange(rr.size) / 11.0))
    closed = equilibrium_potential(tl, z)
    quad = potential_quadrature(tl, z)
    gap = np.abs(closed - quad)
    doc = {
        "law": {"profile": _profile_doc(prof), "kappa": kappa, "support": [r_in, r_out]},
        "flatness": {
            "constant": cert.constant,
            "max_dev_support": cert.max_dev_support,
            "min_gap_outside": cert.min_gap_outside,
            "tol": cert.tol,
            "passed": cert.passed,
            "probes": cert.rows(),
        },
        "closed_vs_quadrature": [
            {"z_re": zi.real, "z_im": zi.imag, "closed": c, "quadrature": q, "gap": g}
            for zi, c, q, g in zip(z, closed, quad, gap)
        ],
        "max_gap": float(gap.max()),
    }
    if args.format == "csv":
        rows = [(p["r"], p["F"], p["in_support"]) for p in cert.rows()]
        head = [f"kappa={zio.fmt_float(kappa)},constant={zio.fmt_float(cert.constant)},"
                f"max_dev_support={zio.fmt_float(cert.max_dev_support)},max_gap={zio.fmt_float(gap.max())}"]
        _emit(args, zio.csv_table(["r", "F", "in_support"], rows, head))
    else:
        _emit(args, zio.dumps(doc))
    if args.check and (not cert.passed or gap.max() > CHECK_POTENTIAL_GAP):
        return EXIT_CHECK
    return EXIT_OK


def cmd_conjugate(args) -> int:
    prof = _profile(args)
    win = _window(args, prof)
    s_hi = math.log(win)
    cp = conjugate(prof, s_hi - 6.0, s_hi, args.h)
    cols = ["s", "I", "I_prime"]
    rows = zip(cp.s_grid, cp.I_values, cp.left_deriv)
    if args.format == "json":
        doc = {"profile": _profile_doc(prof), "h": cp.h, "s": cp.s_grid, "I": cp.I_values,
               "I_prime": cp.left_deriv,
               "jumps": [{"s": s, "size": m} for s, m in cp.jumps],
               "flats": [{"s_lo": a, "s_hi": b, "level": v} for a, b, v in cp.flats]}
        _emit(args, zio.dumps(doc))
        return EXIT_OK
    footer = [f"jump,s={zio.fmt_float(s)},size={zio.fmt_float(m)}" for s, m in cp.jumps]
    footer += [f"flat,s_lo={zio.fmt_float(a)},s_hi={zio.fmt_float(b)},level={zio.fmt_float(v)}"
               for a, b, v in cp.flats]
    head = [f"profile={prof.kind},alpha={zio.fmt_float(prof.alpha)},h={zio.fmt_float(cp.h)}"]
    _emit(args, zio.csv_table(cols, rows, head, footer))
    return EXIT_OK


COMMANDS = {
    "limit": cmd_limit,
    "zeros": cmd_zeros,
    "compare": cmd_compare,
    "potential": cmd_potential,
    "conjugate": cmd_conjugate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zero-atlas", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--ensemble", default="weyl",
                        help="kac, elliptic, flat, hyperbolic, lo-poly, weyl, theta, three-circles")
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--beta", type=float, default=0.0)
        sp.add_argument("--kappa", type=float, default=None)
        sp.add_argument("--noise", default="complex_gaussian")
        sp.add_argument("--gamma", type=float, default=4.0, help="pareto_log tail exponent")
        sp.add_argument("--n", type=int, default=200)
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--window", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None,
                        help="default: $ZERO_ATLAS_SEED or a fixed constant")
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("json", "csv"),
                        default="csv" if name in ("zeros", "conjugate") else "json")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--check", action="store_true")
        sp.add_argument("--h", type=float, default=1e-3, help="conjugate grid step")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ZeroFunctionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RootFindingError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
