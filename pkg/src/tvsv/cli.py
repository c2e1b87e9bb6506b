"""``tvsv`` command line: degrade | pmap | restore | experiment | metrics."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .degrade import NoiseSpec, bsnr, degrade, isnr
from .estimator import MODELS, TVRestorer, detect_impulses, parse_model, sweep_mu
from .experiment import load_spec, rows_to_csv, run_experiment
from .imageio import read_image, read_mask, write_image, write_mask, write_pgm
from .operators import BlurOperator
from .phantoms import load_phantom
from .pmap import PMapEstimator, p_to_unit, spn_prefilter
from .solver import SolverDivergence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_input(spec):
    """Image path, or ``phantom:<name>[:<size>]``."""
    if str(spec).startswith("phantom:"):
        try:
            return load_phantom(str(spec)[len("phantom:") :])
        except ValueError as exc:
            raise CliError(str(exc), EXIT_VALIDATION)
    try:
        return read_image(spec)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {spec}: {exc}", EXIT_IO)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_degrade(args):
    u = _load_input(args.input)
    chosen = [x is not None for x in (args.awgn_sigma, args.awgn_bsnr, args.spn_gamma)]
    if sum(chosen) != 1:
        raise CliError("give exactly one of --awgn-sigma, --awgn-bsnr, --spn-gamma", EXIT_VALIDATION)
    seed = 0 if args.seed is None else args.seed
    try:
        blur = BlurOperator(args.blur_band, args.blur_sigma)
        if args.spn_gamma is not None:
            spec = NoiseSpec("spn", gamma=args.spn_gamma, seed=seed)
        else:
            spec = NoiseSpec(
                "awgn", sigma=args.awgn_sigma, target_bsnr=args.awgn_bsnr, seed=seed
            )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    rec = degrade(u, blur, spec)
    out = _out_dir(args)
    write_image(out / "observed.npy", rec.g)
    write_pgm(out / "observed.pgm", rec.g)
    write_pgm(out / "clean.pgm", u)
    np.save(out / "clean.npy", u)
    if rec.mask is not None:
        write_mask(out / "mask.pbm", rec.mask)
    meta = rec.metadata()
    meta.update(blur_band=blur.band, blur_sigma=blur.sigma, input=str(args.input))
    _write_json(out / "degrade.json", meta)
    print(json.dumps({"bsnr": meta["bsnr"], "sigma": meta["sigma"], "out": str(out)}))
    return EXIT_OK


def cmd_pmap(args):
    g = _load_input(args.input)
    if args.mask is not None:
        g = spn_prefilter(g, read_mask(args.mask))
    try:
        est = PMapEstimator(window=args.window, p_min=args.p_min).fit()
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    pmap = est.transform(g)
    out = _out_dir(args)
    stem = f"pmap_s{args.window}"
    np.savetxt(out / f"{stem}.csv", pmap, delimiter=",", fmt="%.6f")
    write_pgm(out / f"{stem}.pgm", p_to_unit(pmap, args.p_min))
    print(json.dumps({"min": float(pmap.min()), "max": float(pmap.max()), "mean": float(pmap.mean())}))
    return EXIT_OK


def _meta(args):
    if args.meta is None:
        return {}
    try:
        return json.loads(Path(args.meta).read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {args.meta}: {exc}", EXIT_IO)


def _noise_sigma(args):
    if args.noise_sigma is not None:
        return args.noise_sigma
    sigma = _meta(args).get("sigma")
    return None if sigma is None else float(sigma)


def cmd_restore(args):
    g = _load_input(args.input)
    try:
        family, q = parse_model(args.model)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    try:
        mask = read_mask(args.mask) if args.mask is not None else None
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read mask {args.mask}: {exc}", EXIT_IO)
    kind = _meta(args).get("kind")
    if mask is not None or kind is not None:
        looks_spn = mask is not None or kind == "spn"
    else:
        looks_spn = bool(np.mean(detect_impulses(g)) > 0.01)
    if not args.allow_mismatch and (q == 1) != looks_spn:
        noise = "salt-and-pepper" if looks_spn else "Gaussian"
        raise CliError(
            f"{args.model} does not match the apparent {noise} noise; pass --allow-mismatch",
            EXIT_VALIDATION,
        )
    params = dict(
        model=args.model,
        blur_band=args.blur_band,
        blur_sigma=args.blur_sigma,
        p=args.p,
        window=args.window,
        mu=args.mu,
        noise_sigma=_noise_sigma(args),
        tau=args.tau,
        beta_t=args.beta_t,
        beta_r=args.beta_r,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    sweep = None
    try:
        est = TVRestorer(**params)
        if args.mu_sweep:
            if args.reference is None:
                raise CliError("--mu-sweep needs --reference (clean image)", EXIT_VALIDATION)
            clean = _load_input(args.reference)
            best_mu, est, table = sweep_mu(est, g, clean, _floats(args.mu_sweep), mask=mask)
            sweep = {"best_mu": best_mu, "grid": [{"mu": m, "isnr": s} for m, s in table]}
        else:
            est.fit()
            est.transform(g, mask=mask)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)

    rep = est.report_
    out = _out_dir(args)
    write_image(out / "restored.npy", rep.u_star)
    write_pgm(out / "restored.pgm", rep.u_star)
    if family == "tvpsv":
        np.savetxt(out / "pmap.csv", est.pmap_, delimiter=",", fmt="%.6f")
    report = {"model": args.model, "params": est.get_params(), **rep.summary()}
    report["log"] = {"rel_change": rep.rel_changes, "r_norm": rep.r_norms}
    if sweep is not None:
        report["mu_sweep"] = sweep
    if args.reference is not None:
        clean = _load_input(args.reference)
        report["isnr"] = isnr(g, clean, rep.u_star)
        report["bsnr"] = bsnr(g, clean, est.blur_)
    _write_json(out / "report.json", report)
    print(json.dumps({k: report.get(k) for k in ("iterations", "converged", "isnr") if k in report}))
    return EXIT_OK


def cmd_experiment(args):
    try:
        spec = load_spec(args.spec)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise CliError(f"cannot read spec {args.spec}: {exc}", EXIT_IO)
    if args.seed is not None:
        spec["seed"] = args.seed
    rows, details = run_experiment(spec, base_dir=Path(args.spec).parent, threads=args.threads)
    out = _out_dir(args)
    (out / "report.csv").write_text(rows_to_csv(rows))
    _write_json(out / "report.json", {"spec": spec, "cells": details})
    sys.stdout.write(rows_to_csv(rows))
    failed = [r for r in rows if r["status"] != "ok"]
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_metrics(args):
    clean = _load_input(args.clean)
    g = _load_input(args.observed)
    result = {"bsnr": bsnr(g, clean, BlurOperator(args.blur_band, args.blur_sigma))}
    if args.restored is not None:
        result["isnr"] = isnr(g, clean, _load_input(args.restored))
    print(json.dumps(result))
    return EXIT_OK


def _add_blur(p):
    p.add_argument("--blur-band", type=int, default=5)
    p.add_argument("--blur-sigma", type=float, default=1.0)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (default 0; experiment: spec value)")
    common.add_argument("--config", help="TOML file with option defaults")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tvsv", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", parents=[common], help="blur and add noise")
    p.add_argument("input", help="image path or phantom:<name>[:<size>]")
    _add_blur(p)
    p.add_argument("--awgn-sigma", type=float)
    p.add_argument("--awgn-bsnr", type=float)
    p.add_argument("--spn-gamma", type=float)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("pmap", parents=[common], help="estimate the space-variant p-map")
    p.add_argument("input")
    p.add_argument("-s", "--window", type=int, default=3)
    p.add_argument("--p-min", type=float, default=0.05)
    p.add_argument("--mask", help="corruption mask; pre-filter before estimating")
    p.set_defaults(func=cmd_pmap)

    p = sub.add_parser("restore", parents=[common], help="restore a degraded image")
    p.add_argument("input")
    p.add_argument("--model", default="tvpsv-l2", choices=MODELS)
    _add_blur(p)
    p.add_argument("-s", "--window", type=int, default=3)
    p.add_argument("--p", type=float, help="global exponent for tvp-* models")
    p.add_argument("--mu", type=float)
    p.add_argument("--mu-sweep", help="comma separated mu grid (needs --reference)")
    p.add_argument("--reference", help="clean image, for ISNR and mu sweeps")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--meta", help="degrade.json to take the noise sigma from")
    p.add_argument("--mask", help="known corruption mask for SPN")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--beta-t", type=float)
    p.add_argument("--beta-r", type=float)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--allow-mismatch", action="store_true")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("experiment", parents=[common], help="run a TOML/JSON experiment spec")
    p.add_argument("spec")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_experiment, seed=None)

    p = sub.add_parser("metrics", parents=[common], help="BSNR / ISNR of images")
    p.add_argument("--clean", required=True)
    p.add_argument("--observed", required=True)
    p.add_argument("--restored")
    _add_blur(p)
    p.set_defaults(func=cmd_metrics)
    parser.commands = sub.choices
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise CliError(f"cannot read config {args.config}: {exc}", EXIT_IO)
    section = {**{k: v for k, v in cfg.items() if not isinstance(v, dict)}, **cfg.get(args.command, {})}
    defaults = {k.replace("-", "_"): v for k, v in section.items()}
    parser.commands[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except CliError as exc:
        print(f"tvsv: error: {exc}", file=sys.stderr)
        return exc.code
    except SolverDivergence as exc:
        print(f"tvsv: error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"tvsv: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"tvsv: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
