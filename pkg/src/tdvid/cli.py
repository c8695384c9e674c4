"""Command-line interface.

Subcommands: noise, denoise, psnr, tune, compare, info. Exit codes:
0 success, 2 argument/validation error, 1 runtime failure. A flat
key=value config file can provide defaults; explicit flags override it.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import io as vio
from .pipeline import (
    DenoiseParams,
    compare_report,
    line_search_params,
    rof2dt_denoise,
    rule_of_thumb,
    tdv_denoise,
    write_report_csv,
)
from .solver import SolverConfig
from .volume import NoiseSpec, add_gaussian_noise, psnr, psnr_per_frame

__all__ = ["main"]


class ArgumentError(ValueError):
    """CLI constraint violation, reported before any computation (exit 2)."""


def _load_config(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ArgumentError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-4, help="dual-residual stopping tolerance")
    p.add_argument("--maxiter", type=int, default=1000, help="iteration cap")
    p.add_argument("--l-sq", type=float, default=24.0, help="squared operator norm bound")


def _add_param_flags(p):
    p.add_argument("--sigma", type=float, help="inner smoothing std-dev")
    p.add_argument("--rho", type=float, help="outer smoothing std-dev")
    p.add_argument("--eta", type=float, help="fidelity weight")
    p.add_argument(
        "--auto-std",
        type=float,
        help="derive (sigma, rho, eta) from this noise std via the rule of thumb",
    )


def _resolve_params(args) -> DenoiseParams:
    explicit = args.sigma is not None or args.rho is not None or args.eta is not None
    if args.auto_std is not None:
        if explicit:
            raise ArgumentError("give either --auto-std or explicit --sigma/--rho/--eta")
        return rule_of_thumb(args.auto_std)
    if args.sigma is None or args.rho is None or args.eta is None:
        raise ArgumentError("need --sigma, --rho and --eta (or --auto-std)")
    if args.sigma > args.rho:
        raise ArgumentError(f"constraint sigma <= rho violated: {args.sigma} > {args.rho}")
    try:
        return DenoiseParams(args.sigma, args.rho, args.eta)
    except ValueError as exc:
        raise ArgumentError(str(exc)) from exc


def _echo(label, **numbers):
    parts = " ".join(f"{k}={v:g}" for k, v in numbers.items())
    print(f"[tdvid] {label}: {parts}")


def _fmt_db(value):
    return "inf" if math.isinf(value) else f"{value:.4f}"


def build_parser():
    parser = argparse.ArgumentParser(prog="tdvid", description=__doc__)
    parser.add_argument("--config", help="flat key=value file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    # kept so config-file defaults can reach the subparsers, whose own
    # defaults would otherwise shadow parser-level set_defaults
    parser.subcommands = sub

    p = sub.add_parser("noise", help="add unclipped Gaussian noise")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--std", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("denoise", help="run a denoising method")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=("tdv", "rof2dt"), default="tdv")
    _add_param_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trace", help="per-iteration CSV for the first channel (tdv only)")

    p = sub.add_parser("psnr", help="PSNR against a reference video")
    p.add_argument("input")
    p.add_argument("--ref", required=True)
    p.add_argument("--per-frame", action="store_true")

    p = sub.add_parser("tune", help="line-search (sigma, rho, eta) against ground truth")
    p.add_argument("input")
    p.add_argument("--ref", required=True)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--radius", type=float, default=0.5)
    _add_param_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("compare", help="multi-method PSNR report as CSV")
    p.add_argument("input")
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", default="tdv,rof2dt")
    _add_param_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("info", help="dump container header information")
    p.add_argument("input")
    return parser


def _run(args) -> int:
    if args.command == "info":
        info = vio.video_info(args.input)
        for key, value in info.items():
            print(f"{key}: {value}")
        return 0

    if args.command == "noise":
        spec = NoiseSpec(args.std, args.seed)
        _echo("noise", std=args.std, seed=args.seed)
        video = vio.read_video(args.input)
        vio.write_video(add_gaussian_noise(video, spec), args.output)
        return 0

    if args.command == "psnr":
        video = vio.read_video(args.input)
        ref = vio.read_video(args.ref)
        print(f"psnr_db: {_fmt_db(psnr(video, ref))}")
        if args.per_frame:
            for k, val in enumerate(psnr_per_frame(video, ref)):
                print(f"frame {k}: {_fmt_db(val)}")
        return 0

    cfg = SolverConfig(l_sq=args.l_sq, tol=args.tol, maxiter=args.maxiter)

    if args.command == "denoise":
        if args.method == "rof2dt":
            if args.auto_std is not None:
                eta = rule_of_thumb(args.auto_std).eta
            elif args.eta is not None:
                if args.sigma is not None and args.rho is not None and args.sigma > args.rho:
                    raise ArgumentError(
                        f"constraint sigma <= rho violated: {args.sigma} > {args.rho}"
                    )
                eta = args.eta
            else:
                raise ArgumentError("rof2dt needs --eta or --auto-std")
        else:
            params = _resolve_params(args)
        video = vio.read_video(args.input)
        if args.method == "tdv":
            _echo(
                "denoise tdv",
                sigma=params.sigma, rho=params.rho, eta=params.eta,
                tol=cfg.tol, maxiter=cfg.maxiter, l_sq=cfg.l_sq,
            )
            if args.trace:
                from . import ops
                from .solver import solve_accelerated_pd
                from .structure import SmoothingParams, build_weight_field
                from .volume import as_channels

                from .pipeline import INTENSITY_SCALE

                chan = as_channels(video)[0]
                w = build_weight_field(chan, SmoothingParams(params.sigma, params.rho))
                scaled = chan / INTENSITY_SCALE
                solve_accelerated_pd(
                    lambda u: ops.apply_K(u, w),
                    lambda y: ops.apply_K_adjoint(y, w),
                    scaled, scaled, params.eta, cfg, trace_path=args.trace,
                )
            out, reports = tdv_denoise(video, params, cfg)
            for c, rep in enumerate(reports):
                _echo(
                    f"channel {c}",
                    iterations=rep.iterations,
                    residual=rep.final_residual,
                    converged=int(rep.converged),
                )
        else:
            _echo("denoise rof2dt", eta=eta, tol=cfg.tol, maxiter=cfg.maxiter)
            out = rof2dt_denoise(video, eta, SolverConfig(l_sq=12.0, tol=cfg.tol, maxiter=cfg.maxiter))
        vio.write_video(out, args.output)
        return 0

    if args.command == "tune":
        video = vio.read_video(args.input)
        ref = vio.read_video(args.ref)
        init = _resolve_params(args)
        _echo("tune init", sigma=init.sigma, rho=init.rho, eta=init.eta,
              radius=args.radius, budget=args.budget)
        state = line_search_params(video, ref, init, radius0=args.radius,
                                   budget=args.budget, cfg=cfg)
        best = state.best_params
        _echo("tune best", sigma=best.sigma, rho=best.rho, eta=best.eta,
              psnr=state.best_psnr, evaluations=len(state.log))
        return 0

    if args.command == "compare":
        video = vio.read_video(args.input)
        ref = vio.read_video(args.ref)
        params = _resolve_params(args)
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        outputs = {"noisy": video}
        for method in methods:
            if method == "tdv":
                outputs["tdv"], _ = tdv_denoise(video, params, cfg)
            elif method == "rof2dt":
                outputs["rof2dt"] = rof2dt_denoise(
                    video, params.eta, SolverConfig(l_sq=12.0, tol=cfg.tol, maxiter=cfg.maxiter)
                )
            else:
                raise ArgumentError(f"unknown method {method!r}")
        _echo("compare", sigma=params.sigma, rho=params.rho, eta=params.eta,
              tol=cfg.tol, maxiter=cfg.maxiter)
        write_report_csv(compare_report(ref, outputs), args.out)
        print(f"report written to {args.out}")
        return 0

    raise ArgumentError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # pre-scan for --config so file values become defaults, flags override
    if "--config" in argv:
        try:
            cfg_path = argv[argv.index("--config") + 1]
        except IndexError:
            parser.error("--config needs a path")
        try:
            file_values = _load_config(cfg_path)
        except (OSError, ArgumentError) as exc:
            print(f"tdvid: {exc}", file=sys.stderr)
            return 2
        converted = {}
        for key, val in file_values.items():
            try:
                converted[key] = float(val) if key not in ("method", "methods") else val
            except ValueError:
                converted[key] = val
        for key in ("seed", "maxiter", "budget"):
            if key in converted:
                converted[key] = int(float(converted[key]))
        parser.set_defaults(**converted)
        for sp in parser.subcommands.choices.values():
            sp.set_defaults(**converted)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except ArgumentError as exc:
        print(f"tdvid: {exc}", file=sys.stderr)
        return 2
    except (vio.VideoFormatError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"tdvid: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
