"""Command-line entry point.

Exit status: 0 on success, 2 for invalid input or configuration, 3 when a
numerical step fails (evaluation, convergence, singular solves).
"""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import math
import sys
import warnings

from . import experiments as ex
from .contour import OrderPair, SpectralParams, build_contour, contour_angles
from .errors import FracPropError
from .mlf import MlParams, ml_eval

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# per-subcommand defaults applied before the config file and the flags
_BASE = {
    "converge": {},
    "table1": {"problem": "hom-fd", "alpha": (0.1, 0.5, 1.0), "m": 5000},
    "inverse": {"problem": "inverse", "beta": (1.6,), "N": (128,)},
    "solve": {"N": (128,)},
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value file; flags override it")
    for f in ex.ExperimentConfig.keys():
        p.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            metavar="VALUE",
            default=argparse.SUPPRESS,
            help=f.metadata["help"],
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracprop", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ml-eval", allow_abbrev=False, help="one Mittag-Leffler value as value_re,value_im,est_abs_err")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--re", type=float, required=True)
    p.add_argument("--im", type=float, default=0.0)

    p = sub.add_parser("contour", allow_abbrev=False, help="contour coefficients aI,bI,d,a_m,omega")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--varphi-s", type=float, default=0.0)
    p.add_argument("--omega", default="star", help="max, star, opc or a number")
    p.add_argument("--a0", type=float, default=math.pi / 6)

    for name, text in (
        ("converge", "error curves over (alpha, beta, N)"),
        ("table1", "smallest N reaching the threshold per (delta, kappa)"),
        ("inverse", "seeded order-identification trials"),
        ("solve", "solution snapshots as t,x,re,im"),
    ):
        p = sub.add_parser(name, allow_abbrev=False, help=text)
        _add_config_flags(p)
        if name == "solve":
            p.add_argument("--t", default="", help="comma-separated times (empty: header only)")
    return parser


def load_config(command: str, args: argparse.Namespace) -> ex.ExperimentConfig:
    base = dataclasses.replace(ex.ExperimentConfig(), **_BASE[command])
    if args.config:
        base = ex.ExperimentConfig.from_file(args.config, base)
    names = {f.name for f in ex.ExperimentConfig.keys()}
    flags = {k: v for k, v in vars(args).items() if k in names}
    return ex.ExperimentConfig.from_mapping(flags, base)


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _emit(header, rows, path) -> None:
    with _sink(path) as fh:
        ex.write_csv(header, rows, fh)


def _ml_eval(args) -> None:
    v = ml_eval(MlParams(args.gamma, args.sigma), complex(args.re, args.im))
    sys.stdout.write(",".join(ex.format_value(x) for x in (v.value.real, v.value.imag, v.est_abs_err)) + "\n")


def _contour(args) -> None:
    op = OrderPair(args.alpha, args.beta)
    sp = SpectralParams(varphi_s=args.varphi_s)
    c = build_contour(op, sp, args.omega, args.a0)
    omega_c = contour_angles(op, sp).omega_c
    if c.omega > omega_c:
        warnings.warn(f"omega = {c.omega} exceeds omega_c = {omega_c}", ex.ConfigWarning, stacklevel=1)
    _emit(("aI", "bI", "d", "a_m", "omega"), [(c.aI, c.bI, c.d, c.a_m, c.omega)], None)


def _times(raw: str) -> list[float]:
    return [] if not raw.strip() else list(ex._floats(raw))


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "ml-eval":
            _ml_eval(args)
        elif args.command == "contour":
            _contour(args)
        else:
            cfg = load_config(args.command, args)
            if args.command == "converge":
                _emit(ex.CONVERGENCE_HEADER, ex.run_convergence(cfg), cfg.output)
            elif args.command == "table1":
                _emit(ex.TABLE1_HEADER, ex.run_table1(cfg), cfg.output)
            elif args.command == "inverse":
                _emit(ex.INVERSE_HEADER, ex.run_inverse(cfg), cfg.output)
            else:
                rows = ex.emit_solution(cfg, _times(args.t))
                _emit(ex.SOLUTION_HEADER, rows, cfg.output)
    except (ValueError, OSError) as exc:
        # the ValueError family covers every configuration error of the library
        print(f"fracprop: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FracPropError, ArithmeticError) as exc:
        print(f"fracprop: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
