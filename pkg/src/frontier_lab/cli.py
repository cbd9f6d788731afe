"""Command-line entry point ``frontier-lab``.

Exit codes: 0 success, 2 configuration or argument error, 3 numerical failure.
"""

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import harness
from ._version import __version__
from .estimators import (
    bias_corrected_smooth,
    default_smoothing_bandwidth,
    estimate_bias_g0,
    fit_boundary,
    interior_design_grid,
    smooth_boundary,
)
from .exceptions import (
    ConfigError,
    DegreeTooHigh,
    DomainError,
    EstimationError,
    FrontierLabError,
    NumericalDegeneracy,
    UnsupportedModeError,
)
from .gof import gof_test
from .kernels import build_kernel, kernel_order_for, kernel_table
from .model import make_law

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_STUDY_COMMANDS = {"power": "power", "rates": "rates", "edf": "edf_equivalence", "bias": "bias_profile"}
_NULLS = {"uniform": "uniform_sym", "mexp": "mirrored_exp"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser():
    p = _Parser(prog="frontier-lab", description="Boundary regression toolkit and Monte-Carlo harness.")
    p.add_argument("--version", action="version", version=f"frontier-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in _STUDY_COMMANDS:
        s = sub.add_parser(name, help=f"run the {_STUDY_COMMANDS[name]} study")
        s.add_argument("--config", required=True, help="experiment config file")
        s.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        s.add_argument("--out", help="output directory (default: the config's output)")

    e = sub.add_parser("estimate", help="fit the boundary of a data file")
    e.add_argument("--input", required=True, help="CSV with columns index,y")
    e.add_argument("--beta", type=float, required=True)
    e.add_argument("--bandwidth", type=float, required=True)
    e.add_argument("--smooth", action="store_true", help="add the kernel-smoothed fit and its derivative")
    e.add_argument("--b", type=float, help="smoothing bandwidth (default from the error-rate formula)")
    e.add_argument("--bias-correct", action="store_true", help="subtract the simulated zero-function bias")
    e.add_argument("--law", default="powertail", help="error law for bias simulation and default b")
    e.add_argument("--alpha", type=float, default=1.0)
    e.add_argument("--theta", type=float, default=1.0)
    e.add_argument("--bias-replicates", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="output CSV")

    g = sub.add_parser("gof", help="goodness-of-fit test for the error law")
    g.add_argument("--input", required=True, help="CSV with columns index,y")
    g.add_argument("--null", required=True, choices=sorted(_NULLS))
    g.add_argument("--beta", type=float, required=True)
    g.add_argument("--bandwidth", type=float, required=True)
    g.add_argument("--level", type=float, default=0.05)
    g.add_argument("--test", choices=("ks", "cvm"), default="cvm")
    g.add_argument("--cv", default="mc:500", help="'asymptotic' or 'mc:R'")
    g.add_argument("--bootstrap", choices=("fitted", "zero"), default="fitted",
                   help="regression function of the mc:R bootstrap (default: the fitted one)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="also write the result line to this CSV")

    k = sub.add_parser("kernel", help="tabulate a higher-order kernel")
    k.add_argument("--order", type=int, required=True)
    k.add_argument("--grid", type=int, default=201)
    k.add_argument("--out", help="output CSV (default stdout)")
    return p


def read_responses(path):
    """Responses ordered by design index from a CSV with columns ``index,y``.

    A header row is optional; indices must be exactly ``1..n``.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    pairs = []
    first = True
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise ConfigError(f"{path}: expected two columns (index, y)", lineno)
        try:
            pairs.append((int(float(row[0])), float(row[1])))
        except ValueError:
            if not first:
                raise ConfigError(f"{path}: malformed number", lineno) from None
        first = False
    if len(pairs) < 2:
        raise ConfigError(f"{path}: need at least two observations")
    pairs.sort()
    idx = np.array([p[0] for p in pairs])
    if not np.array_equal(idx, np.arange(1, idx.size + 1)):
        raise ConfigError(f"{path}: indices must be 1..n without gaps or repeats")
    return np.array([p[1] for p in pairs])


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_study(args):
    cfg = harness.apply_seed_override(harness.parse_config(args.config))
    expected = _STUDY_COMMANDS[args.command]
    if cfg.kind != expected:
        raise ConfigError(f"config describes a [{cfg.kind}] study, not {expected}")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    result = harness.run_experiment(cfg, args.threads)
    out = args.out or cfg.output
    paths = harness.write_results(result, out)
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    for label in result.labels:
        print(f"warning: {label}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_estimate(args):
    ys = read_responses(args.input)
    n = ys.size
    h = args.bandwidth
    if args.bias_correct and not args.smooth:
        raise ConfigError("--bias-correct needs --smooth")
    bfit = fit_boundary(ys, h, args.beta, interior_design_grid(n, h, 1 - h))
    if not args.smooth:
        _write_csv(args.out, ("x", "ghat"), zip(bfit.grid, bfit.values))
        return EXIT_OK
    law = make_law(args.law, alpha=args.alpha, theta=args.theta)
    b = args.b if args.b is not None else default_smoothing_bandwidth(h, n, law.alpha, args.beta)
    x = interior_design_grid(n, h + b, 1 - h - b)
    if x.size == 0:
        raise DomainError(f"h + b = {h + b:.4g} leaves no interior design points")
    K = build_kernel(kernel_order_for(args.beta))
    sfit = smooth_boundary(bfit, b, K, x)
    ghat = bfit.values[np.searchsorted(bfit.grid, x - 1e-12)]
    cols = [x, ghat, sfit.values, sfit.derivs]
    header = ["x", "ghat", "gtilde", "gtilde_prime"]
    if args.bias_correct:
        bias = estimate_bias_g0(law, n, h, args.beta, args.bias_replicates, args.seed)
        cols.append(bias_corrected_smooth(sfit, bias).values)
        header.append("gstar")
    _write_csv(args.out, header, zip(*cols))
    return EXIT_OK


def _cmd_gof(args):
    ys = read_responses(args.input)
    res = gof_test(ys, _NULLS[args.null], args.beta, args.bandwidth, args.level, args.test, args.cv, args.seed,
                   bootstrap=args.bootstrap)
    line = f"{res.theta_hat!r},{res.statistic!r},{res.critical_value!r},{res.p_value!r},{int(res.reject)}"
    text = "theta_hat,statistic,critical,p_value,reject\n" + line + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    print(res.summary(), file=sys.stderr)
    return EXIT_OK


def _cmd_kernel(args):
    if args.grid < 2:
        raise ConfigError("--grid must be >= 2")
    K = build_kernel(args.order)
    _write_csv(args.out, ("u", "K", "K_prime"), kernel_table(K, args.grid))
    return EXIT_OK


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        if args.command in _STUDY_COMMANDS:
            return _cmd_study(args)
        return {"estimate": _cmd_estimate, "gof": _cmd_gof, "kernel": _cmd_kernel}[args.command](args)
    except (NumericalDegeneracy, EstimationError, DegreeTooHigh) as exc:
        print(f"frontier-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, UnsupportedModeError, DomainError) as exc:
        print(f"frontier-lab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FrontierLabError as exc:
        print(f"frontier-lab: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
