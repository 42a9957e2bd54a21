"""Command-line entry point.

Every run writes its resolved configuration as the first output line
(``# config: {...}`` for CSV, a ``{"config": ...}`` record for JSON lines).
``iginue replay FILE`` re-runs a configuration read back from such a header.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from . import finite_kernel as fk
from . import limits as lm
from . import montecarlo as mc
from .specfun import DomainError
from .tolerances import DEFAULT, Tolerances

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` style numbers (``i`` or ``j``, no spaces)."""
    s = text.strip().replace("I", "i").replace("J", "j").replace("i", "j")
    if not s or " " in s:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def parse_complex_list(text: str) -> list[complex]:
    return [parse_complex(t) for t in text.split(",") if t.strip()] if text.strip() else []


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def format_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def parse_tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    known = {f.name: f.type for f in fields(Tolerances)}
    if not sep or name not in known:
        raise argparse.ArgumentTypeError(
            f"expected NAME=VALUE with NAME one of {sorted(known)}, got {text!r}")
    try:
        return name, (int(value) if known[name] in (int, "int") else float(value))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ---------------------------------------------------------------------------
# output


class Output:
    """CSV or JSON-lines writer that starts with the config echo.

    The echo is written together with the first output line, so a run that
    fails validation leaves stdout empty.
    """

    def __init__(self, stream, fmt: str, config: dict):
        self.stream = stream
        self.fmt = fmt
        self._csv = csv.writer(stream, lineterminator="\n")
        self._header = None
        self._config = config

    def begin(self) -> None:
        """Write the config echo now (for callers that write to ``stream`` directly)."""
        self._echo()

    def _echo(self) -> None:
        if self._config is None:
            return
        config, self._config = self._config, None
        if self.fmt == "csv":
            self.stream.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        else:
            self.record({"config": config})

    def record(self, obj: dict) -> None:
        self._echo()
        self.stream.write(json.dumps(_jsonable(obj), sort_keys=False) + "\n")

    def header(self, cols) -> None:
        self._echo()
        if self.fmt == "csv":
            self._csv.writerow(cols)
        self._header = list(cols)

    def row(self, values) -> None:
        self._echo()
        values = [_cell(v) for v in values]
        if self.fmt == "csv":
            self._csv.writerow(values)
        else:
            self.record(dict(zip(self._header, values)))

    def note(self, line: str) -> None:
        self._echo()
        self.stream.write("# " + line + "\n")
        self.stream.flush()

    def comment(self, label: str, obj) -> None:
        self._echo()
        if self.fmt == "csv":
            self.stream.write(f"# {label}: " + json.dumps(_jsonable(obj), sort_keys=True) + "\n")
        else:
            self.record({label: obj})


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.17g}")
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return _jsonable(o.item())
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


@contextlib.contextmanager
def _open_output(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


@contextlib.contextmanager
def operation(module: str, op: str, **inputs):
    """Translate library exceptions into exit codes, naming what failed."""
    where = f"{module}.{op}(" + ", ".join(f"{k}={_short(v)}" for k, v in inputs.items()) + ")"
    try:
        yield
    except CliFailure:
        raise
    except (DomainError, fk.BranchError, fk.CoincidenceError, ValueError, KeyError) as exc:
        raise CliFailure(EXIT_VALIDATION, f"invalid input to {where}: {exc}") from exc
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise CliFailure(EXIT_NUMERICAL,
                         f"numerical failure in {where}: {type(exc).__name__}: {exc}") from exc


def _short(v) -> str:
    if isinstance(v, complex):
        return format_complex(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_short(x) for x in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# config echo


def resolved_config(args: argparse.Namespace, tol: Tolerances) -> dict:
    cfg = {"version": __version__, "subcommand": args.command}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "handler", "tolerance", "output"):
            continue
        cfg[k] = _config_value(v)
    cfg["tolerances"] = dict(sorted(tol.as_dict().items()))
    return dict(sorted(cfg.items()))


def _config_value(v):
    if isinstance(v, complex):
        return format_complex(v)
    if isinstance(v, list):
        return [_config_value(x) for x in v]
    return v


def config_to_argv(cfg: dict, parser: argparse.ArgumentParser) -> list[str]:
    """Rebuild a command line from an echoed config dictionary."""
    cmd = cfg["subcommand"]
    sub = _subparsers(parser)[cmd]
    argv = [cmd]
    for action in sub._actions:
        if not action.option_strings or action.dest in ("help", "output"):
            continue
        if action.dest == "tolerance":
            for name, val in cfg.get("tolerances", {}).items():
                if getattr(DEFAULT, name) != val:
                    argv.append(f"--tol={name}={val}")
            continue
        if action.dest not in cfg:
            continue
        val = cfg[action.dest]
        flag = action.option_strings[-1]
        if val is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            if val:
                argv.append(flag)
            continue
        if isinstance(val, list):
            val = ",".join(str(x) for x in val)
        argv.append(f"{flag}={val}")
    return argv


def _subparsers(parser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def read_config_header(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("# config: "):
        return json.loads(first[len("# config: "):])
    try:
        rec = json.loads(first)
    except json.JSONDecodeError:
        rec = None
    if isinstance(rec, dict) and "config" in rec:
        return rec["config"]
    raise CliFailure(EXIT_VALIDATION, f"no config header found in {path}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_eval_kernel(args, tol, out: Output) -> int:
    with operation("finite_kernel", "ModelParams", N=args.N, alpha=args.alpha, sigma_sq=args.sigma_sq):
        params = fk.ModelParams(args.N, args.alpha, args.sigma_sq)
    points = [args.lam] + list(args.points)
    with operation("finite_kernel", "D11", k=len(points), N=args.N, alpha=args.alpha, points=points):
        d11 = fk.D11(len(points), params, points, tol)
    with operation("finite_kernel", "kernel_matrix", N=args.N, alpha=args.alpha, lam=args.lam,
                   points=args.points):
        km = fk.kernel_matrix(params, points, tol)
        raw = km.raw()
    d12 = None
    if args.points:
        with operation("finite_kernel", "D12", k=len(points), N=args.N, alpha=args.alpha,
                       points=points):
            d12 = fk.D12(len(points), params, points, tol)
    out.header(["quantity", "i", "j", "re_z_i", "im_z_i", "re_z_j", "im_z_j", "re_value", "im_value"])
    rest = points[1:]
    for i, zi in enumerate(rest):
        for j, zj in enumerate(rest):
            v = raw[i, j]
            out.row(["K11", i + 2, j + 2, zi.real, zi.imag, zj.real, zj.imag, v.real, v.imag])
    det = km.det_value
    z1 = points[0]
    out.row(["det", "", "", z1.real, z1.imag, "", "", det.real, det.imag])
    out.row(["D11", "", "", z1.real, z1.imag, "", "", d11.real, d11.imag])
    if d12 is not None:
        z2 = points[1]
        out.row(["D12", 1, 2, z1.real, z1.imag, z2.real, z2.imag, d12.real, d12.imag])
    return EXIT_OK


def _regime_point(args) -> lm.RegimePoint:
    return lm.RegimePoint(args.regime, b=args.b, rho=args.rho, p=args.p, theta=args.theta)


def cmd_eval_limit(args, tol, out: Output) -> int:
    with operation("limits", "RegimePoint", regime=args.regime, b=args.b, rho=args.rho, p=args.p):
        rp = _regime_point(args)
    zetas = [args.chi] + list(args.points)
    with operation("limits", "limit_eval", regime=args.regime, points=zetas):
        res = lm.limit_eval(rp, zetas)
        raw = res.kernel_matrix.entries
    out.header(["quantity", "i", "j", "re_zeta_i", "im_zeta_i", "re_zeta_j", "im_zeta_j",
                "re_value", "im_value"])
    c = zetas[0]
    out.row(["psi11", 1, "", c.real, c.imag, "", "", complex(res.psi11).real, complex(res.psi11).imag])
    if res.psi12 is not None:
        z2 = zetas[1]
        p12 = complex(res.psi12)
        out.row(["psi12", 1, 2, c.real, c.imag, z2.real, z2.imag, p12.real, p12.imag])
    rest = zetas[1:]
    for i, zi in enumerate(rest):
        for j, zj in enumerate(rest):
            v = raw[i, j]
            out.row(["K11", i + 2, j + 2, zi.real, zi.imag, zj.real, zj.imag, v.real, v.imag])
    det = res.kernel_matrix.det_value
    out.row(["det", "", "", c.real, c.imag, "", "", det.real, det.imag])
    return EXIT_OK


def cmd_converge(args, tol, out: Output) -> int:
    with operation("limits", "RegimePoint", regime=args.regime, b=args.b, rho=args.rho, p=args.p):
        rp = _regime_point(args)
    with operation("limits", "converge_probe", regime=args.regime, Ns=args.Ns, quantity=args.quantity):
        table = lm.converge_probe(rp, args.Ns, quantity=args.quantity,
                                  workers=mc.resolve_workers(args.workers))
    out.header(["N", "point", "re_finite", "im_finite", "re_limit", "im_limit", "residual"])
    for r in table.rows:
        out.row([r.N, r.point, r.finite.real, r.finite.imag, r.limit.real, r.limit.imag, r.residual])
    out.comment("summary", table.as_dict())
    return EXIT_OK


def cmd_mc_overlap(args, tol, out: Output) -> int:
    with operation("montecarlo", "SamplerConfig", N=args.N, alpha=args.alpha, seed=args.seed,
                   replicas=args.replicas):
        cfg = mc.SamplerConfig(args.N, args.alpha, args.seed, args.replicas, args.sigma_sq,
                               mc.resolve_workers(args.workers))
    with operation("montecarlo", "sample_batch", N=args.N, alpha=args.alpha, seed=args.seed,
                   replicas=args.replicas):
        batch = mc.sample_batch(cfg, tol)
    if args.format == "csv":
        out.begin()
        mc.write_overlap_csv(batch, out.stream)
        return EXIT_OK
    estimates = {}
    with operation("montecarlo", "estimate", lam=args.lam, lam2=args.lam2, h=args.h):
        if args.lam is not None:
            estimates["D11"] = mc.estimate_D11(batch, args.lam, args.h)
            if args.exact:
                estimates["D11_exact"] = mc.Estimate(
                    fk.D11(1, fk.ModelParams(args.N, args.alpha, args.sigma_sq), [args.lam], tol).real,
                    0.0, 0)
        if args.lam is not None and args.lam2 is not None:
            estimates["D12"] = mc.estimate_D12(batch, args.lam, args.lam2, args.h)
            if args.exact:
                estimates["D12_exact"] = mc.Estimate(
                    fk.D12(2, fk.ModelParams(args.N, args.alpha, args.sigma_sq),
                           [args.lam, args.lam2], tol).real, 0.0, 0)
        summary = mc.summarize(batch, tol, **estimates)
    out.begin()
    out.stream.write(summary.to_jsonl() + "\n")
    return EXIT_OK


def cmd_curves(args, tol, out: Output) -> int:
    fig = args.figure
    with operation("limits", "curves", figure=fig):
        if fig in ("F", "L", "E", "2"):
            which = "all" if fig == "2" else fig
            grids = lm.figure2_curves(args.xmin, args.xmax, args.steps, which)
        else:
            which = "all" if fig == "3" else fig
            grids = lm.figure3_surfaces(args.extent, args.grid, args.rho, args.chi, which)
    out.header(lm.CSV_HEADER.split(","))
    for g in grids:
        for row in g.rows():
            out.row(list(row))
    return EXIT_OK


def cmd_selftest(args, tol, out: Output) -> int:
    from .selftest import CRITERIA, run_selftest

    bad = [c for c in args.criteria if c not in CRITERIA]
    if bad:
        raise CliFailure(EXIT_VALIDATION, f"unknown criteria {bad}; choose from {sorted(CRITERIA)}")
    echo = out.note if args.format == "csv" else None
    results = run_selftest(args.criteria or None, tol, mc.resolve_workers(args.workers), echo=echo)
    out.header(["criterion", "name", "passed", "seconds", "measured"])
    for r in results:
        measured = _jsonable(r.measured)
        if args.format == "csv":
            measured = json.dumps(measured, sort_keys=True)
        out.row([r.number, r.name, "PASS" if r.passed else "FAIL", round(r.seconds, 2), measured])
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def cmd_replay(args, parser) -> int:
    cfg = read_config_header(args.file)
    argv = config_to_argv(cfg, parser)
    if args.output:
        argv += ["--output", args.output]
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, formats=("csv", "jsonl"), default="csv") -> None:
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    p.add_argument("--tol", dest="tolerance", action="append", type=parse_tolerance, default=[],
                   metavar="NAME=VALUE", help="override one entry of the tolerance table")


def _add_regime(p: argparse.ArgumentParser) -> None:
    p.add_argument("--regime", required=True, choices=[r.value for r in lm.Regime])
    p.add_argument("--b", type=float, default=0.0, help="alpha / N (bulk, edges) or alpha (singular)")
    p.add_argument("--rho", type=float, default=1.0, help="weak non-unitarity parameter")
    p.add_argument("--p", type=parse_complex, default=0j, help="macroscopic bulk point")
    p.add_argument("--theta", type=float, default=0.0, help="edge direction angle")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iginue", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-kernel", help="finite-N kernel matrix, D11 and D12")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--sigma-sq", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=parse_complex, required=True,
                   help="conditioning eigenvalue z_1")
    p.add_argument("--points", type=parse_complex_list, default=[],
                   help="further points z_2,...,z_k (comma separated)")
    _add_common(p)
    p.set_defaults(handler=cmd_eval_kernel)

    p = sub.add_parser("eval-limit", help="limiting prefactors and kernel matrix")
    _add_regime(p)
    p.add_argument("--chi", type=parse_complex, default=0j, help="local conditioning point")
    p.add_argument("--points", type=parse_complex_list, default=[])
    _add_common(p)
    p.set_defaults(handler=cmd_eval_limit)

    p = sub.add_parser("converge", help="finite-N to limit residual table")
    _add_regime(p)
    p.add_argument("--Ns", type=parse_int_list, default=[50, 100, 200, 400])
    p.add_argument("--quantity", choices=["psi11", "d11", "d12"], default="d11")
    p.add_argument("--workers", type=_positive_int, default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_converge)

    p = sub.add_parser("mc-overlap", help="Monte Carlo overlap sampling")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicas", type=_positive_int, default=1000)
    p.add_argument("--sigma-sq", type=float, default=1.0)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--lambda", dest="lam", type=parse_complex, default=None,
                   help="window centre for the D11 estimate (jsonl summary)")
    p.add_argument("--lambda2", dest="lam2", type=parse_complex, default=None,
                   help="second window centre for the D12 estimate")
    p.add_argument("--h", type=float, default=0.35, help="window half-width")
    p.add_argument("--exact", action="store_true", help="also report the analytic values")
    _add_common(p, default="jsonl")
    p.set_defaults(handler=cmd_mc_overlap)

    p = sub.add_parser("curves", help="figure data: one-variable curves and kernel surfaces")
    p.add_argument("--figure", choices=["F", "L", "E", "2", "bulk", "weak", "3"], required=True)
    p.add_argument("--xmin", type=float, default=-4.0)
    p.add_argument("--xmax", type=float, default=4.0)
    p.add_argument("--steps", type=_positive_int, default=400)
    p.add_argument("--extent", type=float, default=2.0)
    p.add_argument("--grid", type=_positive_int, default=50)
    p.add_argument("--rho", type=float, default=10.0)
    p.add_argument("--chi", type=parse_complex, default=0j)
    _add_common(p)
    p.set_defaults(handler=cmd_curves)

    p = sub.add_parser("selftest", help="run the acceptance battery")
    p.add_argument("--criteria", type=parse_int_list, default=[],
                   help="comma separated criterion numbers (default: all)")
    p.add_argument("--workers", type=_positive_int, default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_selftest)

    p = sub.add_parser("replay", help="re-run the configuration echoed in an output file")
    p.add_argument("file")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(handler=None)
    return parser


COMPLEX_OPTIONS = ("--lambda", "--lambda2", "--points", "--p", "--chi")


def join_negative_values(argv: list[str]) -> list[str]:
    """Attach values such as ``-1-2i`` to their option, which argparse would read as a flag."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in COMPLEX_OPTIONS:
            nxt = next(it, None)
            if nxt is not None and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] in ".ij"):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return cmd_replay(args, parser)
        try:
            tol = DEFAULT.override(**dict(args.tolerance))
        except (KeyError, TypeError) as exc:
            raise CliFailure(EXIT_VALIDATION, str(exc)) from exc
        config = resolved_config(args, tol)
        with _open_output(args.output) as stream:
            out = Output(stream, args.format, config)
            return args.handler(args, tol, out)
    except CliFailure as exc:
        print(f"iginue: {exc}", file=sys.stderr)
        return exc.code


def run() -> None:
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        import os

        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    run()
