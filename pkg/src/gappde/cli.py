"""Command line front end.

    gappde gapprob   --n 2 --endpoints -1,1 --left Jc
    gappde residuals --n 2 --endpoints -0.5,0.7 --select THM8 --check --tol 1e-5
    gappde p4        --n 1 --from 3 --to 0
    gappde oracle    --method direct --n 2 --endpoints 0
    gappde report    a.json b.json --out all.json

Settings can also come from an INI file (``--config``); flags override it.
Recognized sections and keys::

    [run]       n, endpoints (';'-separated list of comma lists), left, engine
    [grid]      m_per_interval, tail_tol, panel_width, pivot_floor
    [jets]      fd_step, richardson_levels
    [registry]  select (comma list of globs), mode, tol
    [oracle]    method, seed, count
    [output]    out, csv

Exit codes: 0 success, 1 usage error, 2 tolerance failure under ``--check``.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .equations import MODES, RegistrySettings, run_registry
from .fredholm import ENGINES, Numerics, gap_probability, log_gap, resolve_engine
from .geometry import GeometryError, make_endpoint_config
from .jets import JetSettings
from .oracles import analytic_n1, direct_tau, sample_gue, thread_count
from .painleve import compare_to_fredholm, integrate_p4, integrate_p4_span
from .report import document, dumps, loads, merge, residual_document, to_csv

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# (section, key, dest, type, default)
_SETTINGS = [
    ("run", "n", "n", int, 2),
    ("run", "endpoints", "endpoints", str, None),
    ("run", "left", "left", str, "J"),
    ("run", "engine", "engine", str, "auto"),
    ("grid", "m_per_interval", "m_per_interval", int, 40),
    ("grid", "tail_tol", "tail_tol", float, 1e-16),
    ("grid", "panel_width", "panel_width", float, 2.0),
    ("grid", "pivot_floor", "pivot_floor", float, 1e-4),
    ("jets", "fd_step", "fd_step", float, 1e-3),
    ("jets", "richardson_levels", "richardson_levels", int, 2),
    ("registry", "select", "select", str, "*"),
    ("registry", "mode", "mode", str, "closure"),
    ("registry", "tol", "tol", float, 1e-4),
    ("oracle", "method", "method", str, "analytic"),
    ("oracle", "seed", "seed", int, 0),
    ("oracle", "count", "count", int, 100_000),
    ("output", "out", "out", str, None),
    ("output", "csv", "csv", str, None),
]


@dataclass
class RunConfig:
    n: int = 2
    configs: list = field(default_factory=list)
    numerics: Numerics = Numerics()
    jets: JetSettings = JetSettings()
    select: tuple = ("*",)
    mode: str = "closure"
    tol: float = 1e-4
    method: str = "analytic"
    seed: int = 0
    count: int = 100_000
    out: str | None = None
    csv: str | None = None

    def validate(self):
        if self.n < 1:
            raise UsageError("--n must be >= 1")
        if self.numerics.m_per_interval < 4:
            raise UsageError("--m-per-interval must be >= 4")
        if not 0 < self.numerics.tail_tol < 1e-3:
            raise UsageError("--tail-tol must lie in (0, 1e-3)")
        if not 1e-8 <= self.jets.fd_step <= 0.1:
            raise UsageError("--fd-step must lie in [1e-8, 0.1]")
        if not 1 <= self.jets.richardson_levels <= 4:
            raise UsageError("--richardson-levels must lie in [1, 4]")
        if self.mode not in MODES:
            raise UsageError(f"--mode must be one of {MODES}")
        if self.count < 1:
            raise UsageError("--count must be >= 1")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")

    def settings_dict(self) -> dict:
        return {
            "n": self.n,
            "configs": [{"endpoints": list(c.endpoints), "left": c.leftmost} for c in self.configs],
            "engine": self.numerics.engine,
            "m_per_interval": self.numerics.m_per_interval,
            "tail_tol": self.numerics.tail_tol,
            "panel_width": self.numerics.panel_width,
            "pivot_floor": self.numerics.pivot_floor,
            "fd_step": self.jets.fd_step,
            "richardson_levels": self.jets.richardson_levels,
            "select": list(self.select),
            "mode": self.mode,
            "tol": self.tol,
        }


def _parse_endpoint_lists(text: str) -> list[list[float]]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            try:
                out.append([float(x) for x in chunk.split(",") if x.strip()])
            except ValueError as exc:
                raise UsageError(f"bad endpoint list {chunk!r}") from exc
    return out


def _common(p: argparse.ArgumentParser, endpoints=True):
    p.add_argument("--config", help="INI settings file")
    p.add_argument("--n", type=int, help="matrix size")
    if endpoints:
        p.add_argument("--endpoints", action="append",
                       help="comma separated increasing endpoints; repeat for a sweep")
        p.add_argument("--left", choices=("J", "Jc"), help="kind of the leftmost segment (default J)")
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--m-per-interval", dest="m_per_interval", type=int)
    p.add_argument("--tail-tol", dest="tail_tol", type=float)
    p.add_argument("--panel-width", dest="panel_width", type=float)
    p.add_argument("--pivot-floor", dest="pivot_floor", type=float)
    p.add_argument("--fd-step", dest="fd_step", type=float)
    p.add_argument("--richardson-levels", dest="richardson_levels", type=int)
    p.add_argument("--out", help="write JSON here")
    p.add_argument("--csv", help="write CSV here")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gappde", description="GUE gap probabilities and PDE residual checks")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gapprob", help="print T = ln det and det")
    _common(g)

    r = sub.add_parser("residuals", help="evaluate the equation registry")
    _common(r)
    r.add_argument("--select", action="append", help="equation glob, e.g. THM8 or 'THM7.*'")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--tol", type=float)
    r.add_argument("--check", action="store_true", help="exit 2 if any residual exceeds --tol")
    r.add_argument("--threads", type=int)

    q = sub.add_parser("p4", help="integrate Painleve IV and compare with determinants")
    _common(q, endpoints=False)
    q.add_argument("--from", dest="xi_from", type=float, required=True)
    q.add_argument("--to", dest="xi_to", type=float, required=True)
    q.add_argument("--samples", type=int, default=25)
    q.add_argument("--span", action="store_true",
                   help="seed at the least amplifying interior point instead of --from")
    q.add_argument("--tol", type=float)
    q.add_argument("--check", action="store_true")

    o = sub.add_parser("oracle", help="independent gap probability")
    _common(o)
    o.add_argument("--method", choices=("analytic", "direct", "mc"))
    o.add_argument("--seed", type=int)
    o.add_argument("--count", type=int)

    m = sub.add_parser("report", help="merge JSON outputs")
    m.add_argument("inputs", nargs="+")
    m.add_argument("--out")
    m.add_argument("--csv")
    return p


def _resolve(args) -> RunConfig:
    values = {dest: default for _, _, dest, _, default in _SETTINGS}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise UsageError(f"cannot read config file {args.config}")
        for section, key, dest, typ, _ in _SETTINGS:
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    values[dest] = typ(raw)
                except ValueError as exc:
                    raise UsageError(f"[{section}] {key}: bad value {raw!r}") from exc
    for _, _, dest, _, _ in _SETTINGS:
        v = getattr(args, dest, None)
        if v is None:
            continue
        if dest == "endpoints":
            v = ";".join(v)
        elif dest == "select":
            v = ",".join(v)
        values[dest] = v

    configs = []
    if values["endpoints"]:
        try:
            configs = [make_endpoint_config(e, values["left"]) for e in _parse_endpoint_lists(values["endpoints"])]
        except GeometryError as exc:
            raise UsageError(str(exc)) from exc
    try:
        numerics = Numerics(values["m_per_interval"], values["tail_tol"], values["panel_width"],
                            values["engine"], values["pivot_floor"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rc = RunConfig(
        n=values["n"], configs=configs, numerics=numerics,
        jets=replace(JetSettings(), fd_step=values["fd_step"], richardson_levels=values["richardson_levels"]),
        select=tuple(s.strip() for s in values["select"].split(",") if s.strip()),
        mode=values["mode"], tol=values["tol"], method=values["method"], seed=values["seed"],
        count=values["count"], out=values["out"], csv=values["csv"],
    )
    rc.validate()
    return rc


def _emit(doc: dict, rc_out, rc_csv, stdout):
    text = dumps(doc) + "\n"
    if rc_out:
        with open(rc_out, "w") as fh:
            fh.write(text)
    if rc_csv:
        with open(rc_csv, "w") as fh:
            fh.write(to_csv(doc))


def _need_configs(rc: RunConfig):
    if not rc.configs:
        raise UsageError("--endpoints is required")


def cmd_gapprob(rc: RunConfig, args, out) -> int:
    _need_configs(rc)
    rows = []
    for c in rc.configs:
        T = log_gap(rc.n, c, rc.numerics)
        engine = resolve_engine(rc.n, c, rc.numerics).engine
        det = math.exp(T)
        print(f"endpoints={','.join(format(x, 'g') for x in c.endpoints)} left={c.leftmost} "
              f"T={T:.15g} det={det:.15g} engine={engine}", file=out)
        rows.append({"config": f"{list(c.endpoints)};left={c.leftmost}", "T": T, "det": det, "engine": engine})
    _emit(document(rows, rc.settings_dict()), rc.out, rc.csv, out)
    return EXIT_OK


def cmd_residuals(rc: RunConfig, args, out) -> int:
    _need_configs(rc)
    settings = RegistrySettings(mode=rc.mode, jet=rc.jets, numerics=rc.numerics, select=rc.select)
    workers = args.threads if args.threads else min(thread_count(), len(rc.configs))
    report = run_registry(rc.n, rc.configs, settings, max_workers=workers)
    doc = residual_document(report, rc.settings_dict())
    _emit(doc, rc.out, rc.csv, out)
    evaluated = report.evaluated()
    worst = max((r.residual for r in evaluated), default=0.0)
    skipped = len(report.rows) - len(evaluated)
    print(f"evaluated={len(evaluated)} skipped={skipped} max_residual={worst:.3e}", file=out)
    bad = report.failures(rc.tol)
    for r in bad:
        print(f"FAIL {r.equation} @ {r.config}: {r.residual:.3e} > {rc.tol:g}", file=out)
    if not rc.out and not rc.csv:
        for r in report.rows:
            tag = f"skipped ({r.reason})" if r.skipped else f"{r.residual:.3e}"
            print(f"  {r.equation:32s} {tag}", file=out)
    return EXIT_CHECK if (args.check and bad) else EXIT_OK


def cmd_p4(rc: RunConfig, args, out) -> int:
    lo, hi = sorted((args.xi_from, args.xi_to))
    if args.span:
        traj = integrate_p4_span(rc.n, lo, hi, samples=args.samples, settings=rc.jets, numerics=rc.numerics)
    else:
        traj = integrate_p4(rc.n, args.xi_from, args.xi_to, samples=args.samples, settings=rc.jets,
                            numerics=rc.numerics)
    dev = compare_to_fredholm(traj, rc.numerics)
    end = int(np.argmin(np.abs(traj.xi - args.xi_to)))
    print(f"n={rc.n} r({traj.xi[end]:g})={traj.r[end]:.12g} max_deviation={dev:.3e} "
          f"max_p4_residual={traj.residuals.max():.3e}"
          + (f" seed={traj.stats['seed']:g}" if "seed" in traj.stats else ""), file=out)
    if traj.failure:
        print(f"integration stopped: {traj.failure}", file=out)
    if rc.csv:
        with open(rc.csv, "w") as fh:
            fh.write(traj.to_csv())
    if rc.out:
        rows = [{"xi": x, "r": r, "rp": rp, "rpp": rpp, "residual": res}
                for (x, r, rp, rpp), res in zip(traj.samples(), traj.residuals)]
        doc = document(rows, {**rc.settings_dict(), "from": args.xi_from, "to": args.xi_to,
                              "max_deviation": dev, "failure": traj.failure})
        with open(rc.out, "w") as fh:
            fh.write(dumps(doc) + "\n")
    tol = args.tol if args.tol is not None else rc.tol
    failed = bool(traj.failure) or dev > tol
    return EXIT_CHECK if (args.check and failed) else EXIT_OK


def cmd_oracle(rc: RunConfig, args, out) -> int:
    _need_configs(rc)
    rows = []
    for c in rc.configs:
        if rc.method == "analytic":
            if rc.n != 1:
                raise UsageError("the analytic oracle needs --n 1")
            res = analytic_n1(c)
        elif rc.method == "direct":
            if rc.n > 3:
                raise UsageError("the direct oracle needs --n <= 3")
            res = direct_tau(rc.n, c)
        else:
            res = sample_gue(rc.n, rc.count, rc.seed, c)
        fred = gap_probability(rc.n, c, rc.numerics)
        print(f"endpoints={','.join(format(x, 'g') for x in c.endpoints)} left={c.leftmost} "
              f"{res.method}={res.value:.15g} +- {res.error_bound:.2e} fredholm={fred:.15g}", file=out)
        rows.append({"config": f"{list(c.endpoints)};left={c.leftmost}", "method": res.method,
                     "value": res.value, "error_bound": res.error_bound, "fredholm": fred,
                     "samples": res.samples, "seed": res.seed})
    settings = {**rc.settings_dict(), "method": rc.method, "seed": rc.seed, "count": rc.count}
    _emit(document(rows, settings), rc.out, rc.csv, out)
    return EXIT_OK


def cmd_report(args, out) -> int:
    docs = []
    for path in args.inputs:
        try:
            with open(path) as fh:
                docs.append(loads(fh.read()))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
    doc = merge(docs)
    if args.out or args.csv:
        _emit(doc, args.out, args.csv, out)
    else:
        out.write(dumps(doc) + "\n")
    print(f"merged {len(docs)} documents, {len(doc['results'])} results", file=sys.stderr)
    return EXIT_OK


def _glue_values(argv):
    """Attach values like ``-0.5,0.7`` to their flag so they are not read as options."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--endpoints", "--from", "--to") and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run_cli(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if args.command == "report":
            return cmd_report(args, out)
        rc = _resolve(args)
        return {"gapprob": cmd_gapprob, "residuals": cmd_residuals, "p4": cmd_p4,
                "oracle": cmd_oracle}[args.command](rc, args, out)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
