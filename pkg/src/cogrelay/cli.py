"""Command-line driver: ``cogrelay run`` and ``cogrelay list-presets``."""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .config import (
    METHODS,
    ConfigError,
    RunOptions,
    parse_assignment,
    parse_config,
    parse_sweep_values,
    serialize,
)
from .mcsim import BLOCK, PrimaryConfig, mc_ber, mc_outage, mc_primary_outage
from .perf import (
    MAX_EVALUATIONS,
    MODULATIONS,
    QuadratureError,
    ber_avg,
    ber_floor,
    outage_avg,
    outage_floor,
)
from .scenarios import FigurePreset, SystemConfig, db_to_linear, preset, preset_ids
from .specfun import MeijerGConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND = 0, 2, 3
DEFAULT_FRAMES = 100_000
BACKEND_ERRORS = (QuadratureError, MeijerGConvergenceError, ArithmeticError, RuntimeError)


@dataclass(frozen=True)
class RunSpec:
    preset: FigurePreset
    methods: tuple[str, ...]
    frames: int | None
    seed: int
    out: Path | None = None
    l3_backend: str = "quadrature"
    workers: int | None = None

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method is required", key="methods")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s) {', '.join(bad)}", key="methods")
        if ("mc" in self.methods) != (self.frames is not None):
            raise ConfigError("frames are required exactly when the mc method is selected",
                              key="frames")
        if self.preset.metric == "primary_outage" and self.methods != ("mc",):
            raise ConfigError("primary outage is only available from the mc method",
                              key="methods")


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _sweep_cell(fp: FigurePreset, x: float) -> str:
    if isinstance(getattr(fp.base, fp.sweep_name), int):
        return str(int(x))
    return repr(float(x))


def _columns(fp: FigurePreset, methods) -> list[str]:
    if fp.metric == "primary_outage":
        return ["primary_outage_mc", "primary_outage_mc_stderr"]
    stems = ["outage"] if fp.metric == "outage" else [f"ber_{m.lower()}" for m in fp.modulations]
    cols = []
    for stem in stems:
        for meth in methods:
            cols.append(f"{stem}_{meth}")
            if meth == "mc":
                cols.append(f"{stem}_mc_stderr")
        cols += [f"{stem}_floor_mu", f"{stem}_floor_pa"]
    return cols


def _primary(cfg: SystemConfig) -> PrimaryConfig:
    return PrimaryConfig(P_U=db_to_linear(cfg.P_U_dBW), eta=cfg.eta_pri,
                         target=cfg.primary_outage_target, constraint=cfg.constraint,
                         interference=cfg.interference)


def _point(spec: RunSpec, cfg: SystemConfig, diag: list[str], where: str) -> dict:
    """Every requested cell of one sweep point; failed cells are left out."""
    fp, s = spec.preset, cfg.scenario()
    cells: dict[str, float] = {}

    def attempt(name, fn):
        try:
            return fn()
        except BACKEND_ERRORS as exc:
            diag.append(f"{where} {name}: {type(exc).__name__}: {exc}")
            return None

    if fp.metric == "primary_outage":
        r = attempt("primary_outage_mc", lambda: mc_primary_outage(
            _primary(cfg), s, spec.frames, spec.seed, spec.workers))
        if r is not None:
            cells["primary_outage_mc"] = r.estimate
            cells["primary_outage_mc_stderr"] = r.std_error
        return cells

    if fp.metric == "outage":
        jobs = {"closed": lambda: outage_avg(s),
                "quadrature": lambda: outage_avg(s, "quadrature"),
                "mc": lambda: mc_outage(s, spec.frames, spec.seed, spec.workers)}
        floors = {"floor_mu": lambda: outage_floor(s, "mu_inf"),
                  "floor_pa": lambda: outage_floor(s, "pa_inf")}
        targets = [("outage", jobs, floors)]
    else:
        targets = []
        for name in fp.modulations:
            mc = MODULATIONS[name]
            events: list[str] = []
            jobs = {
                "closed": (lambda mc=mc, ev=events:
                           ber_avg(s, mc, "closed", spec.l3_backend, ev)),
                "quadrature": lambda mc=mc: ber_avg(s, mc, "quadrature"),
                "mc": lambda mc=mc: mc_ber(s, mc, spec.frames, spec.seed, spec.workers),
            }
            floors = {"floor_mu": lambda mc=mc: ber_floor(s, mc, "mu_inf"),
                      "floor_pa": lambda mc=mc: ber_floor(s, mc, "pa_inf")}
            targets.append((f"ber_{name.lower()}", jobs, floors, events))

    for target in targets:
        stem, jobs, floors = target[:3]
        for meth in spec.methods:
            v = attempt(f"{stem}_{meth}", jobs[meth])
            if v is None:
                continue
            if meth == "mc":
                cells[f"{stem}_mc"] = v.estimate
                cells[f"{stem}_mc_stderr"] = v.std_error
            else:
                cells[f"{stem}_{meth}"] = v
        for suffix, fn in floors.items():
            v = attempt(f"{stem}_{suffix}", fn)
            if v is not None:
                cells[f"{stem}_{suffix}"] = v
        if len(target) > 3:
            diag.extend(f"{where} {stem}_closed fallback: {e}" for e in target[3])
    return cells


def _tolerance_lines(rows, methods) -> list[str]:
    """Pairwise agreement between methods at every point."""
    out = []
    for label, cells in rows:
        stems = sorted({c.rsplit("_", 1)[0] for c in cells if c.endswith(("_closed", "_quadrature"))}
                       | {c[:-3] for c in cells if c.endswith("_mc")})
        for stem in stems:
            ref = cells.get(f"{stem}_closed")
            q = cells.get(f"{stem}_quadrature")
            m, se = cells.get(f"{stem}_mc"), cells.get(f"{stem}_mc_stderr")
            parts = []
            if ref is not None and q is not None:
                rel = abs(ref - q) / abs(q) if q else abs(ref - q)
                parts.append(f"closed-vs-quadrature rel={rel:.3e}")
            base = ref if ref is not None else q
            if base is not None and m is not None:
                z = abs(m - base) / se if se else (0.0 if m == base else math.inf)
                parts.append(f"mc |z|={z:.2f}")
            if parts:
                out.append(f"{label} {stem}: " + "; ".join(parts))
    return out


def run(spec: RunSpec, progress=None) -> tuple[int, str, list[str]]:
    """Evaluate the sweep; return ``(exit code, CSV text, tolerance report lines)``."""
    fp = spec.preset
    cols = _columns(fp, spec.methods)
    multi = len(fp.variants) > 1
    header = (["variant"] if multi else []) + [fp.sweep_name] + cols
    diag: list[str] = []
    rows = []
    points = list(fp.points())
    filled = 0
    for i, (variant, x, cfg) in enumerate(points):
        where = f"{variant.label} {fp.sweep_name}={_sweep_cell(fp, x)}"
        if progress:
            progress(f"[{i + 1}/{len(points)}] {where}")
        cells = _point(spec, cfg, diag, where)
        filled += len(cells)
        rows.append((variant.label, x, cells))

    buf = io.StringIO()
    meta = [
        f"cogrelay {__version__}",
        f"preset: {fp.id}: {fp.title}",
        f"metric: {fp.metric}",
        f"methods: {','.join(spec.methods)}",
    ]
    if "mc" in spec.methods:
        meta += [f"seed: {spec.seed}", f"frames: {spec.frames}", f"mc_block: {BLOCK}"]
    meta.append("tolerances: quad_epsabs=1e-12 quad_epsrel=1e-9 "
                f"quad_max_evaluations={MAX_EVALUATIONS} meijer_rtol=1e-10")
    if fp.metric == "ber":
        meta.append(f"l3_backend: {spec.l3_backend}")
    if fp.notes:
        meta.append(f"notes: {fp.notes}")
    meta += [f"config: {line}" for line in serialize(fp).splitlines() if line and not line.startswith("#")]
    meta += [f"diagnostic: {d}" for d in diag]
    for line in meta:
        buf.write(f"# {line}\n")
    buf.write(",".join(header) + "\n")
    for label, x, cells in rows:
        row = ([label] if multi else []) + [_sweep_cell(fp, x)]
        row += [_num(cells.get(c)) for c in cols]
        buf.write(",".join(row) + "\n")

    labels = [(f"{label} {fp.sweep_name}={_sweep_cell(fp, x)}", cells) for label, x, cells in rows]
    report = _tolerance_lines(labels, spec.methods)
    code = EXIT_BACKEND if filled == 0 else EXIT_OK
    return code, buf.getvalue(), report


def _gnuplot(csv_path: Path, fp: FigurePreset, methods) -> str:
    cols = _columns(fp, methods)
    multi = len(fp.variants) > 1
    xcol = 2 if multi else 1
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set xlabel '{fp.sweep_name}'",
        "set logscale y",
        "set format y '10^{%L}'",
        f"set title '{fp.title}'",
    ]
    plots = []
    for i, c in enumerate(cols):
        if c.endswith("_stderr"):
            continue
        col = xcol + 1 + i
        if multi:
            for v in fp.variants:
                plots.append(f"'{csv_path.name}' using {xcol}:(strcol(1) eq '{v.label}' ? "
                             f"${col} : 1/0) with linespoints title '{v.label} {c}'")
        else:
            plots.append(f"'{csv_path.name}' using {xcol}:{col} with linespoints title '{c}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _frames(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v.is_integer() and v > 0):
        raise argparse.ArgumentTypeError("frames must be a positive integer")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cogrelay", description=__doc__)
    ap.add_argument("--version", action="version", version=f"cogrelay {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a preset or config file and write CSV")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named preset id (see list-presets)")
    src.add_argument("--config", type=Path, help="scenario file")
    r.add_argument("--methods", help="comma-separated subset of closed,quadrature,mc")
    r.add_argument("--frames", type=_frames, help="Monte Carlo frames, e.g. 1e6")
    r.add_argument("--seed", type=int, help="Monte Carlo seed (default 0)")
    r.add_argument("--out", type=Path, help="CSV path (default stdout)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a base parameter, e.g. --set 'p_a=15 dB'")
    r.add_argument("--sweep", metavar="VALUES",
                   help="replace the sweep values, e.g. '0, 10, 20 dB'")
    r.add_argument("--variant", action="append", default=[], metavar="LABEL",
                   help="only run the named variant(s)")
    r.add_argument("--l3-backend", choices=("quadrature", "bivariate"), default="quadrature")
    r.add_argument("--workers", type=int, default=None, help="threads for Monte Carlo blocks")
    r.add_argument("--tolerance-report", action="store_true",
                   help="print method agreement per point to stderr")
    r.add_argument("--gnuplot-stub", action="store_true",
                   help="also write a gnuplot script next to the CSV (needs --out)")

    sub.add_parser("list-presets", help="list the named presets")
    d = sub.add_parser("show-config", help="print a preset as a scenario file")
    d.add_argument("preset")
    return ap


def _load(args) -> tuple[FigurePreset, RunOptions]:
    if args.preset is not None:
        try:
            fp = preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), key="preset") from None
        opts = RunOptions()
    else:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        fp, opts = parse_config(text)
    if args.set:
        changes = dict(parse_assignment(a) for a in args.set)
        try:
            fp = replace(fp, base=fp.base.replace(**changes))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    if args.sweep is not None:
        fp = replace(fp, sweep_values=parse_sweep_values(fp.sweep_name, args.sweep))
    if args.variant:
        known = {v.label: v for v in fp.variants}
        missing = [v for v in args.variant if v not in known]
        if missing:
            raise ConfigError(f"unknown variant(s) {', '.join(missing)}; "
                              f"valid: {', '.join(known)}", key="variant")
        fp = replace(fp, variants=tuple(known[v] for v in args.variant))
    try:
        fp.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    return fp, opts


def _cmd_run(args, err) -> int:
    fp, opts = _load(args)
    if args.methods is not None:
        methods = tuple(m.strip().lower() for m in args.methods.split(",") if m.strip())
    else:
        methods = opts.methods or fp.methods
    frames = args.frames if args.frames is not None else opts.frames
    if "mc" in methods and frames is None:
        frames = DEFAULT_FRAMES
        print(f"warning: --frames not given, using {DEFAULT_FRAMES}", file=err)
    if "mc" not in methods and frames is not None:
        print("warning: frames ignored because the mc method is not selected", file=err)
        frames = None
    if "mc" in methods and frames < 1_000_000:
        print("warning: figure-grade Monte Carlo accuracy needs at least 1e6 frames", file=err)
    seed = args.seed if args.seed is not None else (opts.seed if opts.seed is not None else 0)
    if args.gnuplot_stub and args.out is None:
        raise ConfigError("--gnuplot-stub needs --out", key="gnuplot-stub")
    spec = RunSpec(fp, methods, frames, seed, args.out, args.l3_backend, args.workers)

    show = err.isatty() if hasattr(err, "isatty") else False
    progress = (lambda msg: print(f"\r{msg:<70}", end="", file=err, flush=True)) if show else None
    code, text, report = run(spec, progress)
    if show:
        print(file=err)

    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            args.out.write_text(text, encoding="utf-8", newline="\n")
            if args.gnuplot_stub:
                args.out.with_suffix(".gp").write_text(_gnuplot(args.out, fp, methods),
                                                       encoding="utf-8", newline="\n")
        except OSError as exc:
            raise ConfigError(f"cannot write output: {exc}") from None
    if args.tolerance_report:
        for line in report:
            print(line, file=err)
    if code == EXIT_BACKEND:
        print("error: every requested point failed in the numeric backends", file=err)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        if args.command == "list-presets":
            for pid in preset_ids():
                p = preset(pid)
                print(f"{pid:6s}  {p.metric:14s}  sweep {p.sweep_name:8s}  "
                      f"{len(p.variants)} variant(s)  {p.title}")
            return EXIT_OK
        if args.command == "show-config":
            try:
                sys.stdout.write(serialize(preset(args.preset)))
            except KeyError as exc:
                raise ConfigError(str(exc.args[0]), key="preset") from None
            return EXIT_OK
        return _cmd_run(args, err)
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
