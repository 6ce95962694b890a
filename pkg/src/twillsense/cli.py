"""Command-line front end.

Commands::

    twillsense simulate  --variant P_Th --forces 1:20:1 --out DIR
    twillsense synth     --variant P_Th --protocol dwell --seed 1 --out DIR
    twillsense analyze   --input run1.csv run2.csv --out DIR
    twillsense fit       --input run.csv --range 0:20 --out DIR
    twillsense report    --input DIR/combined.csv

Exit codes: 0 success, 1 hard error (parse or config failure in at least one
input; the batch still finishes), 2 usage error, 3 open circuit.
Settings come from built-in defaults, then ``--config`` (key=value lines),
then explicit flags. ``TWILLSENSE_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import svg
from .fitting import CSV_HEADER, FitInput, fit_curve, fit_row, model_eval
from .ingest import (
    ParseError,
    SegmentKind,
    SegmentationError,
    Timeline,
    drop_first_cycle,
    dump_timeline,
    load_timeline,
    segment_cycles,
)
from .knit import VARIANT_NAMES, KnitError, build_variant, get_variant, uniform_grid
from .metrics import (
    F_RANGE,
    HYST_NORMS,
    REPORT_COLUMNS,
    REPORT_HEADER,
    MetricsReport,
    _fmt,
    analyze_run,
    jog_conformity,
    response,
    split_points,
)
from .network import ContactParams, LoadState, sweep_force, write_sweep_csv
from .reference import TABLE2, TABLE2_COLUMNS
from .synth import ConfigError, ProtocolKind, build_from_config, generate, parse_config

log = logging.getLogger("twillsense")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_OPEN = 0, 1, 2, 3

# jog rates of the varying-speed runs relative to the 1.333 mm/s baseline
HALF_JOG, DOUBLE_JOG = 0.667, 2.667
JOG_TOL = 0.05


class UsageError(Exception):
    pass


# -- argument helpers --------------------------------------------------------------

def parse_range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise UsageError(f"range must be lo:hi, got {text!r}")
    lo_f, hi_f = float(lo), float(hi)
    if not hi_f > lo_f:
        raise UsageError(f"empty range {text!r}")
    return lo_f, hi_f


def parse_forces(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise UsageError(f"forces must be start:stop:step, got {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_r0(text: str | None) -> float | None:
    if text is None or text == "first-sample":
        return None
    kind, sep, value = text.partition(":")
    if kind != "explicit" or not sep:
        raise UsageError(f"--r0 must be first-sample or explicit:<ohm>, got {text!r}")
    r0 = float(value)
    if not r0 > 0:
        raise UsageError("explicit R0 must be positive")
    return r0


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _setting(args, cfg: dict, name: str, default=None):
    """Explicit flag beats config beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- simulate ----------------------------------------------------------------------

_CONTACT_KEYS = ("rho", "hardness", "spot_count", "open_threshold")


def cmd_simulate(args, cfg: dict) -> int:
    variant = get_variant(_setting(args, cfg, "variant", "P_Th"))
    layout = cfg.get("layout", "uniform")
    wales = int(cfg.get("wales", 8))
    courses = int(cfg.get("courses", 10))
    if layout == "uniform":
        program = replace(uniform_grid(wales, courses), variant_tag=variant)
    elif layout == "variant":
        program = build_variant(variant, wales, courses)
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    contact_kw = {k: float(cfg[k]) for k in _CONTACT_KEYS if k in cfg}
    if "spot_count" in contact_kw:
        contact_kw["spot_count"] = int(contact_kw["spot_count"])
    contact = ContactParams(**contact_kw)
    load = LoadState(
        0.0,
        distribution=cfg.get("distribution", "local"),
        contact_area=float(cfg.get("contact_area", 1e-6)),
    )
    forces = parse_forces(_setting(args, cfg, "forces", "1:20:1"))
    compile_kw = {}
    if "segment_length" in cfg:
        compile_kw["segment_length"] = float(cfg["segment_length"])
    if "ideal_buses" in cfg:
        compile_kw["ideal_buses"] = cfg["ideal_buses"].lower() in ("1", "true", "yes")
    rows = sweep_force(program, contact, forces, load, **compile_kw)
    out = Path(args.out)
    _write(out / "sweep.csv", write_sweep_csv(rows))
    F = np.array([f for f, _ in rows])
    R = np.array([r for _, r in rows])
    _write(
        out / "sweep.svg",
        svg.line_chart([svg.Series("R", F, R)], f"{variant.name} effective resistance", "F [N]", "R [ohm]"),
    )
    open_at = [f for f, r in rows if not math.isfinite(r)]
    if open_at:
        print(f"error: open circuit at F = {', '.join(f'{f:g}' for f in open_at)} N", file=sys.stderr)
        return EXIT_OPEN
    return EXIT_OK


# -- synth -------------------------------------------------------------------------

def cmd_synth(args, cfg: dict) -> int:
    cfg = dict(cfg)
    for name in ("variant", "protocol", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = str(value)
    protocol, model, run = build_from_config(cfg)
    tl = generate(protocol, model, seed=run["seed"], variant=run["variant"], direction=run["direction"])
    name = f"{run['variant']}_{protocol.kind.value}_s{run['seed']}.csv"
    _write(Path(args.out) / name, dump_timeline(tl))
    print(name)
    return EXIT_OK


# -- analyze -----------------------------------------------------------------------

def _read_runs(paths) -> tuple[list[tuple[Path, Timeline]], int]:
    runs, failures = [], 0
    for p in paths:
        path = Path(p)
        try:
            with open(path, encoding="utf-8") as fh:
                runs.append((path, load_timeline(fh)))
        except (OSError, ParseError, ValueError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
    return runs, failures


def _plots(out: Path, stem: str, tl: Timeline, report: MetricsReport, r0: float | None, F_range) -> None:
    G = 1.0 / tl.R
    G_scaled = G / G.max() * max(float(tl.F.max()), 1e-12)
    _write(
        out / f"{stem}_timeline.svg",
        svg.line_chart(
            [svg.Series("F [N]", tl.t, tl.F), svg.Series("G (scaled)", tl.t, G_scaled)],
            f"{stem} timeline", "t [s]", "F, G",
        ),
    )
    hr = report.hysteresis
    if hr is None:
        return
    y = response(tl, r0)
    (Fp, yp), (Fr, yr) = split_points(tl, drop_first_cycle(segment_cycles(tl)), y)
    grid = np.linspace(F_range[0], F_range[1], 200)
    _write(
        out / f"{stem}_characteristics.svg",
        svg.line_chart(
            [
                svg.Series("pull", Fp, yp),
                svg.Series("release", Fr, yr),
                svg.Series("pull fit", grid, model_eval(hr.pull_fit, grid), dashed=True),
                svg.Series("release fit", grid, model_eval(hr.release_fit, grid), dashed=True),
            ],
            f"{stem} characteristics", "F [N]", "R/R0 [%]",
        ),
    )
    bd = hr.binned_diff
    if bd is not None:
        _write(out / f"{stem}_binned_diff.csv", bd.to_csv())
        _write(
            out / f"{stem}_binned_diff.svg",
            svg.line_chart([svg.Series("|pull - release|", bd.centers, bd.diff)], f"{stem} binned diff", "F [N]", "diff"),
        )


def _close(value: float, target: float) -> bool:
    return abs(value - target) <= JOG_TOL


# protocols whose runs are meant to measure a column, best first
COLUMN_SOURCES = {
    "offset": ("dwell", "long_term"),
    "relaxation": ("dwell", "long_term"),
    "drift": ("dwell", "long_term"),
    "T_r": ("long_term", "dwell"),
    "T_d": ("long_term", "dwell"),
}


def merge_variant(runs: list[tuple[str, Timeline, MetricsReport]]) -> dict:
    """Combine the runs of one variant into a single table row.

    Each column comes from the first run with a finite value, trying the
    protocols in ``COLUMN_SOURCES`` first and then protocol order. Jog conformity pairs the baseline
    equal-force or varying-speed run with runs at half and double jog rate.
    """
    order = [k.value for k in ProtocolKind]

    def rank(item, preferred=()):
        proto = item[1].meta.get("protocol", "")
        base = order.index(proto) if proto in order else len(order)
        return (preferred.index(proto) if proto in preferred else len(preferred), base)

    row = {c: math.nan for c in REPORT_COLUMNS}
    flags: list[str] = []
    for c in REPORT_COLUMNS:
        for _, _, rep in sorted(runs, key=lambda item: rank(item, COLUMN_SOURCES.get(c, ()))):
            v = getattr(rep, c)
            if math.isfinite(v):
                row[c] = v
                break
    runs = sorted(runs, key=rank)
    for _, _, rep in runs:
        flags += [f for f in rep.flags if f not in flags]

    base = [tl for _, tl, _ in runs if _close(tl.meta.jog_rate, 1.333)]
    if base:
        for col, rate in (("jog_half_r2", HALF_JOG), ("jog_double_r2", DOUBLE_JOG)):
            other = [tl for _, tl, _ in runs if _close(tl.meta.jog_rate, rate)]
            if other and not math.isfinite(row[col]):
                try:
                    row[col] = jog_conformity(base[0], other[0])
                except (SegmentationError, ValueError) as exc:
                    log.warning("jog conformity failed: %s", exc)
                    flags.append("jog_conformity_failed")
    row["flags"] = ";".join(flags)
    return row


def _variant_key(name: str) -> tuple[int, str]:
    try:
        return VARIANT_NAMES.index(get_variant(name).name), name
    except KnitError:
        return len(VARIANT_NAMES), name


def combined_table(grouped: dict[str, list]) -> str:
    lines = [REPORT_HEADER]
    for variant in sorted(grouped, key=_variant_key):
        row = merge_variant(grouped[variant])
        lines.append(",".join([variant, *(_fmt(row[c]) for c in REPORT_COLUMNS), row["flags"]]))
    return "\n".join(lines) + "\n"


def cmd_analyze(args, cfg: dict) -> int:
    if not args.input:
        raise UsageError("analyze needs at least one --input file")
    norm = _setting(args, cfg, "hyst_norm", "mean")
    if norm not in HYST_NORMS:
        raise UsageError(f"unknown hysteresis normalization {norm!r}")
    r0 = parse_r0(_setting(args, cfg, "r0", "first-sample"))
    F_range = parse_range(_setting(args, cfg, "range", None)) if _setting(args, cfg, "range") else F_RANGE
    out = Path(args.out)
    runs, failures = _read_runs(args.input)
    grouped: dict[str, list] = {}
    for path, tl in runs:
        try:
            rep = analyze_run(tl, r0=r0, hyst_norm=norm, F_range=F_range)
        except (SegmentationError, ValueError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        variant = tl.meta.variant or path.stem
        rep = replace(rep, variant=variant)
        _write(out / f"{path.stem}_report.csv", REPORT_HEADER + "\n" + rep.csv_row() + "\n")
        _plots(out, path.stem, tl, rep, r0, F_range)
        log.info("%s\n%s", path, rep.text())
        grouped.setdefault(variant, []).append((path.stem, tl, rep))
    if grouped:
        _write(out / "combined.csv", combined_table(grouped))
    return EXIT_ERROR if failures else EXIT_OK


# -- fit -------------------------------------------------------------------------

def _points_file(text: str) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """``segment,F_N,y`` rows (one or more segments) into per-segment arrays."""
    groups: dict[str, list[tuple[float, float]]] = {}
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 3:
            raise ParseError("expected segment,F_N,y", lineno)
        try:
            groups.setdefault(cells[0], []).append((float(cells[1]), float(cells[2])))
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno) from None
    return [(seg, np.array([p[0] for p in pts]), np.array([p[1] for p in pts])) for seg, pts in groups.items()]


def _fit_inputs(path: Path, r0: float | None) -> tuple[str, list[tuple[str, np.ndarray, np.ndarray]]]:
    text = path.read_text(encoding="utf-8")
    first = next((ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")), "")
    if first.replace(" ", "") == "segment,F_N,y":
        variant = ""
        for ln in text.splitlines():
            if ln.startswith("#") and "variant=" in ln:
                variant = ln.split("variant=", 1)[1].strip()
        return variant or path.stem, _points_file(text)
    tl = load_timeline(text)
    segs = segment_cycles(tl)
    if sum(s.kind is SegmentKind.PULL for s in segs) >= 2:
        segs = drop_first_cycle(segs)
    (Fp, yp), (Fr, yr) = split_points(tl, segs, response(tl, r0))
    return tl.meta.variant or path.stem, [("pull", Fp, yp), ("release", Fr, yr)]


def cmd_fit(args, cfg: dict) -> int:
    if not args.input:
        raise UsageError("fit needs at least one --input file")
    F_range = parse_range(_setting(args, cfg, "range")) if _setting(args, cfg, "range") else None
    r0 = parse_r0(_setting(args, cfg, "r0", "first-sample"))
    lines = [CSV_HEADER]
    failures = 0
    for p in args.input:
        path = Path(p)
        try:
            variant, groups = _fit_inputs(path, r0)
        except (OSError, ParseError, ValueError, SegmentationError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        for segment, F, y in groups:
            try:
                params = fit_curve(FitInput(F, y, segment), F_range)
            except ValueError as exc:
                print(f"error: {path} {segment}: {exc}", file=sys.stderr)
                failures += 1
                continue
            if not params.converged:
                lines.append(f"# not converged: {variant} {segment}")
                print(f"warning: {path} {segment}: fit did not converge", file=sys.stderr)
            lines.append(fit_row(variant, segment, params))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(Path(args.out) / "fits.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_ERROR if failures else EXIT_OK


# -- report ------------------------------------------------------------------------

_REF_COLUMNS = dict(zip(REPORT_COLUMNS, TABLE2_COLUMNS))


def _report_rows(path: Path) -> list[dict]:
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or lines[0] != REPORT_HEADER:
        raise ParseError(f"expected header {REPORT_HEADER}", 1)
    names = REPORT_HEADER.split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(names):
            raise ParseError(f"expected {len(names)} fields, got {len(cells)}", lineno)
        rows.append(dict(zip(names, cells)))
    return rows


def cmd_report(args, cfg: dict) -> int:
    """Text rendering of report CSVs, with published values alongside."""
    if not args.input:
        raise UsageError("report needs at least one --input file")
    rows, failures = [], 0
    for p in args.input:
        try:
            rows += _report_rows(Path(p))
        except (OSError, ParseError) as exc:
            print(f"error: {p}: {exc}", file=sys.stderr)
            failures += 1
    rows.sort(key=lambda r: _variant_key(r["variant"]))
    blocks = []
    for r in rows:
        ref = TABLE2.get(r["variant"])
        lines = [f"variant: {r['variant']}"]
        for c in REPORT_COLUMNS:
            value = r[c] or "-"
            line = f"  {c:<14} {value:>10}"
            if ref is not None:
                published = ref[TABLE2_COLUMNS.index(_REF_COLUMNS[c])]
                line += f"   published {'-' if math.isnan(published) else f'{published:g}'}"
            lines.append(line)
        if r["flags"]:
            lines.append(f"  flags: {r['flags'].replace(';', ', ')}")
        blocks.append("\n".join(lines))
    text = "\n\n".join(blocks) + "\n"
    if args.out:
        _write(Path(args.out) / "report.txt", text)
    else:
        sys.stdout.write(text)
    return EXIT_ERROR if failures else EXIT_OK


# -- entry point -------------------------------------------------------------------

COMMANDS = {
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twillsense", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out", required=out_required, help="output directory")
        return p

    p = common(sub.add_parser("simulate", help="force sweep of a knit resistor network"))
    p.add_argument("--variant")
    p.add_argument("--forces", help="start:stop:step or comma list [N]")

    p = common(sub.add_parser("synth", help="write a synthetic tensile-test recording"))
    p.add_argument("--variant")
    p.add_argument("--protocol", choices=[k.value for k in ProtocolKind])
    p.add_argument("--seed", type=int)

    for name, helptext in (("analyze", "metrics for recordings"), ("fit", "fit pull and release curves")):
        p = common(sub.add_parser(name, help=helptext), out_required=(name == "analyze"))
        p.add_argument("--input", nargs="*", default=[], help="recording CSV files")
        p.add_argument("--range", help="force range lo:hi [N]")
        p.add_argument("--r0", help="first-sample or explicit:<ohm>")
        if name == "analyze":
            p.add_argument("--hyst-norm", dest="hyst_norm", choices=HYST_NORMS)

    p = common(sub.add_parser("report", help="render report CSVs as text"), out_required=False)
    p.add_argument("--input", nargs="*", default=[])
    return ap


def main(argv=None) -> int:
    level = os.environ.get("TWILLSENSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"twillsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, KnitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
