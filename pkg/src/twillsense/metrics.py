"""Characterisation metrics: wear-out, conformity, hysteresis, range, settling.

Percent-valued metrics are returned in percent. Values that cannot be
computed are ``nan`` and the reason is added to the report's ``flags``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .fitting import FitInput, FitParams, fit_curve, model_eval
from .ingest import (
    Segment,
    SegmentKind,
    SegmentationError,
    Timeline,
    cycle_count,
    derive,
    drop_first_cycle,
    mean_sd,
    resample,
    segment_cycles,
    standardize,
)

F_RANGE = (0.0, 20.0)
GRID_POINTS = 2000
N_BINS = 100
HYST_NORMS = ("mean", "pull", "release", "r0")


class InsufficientCycles(ValueError):
    pass


# -- wear-out -----------------------------------------------------------------

def _cycle_segments(segments: Sequence[Segment], cycle: int, kind: SegmentKind) -> list[Segment]:
    return [s for s in segments if s.cycle == cycle and s.kind is kind]


def rest_length(tl: Timeline, segments: Sequence[Segment], cycle: int) -> float:
    """Fabric length [mm] at the end of the release of ``cycle``."""
    rel = _cycle_segments(segments, cycle, SegmentKind.RELEASE)
    if not rel:
        raise InsufficientCycles(f"cycle {cycle} has no release segment")
    return float(tl.d[rel[-1].end - 1]) + tl.meta.L0


def relative_extension(tl: Timeline, segments: Sequence[Segment], last: int = 5) -> tuple[float, float]:
    """``(delta_d_05, delta_d_15)`` in percent.

    Lengths are taken where the force has returned to zero: before the first
    pull, and at the end of the releases of cycle 1 and cycle ``last``.
    """
    if cycle_count(segments) < last:
        raise InsufficientCycles(f"need {last} cycles, got {cycle_count(segments)}")
    first_pull = _cycle_segments(segments, 1, SegmentKind.PULL)[0]
    before = float(tl.d[max(first_pull.start - 1, 0)]) + tl.meta.L0
    after1 = rest_length(tl, segments, 1)
    after_n = rest_length(tl, segments, last)
    return 100.0 * (after_n - before) / before, 100.0 * (after_n - after1) / after1


# -- conformity -----------------------------------------------------------------

def conformity_r2(F_series, G_series) -> float:
    """r2 of the standardized conductance against the standardized force."""
    F = np.asarray(F_series, dtype=float)
    G = np.asarray(G_series, dtype=float)
    if F.shape != G.shape or len(F) < 2:
        raise ValueError("series must have equal length >= 2")
    mf, sf = mean_sd(F)
    mg, sg = mean_sd(G)
    if sf == 0 or sg == 0:
        return math.nan
    fh = standardize(F, mf, sf)
    gh = standardize(G, mg, sg)
    return 1.0 - float(np.sum((gh - fh) ** 2)) / float(np.sum(fh**2))


# -- hysteresis -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BinnedDiff:
    centers: np.ndarray
    pull_mean: np.ndarray
    release_mean: np.ndarray
    diff: np.ndarray
    empty: np.ndarray

    def to_csv(self) -> str:
        lines = ["F_center_N,pull_mean,release_mean,abs_diff,empty"]
        for c, p, r, d, e in zip(self.centers, self.pull_mean, self.release_mean, self.diff, self.empty):
            lines.append(f"{c:.6g},{_fmt(p)},{_fmt(r)},{_fmt(d)},{int(e)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class HysteresisResult:
    h: float
    F_h: float
    pull_fit: FitParams
    release_fit: FitParams
    norm: str = "mean"
    binned_diff: BinnedDiff | None = None


def _grid(F_range) -> np.ndarray:
    return np.linspace(F_range[0], F_range[1], GRID_POINTS)


def relative_gap(pull_fit: FitParams, release_fit: FitParams, F_range=F_RANGE, norm: str = "mean"):
    """Grid and ``|pull - release| / reference * 100`` on it.

    ``mean`` divides by the pull/release mean curve, ``pull``/``release`` by
    that curve, ``r0`` by the pull curve at the start of the range.
    """
    if norm not in HYST_NORMS:
        raise ValueError(f"unknown hysteresis normalization {norm!r}")
    x = _grid(F_range)
    yp = model_eval(pull_fit, x)
    yr = model_eval(release_fit, x)
    ref = {
        "mean": 0.5 * (yp + yr),
        "pull": yp,
        "release": yr,
        "r0": np.full_like(x, yp[0]),
    }[norm]
    return x, 100.0 * np.abs(yp - yr) / np.abs(ref)


def hysteresis(
    pull_fit: FitParams,
    release_fit: FitParams,
    F_range=F_RANGE,
    norm: str = "mean",
) -> HysteresisResult:
    x, gap = relative_gap(pull_fit, release_fit, F_range, norm)
    i = int(np.argmax(gap))
    if not gap[i] > 1e-12:
        return HysteresisResult(0.0, float(x[0]), pull_fit, release_fit, norm)
    return HysteresisResult(float(gap[i]), float(x[i]), pull_fit, release_fit, norm)


def binned_diff(pull_points, release_points, F_range=F_RANGE, bins: int = N_BINS) -> BinnedDiff:
    """Per-bin mean response of pull and release samples and their gap.

    ``*_points`` are ``(F, y)`` array pairs. Empty bins hold ``nan`` and are
    marked in ``empty``.
    """
    edges = np.linspace(F_range[0], F_range[1], bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])

    def means(points):
        F, y = (np.asarray(v, dtype=float) for v in points)
        m = (F >= F_range[0]) & (F <= F_range[1])
        idx = np.clip(np.searchsorted(edges, F[m], side="right") - 1, 0, bins - 1)
        total = np.bincount(idx, weights=y[m], minlength=bins)
        count = np.bincount(idx, minlength=bins)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), np.nan), count == 0

    pm, pe = means(pull_points)
    rm, re_ = means(release_points)
    return BinnedDiff(centers, pm, rm, np.abs(pm - rm), pe | re_)


def dynamic_range(pull_fit: FitParams, release_fit: FitParams, F_range=F_RANGE) -> tuple[float, float, float]:
    """``(average, pull, release)`` of ``|y(F0) - y(F1)| / y(F0)`` in percent."""
    vals = []
    for p in (pull_fit, release_fit):
        y0 = model_eval(p, F_range[0])
        y1 = model_eval(p, F_range[1])
        vals.append(math.nan if abs(y0) < 1e-12 else 100.0 * abs(y0 - y1) / abs(y0))
    return 0.5 * (vals[0] + vals[1]), vals[0], vals[1]


# -- offset, relaxation, drift ----------------------------------------------------

def offset_relaxation_drift(tl: Timeline, segments: Sequence[Segment]) -> tuple[float, float, float]:
    """Mean offset, relaxation and drift in percent over cycles 2..n.

    Offset compares the last rest sample before a cycle's pull with the last
    sample of its release. Relaxation (drift) is the relative resistance
    change across each high (low) dwell. Missing dwells give ``nan``.
    """
    if cycle_count(segments) < 2:
        raise InsufficientCycles("need at least two cycles")
    rest = drop_first_cycle(segments)
    R = tl.R
    offsets = []
    for c in sorted({s.cycle for s in rest}):
        pulls = _cycle_segments(rest, c, SegmentKind.PULL)
        rels = _cycle_segments(rest, c, SegmentKind.RELEASE)
        if not pulls or not rels:
            continue
        pre = R[max(pulls[0].start - 1, 0)]
        post = R[rels[-1].end - 1]
        offsets.append((post - pre) / pre)

    def dwell_change(kind):
        vals = [(R[s.end - 1] - R[s.start]) / R[s.start] for s in rest if s.kind is kind and len(s) > 1]
        return 100.0 * float(np.mean(vals)) if vals else math.nan

    offset = 100.0 * float(np.mean(offsets)) if offsets else math.nan
    return offset, dwell_change(SegmentKind.DWELL_HIGH), dwell_change(SegmentKind.DWELL_LOW)


# -- settling ---------------------------------------------------------------------

def rolling_rsd(t, G, window: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """RSD (population SD / mean) of ``G`` over ``[t_i - window, t_i]``.

    Only times with a full window behind them are returned, as
    ``(t_offsets, rsd)`` with offsets relative to ``t[0]``.
    """
    t = np.asarray(t, dtype=float)
    G = np.asarray(G, dtype=float)
    rel = t - t[0]
    tol = 1e-9 * max(window, 1.0)
    full = np.flatnonzero(rel >= window - tol)
    if len(full) == 0:
        return np.empty(0), np.empty(0)
    g = G - G.mean()
    c1 = np.concatenate([[0.0], np.cumsum(g)])
    c2 = np.concatenate([[0.0], np.cumsum(g * g)])
    lo = np.searchsorted(t, t[full] - window - tol, side="left")
    n = full + 1 - lo
    s1 = c1[full + 1] - c1[lo]
    s2 = c2[full + 1] - c2[lo]
    mean_g = s1 / n
    var = np.maximum(s2 / n - mean_g**2, 0.0)
    return rel[full], np.sqrt(var) / np.abs(mean_g + G.mean())


def settling_time(t, G, window: float = 10.0, threshold: float = 0.01) -> float:
    """Earliest offset after which the rolling RSD never exceeds ``threshold``.

    ``nan`` when the RSD is still above threshold at the last sample or the
    dwell is shorter than one window.
    """
    times, rsd = rolling_rsd(t, G, window)
    if len(times) == 0:
        return math.nan
    above = np.flatnonzero(rsd > threshold)
    if len(above) == 0:
        return float(times[0])
    if above[-1] == len(times) - 1:
        return math.nan
    return float(times[above[-1] + 1])


def settling_times(
    tl: Timeline, segments: Sequence[Segment], window: float = 10.0, threshold: float = 0.01
) -> tuple[float, float]:
    """``(T_r, T_d)`` from the first high and low dwell longer than ``window``."""
    G = 1.0 / tl.R
    out = []
    for kind in (SegmentKind.DWELL_HIGH, SegmentKind.DWELL_LOW):
        T = math.nan
        for s in segments:
            if s.kind is kind and tl.t[s.end - 1] - tl.t[s.start] >= window:
                T = settling_time(tl.t[s.start:s.end], G[s.start:s.end], window, threshold)
                break
        out.append(T)
    return out[0], out[1]


# -- actuation speed ----------------------------------------------------------------

def _after_first_cycle(tl: Timeline, motion_eps=0.05, force_eps=0.1) -> Timeline:
    segs = drop_first_cycle(segment_cycles(tl, motion_eps, force_eps))
    moving = [s for s in segs if s.kind in (SegmentKind.PULL, SegmentKind.RELEASE)]
    # trailing rest has a fixed duration, so it would not scale with the jog rate
    start = min(s.start for s in segs)
    end = max(s.end for s in moving) if moving else max(s.end for s in segs)
    return tl.slice(start, end)


def jog_conformity(baseline: Timeline, other: Timeline, *, drop_first: bool = True) -> float:
    """r2 of ``other`` against ``baseline`` on a normalized time axis.

    Both conductance series are resampled to the shorter run's sample count
    and standardized with the baseline's mean and SD.
    """
    if drop_first:
        baseline, other = _after_first_cycle(baseline), _after_first_cycle(other)
    n = min(len(baseline), len(other))
    gb = resample(1.0 / baseline.R, n, baseline.t)
    go = resample(1.0 / other.R, n, other.t)
    mu, sigma = mean_sd(gb)
    if sigma == 0:
        return math.nan
    b = standardize(gb, mu, sigma)
    o = standardize(go, mu, sigma)
    return 1.0 - float(np.sum((o - b) ** 2)) / float(np.sum(b**2))


# -- consistency ------------------------------------------------------------------

@dataclass(frozen=True)
class PatchExtrema:
    dR_min: float
    dR_max: float
    e_min: float
    e_max: float


def patch_extrema(tl: Timeline, segments: Sequence[Segment] | None = None, r0: float | None = None) -> PatchExtrema:
    """Extrema of ``dR/R0`` [%] and strain [%] after the first cycle."""
    segments = segment_cycles(tl) if segments is None else segments
    if cycle_count(segments) >= 2:
        segs = drop_first_cycle(segments)
        start, end = min(s.start for s in segs), max(s.end for s in segs)
    else:
        start, end = 0, len(tl)
    ds = derive(tl, r0)
    dr = 100.0 * ds.dR_rel[start:end]
    e = 100.0 * ds.e[start:end]
    return PatchExtrema(float(dr.min()), float(dr.max()), float(e.min()), float(e.max()))


@dataclass(frozen=True)
class ConsistencyStats:
    n: int
    mean: dict
    sd: dict
    outliers: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()


def consistency(patches: Sequence[PatchExtrema], z: float = 3.0) -> ConsistencyStats:
    """Mean and population SD of each extremum across same-design patches.

    A patch is listed as an outlier for a quantity when it lies more than
    ``z`` SDs from the mean of the *other* patches (leave-one-out, so a single
    wild patch cannot hide by inflating the SD). Nothing is dropped.
    """
    if not patches:
        raise ValueError("no patches")
    keys = [f.name for f in fields(PatchExtrema)]
    mean, sd, outliers = {}, {}, {}
    flags = ()
    for key in keys:
        x = np.array([getattr(p, key) for p in patches], dtype=float)
        mean[key] = float(x.mean())
        sd[key] = float(x.std()) if len(x) >= 2 else math.nan
        hits = []
        if len(x) >= 3:
            for i in range(len(x)):
                rest = np.delete(x, i)
                m, s = rest.mean(), rest.std()
                if abs(x[i] - m) > z * s and abs(x[i] - m) > 0:
                    hits.append(i)
        outliers[key] = tuple(hits)
    if len(patches) < 2:
        flags = ("sd_unavailable",)
    return ConsistencyStats(len(patches), mean, sd, outliers, flags)


# -- report -------------------------------------------------------------------------

REPORT_COLUMNS = (
    "delta_d_05", "delta_d_15", "r2_conformity", "h_R", "F_h", "dynamic_range",
    "offset", "relaxation", "drift", "T_r", "T_d", "jog_half_r2", "jog_double_r2",
)


@dataclass(frozen=True)
class MetricsReport:
    variant: str = ""
    delta_d_05: float = math.nan
    delta_d_15: float = math.nan
    r2_conformity: float = math.nan
    hysteresis: HysteresisResult | None = None
    dynamic_range: float = math.nan
    dynamic_range_pull: float = math.nan
    dynamic_range_release: float = math.nan
    offset: float = math.nan
    relaxation: float = math.nan
    drift: float = math.nan
    T_r: float = math.nan
    T_d: float = math.nan
    jog_half_r2: float = math.nan
    jog_double_r2: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def h_R(self) -> float:
        return self.hysteresis.h if self.hysteresis else math.nan

    @property
    def F_h(self) -> float:
        return self.hysteresis.F_h if self.hysteresis else math.nan

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in REPORT_COLUMNS)

    def csv_row(self) -> str:
        return ",".join([self.variant, *(_fmt(v) for v in self.values()), ";".join(self.flags)])

    def text(self) -> str:
        units = {"F_h": "N", "T_r": "s", "T_d": "s"}
        lines = [f"variant: {self.variant or '?'}"]
        for c, v in zip(REPORT_COLUMNS, self.values()):
            unit = units.get(c, "" if c.startswith(("r2", "jog")) else "%")
            lines.append(f"  {c:<14} {'-' if not math.isfinite(v) else f'{v:.4g}'} {unit}".rstrip())
        if self.flags:
            lines.append("  flags: " + ", ".join(self.flags))
        return "\n".join(lines)


REPORT_HEADER = ",".join(("variant", *REPORT_COLUMNS, "flags"))


def _fmt(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.6g}"


def response(tl: Timeline, r0: float | None = None) -> np.ndarray:
    """Fit response: resistance in percent of ``R0`` (first sample by default)."""
    r0 = float(tl.R[0]) if r0 is None else float(r0)
    return 100.0 * tl.R / r0


def split_points(tl: Timeline, segments: Sequence[Segment], y: np.ndarray):
    """Pull and release ``(F, y)`` samples over the given segments."""
    out = {}
    for kind in (SegmentKind.PULL, SegmentKind.RELEASE):
        idx = np.concatenate([np.arange(s.start, s.end) for s in segments if s.kind is kind] or [np.empty(0, int)])
        out[kind] = (tl.F[idx], y[idx])
    return out[SegmentKind.PULL], out[SegmentKind.RELEASE]


def analyze_run(
    tl: Timeline,
    *,
    r0: float | None = None,
    hyst_norm: str = "mean",
    F_range=F_RANGE,
    motion_eps: float = 0.05,
    force_eps: float = 0.1,
) -> MetricsReport:
    """Every metric computable from a single recording.

    Jog-rate conformity needs several runs and is filled in by the caller.
    """
    flags: list[str] = []
    segments = segment_cycles(tl, motion_eps, force_eps)
    values: dict = {"variant": tl.meta.variant}
    n = cycle_count(segments)
    try:
        values["delta_d_05"], values["delta_d_15"] = relative_extension(tl, segments)
    except InsufficientCycles:
        flags.append("insufficient_cycles_extension")
    values["r2_conformity"] = conformity_r2(tl.F, 1.0 / tl.R)
    if n >= 2:
        rest = drop_first_cycle(segments)
        y = response(tl, r0)
        pull_pts, rel_pts = split_points(tl, rest, y)
        if len(pull_pts[0]) >= 6 and len(rel_pts[0]) >= 6:
            pf = fit_curve(FitInput(*pull_pts, "pull"))
            rf = fit_curve(FitInput(*rel_pts, "release"))
            if not (pf.converged and rf.converged):
                flags.append("fit_not_converged")
            hr = hysteresis(pf, rf, F_range, hyst_norm)
            hr = replace(hr, binned_diff=binned_diff(pull_pts, rel_pts, F_range))
            values["hysteresis"] = hr
            avg, p, r = dynamic_range(pf, rf, F_range)
            values.update(dynamic_range=avg, dynamic_range_pull=p, dynamic_range_release=r)
            if not math.isfinite(avg):
                flags.append("dynamic_range_undefined")
        else:
            flags.append("too_few_fit_points")
        off, relax, drift = offset_relaxation_drift(tl, segments)
        values.update(offset=off, relaxation=relax, drift=drift)
        if not math.isfinite(relax) and not math.isfinite(drift):
            flags.append("no_dwell")
    else:
        flags.append("insufficient_cycles")
    T_r, T_d = settling_times(tl, segments)
    values.update(T_r=T_r, T_d=T_d)
    return MetricsReport(**values, flags=tuple(flags))
