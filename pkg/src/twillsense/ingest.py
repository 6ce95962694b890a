"""Tensile-test recordings: CSV I/O, cycle segmentation and series helpers.

Recording format (UTF-8, LF line endings)::

    # L0_mm=50
    # jog_rate_mm_s=1.333
    # variant=P_Th
    # direction=wale
    t_s,d_mm,F_N,R_ohm
    0.0,0.0,0.0,170700.0
    ...

Metadata lines come before the header. Unknown keys are kept in
``Meta.extra`` and written back out.
"""
from __future__ import annotations

import enum
import io
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence, TextIO

import numpy as np

log = logging.getLogger(__name__)

HEADER = ("t_s", "d_mm", "F_N", "R_ohm")
DEFAULT_L0_MM = 50.0
DEFAULT_JOG_RATE = 1.333
SAMPLE_PERIOD = 0.025


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SegmentationError(ValueError):
    pass


class SegmentKind(enum.Enum):
    PULL = "pull"
    RELEASE = "release"
    DWELL_HIGH = "dwell_high"
    DWELL_LOW = "dwell_low"


@dataclass(frozen=True)
class Meta:
    L0: float = DEFAULT_L0_MM
    jog_rate: float = DEFAULT_JOG_RATE
    variant: str = ""
    direction: str = "wale"
    extra: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default: str | None = None) -> str | None:
        return dict(self.extra).get(key, default)


@dataclass(frozen=True, eq=False)
class Timeline:
    """Samples of time [s], displacement [mm], force [N] and resistance [ohm]."""

    t: np.ndarray
    d: np.ndarray
    F: np.ndarray
    R: np.ndarray
    meta: Meta = field(default_factory=Meta)

    def __post_init__(self):
        arrays = [np.asarray(x, dtype=float) for x in (self.t, self.d, self.F, self.R)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("t, d, F, R must be 1-d arrays of equal length")
        for name, a in zip("tdFR", arrays):
            object.__setattr__(self, name, a)
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time must be strictly increasing")
        if np.any(self.R <= 0):
            raise ValueError("resistance must be positive")
        if self.meta.L0 <= 0:
            raise ValueError("L0 must be positive")

    def __len__(self) -> int:
        return len(self.t)

    def slice(self, start: int, stop: int) -> "Timeline":
        return Timeline(self.t[start:stop], self.d[start:stop], self.F[start:stop], self.R[start:stop], self.meta)

    def with_time(self, t: np.ndarray) -> "Timeline":
        return Timeline(t, self.d, self.F, self.R, self.meta)


@dataclass(frozen=True)
class DerivedSeries:
    e: np.ndarray
    G: np.ndarray
    dR_rel: np.ndarray


def derive(tl: Timeline, r0: float | None = None) -> DerivedSeries:
    """Strain ``d/L0``, conductance ``1/R`` and ``(R - R0)/R0``.

    ``r0`` defaults to the first sample of the run.
    """
    r0 = float(tl.R[0]) if r0 is None else float(r0)
    return DerivedSeries(tl.d / tl.meta.L0, 1.0 / tl.R, (tl.R - r0) / r0)


_META_KEYS = {"L0_mm": "L0", "jog_rate_mm_s": "jog_rate", "variant": "variant", "direction": "direction"}


def load_timeline(source: TextIO | bytes | str) -> Timeline:
    """Parse a recording. ``str`` is treated as file content, not a path."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    meta: dict = {}
    extra: list[tuple[str, str]] = []
    rows: list[tuple[float, float, float, float]] = []
    header_seen = False
    last_t = -math.inf
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                continue
            key, value = key.strip(), value.strip()
            if key in _META_KEYS:
                attr = _META_KEYS[key]
                if attr in ("L0", "jog_rate"):
                    try:
                        meta[attr] = float(value)
                    except ValueError:
                        raise ParseError(f"non-numeric metadata {key}={value!r}", lineno) from None
                else:
                    meta[attr] = value
            else:
                extra.append((key, value))
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if tuple(cells) != HEADER:
                missing = [h for h in HEADER if h not in cells]
                raise ParseError(f"expected header {','.join(HEADER)}; missing {missing or cells}", lineno)
            header_seen = True
            continue
        if len(cells) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, got {len(cells)}", lineno)
        try:
            values = tuple(float(c) for c in cells)
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", lineno)
        if values[0] <= last_t:
            raise ParseError(f"time not increasing ({values[0]} after {last_t})", lineno)
        if values[3] <= 0:
            raise ParseError("resistance must be positive", lineno)
        last_t = values[0]
        rows.append(values)
    if not header_seen:
        raise ParseError("missing header")
    data = np.array(rows, dtype=float).reshape(-1, 4)
    m = Meta(**meta, extra=tuple(extra))
    if m.L0 <= 0:
        raise ParseError("L0 must be positive")
    return Timeline(data[:, 0], data[:, 1], data[:, 2], data[:, 3], m)


def dump_timeline(tl: Timeline) -> str:
    m = tl.meta
    lines = [
        f"# L0_mm={m.L0!r}",
        f"# jog_rate_mm_s={m.jog_rate!r}",
        f"# variant={m.variant}",
        f"# direction={m.direction}",
    ]
    lines += [f"# {k}={v}" for k, v in m.extra]
    lines.append(",".join(HEADER))
    for row in zip(tl.t, tl.d, tl.F, tl.R):
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    start: int
    end: int  # exclusive
    cycle: int

    def __len__(self) -> int:
        return self.end - self.start


def segment_cycles(tl: Timeline, motion_eps: float = 0.05, force_eps: float = 0.1) -> list[Segment]:
    """Split a run into pull, release and dwell segments.

    Motion is judged on displacement: sample ``i`` moves if
    ``|d[i] - d[i-1]| / dt > motion_eps`` (backward difference, so a reversal
    peak belongs to the segment that reached it). Moving spans are pull or
    release by the sign of their force change, falling back to displacement
    when the force change is below ``force_eps``. A stationary span after a
    pull is a high dwell, any other stationary span a low dwell; a stationary
    span whose force is below ``force_eps`` is always low.
    """
    n = len(tl)
    if n == 0:
        raise SegmentationError("empty timeline")
    if n == 1:
        return [Segment(SegmentKind.DWELL_LOW, 0, 1, 1)]
    v = np.diff(tl.d) / np.diff(tl.t)
    sign = np.where(v > motion_eps, 1, np.where(v < -motion_eps, -1, 0))
    sign = np.concatenate([[sign[0]], sign])
    if not np.any(sign):
        warnings.warn("no motion detected; whole run is one low dwell", stacklevel=2)
        return [Segment(SegmentKind.DWELL_LOW, 0, n, 1)]

    bounds = np.flatnonzero(np.diff(sign)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [n]])
    segments: list[Segment] = []
    cycle = 0
    prev_kind: SegmentKind | None = None
    for s, e in zip(starts, ends):
        direction = sign[s]
        if direction != 0:
            lo = max(s - 1, 0)
            dF = tl.F[e - 1] - tl.F[lo]
            rising = dF > 0 if abs(dF) >= force_eps else direction > 0
            kind = SegmentKind.PULL if rising else SegmentKind.RELEASE
            if kind is SegmentKind.PULL:
                cycle += 1
        else:
            high = prev_kind is SegmentKind.PULL and np.mean(tl.F[s:e]) > force_eps
            kind = SegmentKind.DWELL_HIGH if high else SegmentKind.DWELL_LOW
        segments.append(Segment(kind, int(s), int(e), max(cycle, 1)))
        prev_kind = kind
    return segments


def cycle_count(segments: Sequence[Segment]) -> int:
    return sum(1 for s in segments if s.kind is SegmentKind.PULL)


def drop_first_cycle(segments: Sequence[Segment]) -> list[Segment]:
    cycles = sorted({s.cycle for s in segments})
    if len(cycles) < 2:
        raise SegmentationError("need at least two cycles to drop the first one")
    first = cycles[0]
    return [s for s in segments if s.cycle != first]


def standardize(series, mu: float, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("degenerate series: sigma must be positive")
    return (np.asarray(series, dtype=float) - mu) / sigma


def unstandardize(series, mu: float, sigma: float) -> np.ndarray:
    return np.asarray(series, dtype=float) * sigma + mu


def mean_sd(series) -> tuple[float, float]:
    """Mean and population standard deviation."""
    x = np.asarray(series, dtype=float)
    return float(x.mean()), float(x.std())


def resample(series, target_count: int, t=None) -> np.ndarray:
    """Linear interpolation onto ``target_count`` points of a [0, 1] axis.

    ``t`` gives the sample times; when omitted samples are taken as equally
    spaced. Endpoints are preserved.
    """
    y = np.asarray(series, dtype=float)
    if len(y) < 2 or target_count < 2:
        raise ValueError("resample needs at least two input and two output points")
    if t is None:
        x = np.linspace(0.0, 1.0, len(y))
    else:
        t = np.asarray(t, dtype=float)
        x = (t - t[0]) / (t[-1] - t[0])
    out = np.interp(np.linspace(0.0, 1.0, target_count), x, y)
    out[0], out[-1] = y[0], y[-1]
    return out


def span(segments: Sequence[Segment]) -> tuple[int, int]:
    return min(s.start for s in segments), max(s.end for s in segments)
