"""Weft-knit stitch programs and the Twill sensor variant catalog.

A :class:`KnitProgram` is a list of courses in knitting order. Every course is
knit with a single yarn and lists one action per needle, left to right, with
needle indices starting at zero. Floats are explicit actions so that each
course of a Twill has exactly ``width`` entries.

Text grid format (one line per course)::

    # variant=P_Th
    madeira:KKKKKKKK
    pes:k.k.k.k.
    resistat:K.K.K.Kt

``k``/``K`` are front/back knits, ``t``/``T`` front/back tucks and ``.`` a
float. The float bed is not written; on reading it is taken from the first
non-float action of the course (front when the course has none).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class KnitError(ValueError):
    """Raised for malformed programs, bad dimensions or unknown variants."""


class Kind(enum.Enum):
    KNIT = "knit"
    TUCK = "tuck"
    FLOAT = "float"


class Bed(enum.Enum):
    FRONT = "front"
    BACK = "back"


class Role(enum.Enum):
    SUBSTRATE = "substrate"
    SENSOR = "sensor"
    CONNECTOR = "connector"
    ELASTIC = "elastic"


class Structure(enum.Enum):
    TUBULAR = "T"
    R_TUCKED_TO_P = "P<-R"
    P_TUCKED_TO_R = "P->R"


@dataclass(frozen=True)
class StitchOp:
    kind: Kind
    bed: Bed


KNIT_FRONT = StitchOp(Kind.KNIT, Bed.FRONT)
KNIT_BACK = StitchOp(Kind.KNIT, Bed.BACK)
TUCK_FRONT = StitchOp(Kind.TUCK, Bed.FRONT)
TUCK_BACK = StitchOp(Kind.TUCK, Bed.BACK)
FLOAT_FRONT = StitchOp(Kind.FLOAT, Bed.FRONT)
FLOAT_BACK = StitchOp(Kind.FLOAT, Bed.BACK)


@dataclass(frozen=True)
class YarnSpec:
    """A yarn with its linear resistance in ohm per metre (``inf`` = insulating)."""

    name: str
    role: Role
    linear_resistance: float = math.inf
    ply: int = 1

    def __post_init__(self):
        if self.role in (Role.SENSOR, Role.CONNECTOR) and not (
            0 < self.linear_resistance < math.inf
        ):
            raise KnitError(f"{self.role.value} yarn {self.name!r} needs a finite positive linear resistance")
        if self.linear_resistance <= 0:
            raise KnitError("linear resistance must be positive")

    @property
    def conductive(self) -> bool:
        return math.isfinite(self.linear_resistance)


# Plied yarns from the materials section: 2 x den400 Resistat (~2.5 MOhm/m per
# thread), 2 x Madeira HC40 (<300 Ohm/m), 6 x PES den150.
RESISTAT = YarnSpec("resistat", Role.SENSOR, 2.5e6, ply=2)
MADEIRA = YarnSpec("madeira", Role.CONNECTOR, 300.0, ply=2)
PES = YarnSpec("pes", Role.SUBSTRATE, math.inf, ply=6)
LYCRA = YarnSpec("lycra", Role.ELASTIC, math.inf, ply=1)

DEFAULT_YARNS = {y.name: y for y in (RESISTAT, MADEIRA, PES, LYCRA)}


@dataclass(frozen=True)
class Course:
    yarn: YarnSpec
    actions: tuple[tuple[int, StitchOp], ...]

    def ops(self) -> dict[int, StitchOp]:
        return dict(self.actions)

    def needles(self, kind: Kind | None = None, bed: Bed | None = None) -> list[int]:
        return [
            n
            for n, op in self.actions
            if (kind is None or op.kind is kind) and (bed is None or op.bed is bed)
        ]


@dataclass(frozen=True)
class SensorVariant:
    name: str
    structure: Structure
    pes_threads: int
    lycra_threads: int
    np_pes: float
    np_res: float
    np_tuck: float | None = None
    notes: str = ""


@dataclass(frozen=True)
class KnitProgram:
    courses: tuple[Course, ...]
    width: int
    variant_tag: SensorVariant | None = None

    def __post_init__(self):
        if self.width < 1:
            raise KnitError("program width must be at least 1")
        for ci, course in enumerate(self.courses):
            prev = -1
            for needle, _ in course.actions:
                if not 0 <= needle < self.width:
                    raise KnitError(f"course {ci}: needle {needle} outside width {self.width}")
                if needle <= prev:
                    raise KnitError(f"course {ci}: needle indices must strictly increase")
                prev = needle

    @property
    def height(self) -> int:
        return len(self.courses)

    def courses_of(self, role: Role) -> list[int]:
        return [i for i, c in enumerate(self.courses) if c.yarn.role is role]


_CATALOG = (
    SensorVariant("P_Tl", Structure.TUBULAR, 6, 0, 13.1, 13.5, None, "tubular, low tension for Resistat"),
    SensorVariant("P_Tm", Structure.TUBULAR, 6, 0, 13.1, 12.5, None, "tubular, medium tension for PES/Resistat"),
    SensorVariant("P_Th", Structure.TUBULAR, 6, 0, 13.1, 11.5, None, "tubular, high tension for Resistat"),
    SensorVariant("P_RP", Structure.R_TUCKED_TO_P, 6, 0, 13.1, 12.0, 9.0, "Resistat tucked to PES"),
    SensorVariant("P_PR", Structure.P_TUCKED_TO_R, 6, 0, 13.1, 12.0, 9.0, "PES tucked to Resistat"),
    SensorVariant("PL1_m", Structure.P_TUCKED_TO_R, 5, 1, 12.5, 12.5, 9.0, "1xLycra + medium tension Resistat"),
    SensorVariant("PL1_h", Structure.P_TUCKED_TO_R, 5, 1, 12.5, 11.5, 9.0, "1xLycra + high tension Resistat"),
    SensorVariant("PL1_ml", Structure.P_TUCKED_TO_R, 5, 1, 12.5, 12.5, 9.5,
                  "1xLycra + medium tension Resistat, low tension tuck"),
    SensorVariant("PL2_m+", Structure.P_TUCKED_TO_R, 4, 2, 12.0, 11.8, 9.0,
                  "2xLycra + medium-high tension Resistat"),
    SensorVariant("PL2_hl", Structure.P_TUCKED_TO_R, 4, 2, 12.0, 11.5, 9.5,
                  "2xLycra + high tension Resistat, low tension tuck"),
)

VARIANT_NAMES = tuple(v.name for v in _CATALOG)


def variant_catalog() -> list[SensorVariant]:
    """All ten sensor variants, in the published table order."""
    return list(_CATALOG)


def get_variant(name: str) -> SensorVariant:
    for v in _CATALOG:
        if v.name.lower() == name.lower():
            return v
    raise KnitError(f"unknown sensor variant {name!r}; known: {', '.join(VARIANT_NAMES)}")


def _twill_course(width: int, phase: int, bed: Bed) -> list[StitchOp]:
    knit = StitchOp(Kind.KNIT, bed)
    flt = StitchOp(Kind.FLOAT, bed)
    return [knit if (n + phase) % 2 == 0 else flt for n in range(width)]


def _course(yarn: YarnSpec, ops: Sequence[StitchOp]) -> Course:
    return Course(yarn, tuple(enumerate(ops)))


def build_twill(width: int, height: int, yarn: YarnSpec, bed: Bed = Bed.FRONT) -> KnitProgram:
    """Single-bed Twill: knit/float alternating, phase shifted every other course."""
    if width < 1 or height < 1:
        raise KnitError(f"invalid dimension: width={width}, height={height}")
    courses = tuple(_course(yarn, _twill_course(width, c % 2, bed)) for c in range(height))
    return KnitProgram(courses, width)


def _first_float(ops: list[StitchOp]) -> int | None:
    for n, op in enumerate(ops):
        if op.kind is Kind.FLOAT:
            return n
    return None


def build_variant(
    variant: SensorVariant | str,
    sensor_wales: int,
    sensor_courses: int,
    sensor_yarn: YarnSpec = RESISTAT,
    substrate_yarn: YarnSpec = PES,
    connector_yarn: YarnSpec = MADEIRA,
) -> KnitProgram:
    """Two-face sensor program for one catalog variant.

    Course order: bottom connector, then for each sensor row a front-bed
    substrate course followed by a back-bed sensor course, then the top
    connector. Connector courses knit every needle on the back bed so each
    sensor wale ends on a connector loop.

    Inter-face tucks replace a float so the loop topology of the sensor face is
    the same for every structure:

    * tubular: sensor course tucks to the front bed at needle 0 or ``w-1``
      whenever that outer needle is floated;
    * Resistat tucked to PES: each sensor course tucks to the front bed at its
      first floated needle;
    * PES tucked to Resistat: each substrate course tucks to the back bed at its
      first floated needle.
    """
    if isinstance(variant, str):
        variant = get_variant(variant)
    if sensor_wales < 2 or sensor_courses < 2:
        raise KnitError(f"invalid dimension: sensor_wales={sensor_wales}, sensor_courses={sensor_courses}")
    w = sensor_wales
    courses = [_course(connector_yarn, [KNIT_BACK] * w)]
    for row in range(sensor_courses):
        phase = row % 2
        substrate = _twill_course(w, phase, Bed.FRONT)
        sensor = _twill_course(w, phase, Bed.BACK)
        if variant.structure is Structure.TUBULAR:
            for edge in {0, w - 1}:
                if sensor[edge].kind is Kind.FLOAT:
                    sensor[edge] = TUCK_FRONT
        elif variant.structure is Structure.R_TUCKED_TO_P:
            sensor[_first_float(sensor)] = TUCK_FRONT
        else:
            substrate[_first_float(substrate)] = TUCK_BACK
        courses.append(_course(substrate_yarn, substrate))
        courses.append(_course(sensor_yarn, sensor))
    courses.append(_course(connector_yarn, [KNIT_BACK] * w))
    return KnitProgram(tuple(courses), w, variant)


def uniform_grid(
    wales: int,
    courses: int,
    sensor_yarn: YarnSpec = RESISTAT,
    connector_yarn: YarnSpec = MADEIRA,
) -> KnitProgram:
    """Homogeneous back-bed grid: every needle knits every course.

    The first and last of the ``courses`` rows are connector courses. This is
    the idealised mesh on which resistance is exactly proportional to
    ``courses - 1`` and inversely proportional to ``wales``.
    """
    if wales < 1 or courses < 2:
        raise KnitError(f"invalid dimension: wales={wales}, courses={courses}")
    rows = [_course(connector_yarn, [KNIT_BACK] * wales)]
    rows += [_course(sensor_yarn, [KNIT_BACK] * wales) for _ in range(courses - 2)]
    rows.append(_course(connector_yarn, [KNIT_BACK] * wales))
    return KnitProgram(tuple(rows), wales)


_CHARS = {
    KNIT_FRONT: "k",
    KNIT_BACK: "K",
    TUCK_FRONT: "t",
    TUCK_BACK: "T",
}
_OPS = {c: op for op, c in _CHARS.items()}


def to_grid(program: KnitProgram) -> str:
    lines = []
    if program.variant_tag is not None:
        lines.append(f"# variant={program.variant_tag.name}")
    for course in program.courses:
        row = ["."] * program.width
        for n, op in course.actions:
            row[n] = "." if op.kind is Kind.FLOAT else _CHARS[op]
        lines.append(f"{course.yarn.name}:{''.join(row)}")
    return "\n".join(lines) + "\n"


def from_grid(text: str, yarns: dict[str, YarnSpec] | None = None) -> KnitProgram:
    yarns = DEFAULT_YARNS if yarns is None else yarns
    variant = None
    rows: list[tuple[YarnSpec, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "variant":
                variant = get_variant(value.strip())
            continue
        name, sep, cells = line.partition(":")
        if not sep:
            raise KnitError(f"line {lineno}: expected '<yarn>:<cells>'")
        if name not in yarns:
            raise KnitError(f"line {lineno}: unknown yarn {name!r}")
        bad = set(cells) - set(_OPS) - {"."}
        if bad:
            raise KnitError(f"line {lineno}: unknown stitch characters {sorted(bad)}")
        rows.append((yarns[name], cells))
    if not rows:
        raise KnitError("empty program")
    width = len(rows[0][1])
    courses = []
    for yarn, cells in rows:
        if len(cells) != width:
            raise KnitError("all courses must have the same width")
        bed = next((_OPS[c].bed for c in cells if c != "."), Bed.FRONT)
        ops = [_OPS[c] if c != "." else StitchOp(Kind.FLOAT, bed) for c in cells]
        courses.append(_course(yarn, ops))
    return KnitProgram(tuple(courses), width, variant)


def interface_tucks(program: KnitProgram) -> list[tuple[int, int, StitchOp]]:
    """Tucks that cross to the other face: ``(course, needle, op)``.

    Sensor and connector yarns live on the back bed, substrate on the front, so
    a tuck is inter-face when it lands on the bed opposite its yarn's home bed.
    """
    out = []
    for ci, course in enumerate(program.courses):
        home = Bed.FRONT if course.yarn.role in (Role.SUBSTRATE, Role.ELASTIC) else Bed.BACK
        for n, op in course.actions:
            if op.kind is Kind.TUCK and op.bed is not home:
                out.append((ci, n, op))
    return out


def count_actions(courses: Iterable[Course], kind: Kind) -> int:
    return sum(1 for c in courses for _, op in c.actions if op.kind is kind)
