"""Synthetic tensile-test recordings for the six test protocols.

The actuator moves at the jog rate between rest and the target force. The
resistance follows the pull curve while moving up, the release curve while
moving down, plus saturating exponential relaxation (high dwell) and drift
(low dwell) terms and white noise. Displacement is ``compliance * F`` plus
the permanent elongation accumulated so far; each pull adds
``wearout_per_cycle``.

Phases are snapped to the 25 ms sample grid. A sample lying exactly on a
phase boundary belongs to the earlier phase, so the last rest sample before
a pull still shows the previous state.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .fitting import FitParams, model_eval
from .ingest import DEFAULT_JOG_RATE, DEFAULT_L0_MM, SAMPLE_PERIOD, Meta, Timeline
from .knit import get_variant
from .reference import COURSE_FITS, WALE_FITS

# resistance in ohm per fit response unit
OHM_PER_UNIT = 1000.0
LEAD_IN = 1.0


class ConfigError(ValueError):
    pass


class ProtocolKind(enum.Enum):
    EQUAL_FORCE = "equal_force"
    DWELL = "dwell"
    VARYING_SPEED = "varying_speed"
    INCREASING_FORCE = "increasing_force"
    LONG_TERM = "long_term"
    COURSE_DIRECTIONAL = "course_directional"
    LONG_TERM_REPETITION = "long_term_repetition"


@dataclass(frozen=True)
class Protocol:
    kind: ProtocolKind = ProtocolKind.EQUAL_FORCE
    cycles: int = 5
    target_force: float = 20.0
    force_schedule: tuple[float, ...] = ()
    target_strain: float | None = None
    jog_rate: float = DEFAULT_JOG_RATE
    dwell_time: float = 0.0
    overshoot: float = 0.0
    L0: float = DEFAULT_L0_MM

    def __post_init__(self):
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        if self.jog_rate <= 0 or self.target_force <= 0 or self.L0 <= 0:
            raise ConfigError("jog_rate, target_force and L0 must be positive")
        if self.dwell_time < 0 or self.overshoot < 0:
            raise ConfigError("dwell_time and overshoot must be >= 0")
        if self.kind in (ProtocolKind.DWELL, ProtocolKind.LONG_TERM, ProtocolKind.LONG_TERM_REPETITION):
            if self.dwell_time <= 0:
                raise ConfigError(f"{self.kind.value} protocol needs dwell_time > 0")
        if any(f <= 0 for f in self.force_schedule):
            raise ConfigError("force schedule entries must be positive")

    @classmethod
    def preset(cls, kind: ProtocolKind | str, **overrides) -> "Protocol":
        """Defaults of the published procedures."""
        kind = ProtocolKind(kind)
        base = {
            ProtocolKind.EQUAL_FORCE: {},
            ProtocolKind.DWELL: {"dwell_time": 5.0},
            ProtocolKind.VARYING_SPEED: {},
            ProtocolKind.INCREASING_FORCE: {"force_schedule": tuple(5.0 * i for i in range(1, 9))},
            ProtocolKind.LONG_TERM: {"cycles": 1, "dwell_time": 900.0},
            ProtocolKind.COURSE_DIRECTIONAL: {},
            ProtocolKind.LONG_TERM_REPETITION: {"cycles": 2200, "dwell_time": 3.0, "target_strain": 0.2},
        }[kind]
        base.update(overrides)
        if kind is ProtocolKind.INCREASING_FORCE and "cycles" not in overrides:
            base["cycles"] = len(base["force_schedule"])
        return cls(kind=kind, **base)

    def peak_forces(self, compliance: float) -> list[float]:
        if self.force_schedule:
            sched = list(self.force_schedule)
            peaks = [sched[min(i, len(sched) - 1)] for i in range(self.cycles)]
        elif self.target_strain is not None:
            peaks = [self.target_strain * self.L0 / compliance] * self.cycles
        else:
            peaks = [self.target_force] * self.cycles
        return [f * (1.0 + self.overshoot) for f in peaks]


@dataclass(frozen=True)
class ResponseModel:
    pull: FitParams
    release: FitParams
    noise_sd: float = 0.0
    relaxation_amp: float = 0.0
    relaxation_tau: float = 1.0
    drift_amp: float = 0.0
    drift_tau: float = 1.0
    wearout_per_cycle: float = 0.0
    compliance: float = 0.75

    def __post_init__(self):
        if self.relaxation_tau <= 0 or self.drift_tau <= 0:
            raise ConfigError("time constants must be positive")
        if min(self.noise_sd, self.relaxation_amp, self.drift_amp, self.wearout_per_cycle) < 0:
            raise ConfigError("amplitudes must be non-negative")
        if self.compliance <= 0:
            raise ConfigError("compliance must be positive")


def default_model(variant: str, direction: str = "wale", **overrides) -> ResponseModel:
    """Response model built from the published fit curves.

    P_RP has no published curves (its readings were erratic); it reuses the
    P_PR curves with heavy noise. Course-direction curves exist for P_Th and
    P_PR only; other variants fall back to their wale curves with elevated
    noise.
    """
    name = get_variant(variant).name
    noise = 0.0
    if direction == "course" and name in COURSE_FITS:
        pull, rel = COURSE_FITS[name]
    elif name == "P_RP":
        pull, rel = WALE_FITS["P_PR"]
        noise = 20.0
    else:
        pull, rel = WALE_FITS[name]
        if direction == "course":
            noise = 5.0
    kw = {"pull": pull, "release": rel, "noise_sd": noise, **overrides}
    return ResponseModel(**kw)


def _phase(n: int):
    """Fractions j/n for j = 1..n (the phase start sample belongs to the previous phase)."""
    return np.arange(1, n + 1) / n


def _steps(duration: float) -> int:
    return max(1, int(round(duration / SAMPLE_PERIOD)))


def generate(
    protocol: Protocol,
    model: ResponseModel,
    seed: int = 0,
    variant: str = "",
    direction: str | None = None,
) -> Timeline:
    if protocol.kind is ProtocolKind.COURSE_DIRECTIONAL:
        direction = direction or "course"
    direction = direction or "wale"
    rng = np.random.default_rng(seed)
    c = model.compliance
    wear = 0.0
    F_parts = [np.zeros(_steps(LEAD_IN) + 1)]
    d_parts = [np.zeros_like(F_parts[0])]
    y_parts = [np.full_like(F_parts[0], model_eval(model.pull, 0.0))]

    def add(F, d, y):
        F_parts.append(F)
        d_parts.append(d)
        y_parts.append(y)

    for peak in protocol.peak_forces(c):
        top = wear + model.wearout_per_cycle + c * peak
        n = _steps((top - wear) / protocol.jog_rate)
        f = _phase(n)
        add(peak * f, wear + (top - wear) * f, model_eval(model.pull, peak * f))
        wear += model.wearout_per_cycle
        if protocol.dwell_time > 0:
            n = _steps(protocol.dwell_time)
            age = np.arange(n) * SAMPLE_PERIOD
            relax = 1.0 + model.relaxation_amp * (1.0 - np.exp(-age / model.relaxation_tau))
            add(np.full(n, peak), np.full(n, top), model_eval(model.pull, peak) * relax)
        n = _steps((top - wear) / protocol.jog_rate)
        f = 1.0 - _phase(n)
        add(peak * f, wear + (top - wear) * f, model_eval(model.release, peak * f))
        if protocol.dwell_time > 0:
            n = _steps(protocol.dwell_time)
            age = np.arange(n) * SAMPLE_PERIOD
            drift = 1.0 + model.drift_amp * (1.0 - np.exp(-age / model.drift_tau))
            add(np.zeros(n), np.full(n, wear), model_eval(model.release, 0.0) * drift)
    if protocol.dwell_time == 0:
        n = _steps(LEAD_IN)
        add(np.zeros(n), np.full(n, wear), np.full(n, model_eval(model.release, 0.0)))

    F = np.concatenate(F_parts)
    d = np.concatenate(d_parts)
    y = np.concatenate(y_parts)
    if model.noise_sd > 0:
        y = y + rng.normal(0.0, model.noise_sd, size=len(y))
    R = np.maximum(y, 1e-6) * OHM_PER_UNIT
    t = np.arange(len(F)) * SAMPLE_PERIOD
    meta = Meta(
        L0=protocol.L0,
        jog_rate=protocol.jog_rate,
        variant=variant,
        direction=direction,
        extra=(("protocol", protocol.kind.value), ("seed", str(seed))),
    )
    return Timeline(t, d, F, R, meta)


def regenerate_from_fit(fit: FitParams, F_grid) -> list[tuple[float, float]]:
    F = np.atleast_1d(np.asarray(F_grid, dtype=float))
    return list(zip(F.tolist(), np.atleast_1d(model_eval(fit, F)).tolist()))


# -- key=value config ------------------------------------------------------------

_PROTOCOL_KEYS = {f.name for f in fields(Protocol)} - {"kind"}
_MODEL_KEYS = {f.name for f in fields(ResponseModel)} - {"pull", "release"}


def _fit_from_text(text: str) -> FitParams:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 5:
        raise ConfigError("fit parameters need five values a,s,d,k,o")
    return FitParams(*vals)


def parse_config(text: str) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        out[key.strip()] = value.strip()
    return out


def build_from_config(cfg: dict) -> tuple[Protocol, ResponseModel, dict]:
    """Protocol, response model and run settings (variant, direction, seed)."""
    cfg = dict(cfg)
    kind = cfg.pop("protocol", "equal_force")
    variant = cfg.pop("variant", "P_Th")
    direction = cfg.pop("direction", None)
    seed = int(cfg.pop("seed", 0))
    proto_kw, model_kw = {}, {}
    for key, value in cfg.items():
        if key in _PROTOCOL_KEYS:
            if key == "force_schedule":
                proto_kw[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key == "cycles":
                proto_kw[key] = int(value)
            else:
                proto_kw[key] = float(value)
        elif key in _MODEL_KEYS:
            model_kw[key] = float(value)
        elif key in ("pull", "release"):
            model_kw[key] = _fit_from_text(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        protocol = Protocol.preset(kind, **proto_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    curves = {k: model_kw.pop(k) for k in ("pull", "release") if k in model_kw}
    model = default_model(variant, direction or ("course" if protocol.kind is ProtocolKind.COURSE_DIRECTIONAL else "wale"), **model_kw)
    if curves:
        model = replace(model, **curves)
    return protocol, model, {"variant": get_variant(variant).name, "direction": direction, "seed": seed}
