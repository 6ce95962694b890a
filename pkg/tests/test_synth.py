import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twillsense.fitting import FitParams, model_eval
from twillsense.ingest import SegmentKind, cycle_count, dump_timeline, load_timeline, segment_cycles
from twillsense.knit import VARIANT_NAMES
from twillsense.metrics import analyze_run, hysteresis, offset_relaxation_drift, relative_extension
from twillsense.reference import WALE_FITS
from twillsense.synth import (
    OHM_PER_UNIT,
    ConfigError,
    Protocol,
    ProtocolKind,
    ResponseModel,
    build_from_config,
    default_model,
    generate,
    parse_config,
    regenerate_from_fit,
)


def test_equal_force_segments_round_trip():
    tl = generate(Protocol.preset("equal_force"), default_model("P_Th"))
    segs = segment_cycles(tl)
    kinds = [s.kind for s in segs]
    assert kinds.count(SegmentKind.PULL) == 5
    assert kinds.count(SegmentKind.RELEASE) == 5


def test_dwell_trapezoids():
    tl = generate(Protocol.preset("dwell"), default_model("P_Th"))
    kinds = [s.kind for s in segment_cycles(tl) if s.kind is not SegmentKind.DWELL_LOW or s.start > 0]
    assert kinds[:4] == [SegmentKind.PULL, SegmentKind.DWELL_HIGH, SegmentKind.RELEASE, SegmentKind.DWELL_LOW]


def test_sample_period_and_units():
    model = default_model("P_Th")
    tl = generate(Protocol.preset("equal_force"), model)
    assert np.allclose(np.diff(tl.t), 0.025)
    assert tl.R[0] == pytest.approx(model_eval(model.pull, 0.0) * OHM_PER_UNIT)
    assert tl.F.max() == pytest.approx(20.0)


def test_increasing_force_schedule():
    p = Protocol.preset("increasing_force")
    assert p.force_schedule == (5, 10, 15, 20, 25, 30, 35, 40)
    assert p.cycles == 8
    tl = generate(p, default_model("P_Th"))
    segs = segment_cycles(tl)
    peaks = [tl.F[s.end - 1] for s in segs if s.kind is SegmentKind.PULL]
    assert peaks == pytest.approx([5, 10, 15, 20, 25, 30, 35, 40])


def test_long_term_duration():
    p = Protocol.preset("long_term")
    model = default_model("P_Th")
    tl = generate(p, model)
    travel = 2 * model.compliance * p.target_force / p.jog_rate
    assert tl.t[-1] == pytest.approx(1800 + travel, abs=2.0)


def test_long_term_repetition_is_strain_controlled():
    p = Protocol.preset("long_term_repetition", cycles=3)
    tl = generate(p, default_model("P_Th"))
    assert tl.d.max() == pytest.approx(0.2 * p.L0)
    assert Protocol.preset("long_term_repetition").cycles == 2200


def test_course_directional_uses_course_curves():
    tl = generate(Protocol.preset("course_directional"), default_model("P_PR", "course"))
    assert tl.meta.direction == "course"
    assert default_model("P_Tl", "course").noise_sd > 0
    assert default_model("P_RP").noise_sd > 0


def test_same_seed_is_bit_identical():
    model = default_model("P_Th", noise_sd=2.0)
    a = generate(Protocol.preset("equal_force"), model, seed=11)
    b = generate(Protocol.preset("equal_force"), model, seed=11)
    c = generate(Protocol.preset("equal_force"), model, seed=12)
    assert dump_timeline(a) == dump_timeline(b)
    assert not np.array_equal(a.R, c.R)


def test_output_parses_as_recording():
    tl = generate(Protocol.preset("dwell"), default_model("PL2_hl"), variant="PL2_hl")
    back = load_timeline(dump_timeline(tl))
    assert back.meta.variant == "PL2_hl"
    assert back.meta.get("protocol") == "dwell"
    assert np.array_equal(back.R, tl.R)


@pytest.mark.parametrize(
    "kind,kw",
    [
        ("dwell", {"dwell_time": 0.0}),
        ("equal_force", {"cycles": 0}),
        ("equal_force", {"jog_rate": -1.0}),
        ("increasing_force", {"force_schedule": (5.0, -1.0)}),
    ],
)
def test_inconsistent_protocols_rejected(kind, kw):
    with pytest.raises(ConfigError):
        Protocol.preset(kind, **kw)


@pytest.mark.parametrize("kw", [{"relaxation_tau": 0}, {"drift_amp": -0.1}, {"compliance": 0}])
def test_inconsistent_models_rejected(kw):
    p = WALE_FITS["P_Th"][0]
    with pytest.raises(ConfigError):
        ResponseModel(p, p, **kw)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(VARIANT_NAMES), st.integers(2, 6))
def test_zero_disturbance_pipeline(name, cycles):
    model = default_model(name, noise_sd=0.0)
    tl = generate(Protocol.preset("dwell", cycles=cycles), model)
    off, relax, drift = offset_relaxation_drift(tl, segment_cycles(tl))
    assert (off, relax, drift) == (0.0, 0.0, 0.0)


def test_zero_disturbance_hysteresis_equals_curves():
    model = default_model("P_Th")
    rep = analyze_run(generate(Protocol.preset("equal_force"), model))
    # response is in percent of the first sample, a pure rescaling of the curves
    scale = 100.0 / model_eval(model.pull, 0.0)
    scaled = [FitParams(p.a, p.s * scale, p.d * scale, p.k * scale, p.o) for p in (model.pull, model.release)]
    assert rep.h_R == pytest.approx(hysteresis(*scaled).h, abs=1e-4)
    assert rep.delta_d_15 == 0.0 and rep.delta_d_05 == 0.0


def test_wear_accumulates():
    tl = generate(Protocol.preset("equal_force"), default_model("P_Th", wearout_per_cycle=1.0))
    assert relative_extension(tl, segment_cycles(tl)) == pytest.approx((10.0, 400 / 51), abs=1e-9)


def test_regenerate_from_fit():
    pull = WALE_FITS["P_Th"][0]
    assert regenerate_from_fit(pull, [0.0])[0][1] == pytest.approx(170.7, abs=0.05)
    flat = regenerate_from_fit(FitParams(0, 1, 2, 0, 0), np.linspace(0, 20, 5))
    assert {y for _, y in flat} == {3.0}
    assert len(regenerate_from_fit(pull, 3.0)) == 1


def test_config_file():
    cfg = parse_config(
        "# dwell run\nprotocol=dwell\nvariant=p_pr\nseed=3\ncycles=4\nrelaxation_amp=0.05\n"
        "pull=-0.5,10,50,0,0\n"
    )
    proto, model, run = build_from_config(cfg)
    assert proto.kind is ProtocolKind.DWELL and proto.cycles == 4 and proto.dwell_time == 5.0
    assert model.relaxation_amp == 0.05
    assert model.pull == FitParams(-0.5, 10, 50, 0, 0)
    assert model.release == WALE_FITS["P_PR"][1]
    assert run == {"variant": "P_PR", "direction": None, "seed": 3}


@pytest.mark.parametrize("text", ["bogus_key=1\n", "protocol=dwell\ndwell_time=0\n", "no equals sign\n", "pull=1,2\n"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        build_from_config(parse_config(text))
