import math

import pytest
from hypothesis import given, settings, strategies as st

from twillsense.knit import (
    KNIT_BACK,
    KNIT_FRONT,
    PES,
    RESISTAT,
    Bed,
    Course,
    Kind,
    KnitError,
    KnitProgram,
    MADEIRA,
    Role,
    Structure,
    build_twill,
    build_variant,
    count_actions,
    from_grid,
    get_variant,
    interface_tucks,
    to_grid,
    uniform_grid,
    variant_catalog,
    VARIANT_NAMES,
    YarnSpec,
)


def test_twill_4x2_phase_shift():
    prog = build_twill(4, 2, RESISTAT)
    c0, c1 = prog.courses
    assert c0.needles(Kind.KNIT) == [0, 2]
    assert c0.needles(Kind.FLOAT) == [1, 3]
    assert c1.needles(Kind.KNIT) == [1, 3]
    assert c1.needles(Kind.FLOAT) == [0, 2]


def test_twill_single_stitch():
    prog = build_twill(1, 1, RESISTAT)
    assert prog.height == 1
    assert prog.courses[0].actions == ((0, KNIT_FRONT),)


@given(st.integers(1, 40), st.integers(1, 40))
def test_twill_knit_count(w, h):
    prog = build_twill(w, h, RESISTAT)
    expected = math.ceil(h / 2) * math.ceil(w / 2) + (h // 2) * (w // 2)
    assert count_actions(prog.courses, Kind.KNIT) == expected
    assert count_actions(prog.courses, Kind.KNIT) + count_actions(prog.courses, Kind.FLOAT) == w * h


def test_twill_5x4_knit_count():
    assert count_actions(build_twill(5, 4, RESISTAT).courses, Kind.KNIT) == 10


@pytest.mark.parametrize("w,h", [(0, 3), (3, 0), (-1, 1)])
def test_twill_rejects_bad_dimensions(w, h):
    with pytest.raises(KnitError):
        build_twill(w, h, RESISTAT)


def test_catalog_rows():
    cat = variant_catalog()
    assert len(cat) == 10
    assert tuple(v.name for v in cat) == VARIANT_NAMES
    th = get_variant("P_Th")
    assert (th.structure, th.pes_threads, th.lycra_threads, th.np_pes, th.np_res, th.np_tuck) == (
        Structure.TUBULAR, 6, 0, 13.1, 11.5, None,
    )
    hl = get_variant("pl2_HL")
    assert (hl.structure, hl.pes_threads, hl.lycra_threads, hl.np_pes, hl.np_res, hl.np_tuck) == (
        Structure.P_TUCKED_TO_R, 4, 2, 12.0, 11.5, 9.5,
    )


def test_catalog_thread_count_is_six():
    for v in variant_catalog():
        assert v.pes_threads + v.lycra_threads == 6


def test_unknown_variant():
    with pytest.raises(KnitError, match="unknown"):
        get_variant("P_XX")


def test_default_yarn_ratio():
    assert RESISTAT.linear_resistance / MADEIRA.linear_resistance >= 1e3


def test_conductive_roles_need_finite_resistance():
    with pytest.raises(ValueError):
        YarnSpec("bad", Role.SENSOR, math.inf)


def test_tubular_tucks_only_at_edges():
    prog = build_variant("P_Th", 8, 8)
    needles = {n for _, n, _ in interface_tucks(prog)}
    assert needles == {0, 7}


def test_pes_tucked_substrate_courses_tuck_back():
    prog = build_variant("P_PR", 8, 8)
    for course in prog.courses:
        if course.yarn.role is Role.SUBSTRATE:
            assert course.needles(Kind.TUCK, Bed.BACK)


def test_resistat_tucked_sensor_courses_tuck_front():
    prog = build_variant("P_RP", 6, 4)
    for course in prog.courses:
        if course.yarn.role is Role.SENSOR:
            assert len(course.needles(Kind.TUCK, Bed.FRONT)) == 1


def test_minimal_variant_has_two_connectors():
    prog = build_variant("P_Th", 2, 2)
    assert len(prog.courses_of(Role.CONNECTOR)) == 2
    assert prog.courses_of(Role.CONNECTOR) == [0, prog.height - 1]


@pytest.mark.parametrize("w,h", [(1, 4), (4, 1), (0, 0)])
def test_variant_rejects_bad_dimensions(w, h):
    with pytest.raises(KnitError):
        build_variant("P_Th", w, h)


def test_program_rejects_unordered_needles():
    with pytest.raises(KnitError):
        KnitProgram((Course(RESISTAT, ((1, KNIT_BACK), (0, KNIT_BACK))),), 2)
    with pytest.raises(KnitError):
        KnitProgram((Course(RESISTAT, ((2, KNIT_BACK),)),), 2)


@settings(max_examples=30)
@given(st.sampled_from(VARIANT_NAMES), st.integers(2, 9), st.integers(2, 6))
def test_grid_round_trip(name, w, h):
    prog = build_variant(name, w, h)
    back = from_grid(to_grid(prog))
    assert back.variant_tag == prog.variant_tag
    assert to_grid(back) == to_grid(prog)
    assert [c.yarn for c in back.courses] == [c.yarn for c in prog.courses]


def test_grid_text_errors():
    with pytest.raises(KnitError, match="unknown yarn"):
        from_grid("wool:KK\n")
    with pytest.raises(KnitError, match="characters"):
        from_grid("resistat:KX\n")
    with pytest.raises(KnitError, match="width"):
        from_grid("resistat:KK\nresistat:K\n")


def test_uniform_grid_shape():
    prog = uniform_grid(3, 5)
    assert prog.height == 5
    assert prog.courses_of(Role.CONNECTOR) == [0, 4]
    assert all(c.needles(Kind.KNIT, Bed.BACK) == [0, 1, 2] for c in prog.courses)
    assert PES.role is Role.SUBSTRATE
