import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twillsense.fitting import (
    CSV_HEADER,
    FitInput,
    FitParams,
    LOWER,
    UPPER,
    fit_curve,
    fit_row,
    goodness,
    initial_guesses,
    jacobian,
    levenberg_marquardt,
    model_eval,
    parse_fit_row,
    r2_score,
    regenerate_from_fit,
)
from twillsense.reference import WALE_FITS, all_fit_rows

GRID = np.linspace(0, 20, 200)

params = st.builds(
    FitParams,
    a=st.floats(-2, 0.5),
    s=st.floats(1e-3, 100),
    d=st.floats(-200, 200),
    k=st.floats(-5, 5),
    o=st.floats(-5, 5),
)


def central_difference(p: FitParams, F, h=1e-6):
    v = p.vector
    cols = []
    for j in range(5):
        step = h * max(1.0, abs(v[j]))
        hi, lo = v.copy(), v.copy()
        hi[j] += step
        lo[j] -= step
        cols.append((model_eval(FitParams(*hi), F) - model_eval(FitParams(*lo), F)) / (2 * step))
    return np.column_stack(cols)


def test_model_value_at_zero():
    pull, _ = WALE_FITS["P_Th"]
    assert pull.a == -0.386 and pull.s == 36.5
    assert model_eval(pull, 0.0) == pytest.approx(36.5 * 2**0.77972 + 108, rel=1e-12)
    assert model_eval(pull, 0.0) == pytest.approx(170.7, abs=0.05)


@given(st.floats(-100, 100), st.floats(0.1, 50), st.floats(-5, 5), st.floats(0, 20))
def test_zero_rate_is_constant(s0, d0, o, F):
    assert model_eval(FitParams(0.0, s0, d0, 0.0, o), F) == pytest.approx(s0 + d0)


@given(st.floats(-5, 5), st.floats(0.1, 10))
def test_linear_part(k, F):
    p = FitParams(0.0, 1e-9, 0.0, k, 0.0)
    assert model_eval(p, 2 * F) - model_eval(p, F) == pytest.approx(k * F, abs=1e-9)


@settings(max_examples=100)
@given(params, st.floats(0, 20))
def test_jacobian_matches_finite_differences(p, F):
    J = jacobian(p, [F])[0]
    fd = central_difference(p, np.array([F]))[0]
    scale = np.maximum(np.abs(J), 1.0)
    assert np.all(np.abs(J - fd) / scale < 1e-5)


@pytest.mark.parametrize("direction,variant,segment,p", all_fit_rows(), ids=lambda x: x if isinstance(x, str) else "")
def test_round_trip_published_rows(direction, variant, segment, p):
    F, y = regenerate_from_fit(p, GRID)
    fit = fit_curve(FitInput(F, y, segment))
    dev = np.max(np.abs(model_eval(fit, F) - y))
    assert dev <= 1e-3 * np.ptp(y)
    assert fit.r2 >= 0.9999


def test_round_trip_pr_release():
    p = FitParams(-0.381, 45.3, 52.0, -0.257, -2.65)
    F, y = regenerate_from_fit(p, GRID)
    fit = fit_curve((F, y))
    assert fit.r2 >= 0.9999
    assert fit.converged


def test_fits_a_line():
    F = np.linspace(0, 20, 50)
    fit = fit_curve((F, 3 * F + 7))
    pred = model_eval(fit, F)
    assert np.allclose(pred, 3 * F + 7, atol=1e-6)
    assert fit.r2 == pytest.approx(1.0, abs=1e-6)


def test_constant_response_has_undefined_r2():
    F = np.linspace(0, 20, 30)
    fit = fit_curve((F, np.full(30, 5.0)))
    assert not fit.r2_defined
    assert model_eval(fit, F) == pytest.approx(np.full(30, 5.0))


def test_fit_respects_bounds():
    F = np.linspace(0, 20, 80)
    y = 500 * np.exp2(-0.2 * F) + 3
    fit = fit_curve((F, y))
    v = fit.vector
    assert np.all(v >= LOWER) and np.all(v <= UPPER)
    assert fit.s <= 100


def test_fit_range_restricts_domain():
    F = np.linspace(0, 40, 200)
    p = WALE_FITS["P_PR"][0]
    y = model_eval(p, F)
    y[F > 20] = 0.0  # garbage outside the range
    fit = fit_curve((F, y), F_range=(0, 20))
    inside = F <= 20
    assert np.max(np.abs(model_eval(fit, F[inside]) - y[inside])) < 1e-3 * np.ptp(y[inside])


def test_fit_input_validation():
    with pytest.raises(ValueError, match="6 points"):
        FitInput(np.arange(5.0), np.arange(5.0))
    with pytest.raises(ValueError):
        FitInput(np.arange(6.0), np.arange(7.0))
    with pytest.raises(ValueError):
        FitInput(np.arange(6.0), np.array([1, 2, np.nan, 4, 5, 6]))


def test_start_schedule_is_deterministic():
    F, y = regenerate_from_fit(WALE_FITS["P_Tl"][0], GRID)
    a = initial_guesses(F, y)
    b = initial_guesses(F, y)
    assert len(a) == 8
    assert all(np.array_equal(x, z) for x, z in zip(a, b))


def test_lm_never_increases_cost():
    F, y = regenerate_from_fit(WALE_FITS["PL1_m"][1], GRID)
    res = levenberg_marquardt(F, y, np.array([-0.5, 10.0, 0.0, 0.0, 0.0]))
    assert res.cost <= res.start_cost


def test_r2_reference_cases():
    y = np.array([1.0, 2.0, 4.0, 8.0])
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(4, y.mean())) == pytest.approx(0.0)
    assert r2_score(y, y[::-1]) < 0
    assert math.isnan(r2_score(np.ones(4), np.ones(4)))


@given(params)
def test_goodness_at_most_one(p):
    F = np.linspace(0, 20, 30)
    y = model_eval(p, F) + np.sin(F)
    r2 = goodness(F, y, p)
    assert math.isnan(r2) or r2 <= 1.0


def test_fit_row_round_trip():
    p = FitParams(-0.386, 36.5, 108, -1.17, -2.02, 0.982)
    line = fit_row("P_Th", "pull", p)
    assert CSV_HEADER.count(",") == line.count(",")
    name, seg, back = parse_fit_row(line)
    assert (name, seg) == ("P_Th", "pull")
    assert back.vector == pytest.approx(p.vector)


def test_regenerate_single_point():
    F, y = regenerate_from_fit(FitParams(0, 1, 2, 0, 0), 5.0)
    assert F.shape == (1,) and y[0] == 3.0
