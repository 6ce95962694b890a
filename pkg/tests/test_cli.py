import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from twillsense.cli import main, parse_forces, parse_r0, parse_range, UsageError
from twillsense.fitting import model_eval, parse_fit_row
from twillsense.knit import VARIANT_NAMES
from twillsense.reference import WALE_FITS


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _synth(tmp_path, variant, protocol="equal_force", seed=1, extra=""):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = tmp_path / f"{variant}_{protocol}.cfg"
    cfg.write_text(f"protocol={protocol}\nvariant={variant}\nseed={seed}\n{extra}")
    out = tmp_path / "runs"
    assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    return out / f"{variant}_{protocol}_s{seed}.csv"


def test_argument_parsers():
    assert parse_forces("1:5:1") == [1, 2, 3, 4, 5]
    assert parse_forces("0.5,2") == [0.5, 2.0]
    assert parse_range("0:20") == (0.0, 20.0)
    assert parse_r0("first-sample") is None
    assert parse_r0("explicit:1500") == 1500.0
    for bad in (lambda: parse_range("20:0"), lambda: parse_r0("median"), lambda: parse_forces("1:2:0")):
        with pytest.raises(UsageError):
            bad()


def test_simulate_sweep(tmp_path):
    assert main(["simulate", "--variant", "P_Th", "--forces", "1:20:1", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    R = [float(r["resistance_ohm"]) for r in rows]
    assert len(rows) == 20
    assert all(b <= a for a, b in zip(R, R[1:]))
    assert (tmp_path / "sweep.svg").read_text().startswith("<?xml")


def test_simulate_doubling_wales_halves_resistance(tmp_path):
    for w in (6, 12):
        (tmp_path / f"w{w}.cfg").write_text(f"wales={w}\ncourses=9\n")
        assert main(["simulate", "--config", str(tmp_path / f"w{w}.cfg"), "--out", str(tmp_path / f"w{w}")]) == 0
    narrow = [float(r["resistance_ohm"]) for r in _rows(tmp_path / "w6" / "sweep.csv")]
    wide = [float(r["resistance_ohm"]) for r in _rows(tmp_path / "w12" / "sweep.csv")]
    assert np.allclose(np.array(wide) * 2, narrow, rtol=1e-9)


def test_simulate_open_circuit_exit_code(tmp_path, capsys):
    (tmp_path / "c.cfg").write_text("open_threshold=1\n")
    code = main(["simulate", "--config", str(tmp_path / "c.cfg"), "--forces", "0", "--out", str(tmp_path)])
    assert code == 3
    assert "open circuit" in capsys.readouterr().err


def test_analyze_ten_variants_in_table_order(tmp_path):
    files = [str(_synth(tmp_path, v)) for v in reversed(VARIANT_NAMES)]
    assert main(["analyze", "--input", *files, "--out", str(tmp_path / "an")]) == 0
    rows = _rows(tmp_path / "an" / "combined.csv")
    assert [r["variant"] for r in rows] == list(VARIANT_NAMES)
    th = next(r for r in rows if r["variant"] == "P_Th")
    assert float(th["h_R"]) == pytest.approx(10.7, abs=0.1)
    for suffix in ("_report.csv", "_timeline.svg", "_characteristics.svg", "_binned_diff.svg", "_binned_diff.csv"):
        assert (tmp_path / "an" / f"P_Th_equal_force_s1{suffix}").exists()


def test_analyze_fills_jog_columns(tmp_path):
    files = [
        str(_synth(tmp_path, "P_Th", "varying_speed", seed=s, extra=f"jog_rate={rate}\n"))
        for s, rate in ((1, 1.333), (2, 0.667), (3, 2.667))
    ]
    assert main(["analyze", "--input", *files, "--out", str(tmp_path / "an")]) == 0
    (row,) = _rows(tmp_path / "an" / "combined.csv")
    assert float(row["jog_half_r2"]) >= 0.999
    assert float(row["jog_double_r2"]) >= 0.999


def test_analyze_empty_input_is_usage_error(tmp_path):
    assert main(["analyze", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--input", "x.csv"])
    assert exc.value.code == 2


def test_analyze_single_cycle_is_flagged(tmp_path):
    path = _synth(tmp_path, "P_Th", extra="cycles=1\n")
    assert main(["analyze", "--input", str(path), "--out", str(tmp_path / "an")]) == 0
    (row,) = _rows(tmp_path / "an" / "combined.csv")
    assert "insufficient_cycles" in row["flags"]
    assert row["h_R"] == ""


def test_analyze_bad_file_does_not_stop_batch(tmp_path, capsys):
    good = _synth(tmp_path, "P_Th")
    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,d_mm,F_N,R_ohm\n0,0,0,1\n0,0,0,1\n")
    code = main(["analyze", "--input", str(bad), str(good), "--out", str(tmp_path / "an")])
    assert code == 1
    assert "bad.csv" in capsys.readouterr().err
    assert len(_rows(tmp_path / "an" / "combined.csv")) == 1


def test_analyze_hysteresis_convention_switch(tmp_path):
    path = _synth(tmp_path, "P_Th")
    out = {}
    for norm in ("mean", "pull"):
        assert main(["analyze", "--input", str(path), "--hyst-norm", norm, "--out", str(tmp_path / norm)]) == 0
        out[norm] = float(_rows(tmp_path / norm / "combined.csv")[0]["h_R"])
    assert out["pull"] > out["mean"]


def test_fit_recovers_regenerated_curve(tmp_path):
    pull = WALE_FITS["P_Th"][0]
    F = np.linspace(0, 20, 200)
    y = model_eval(pull, F)
    src = tmp_path / "points.csv"
    src.write_text("segment,F_N,y\n" + "".join(f"pull,{float(f)!r},{float(v)!r}\n" for f, v in zip(F, y)))
    assert main(["fit", "--input", str(src), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "fits.csv").read_text().splitlines()
    assert lines[0] == "variant,segment,a,s,d,k,o,r2"
    _, segment, p = parse_fit_row(lines[1])
    assert segment == "pull"
    # printed parameters carry 6 significant digits
    assert np.max(np.abs(model_eval(p, F) - y)) <= 1e-3 * np.ptp(y)


def test_fit_two_segments_and_range(tmp_path):
    path = _synth(tmp_path, "P_PR")
    assert main(["fit", "--input", str(path), "--range", "0:10", "--out", str(tmp_path / "f")]) == 0
    lines = (tmp_path / "f" / "fits.csv").read_text().splitlines()
    assert [ln.split(",")[1] for ln in lines[1:]] == ["pull", "release"]
    assert main(["fit", "--input", str(path), "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "fits.csv").read_text() != (tmp_path / "f" / "fits.csv").read_text()


def test_report_renders_combined_table(tmp_path, capsys):
    path = _synth(tmp_path, "P_Th")
    main(["analyze", "--input", str(path), "--out", str(tmp_path / "an")])
    capsys.readouterr()
    assert main(["report", "--input", str(tmp_path / "an" / "combined.csv")]) == 0
    text = capsys.readouterr().out
    assert "variant: P_Th" in text and "published 10.7" in text


def test_csv_outputs_deterministic(tmp_path):
    texts = []
    for run in ("a", "b"):
        path = _synth(tmp_path / run, "P_Th", extra="noise_sd=1.5\n")
        main(["analyze", "--input", str(path), "--out", str(tmp_path / run / "an")])
        texts.append((path.read_text(), (tmp_path / run / "an" / "combined.csv").read_text()))
    assert texts[0] == texts[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "twillsense", "simulate", "--forces", "1,2", "--out", str(tmp_path)],
        capture_output=True, text=True, env={"TWILLSENSE_LOG": "debug", "PATH": ""},
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "sweep.csv").exists()
