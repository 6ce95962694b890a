"""Published fit parameters and result values used as regression targets."""
from __future__ import annotations

import math

from .fitting import FitParams

# (a, s, d, k, o, r2) for pull and release, wale-direction tests
_WALE = {
    "P_Tl": ((-1.35, 15.8, 140, -0.556, 0.479, 0.570), (-0.0897, 100, 36.3, 1.86, -5.00, 0.952)),
    "P_Tm": ((-0.0696, 100, 24.8, 1.32, -5.00, 0.958), (-0.112, 100, 47.6, 0.302, -5.00, 0.959)),
    "P_Th": ((-0.386, 36.5, 108, -1.17, -2.02, 0.982), (-0.436, 43.1, 102, -1.26, -2.36, 0.988)),
    "P_PR": ((-0.507, 26.8, 66.5, -0.935, -1.55, 0.989), (-0.381, 45.3, 52.0, -0.257, -2.65, 0.993)),
    "PL1_m": ((-0.260, 38.7, 103, -1.14, -2.81, 0.991), (-0.210, 100, 40.5, 1.30, -5.00, 0.992)),
    "PL1_h": ((-0.233, 38.8, 93.8, -0.778, -3.38, 0.982), (-0.217, 100, 53.2, 0.509, -5.00, 0.983)),
    "PL1_ml": ((-0.317, 28.0, 82.3, -0.835, -2.31, 0.990), (-0.347, 42.3, 74.2, -0.532, -3.02, 0.996)),
    "PL2_m+": ((-0.0317, 27.4, 2.61e-08, -0.0178, -5.00, 0.956), (-0.0797, 23.6, 7.66e-10, 0.466, -5.00, 0.962)),
    "PL2_hl": ((-0.349, 3.68, 33.5, -0.458, -0.450, 0.964), (-0.08264, 28.5, 2.18e-05, 0.627, -5.00, 0.983)),
}

# course-direction tests; the P_PR pull offset is printed as "5.40-15"
_COURSE = {
    "P_Th": ((-0.167, 97.6, 19.0, 1.47, -5.0, 0.993), (-0.225, 77.0, 40.9, 0.743, -4.54, 0.993)),
    "P_PR": ((-0.0947, 62.2, 5.40e-15, 1.23, -5.0, 0.968), (-0.271, 27.5, 42.6, 0.212, -2.46, 0.969)),
}


def _pairs(table):
    return {name: (FitParams(*pull), FitParams(*rel)) for name, (pull, rel) in table.items()}


WALE_FITS = _pairs(_WALE)
COURSE_FITS = _pairs(_COURSE)


def all_fit_rows() -> list[tuple[str, str, str, FitParams]]:
    """All 22 rows as ``(direction, variant, segment, params)``."""
    rows = []
    for direction, table in (("wale", WALE_FITS), ("course", COURSE_FITS)):
        for name, (pull, rel) in table.items():
            rows.append((direction, name, "pull", pull))
            rows.append((direction, name, "release", rel))
    return rows


_ = math.nan
TABLE2_COLUMNS = (
    "delta_d_05", "delta_d_15", "r2", "h_R", "F_h", "dR_rel", "offset", "relaxation",
    "drift", "T_r", "T_d", "jog_half_r2", "jog_double_r2", "course_h_G", "course_F_h",
)
# rows follow TABLE2_COLUMNS, nan where the table has no entry
TABLE2 = {
    "P_Tl": (11.7, 2.3, 0.65, 14.9, 0.5, 24.6, _, _, _, _, _, _, _, _, _),
    "P_Tm": (11.8, 2.6, 0.90, 27.1, 0.0, 46.5, _, _, _, _, _, _, _, _, _),
    "P_Th": (7.9, 2.0, 0.91, 10.7, 0.0, 56.7, -1.62, 7.32, 23.29, 22.9, 24.6, 0.84, 0.90, 4.3, 6.9),
    "P_RP": (11.4, 2.3, -1.94, _, _, _, _, _, _, _, _, _, _, _, _),
    "P_PR": (10.2, 1.6, 0.90, 25.4, 0.0, 64.0, -2.14, 5.80, 30.38, 630.4, 23.7, 0.94, 0.87, 8.7, 5.5),
    "PL1_m": (11.0, 1.8, 0.92, 45.6, 0.0, 63.1, -1.62, _, _, _, _, _, _, _, _),
    "PL1_h": (10.6, 1.9, 0.90, 63.3, 0.0, 65.9, _, _, _, _, _, _, _, _, _),
    "PL1_ml": (9.1, 2.0, 0.91, 24.8, 0.0, 56.7, _, _, _, _, _, _, _, _, _),
    "PL2_m+": (5.4, 1.3, 0.92, 5.8, 9.2, 35.4, -3.45, 2.59, 8.51, 15.1, 10.7, 0.92, 0.94, _, _),
    "PL2_hl": (5.2, 1.3, 0.93, 4.1, 11.1, 34.5, -3.24, 2.45, 7.93, 15.1, 10.2, 0.20, 0.84, _, _),
}


def table2(variant: str, column: str) -> float:
    return TABLE2[variant][TABLE2_COLUMNS.index(column)]
