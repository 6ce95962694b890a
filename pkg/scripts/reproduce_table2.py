"""Curve-derived hysteresis and dynamic range next to the published table.

Usage: python scripts/reproduce_table2.py [--norm mean|pull|release|r0|all]
"""
import argparse

from twillsense.metrics import HYST_NORMS, dynamic_range, hysteresis
from twillsense.reference import WALE_FITS, table2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--norm", default="all", choices=(*HYST_NORMS, "all"))
    args = ap.parse_args()
    norms = HYST_NORMS if args.norm == "all" else (args.norm,)
    head = f"{'variant':<8}" + "".join(f"{n + ' h':>10}{'F_h':>6}" for n in norms)
    print(head + f"{'pub h':>8}{'pub F_h':>8}{'dR':>8}{'pub dR':>8}")
    for name, (pull, rel) in WALE_FITS.items():
        cells = ""
        for n in norms:
            r = hysteresis(pull, rel, norm=n)
            cells += f"{r.h:>10.2f}{r.F_h:>6.2f}"
        dr = dynamic_range(pull, rel)[0]
        print(
            f"{name:<8}{cells}{table2(name, 'h_R'):>8.1f}{table2(name, 'F_h'):>8.1f}"
            f"{dr:>8.2f}{table2(name, 'dR_rel'):>8.1f}"
        )


if __name__ == "__main__":
    main()
