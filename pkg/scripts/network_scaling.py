"""Effective resistance of uniform knit meshes versus wales and courses.

Prints R / R_contact, which equals (courses - 1) / wales when buses are ideal,
and the same quantity for the two-face variant programs for comparison.
"""
import argparse

from twillsense.knit import VARIANT_NAMES, build_variant, uniform_grid
from twillsense.network import ContactParams, LoadState, compile_graph, contact_resistance, effective_resistance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--force", type=float, default=10.0)
    ap.add_argument("--sizes", default="2,4,8,16")
    args = ap.parse_args()
    load = LoadState(args.force, distribution="local")
    rc = contact_resistance(ContactParams(pressure=load.pressure(0)))
    sizes = [int(s) for s in args.sizes.split(",")]
    print("uniform grid, R / R_contact (rows: courses, columns: wales)")
    print(f"{'':>8}" + "".join(f"{w:>10}" for w in sizes))
    for h in sizes:
        row = [effective_resistance(compile_graph(uniform_grid(w, h + 1), ContactParams(), load, ideal_buses=True)) / rc for w in sizes]
        print(f"{h + 1:>8}" + "".join(f"{r:>10.4f}" for r in row))
    print("\nvariant programs, 8 x 8 sensor rows, R / R_contact")
    for name in VARIANT_NAMES:
        g = compile_graph(build_variant(name, 8, 8), ContactParams(), load)
        print(f"{name:<8}{effective_resistance(g) / rc:>10.4f}")


if __name__ == "__main__":
    main()
