"""Synthesize every protocol for every variant and build the combined table.

Writes recordings and analysis output under OUT (default ./synthetic_out).
"""
import argparse
import sys
from pathlib import Path

from twillsense.cli import main as cli_main
from twillsense.ingest import dump_timeline
from twillsense.knit import VARIANT_NAMES
from twillsense.synth import Protocol, default_model, generate

WEAR = {"wearout_per_cycle": 0.5}
RUNS = (
    ("equal_force", {}, WEAR),
    ("dwell", {}, {**WEAR, "relaxation_amp": 0.05, "relaxation_tau": 1.0, "drift_amp": 0.03, "drift_tau": 1.0}),
    ("varying_speed", {"jog_rate": 0.667}, WEAR),
    ("varying_speed", {"jog_rate": 2.667}, WEAR),
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="synthetic_out")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    files = []
    for name in VARIANT_NAMES:
        for kind, proto_kw, model_kw in RUNS:
            tl = generate(Protocol.preset(kind, **proto_kw), default_model(name, **model_kw), seed=args.seed, variant=name)
            path = out / "runs" / f"{name}_{kind}_{tl.meta.jog_rate}.csv"
            path.write_text(dump_timeline(tl))
            files.append(str(path))
    code = cli_main(["analyze", "--input", *files, "--out", str(out / "analysis")])
    print((out / "analysis" / "combined.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
