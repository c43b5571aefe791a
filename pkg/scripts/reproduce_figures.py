#!/usr/bin/env python3
"""Regenerate the data artifacts behind the standard result figures.

Writes one output directory per figure panel under --out-dir, each holding
CSV observable streams, grid files for Wigner functions / amplitude charts,
binary state snapshots, and the resolved run configuration.

Desk variants (--desk) shrink ensembles, mechanical truncations, and
horizons.  The cavity truncation cannot shrink (its steady occupation is
set by the drive), so quantum-trajectory figures still take on the order of
an hour each even at desk scale; full-size runs reproduce the published
statistics and take days.  Classical figures (fig1, parts of fig2/fig5)
finish in seconds.
"""

import argparse
import dataclasses
import sys
import time

from optomulti.cli import figure_playbook, format_config, run
from optomulti.output import ensure_dir

ALL_FIGURES = [f"fig{i}" for i in range(1, 8)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("figures", nargs="*", default=ALL_FIGURES,
                        help="figure ids to run (default: all of fig1..fig7)")
    parser.add_argument("--out-dir", default="figures")
    parser.add_argument("--desk", action="store_true",
                        help="reduced-size variants for quick runs")
    parser.add_argument("--dry-run", action="store_true",
                        help="write the configs without executing them")
    args = parser.parse_args(argv)

    base = ensure_dir(args.out_dir)
    for fig in args.figures or ALL_FIGURES:
        for name, cfg in figure_playbook(fig, desk=args.desk).items():
            tag = f"{fig}_{name}" + ("_desk" if args.desk else "")
            cfg = dataclasses.replace(cfg, out_dir=str(base / tag))
            (base / f"{tag}.ini").write_text(format_config(cfg))
            if args.dry_run:
                print(f"wrote {base / (tag + '.ini')}")
                continue
            t0 = time.time()
            run(cfg)
            print(f"{tag}: done in {time.time() - t0:.1f}s -> {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
