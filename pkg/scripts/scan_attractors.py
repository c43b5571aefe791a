#!/usr/bin/env python3
"""Classify the classical attractor over a detuning scan.

For each detuning the mean-field equations are integrated past the
transient, the largest Lyapunov exponent is estimated, and the attractor is
reported as fixed-point / period-n / chaotic.  Useful for locating the
period-doubling cascade between the standard cases.
"""

import argparse
import sys

import numpy as np

from optomulti.classical import (
    ClassicalState,
    classify_attractor,
    integrate_classical,
    largest_lyapunov,
)
from optomulti.model import ModelParams
from optomulti.output import write_csv


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--delta-min", type=float, default=-1.0)
    parser.add_argument("--delta-max", type=float, default=-0.3)
    parser.add_argument("--points", type=int, default=29)
    parser.add_argument("--tau-end", type=float, default=800.0)
    parser.add_argument("--out", default="attractor_scan.csv")
    args = parser.parse_args(argv)

    rows = {"delta": [], "kind": [], "period": [], "amplitude": [],
            "lyapunov": []}
    state0 = ClassicalState(0j, 0.5 + 0j)
    for delta in np.linspace(args.delta_min, args.delta_max, args.points):
        params = ModelParams(delta=float(delta))
        series = integrate_classical(
            state0, params, args.tau_end,
            tau_eval=np.linspace(0.0, args.tau_end, int(args.tau_end * 40)),
        )
        lyap = largest_lyapunov(params, state0)
        report = classify_attractor(series, lyap.value)
        rows["delta"].append(delta)
        rows["kind"].append(report.kind)
        rows["period"].append(report.period or 0)
        rows["amplitude"].append(report.amplitude)
        rows["lyapunov"].append(report.lyapunov)
        print(f"delta={delta:+.3f}  {report.kind:<12} A={report.amplitude:.3f} "
              f"lyap={report.lyapunov:+.4f}")

    kinds = rows.pop("kind")
    write_csv(args.out, {k: np.asarray(v, dtype=float) for k, v in rows.items()})
    print(f"wrote {args.out} ({len(kinds)} detunings)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
