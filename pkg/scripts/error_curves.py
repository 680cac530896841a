#!/usr/bin/env python3
"""Sweep the QND detection-error formulas over the near-deterministic knob
|α|·sinθ and the probe strength η·γ²·θp², writing a CSV for plotting.

Usage: python scripts/error_curves.py [out.csv]
"""

import csv
import math
import sys

from qubusim.detection import (
    DetectorParams,
    detection_error_eq11,
    detection_error_exact,
)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "error_curves.csv"
    theta = 0.02
    rows = []
    for asin in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]:
        alpha = asin / math.sin(theta)
        for probe in [0.5, 1.0, 2.0, 4.0]:
            thp = math.sqrt(probe / (0.5 * 100.0**2))
            det = DetectorParams(eta=0.5, gamma=100.0, theta_p=thp)
            exact = detection_error_exact(alpha, theta, det)
            closed = detection_error_eq11(alpha, theta, det)
            rows.append([asin, probe, alpha, theta, thp, exact, closed])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha_sin_theta", "eta_g2_thp2", "alpha", "theta",
                    "theta_p", "exact_error", "closed_form"])
        for row in rows:
            w.writerow([f"{x:.10g}" for x in row])
    print(f"wrote {len(rows)} rows to {out}")
    print("note: the closed form replaces the n² response exponent by n, so it")
    print("is an overestimate that widens with alpha*sin(theta).")


if __name__ == "__main__":
    main()
