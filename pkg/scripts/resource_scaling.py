#!/usr/bin/env python3
"""Tabulate elementary-gate counts for multi-control flips: the chain needs
k controlled-path and k merging rounds for k controls, with one recycled
ancilla photon throughout.

Usage: python scripts/resource_scaling.py [max_controls]
"""

import sys

from qubusim.gates import ResourceTrace, multi_toffoli
from qubusim.state import product_state


def main():
    k_max = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    print(f"{'controls':>8s} {'c_path':>7s} {'merging':>8s} {'ancillas':>9s} "
          f"{'qubus uses':>11s} {'attenuation':>12s}")
    for k in range(2, k_max + 1):
        trace = ResourceTrace()
        photons = [(f"c{i}", i, "V") for i in range(k)] + [("t", k, "H")]
        st = product_state(photons)
        multi_toffoli(st, [f"c{i}" for i in range(k)], "t", 2.0, 0.5,
                      trace=trace)
        rep = trace.report()
        print(f"{k:>8d} {rep.c_path_count:>7d} {rep.merging_count:>8d} "
              f"{rep.ancilla_photons_concurrent:>9d} {rep.qubus_uses:>11d} "
              f"{rep.cumulative_qubus_attenuation:>12.6f}")


if __name__ == "__main__":
    main()
