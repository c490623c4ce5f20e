"""Map the operator spreading cone on a chain too big for dense methods.

One evolved operator is scanned against a row of static probes.  Inside
the cone the squared commutator is order one; outside it stays pinned
near zero because charge conservation freezes untouched regions exactly.
Arrival times grow linearly with distance, which is the light cone.
"""

import numpy as np

from paraotoc import HoppingChain, lightcone_scan, wavefront_times

MODEL = HoppingChain(n_spins=12, t2=0.8)
J = 11
PROBES = (3, 5, 7, 9, 13, 15, 17, 19)


def main():
    grid = lightcone_scan(MODEL, j=J, ks=PROBES, t_max=2.0, dt=0.02,
                          stride=0.2, chi=24)
    c = grid.c
    print("squared commutator C(t, k); rows are times, columns probes")
    header = "  t   " + " ".join(f"k={k:>3}" for k in grid.ks)
    print(header)
    for i, t in enumerate(grid.times):
        row = " ".join(f"{c[i, n]:5.2f}" for n in range(len(grid.ks)))
        print(f"{t:5.1f} {row}")

    arrivals = wavefront_times(grid.times, grid.f.real,
                               threshold_fraction=0.01)
    print("\nwavefront arrival times (Re F dropping 1% below its start):")
    for k, t_arr in zip(grid.ks, arrivals):
        if np.isnan(t_arr):
            print(f"  probe {k:>3}:   not reached")
        else:
            print(f"  probe {k:>3}: {t_arr:6.2f}")
    print(f"\nlargest accumulated truncation weight: "
          f"{grid.trunc_weight.max():.2e}")


if __name__ == "__main__":
    main()
