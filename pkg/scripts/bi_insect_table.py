#!/usr/bin/env python3
"""Print the bi-insect eigenvalue table next to the numeric spectrum."""

import argparse

import numpy as np

from crested.chain_core import eigenvalue_clusters
from crested.second_crested import assemble_second_crested, bi_insect_spec, bi_insect_spectrum
from crested.spectral_oracle import numeric_spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--p0", type=float, default=0.3)
    args = ap.parse_args()

    rows = bi_insect_spectrum(args.n, args.q, args.m, args.p0)
    chain = assemble_second_crested(bi_insect_spec(args.n, args.q, args.m, args.p0))
    lam = numeric_spectrum(chain).lambdas
    print(f"{chain.size} states, table total {sum(r.dimension for r in rows)}")
    print(f"{'type':>6} {'k':>2} {'eigenvalue':>20} {'dim':>5} {'numeric mult':>13}")
    for r in sorted(rows, key=lambda r: -r.eigenvalue):
        mult = int(np.sum(np.abs(lam - r.eigenvalue) < 1e-7))
        print(f"{''.join(map(str, r.a)):>6} {r.k:>2} {r.eigenvalue:20.15f} {r.dimension:>5} {mult:>13}")
    print("distinct numeric eigenvalues:", len(eigenvalue_clusters(lam)))


if __name__ == "__main__":
    main()
