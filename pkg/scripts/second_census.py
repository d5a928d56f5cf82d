#!/usr/bin/env python3
"""Eigenspace census of a second crested product, checked against numerics."""

import argparse

from crested.chain_core import uniform_chain
from crested.corpus import random_symmetric_chain
from crested.second_crested import SecondCrestedSpec, assemble_second_crested, second_crested_census
from crested.spectral_oracle import compare_spectra, make_rng, numeric_spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--h", type=int, default=2)
    ap.add_argument("--y", type=int, default=3, help="size of Y")
    ap.add_argument("--p0", type=float, default=0.4)
    ap.add_argument("--random-q", action="store_true", help="random symmetric Q instead of J_Y")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    Q = random_symmetric_chain(make_rng(args.seed), args.y) if args.random_q else uniform_chain(args.y)
    spec = SecondCrestedSpec(args.n, args.h, Q, args.p0)
    census = second_crested_census(spec, with_basis=True)
    for t in sorted(census, key=lambda t: -t.eigenvalue):
        print(f"{t.label:<24} {t.eigenvalue: .12f} {t.dimension:>5}")
    print(compare_spectra(census, numeric_spectrum(assemble_second_crested(spec)), name="census").summary())


if __name__ == "__main__":
    main()
