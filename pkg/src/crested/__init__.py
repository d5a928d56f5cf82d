"""Crested products of reversible Markov chains and their spectra."""

from .chain_core import ReversibleChain, SpectralData, spectral_decomposition, uniform_chain
from .first_crested import CrestedSpec, NotReversible, assemble_first_crested, analytic_spectrum_first
from .second_crested import SecondCrestedSpec, assemble_second_crested, second_crested_census

__all__ = [
    "ReversibleChain", "SpectralData", "spectral_decomposition", "uniform_chain",
    "CrestedSpec", "NotReversible", "assemble_first_crested", "analytic_spectrum_first",
    "SecondCrestedSpec", "assemble_second_crested", "second_crested_census",
]
