"""Seeded random chains and crested specs for corpus-style testing."""

from __future__ import annotations

import numpy as np

from .chain_core import ReversibleChain, WeightedGraph, chain_from_weights
from .first_crested import CrestedSpec
from .spectral_oracle import make_rng


def _connected_weights(rng: np.random.Generator, m: int, density: float) -> np.ndarray:
    w = rng.uniform(0.1, 1.0, (m, m)) * (rng.random((m, m)) < density)
    w = np.triu(w, 1)
    # a random spanning path keeps the graph connected
    order = rng.permutation(m)
    for a, b in zip(order[:-1], order[1:]):
        i, j = min(a, b), max(a, b)
        w[i, j] = max(w[i, j], rng.uniform(0.1, 1.0))
    return w + w.T


def random_reversible_chain(rng: np.random.Generator, m: int, density: float = 0.6) -> ReversibleChain:
    """Random walk on a random connected weighted graph with loops (so aperiodic)."""
    w = _connected_weights(rng, m, density)
    w[np.diag_indices(m)] = rng.uniform(0.1, 1.0, m)
    return chain_from_weights(WeightedGraph(tuple(range(m)), w))


def random_symmetric_chain(rng: np.random.Generator, m: int, density: float = 0.6) -> ReversibleChain:
    """I - L/c for a random connected graph Laplacian L, with c above the max degree."""
    w = _connected_weights(rng, m, density)
    L = np.diag(w.sum(axis=1)) - w
    c = w.sum(axis=1).max() * rng.uniform(1.1, 2.0) if m > 1 else 1.0
    P = np.eye(m) - L / c
    return ReversibleChain(tuple(range(m)), (P + P.T) / 2, np.full(m, 1.0 / m))


def random_crested_spec(rng: np.random.Generator, n_max: int = 4, m_max: int = 4,
                        symmetric_after_pivot: bool = True) -> CrestedSpec:
    """Random partition and weights; factors after the first N coordinate are symmetric."""
    n = int(rng.integers(1, n_max + 1))
    sizes = rng.integers(2, m_max + 1, n)
    partition = tuple(rng.choice(["C", "N"], n))
    pivot = partition.index("N") if "N" in partition else n - 1
    factors = []
    for i, m in enumerate(sizes):
        if i > pivot and symmetric_after_pivot:
            factors.append(random_symmetric_chain(rng, int(m)))
        else:
            factors.append(random_reversible_chain(rng, int(m)))
    weights = rng.dirichlet(np.ones(n))
    weights = np.maximum(weights, 1e-3)
    return CrestedSpec(tuple(factors), partition, weights / weights.sum())


def random_corpus(seed: int, count: int, **kwargs) -> list[CrestedSpec]:
    rng = make_rng(seed)
    return [random_crested_spec(rng, **kwargs) for _ in range(count)]
