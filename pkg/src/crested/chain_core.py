"""Finite reversible Markov chains: detailed balance, spectra, k-step laws.

All chains are dense. State labels are arbitrary hashables; product chains
use mixed-radix tuples in row-major order (coordinate 0 most significant),
which is the ordering produced by ``np.kron``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Sequence

import numpy as np

EPS_ROW = 1e-12
EPS_DB = 1e-10
EPS_EIG = 1e-9
EPS_CLUSTER = 1e-7


class ChainError(ValueError):
    """Invalid chain data."""


class DetailedBalanceError(ChainError):
    pass


class IsolatedVertexError(ChainError):
    pass


class UnknownStateError(KeyError):
    pass


class Ergodicity(str, Enum):
    ERGODIC = "ergodic"
    REDUCIBLE = "reducible"
    PERIODIC = "periodic"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def mixed_radix_states(sizes: Sequence[int]) -> tuple:
    return tuple(itertools.product(*(range(m) for m in sizes)))


def check_detailed_balance(P, pi, eps: float = EPS_DB) -> bool:
    """True iff max |pi(x)P(x,y) - pi(y)P(y,x)| <= eps."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or pi.shape != (P.shape[0],):
        raise ChainError(f"dimension mismatch: P {P.shape}, pi {pi.shape}")
    flux = pi[:, None] * P
    return bool(np.max(np.abs(flux - flux.T), initial=0.0) <= eps)


@dataclass(frozen=True)
class ReversibleChain:
    """Row-stochastic ``P`` in detailed balance with the strict measure ``pi``."""

    states: tuple
    P: np.ndarray
    pi: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = _frozen(self.P)
        pi = _frozen(self.pi)
        states = tuple(self.states)
        m = len(states)
        if P.shape != (m, m) or pi.shape != (m,):
            raise ChainError(f"shape mismatch: {m} states, P {P.shape}, pi {pi.shape}")
        if np.any(P < -EPS_ROW) or np.any(P > 1 + EPS_ROW):
            raise ChainError("transition probabilities outside [0, 1]")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > EPS_ROW:
            raise ChainError("rows of P do not sum to 1")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > EPS_ROW:
            raise ChainError("pi must be a strictly positive probability vector")
        if not check_detailed_balance(P, pi, EPS_DB):
            raise DetailedBalanceError("P and pi are not in detailed balance")
        index = {s: i for i, s in enumerate(states)}
        if len(index) != m:
            raise ChainError("duplicate state labels")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state: Hashable) -> int:
        try:
            return self._index[state]
        except (KeyError, TypeError):
            raise UnknownStateError(state) from None

    def is_symmetric(self, eps: float = EPS_DB) -> bool:
        return bool(np.max(np.abs(self.P - self.P.T)) <= eps)

    @classmethod
    def from_matrix(cls, P, states=None) -> "ReversibleChain":
        """Build a chain from ``P`` alone, taking pi as its stationary law."""
        P = np.asarray(P, dtype=float)
        if states is None:
            states = tuple(range(P.shape[0]))
        return cls(states, P, stationary_distribution(P))


@dataclass(frozen=True)
class SpectralData:
    """``P U = U diag(lambdas)`` and ``U^T D U = I`` with ``D = diag(pi)``."""

    states: tuple
    lambdas: np.ndarray
    U: np.ndarray
    pi: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.pi)

    @property
    def size(self) -> int:
        return len(self.states)

    def residuals(self, P) -> tuple[float, float]:
        """Max-norm residuals of the two defining relations."""
        eig = np.max(np.abs(P @ self.U - self.U * self.lambdas))
        orth = np.max(np.abs(self.U.T @ (self.pi[:, None] * self.U) - np.eye(self.size)))
        return float(eig), float(orth)


@dataclass(frozen=True)
class WeightedGraph:
    vertices: tuple
    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w)
        if w.shape != (len(self.vertices),) * 2:
            raise ChainError("weight matrix does not match vertex list")
        if np.any(w < 0):
            raise ChainError("weights must be nonnegative")
        if np.max(np.abs(w - w.T), initial=0.0) > EPS_DB * max(1.0, np.abs(w).max(initial=0.0)):
            raise ChainError("weights must be symmetric")
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "w", w)

    @property
    def vertex_weights(self) -> np.ndarray:
        return self.w.sum(axis=1)

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.w > 0))
        return list(zip(i.tolist(), j.tolist()))

    def connected_components(self) -> int:
        m = len(self.vertices)
        parent = list(range(m))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in self.edges():
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
        return len({find(a) for a in range(m)})


def chain_from_weights(g: WeightedGraph) -> ReversibleChain:
    """Random walk on a weighted graph: p = w/W(x), pi = W(x)/W."""
    W = g.vertex_weights
    if np.any(W <= 0):
        bad = [g.vertices[i] for i in np.nonzero(W <= 0)[0]]
        raise IsolatedVertexError(f"isolated vertices: {bad}")
    P = g.w / W[:, None]
    return ReversibleChain(g.vertices, P, W / W.sum())


def weights_from_chain(c: ReversibleChain, eps: float = EPS_DB) -> WeightedGraph:
    if not check_detailed_balance(c.P, c.pi, eps):
        raise DetailedBalanceError("chain is not in detailed balance")
    w = c.pi[:, None] * c.P
    return WeightedGraph(c.states, (w + w.T) / 2)


def uniform_chain(m: int) -> ReversibleChain:
    """The matrix J_m: jump to a uniformly chosen state."""
    return ReversibleChain(tuple(range(m)), np.full((m, m), 1.0 / m), np.full(m, 1.0 / m))


def stationary_distribution(P) -> np.ndarray:
    """Left eigenvector of P for eigenvalue 1, normalized to a probability."""
    P = np.asarray(P, dtype=float)
    vals, vecs = np.linalg.eig(P.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def _sign_fix(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first coordinate with |v| > tol made positive
    V = V.copy()
    for j in range(V.shape[1]):
        nz = np.nonzero(np.abs(V[:, j]) > tol)[0]
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def spectral_from_symmetric(states, pi, lambdas, V) -> SpectralData:
    """Turn an orthonormal eigenbasis of D^{1/2} P D^{-1/2} into SpectralData."""
    order = np.argsort(-lambdas, kind="stable")
    lambdas = lambdas[order]
    V = _sign_fix(V[:, order])
    U = V / np.sqrt(pi)[:, None]
    return SpectralData(tuple(states), _frozen(lambdas), _frozen(U), _frozen(pi))


def symmetrized(c: ReversibleChain) -> np.ndarray:
    r = np.sqrt(c.pi)
    S = r[:, None] * c.P / r[None, :]
    return (S + S.T) / 2


def spectral_decomposition(c: ReversibleChain) -> SpectralData:
    """Spectral data via LAPACK; eigenvalues sorted in decreasing order."""
    lambdas, V = np.linalg.eigh(symmetrized(c))
    return spectral_from_symmetric(c.states, c.pi, lambdas, V)


def kstep_probability(s: SpectralData, k: int, x, y) -> float:
    """p^(k)(x, y) = pi(y) sum_z u(x,z) lambda_z^k u(y,z)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    index = {st: i for i, st in enumerate(s.states)}
    try:
        i, j = index[x], index[y]
    except (KeyError, TypeError) as e:
        raise UnknownStateError(e.args[0]) from None
    return float(s.pi[j] * np.sum(s.U[i] * s.lambdas**k * s.U[j]))


def kstep_matrix(s: SpectralData, k: int) -> np.ndarray:
    return (s.U * s.lambdas**k) @ (s.U.T * s.pi[None, :])


def eigenvalue_clusters(values, tol: float = EPS_CLUSTER) -> list[tuple[float, list[int]]]:
    """Group indices of ``values`` into clusters of nearby eigenvalues.

    Clusters are built on the sorted (decreasing) values by chaining gaps
    smaller than ``tol``; each cluster is reported with its mean value.
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")
    clusters: list[list[int]] = []
    for i in order:
        if clusters and values[clusters[-1][-1]] - values[i] <= tol:
            clusters[-1].append(int(i))
        else:
            clusters.append([int(i)])
    return [(float(values[c].mean()), c) for c in clusters]


def classify_ergodicity(s: SpectralData, eps: float = EPS_EIG) -> Ergodicity:
    ones = int(np.sum(np.abs(s.lambdas - 1.0) <= eps))
    if ones > 1:
        return Ergodicity.REDUCIBLE
    if np.any(s.lambdas <= -1.0 + eps):
        return Ergodicity.PERIODIC
    return Ergodicity.ERGODIC
