"""The first crested product of reversible chains and its spectral theory.

Coordinates are 0-based. ``partition[i]`` is ``"C"`` (crossed: only
coordinate i moves) or ``"N"`` (nested: coordinate i moves and every later
coordinate is redrawn uniformly). The crossed product is the all-``C``
case and the nested product the all-``N`` case.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .chain_core import (
    EPS_CLUSTER,
    EPS_DB,
    EPS_ROW,
    ChainError,
    Ergodicity,
    ReversibleChain,
    SpectralData,
    UnknownStateError,
    classify_ergodicity,
    eigenvalue_clusters,
    mixed_radix_states,
    spectral_decomposition,
)


class NotReversible(ChainError):
    def __init__(self, witness: int):
        super().__init__(f"factor {witness} is not symmetric but follows the first nested coordinate")
        self.witness = witness


@dataclass(frozen=True)
class CrestedSpec:
    factors: tuple[ReversibleChain, ...]
    partition: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        factors = tuple(self.factors)
        partition = tuple(p.upper() for p in self.partition)
        weights = np.array(self.weights, dtype=float)
        weights.setflags(write=False)
        n = len(factors)
        if n == 0:
            raise ChainError("at least one factor is required")
        if len(partition) != n or weights.shape != (n,):
            raise ChainError("factors, partition and weights must have equal length")
        if any(p not in ("C", "N") for p in partition):
            raise ChainError("partition entries must be 'C' or 'N'")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > EPS_ROW:
            raise ChainError("weights must be strictly positive and sum to 1")
        for i, f in enumerate(factors):
            if classify_ergodicity(spectral_decomposition(f)) is Ergodicity.REDUCIBLE:
                raise ChainError(f"factor {i} is reducible")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(f.size for f in self.factors)

    @property
    def first_nested(self) -> int | None:
        return self.partition.index("N") if "N" in self.partition else None

    @property
    def pivot(self) -> int:
        """Last coordinate that keeps its own stationary measure.

        This is the first nested coordinate, or ``n - 1`` when every
        coordinate is crossed (the two cases give the same formulas).
        """
        i1 = self.first_nested
        return self.n - 1 if i1 is None else i1

    @property
    def states(self) -> tuple:
        return mixed_radix_states(self.sizes)


def crossed_spec(factors: Sequence[ReversibleChain], weights=None) -> CrestedSpec:
    n = len(factors)
    w = np.full(n, 1.0 / n) if weights is None else weights
    return CrestedSpec(tuple(factors), ("C",) * n, w)


def nested_spec(factors: Sequence[ReversibleChain], weights=None) -> CrestedSpec:
    n = len(factors)
    w = np.full(n, 1.0 / n) if weights is None else weights
    return CrestedSpec(tuple(factors), ("N",) * n, w)


def _kron(mats) -> np.ndarray:
    return reduce(np.kron, mats)


def first_crested_matrix(spec: CrestedSpec) -> np.ndarray:
    """Transition matrix of the product, whether or not it is reversible."""
    sizes = spec.sizes
    P = np.zeros((math.prod(sizes),) * 2)
    for i, (f, kind, p) in enumerate(zip(spec.factors, spec.partition, spec.weights)):
        before = [np.eye(m) for m in sizes[:i]]
        if kind == "C":
            after = [np.eye(m) for m in sizes[i + 1:]]
        else:
            after = [np.full((m, m), 1.0 / m) for m in sizes[i + 1:]]
        P += p * _kron(before + [f.P] + after)
    return P


@dataclass(frozen=True)
class Reversibility:
    reversible: bool
    pi: np.ndarray | None = None
    witness: int | None = None


def crested_pi(spec: CrestedSpec) -> np.ndarray:
    t = spec.pivot
    parts = [f.pi for f in spec.factors[: t + 1]]
    parts += [np.full(m, 1.0 / m) for m in spec.sizes[t + 1:]]
    return _kron(parts)


def check_crested_reversibility(spec: CrestedSpec, eps: float = EPS_DB) -> Reversibility:
    """The product is reversible iff every factor after the first nested one is symmetric."""
    for k in range(spec.pivot + 1, spec.n):
        if not spec.factors[k].is_symmetric(eps):
            return Reversibility(False, witness=k)
    return Reversibility(True, pi=crested_pi(spec))


def assemble_first_crested(spec: CrestedSpec) -> ReversibleChain:
    rev = check_crested_reversibility(spec)
    if not rev.reversible:
        raise NotReversible(rev.witness)
    return ReversibleChain(spec.states, first_crested_matrix(spec), rev.pi)


# -- analytic spectrum ------------------------------------------------------

@dataclass(frozen=True)
class FactorTag:
    """One tensor factor of an eigenspace.

    ``kind`` is ``"full"`` (all of L(X_i)), ``"eig"`` (eigenspace ``space``
    of P_i, ``space >= 1``) or ``"trivial"`` (the constants).
    """

    kind: str
    coord: int
    space: int = 0

    def __str__(self):
        if self.kind == "full":
            return f"L{self.coord}"
        return f"V{self.coord}.{self.space if self.kind == 'eig' else 0}"


@dataclass(frozen=True)
class EigenspaceDescriptor:
    factor_labels: tuple[FactorTag, ...]
    eigenvalue: float
    dimension: int
    basis: np.ndarray | None = None

    @property
    def label(self) -> str:
        return "*".join(str(t) for t in self.factor_labels)


@dataclass(frozen=True)
class FactorEigenspaces:
    """A factor's spectral data with eigenvectors grouped by distinct eigenvalue."""

    spectral: SpectralData
    values: tuple[float, ...]
    columns: tuple[tuple[int, ...], ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.columns)


def factor_eigenspaces(s: SpectralData, tol: float = EPS_CLUSTER) -> FactorEigenspaces:
    """Group eigenvectors; the constant eigenvector is pinned to column 0.

    Column 0 of ``U`` is replaced by the exact all-ones vector, which is
    the pi-normalized eigenvector for eigenvalue 1 of an irreducible chain.
    """
    clusters = eigenvalue_clusters(s.lambdas, tol)
    val0, cols0 = clusters[0]
    if len(cols0) != 1 or abs(val0 - 1.0) > tol:
        raise ChainError("factor chain must be irreducible (simple eigenvalue 1)")
    U = np.array(s.U)
    if np.max(np.abs(U[:, cols0[0]] - 1.0)) > 1e-6:
        raise ChainError("leading eigenvector is not constant")
    order = [cols0[0]] + [i for _, c in clusters[1:] for i in c]
    U = U[:, order]
    U[:, 0] = 1.0
    lambdas = np.asarray(s.lambdas)[order]
    U.setflags(write=False)
    lambdas.setflags(write=False)
    spec = SpectralData(s.states, lambdas, U, s.pi)
    values, columns, start = [], [], 0
    for v, c in clusters:
        values.append(v)
        columns.append(tuple(range(start, start + len(c))))
        start += len(c)
    return FactorEigenspaces(spec, tuple(values), tuple(columns))


def _factor_data(spec: CrestedSpec, factor_spectra) -> list[FactorEigenspaces]:
    if factor_spectra is None:
        factor_spectra = [spectral_decomposition(f) for f in spec.factors]
    if len(factor_spectra) != spec.n:
        raise ChainError("one SpectralData per factor is required")
    out = []
    for f, s in zip(spec.factors, factor_spectra):
        if isinstance(s, FactorEigenspaces):
            out.append(s)
            continue
        if s.size != f.size:
            raise ChainError("spectral data does not match factor size")
        out.append(factor_eigenspaces(s))
    return out


def _tag_basis(tag: FactorTag, fe: FactorEigenspaces) -> np.ndarray:
    U = fe.spectral.U
    if tag.kind == "full":
        return np.diag(1.0 / np.sqrt(fe.spectral.pi))
    if tag.kind == "trivial":
        return U[:, :1]
    return U[:, list(fe.columns[tag.space])]


def analytic_spectrum_first(spec: CrestedSpec, factor_spectra=None,
                            with_basis: bool = False) -> list[EigenspaceDescriptor]:
    """Eigenspaces of a reversible first crested product from factor spectra.

    Two families are produced. For each coordinate ``k`` after the pivot
    and each nontrivial eigenspace of P_k: earlier crossed coordinates run
    over their eigenspaces, earlier nested coordinates contribute all of
    L(X_i), later coordinates are constant. Then, for every choice of
    eigenspaces on coordinates ``0..pivot``, the remaining coordinates are
    constant.
    """
    rev = check_crested_reversibility(spec)
    if not rev.reversible:
        raise NotReversible(rev.witness)
    data = _factor_data(spec, factor_spectra)
    p = spec.weights
    n, t = spec.n, spec.pivot
    out = []

    def emit(tags, value):
        dim = 1
        for tag in tags:
            dim *= data[tag.coord].spectral.size if tag.kind == "full" else \
                (1 if tag.kind == "trivial" else data[tag.coord].dims[tag.space])
        basis = None
        if with_basis:
            basis = _kron([_tag_basis(tag, data[tag.coord]) for tag in tags])
        out.append(EigenspaceDescriptor(tuple(tags), float(value), dim, basis))

    def eig_tag(i, j):
        return FactorTag("trivial", i) if j == 0 else FactorTag("eig", i, j)

    for k in range(t + 1, n):
        tail = float(p[k + 1:].sum())
        choices = []
        for i in range(k):
            if spec.partition[i] == "N":
                choices.append([None])
            else:
                choices.append(range(len(data[i].values)))
        for jk in range(1, len(data[k].values)):
            for js in itertools.product(*choices):
                tags, value = [], p[k] * data[k].values[jk] + tail
                for i, j in enumerate(js):
                    if j is None:
                        tags.append(FactorTag("full", i))
                    else:
                        tags.append(eig_tag(i, j))
                        value += p[i] * data[i].values[j]
                tags.append(FactorTag("eig", k, jk))
                tags += [FactorTag("trivial", i) for i in range(k + 1, n)]
                emit(tags, value)

    tail = float(p[t + 1:].sum())
    for js in itertools.product(*(range(len(data[i].values)) for i in range(t + 1))):
        value = tail + sum(p[i] * data[i].values[j] for i, j in enumerate(js))
        tags = [eig_tag(i, j) for i, j in enumerate(js)]
        tags += [FactorTag("trivial", i) for i in range(t + 1, n)]
        emit(tags, value)
    return out


def merge_descriptors(descs, tol: float = EPS_CLUSTER) -> list[tuple[float, int, str]]:
    """Collapse coincident eigenvalues into (eigenvalue, total dim, labels)."""
    values = [d.eigenvalue for d in descs]
    merged = []
    for v, members in eigenvalue_clusters(values, tol):
        dim = sum(descs[i].dimension for i in members)
        merged.append((v, dim, "+".join(descs[i].label for i in members)))
    return merged


def descriptor_family(desc: EigenspaceDescriptor, pivot: int) -> int:
    """Coordinate k > pivot carrying the nontrivial factor, or -1 for the second family."""
    ks = [t.coord for t in desc.factor_labels if t.kind == "eig" and t.coord > pivot]
    return ks[0] if ks else -1


def group_descriptors(descs, pivot: int, tol: float = EPS_CLUSTER) -> list[tuple[float, int, str]]:
    """Merge equal eigenvalues within each family only, sorted by decreasing eigenvalue.

    Collisions between the two families (or between different k) stay as
    separate rows; ``merge_descriptors`` merges those too.
    """
    rows = []
    families = sorted({descriptor_family(d, pivot) for d in descs})
    for fam in families:
        members = [d for d in descs if descriptor_family(d, pivot) == fam]
        rows += merge_descriptors(members, tol)
    return sorted(rows, key=lambda r: -r[0])


def _diag_lambda(spec: CrestedSpec, data: list[FactorEigenspaces]) -> np.ndarray:
    # the P formula with P_i -> Lambda_i and J_i -> diag(1, 0, ..., 0)
    sizes = spec.sizes
    lam = np.zeros(math.prod(sizes))
    for i, (kind, p) in enumerate(zip(spec.partition, spec.weights)):
        before = [np.ones(m) for m in sizes[:i]]
        if kind == "C":
            after = [np.ones(m) for m in sizes[i + 1:]]
        else:
            after = [np.eye(m)[0] for m in sizes[i + 1:]]
        lam += p * _kron(before + [np.asarray(data[i].spectral.lambdas)] + after)
    return lam


def assemble_U_D_Delta(spec: CrestedSpec, factor_spectra=None, sparse: bool = True):
    """Eigenvector, stationary and eigenvalue matrices of the product.

    With ``sparse=True`` the eigenvector matrix mixes normalized delta
    functions on nested coordinates with factor eigenvectors; with
    ``sparse=False`` it is the plain tensor product of factor eigenvectors.
    The eigenvalue matrix is the same in both cases.
    """
    rev = check_crested_reversibility(spec)
    if not rev.reversible:
        raise NotReversible(rev.witness)
    data = _factor_data(spec, factor_spectra)
    Us = [np.asarray(d.spectral.U) for d in data]
    sizes, t = spec.sizes, spec.pivot
    if sparse:
        A = []
        for m in sizes:
            a = np.zeros((m, m))
            a[:, 0] = 1.0
            A.append(a)
        M = [np.diag(1.0 / np.sqrt(d.spectral.pi)) if kind == "N" else U
             for d, kind, U in zip(data, spec.partition, Us)]
        U = _kron(Us[: t + 1] + A[t + 1:])
        for k in range(t + 1, spec.n):
            U = U + _kron(M[:k] + [Us[k] - A[k]] + A[k + 1:])
    else:
        U = _kron(Us)
    D = np.diag(_kron([d.spectral.pi for d in data[: t + 1]] +
                      [np.full(m, 1.0 / m) for m in sizes[t + 1:]]))
    return U, D, np.diag(_diag_lambda(spec, data))


def product_spectral_data(spec: CrestedSpec, factor_spectra=None, sparse: bool = True) -> SpectralData:
    U, D, L = assemble_U_D_Delta(spec, factor_spectra, sparse)
    return SpectralData(spec.states, np.diag(L).copy(), U, np.diag(D).copy())


def kstep_first(spec: CrestedSpec, factor_spectra, k: int, x, y) -> float:
    """k-step transition probability from the sparse eigenvector matrix."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    sizes = spec.sizes
    for s in (x, y):
        if len(s) != len(sizes) or any(not 0 <= c < m for c, m in zip(s, sizes)):
            raise UnknownStateError(s)
    U, D, L = assemble_U_D_Delta(spec, factor_spectra)
    i = int(np.ravel_multi_index(tuple(x), sizes))
    j = int(np.ravel_multi_index(tuple(y), sizes))
    cols = np.nonzero(U[i])[0]
    lam = np.diag(L)[cols]
    return float(D[j, j] * np.sum(U[i, cols] * lam**k * U[j, cols]))


def crossed_dimension_census(factor_spectra) -> dict[tuple[int, ...], int]:
    """Eigenspace counts of a homogeneous crossed product with uniform weights.

    Keys are occupation patterns (r_0, ..., r_q) over the factor's distinct
    eigenvalues; the value is multinomial(n; r) * prod dim(V_i)^{r_i}. The
    eigenvalue of pattern r is sum_i r_i lambda_i / n.
    """
    data = [s if isinstance(s, FactorEigenspaces) else factor_eigenspaces(s) for s in factor_spectra]
    first = data[0]
    for d in data[1:]:
        if len(d.values) != len(first.values) or d.dims != first.dims or \
                np.max(np.abs(np.subtract(d.values, first.values))) > EPS_CLUSTER:
            raise ChainError("census requires identical factors")
    n, q = len(data), len(first.values)
    census = {}
    for r in _compositions(n, q):
        census[r] = _multinomial(n, r) * math.prod(di**ri for ri, di in zip(r, first.dims))
    return census


def _multinomial(n: int, parts) -> int:
    out = math.factorial(n)
    for r in parts:
        out //= math.factorial(r)
    return out


def _compositions(n: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``n``."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest
