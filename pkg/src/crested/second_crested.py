"""The second crested product on partial functions Theta_h.

A state is a function from an h-subset of X = {0..n-1} into Y = {0..s-1}.
With probability p0 one image moves by Q (operator M); with probability
1 - p0 one point of the domain is swapped for a point outside it, which
receives a uniform image (operator Delta / norm(Delta)).

States are ordered by domain (``itertools.combinations`` order) and then
by image word, so L(Theta_h) is a direct sum of blocks L(Y^A) and the
block of a domain is in ``np.kron`` order.

Eigenspaces are indexed by a type vector ``a = (a_0, ..., a_m)`` counting
how many tensor factors lie in each eigenspace W_j of Q (W_0 = constants)
and a level ``k``: the kernel of D inside the level-k functions is lifted
back up to level h by repeated D*.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .chain_core import (
    EPS_CLUSTER,
    ChainError,
    Ergodicity,
    ReversibleChain,
    classify_ergodicity,
    eigenvalue_clusters,
    spectral_decomposition,
)
from .first_crested import assemble_first_crested, crossed_spec
from .insect import TreeShape, insect_eigenvalues, insect_kernel


class DegenerateDelta(ChainError):
    pass


class PartialFunction(NamedTuple):
    domain: tuple[int, ...]
    images: tuple[int, ...]

    def __call__(self, x: int) -> int:
        return self.images[self.domain.index(x)]

    def restrict(self, drop: int) -> "PartialFunction":
        """Restriction obtained by removing domain position ``drop``."""
        return PartialFunction(self.domain[:drop] + self.domain[drop + 1:],
                               self.images[:drop] + self.images[drop + 1:])


@lru_cache(maxsize=None)
def _theta(n: int, k: int, s: int) -> tuple[PartialFunction, ...]:
    return tuple(PartialFunction(A, y)
                 for A in itertools.combinations(range(n), k)
                 for y in itertools.product(range(s), repeat=k))


@lru_cache(maxsize=None)
def _theta_index(n: int, k: int, s: int) -> dict:
    return {st: i for i, st in enumerate(_theta(n, k, s))}


def enumerate_states(n: int, h: int, y_size: int) -> tuple[PartialFunction, ...]:
    if not 1 <= h <= n:
        raise ValueError(f"need 1 <= h <= n, got h={h}, n={n}")
    return _theta(n, h, y_size)


def build_delta(n: int, h: int, y_size: int) -> tuple[np.ndarray, int]:
    """Adjacency of partial functions whose domains share h-1 points and agree there."""
    if not 1 <= h < n:
        raise DegenerateDelta(f"Delta needs 1 <= h < n, got h={h}, n={n}")
    states = _theta(n, h, y_size)
    index = _theta_index(n, h, y_size)
    D = np.zeros((len(states), len(states)))
    for i, th in enumerate(states):
        outside = [x for x in range(n) if x not in th.domain]
        for drop in range(h):
            base = th.restrict(drop)
            for new in outside:
                pos = sum(1 for x in base.domain if x < new)
                dom = base.domain[:pos] + (new,) + base.domain[pos:]
                for y in range(y_size):
                    img = base.images[:pos] + (y,) + base.images[pos:]
                    D[i, index[PartialFunction(dom, img)]] = 1.0
    return D, y_size * (n - h) * h


def _require_symmetric(Q: ReversibleChain):
    if not Q.is_symmetric():
        raise ChainError("Q must be symmetric (the stationary law on Y must be uniform)")


def build_M(n: int, h: int, Q: ReversibleChain) -> np.ndarray:
    """Block-diagonal over domains; each block moves one uniformly chosen image by Q."""
    _require_symmetric(Q)
    s = Q.size
    block = np.zeros((s**h, s**h))
    for j in range(h):
        mats = [np.eye(s)] * j + [Q.P] + [np.eye(s)] * (h - j - 1)
        block += _kron(mats) / h
    return np.kron(np.eye(math.comb(n, h)), block)


def _kron(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def build_P(p0: float, M: np.ndarray, delta: np.ndarray, norm: int, states=None) -> ReversibleChain:
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    if M.shape != delta.shape:
        raise ChainError("M and Delta have different shapes")
    P = p0 * M + (1 - p0) * delta / norm
    N = P.shape[0]
    return ReversibleChain(states if states is not None else tuple(range(N)), P, np.full(N, 1.0 / N))


@dataclass(frozen=True)
class SecondCrestedSpec:
    n: int
    h: int
    Q: ReversibleChain
    p0: float

    def __post_init__(self):
        if not 1 <= self.h <= self.n:
            raise ValueError(f"need 1 <= h <= n, got h={self.h}, n={self.n}")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")
        _require_symmetric(self.Q)
        if classify_ergodicity(spectral_decomposition(self.Q)) is Ergodicity.REDUCIBLE:
            raise ChainError("Q must be irreducible")

    @property
    def y_size(self) -> int:
        return self.Q.size

    @property
    def states(self) -> tuple[PartialFunction, ...]:
        return enumerate_states(self.n, self.h, self.y_size)


def assemble_second_crested(spec: SecondCrestedSpec) -> ReversibleChain:
    """The chain P = p0 M + (1 - p0) Delta/norm; for h = n it is M alone."""
    states = spec.states
    if spec.h == spec.n:
        crossed = assemble_first_crested(crossed_spec([spec.Q] * spec.n))
        return ReversibleChain(states, crossed.P, crossed.pi)
    delta, norm = build_delta(spec.n, spec.h, spec.y_size)
    return build_P(spec.p0, build_M(spec.n, spec.h, spec.Q), delta, norm, states)


def crested_bernoulli_laplace(n: int, h: int, Q: ReversibleChain, p0: float) -> SecondCrestedSpec:
    """Two urns holding h and n - h balls; balls in urn 0 carry labels moved by Q."""
    return SecondCrestedSpec(n, h, Q, p0)


# -- differential operators -------------------------------------------------

def apply_D(F, n: int, k: int, y_size: int) -> np.ndarray:
    """(D_k F)(phi) = sum of F over the one-point extensions of phi."""
    out = np.zeros(len(_theta(n, k - 1, y_size)))
    index = _theta_index(n, k - 1, y_size)
    for th, v in zip(_theta(n, k, y_size), np.asarray(F, dtype=float)):
        for drop in range(k):
            out[index[th.restrict(drop)]] += v
    return out


def apply_Dstar(F, n: int, k: int, y_size: int) -> np.ndarray:
    """(D*_k F)(theta) = sum of F over the restrictions of theta to k-1 points."""
    F = np.asarray(F, dtype=float)
    index = _theta_index(n, k - 1, y_size)
    return np.array([sum(F[index[th.restrict(drop)]] for drop in range(k))
                     for th in _theta(n, k, y_size)])


@lru_cache(maxsize=None)
def d_matrix(n: int, k: int, y_size: int) -> sp.csr_matrix:
    """Sparse matrix of D_k : L(Theta_k) -> L(Theta_{k-1}); D*_k is its transpose."""
    index = _theta_index(n, k - 1, y_size)
    rows, cols = [], []
    for j, th in enumerate(_theta(n, k, y_size)):
        for drop in range(k):
            rows.append(index[th.restrict(drop)])
            cols.append(j)
    shape = (len(_theta(n, k - 1, y_size)), len(_theta(n, k, y_size)))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=shape)


# -- eigenspaces of Q and fundamental functions -----------------------------

@dataclass(frozen=True)
class QEigenspaces:
    """Distinct eigenvalues of Q with orthonormal bases (counting measure).

    ``bases[0]`` is the constant vector; ``values[0] == 1``.
    """

    values: tuple[float, ...]
    bases: tuple[np.ndarray, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.bases)

    @property
    def y_size(self) -> int:
        return self.bases[0].shape[0]


def q_eigenspaces(Q: ReversibleChain, tol: float = EPS_CLUSTER) -> QEigenspaces:
    _require_symmetric(Q)
    s = Q.size
    sd = spectral_decomposition(Q)
    V = np.asarray(sd.U) / np.sqrt(s)
    clusters = eigenvalue_clusters(sd.lambdas, tol)
    if len(clusters[0][1]) != 1:
        raise ChainError("Q must be irreducible")
    bases = [np.full((s, 1), 1.0 / np.sqrt(s))]
    bases += [V[:, c] for _, c in clusters[1:]]
    return QEigenspaces(tuple(v for v, _ in clusters), tuple(bases))


def ell(a: Sequence[int]) -> int:
    return int(sum(a[1:]))


def _distinct_permutations(counts: Sequence[int]):
    """Words over {0..len(counts)-1} with the given letter counts, in lex order."""
    total = sum(counts)
    if total == 0:
        yield ()
        return
    counts = list(counts)
    for letter, c in enumerate(counts):
        if c:
            counts[letter] -= 1
            for rest in _distinct_permutations(counts):
                yield (letter,) + rest
            counts[letter] += 1


@dataclass(frozen=True)
class FundamentalFunction:
    """Tensor product over ``domain`` of Q-eigenvectors.

    ``spaces[t]`` is the eigenspace index of the factor attached to
    ``domain[t]`` and ``vectors[t]`` the vector itself.
    """

    domain: tuple[int, ...]
    spaces: tuple[int, ...]
    vectors: tuple[np.ndarray, ...]

    def type_vector(self, m: int) -> tuple[int, ...]:
        return tuple(self.spaces.count(j) for j in range(m))

    def evaluate(self, theta: PartialFunction) -> float:
        if theta.domain != self.domain:
            return 0.0
        return float(math.prod(v[y] for v, y in zip(self.vectors, theta.images)))

    def to_vector(self, n: int, y_size: int) -> np.ndarray:
        return np.array([self.evaluate(th) for th in _theta(n, len(self.domain), y_size)])


def fundamental_functions(n: int, k: int, a: Sequence[int], qs: QEigenspaces):
    """Orthonormal fundamental functions of type ``a`` on all k-subsets."""
    for A in itertools.combinations(range(n), k):
        for spaces in _distinct_permutations(a):
            for choice in itertools.product(*(range(qs.dims[j]) for j in spaces)):
                vecs = tuple(qs.bases[j][:, c] for j, c in zip(spaces, choice))
                yield FundamentalFunction(A, spaces, vecs)


def fundamental_basis(n: int, k: int, a: Sequence[int], qs: QEigenspaces) -> np.ndarray:
    """Columns spanning P_{k,a}, orthonormal in the counting inner product."""
    s = qs.y_size
    block = s**k
    N = math.comb(n, k) * block
    cols = []
    for rank, A in enumerate(itertools.combinations(range(n), k)):
        for spaces in _distinct_permutations(a):
            for choice in itertools.product(*(range(qs.dims[j]) for j in spaces)):
                col = np.zeros(N)
                col[rank * block:(rank + 1) * block] = _kron(
                    [qs.bases[j][:, [c]] for j, c in zip(spaces, choice)]).ravel()
                cols.append(col)
    return np.array(cols).T if cols else np.zeros((N, 0))


def apply_Q_ka(F: FundamentalFunction, n: int, y_size: int) -> np.ndarray:
    """The operator Q_{k,a} on a fundamental function.

    Nonzero only on theta whose domain meets dom(F) in k - 1 points, where
    it is |Y| F(theta-bar) if the missing factor is constant and 0
    otherwise; theta-bar moves theta's extra image onto the missing point.
    States meeting dom(F) in fewer points get 0.
    """
    A = F.domain
    k = len(A)
    out = np.zeros(len(_theta(n, k, y_size)))
    for idx, th in enumerate(_theta(n, k, y_size)):
        missing = [x for x in A if x not in th.domain]
        if len(missing) != 1:
            continue
        i = missing[0]
        if F.spaces[A.index(i)] != 0:
            continue
        (i0,) = [x for x in th.domain if x not in A]
        bar = tuple(th(i0) if x == i else th(x) for x in A)
        out[idx] = y_size * F.evaluate(PartialFunction(A, bar))
    return out


# -- eigenspaces of the second crested product ------------------------------

def _mgs(cols: np.ndarray, basis: list[np.ndarray], tol: float) -> list[np.ndarray]:
    """Modified Gram-Schmidt of ``cols`` against (and into) ``basis``."""
    for v in cols.T:
        w = v.astype(float).copy()
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm > tol * max(1.0, np.linalg.norm(v)):
            basis.append(w / nrm)
    return basis


def dim_P(n: int, k: int, a: Sequence[int], dims: Sequence[int]) -> int:
    """dim P_{k,a} = C(n,k) multinomial(k; a) prod dim(W_j)^{a_j}."""
    out = math.comb(n, k) * math.factorial(k)
    for aj in a:
        out //= math.factorial(aj)
    for aj, dj in zip(a[1:], dims[1:]):
        out *= dj**aj
    return out


def eigenspace_dimension(n: int, a: Sequence[int], k: int, dims: Sequence[int]) -> int:
    l = ell(a)
    frac = Fraction(n + l + 1 - 2 * k, n - k + 1) * math.comb(n, k) * math.comb(k, l)
    frac *= math.factorial(l)
    for aj in a[1:]:
        frac /= math.factorial(aj)
    for aj, dj in zip(a[1:], dims[1:]):
        frac *= dj**aj
    if frac.denominator != 1:
        raise ArithmeticError(f"non-integral dimension {frac} for a={a}, k={k}")
    return int(frac)


def level_range(n: int, h: int, a: Sequence[int]) -> range:
    l = ell(a)
    return range(l, min(h, n + l - h) + 1)


def _lower(a: Sequence[int], t: int) -> tuple[int, ...]:
    return (a[0] - t,) + tuple(a[1:])


def kernel_basis(n: int, k: int, b: Sequence[int], qs: QEigenspaces, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of Ker(D_k) inside P_{k,b}.

    Built as the orthogonal complement, inside P_{k,b}, of the image of
    P_{k-1,b'} under D*_k.
    """
    B = fundamental_basis(n, k, b, qs)
    if k == 0 or b[0] == 0:
        return B
    Bp = fundamental_basis(n, k - 1, _lower(b, 1), qs)
    R = B.T @ (d_matrix(n, k, qs.y_size).T @ Bp)
    span = _mgs(R, [], tol)
    if len(span) != Bp.shape[1]:
        raise ArithmeticError("D* is not injective on the lower level")
    full = _mgs(np.eye(B.shape[1]), list(span), tol)
    comp = np.array(full[len(span):]).T
    if comp.size == 0:
        return np.zeros((B.shape[0], 0))
    return B @ comp


def lift_norm_squared(n: int, l: int, k: int, h: int, y_size: int) -> int:
    """Squared-norm growth of h - k successive D* lifts of a level-k kernel function."""
    return math.factorial(n + l - 2 * k) * math.factorial(h - k) * y_size ** (h - k) \
        // math.factorial(n + l - k - h)


def crested_eigenvalue(p0: float, n: int, h: int, a: Sequence[int], k: int,
                            q_eigenvalues: Sequence[float]) -> float:
    """Eigenvalue of P on P_{h,a,k}: the M part plus the normalized Delta part."""
    if h >= n:
        raise DegenerateDelta("the Delta part needs h < n")
    l = ell(a)
    m_part = sum(aj * lam for aj, lam in zip(a, q_eigenvalues)) / h
    d_part = ((n + l - k - h) * (h - k + 1) - (n - h)) / (h * (n - h))
    return p0 * m_part + (1 - p0) * d_part


@dataclass(frozen=True)
class EigenTriple:
    h: int
    a: tuple[int, ...]
    k: int
    eigenvalue: float
    dimension: int
    basis: np.ndarray | None = None

    @property
    def label(self) -> str:
        return f"P[h={self.h},a={''.join(map(str, self.a)) if max(self.a) < 10 else self.a},k={self.k}]"


def triple_eigenvalue(spec: SecondCrestedSpec, a, k, q_values) -> float:
    if spec.h == spec.n:
        return sum(aj * lam for aj, lam in zip(a, q_values)) / spec.n
    return crested_eigenvalue(spec.p0, spec.n, spec.h, a, k, q_values)


def eigenspace_basis(spec: SecondCrestedSpec, a: Sequence[int], k: int, qs: QEigenspaces | None = None) -> EigenTriple:
    """P_{h,a,k} with a pi-orthonormal basis (pi uniform on Theta_h)."""
    n, h = spec.n, spec.h
    a = tuple(a)
    if qs is None:
        qs = q_eigenspaces(spec.Q)
    if sum(a) != h or len(a) != len(qs.values) or min(a) < 0:
        raise ValueError(f"type {a} is not a type vector of length {len(qs.values)} summing to {h}")
    if k not in level_range(n, h, a):
        raise ValueError(f"level k={k} outside {level_range(n, h, a)} for type {a}")
    V = kernel_basis(n, k, _lower(a, h - k), qs)
    for t in range(k + 1, h + 1):
        V = d_matrix(n, t, qs.y_size).T @ V
    V = V / math.sqrt(lift_norm_squared(n, ell(a), k, h, qs.y_size))
    V = V * math.sqrt(V.shape[0])
    return EigenTriple(h, a, k, triple_eigenvalue(spec, a, k, qs.values), V.shape[1], V)


def type_vectors(h: int, parts: int):
    if parts == 1:
        yield (h,)
        return
    for first in range(h, -1, -1):
        for rest in type_vectors(h - first, parts - 1):
            yield (first,) + rest


def second_crested_census(spec: SecondCrestedSpec, with_basis: bool = False) -> list[EigenTriple]:
    """All nonzero eigenspaces P_{h,a,k} with eigenvalues and dimensions."""
    qs = q_eigenspaces(spec.Q)
    out = []
    for a in type_vectors(spec.h, len(qs.values)):
        for k in level_range(spec.n, spec.h, a):
            dim = eigenspace_dimension(spec.n, a, k, qs.dims)
            if dim == 0:
                continue
            if with_basis:
                out.append(eigenspace_basis(spec, a, k, qs))
            else:
                out.append(EigenTriple(spec.h, a, k, triple_eigenvalue(spec, a, k, qs.values), dim))
    return out


# -- bi-insect ---------------------------------------------------------------

def bi_insect_spec(n: int, q: int, m: int, p0: float) -> SecondCrestedSpec:
    """Two insects in distinct depth-(m-1) q-ary subtrees below a root of degree n."""
    _check_bi_insect(n, q, m)
    Q = insect_kernel(TreeShape((q,) * (m - 1)))
    Q = ReversibleChain(tuple(range(Q.size)), Q.P, Q.pi)
    return SecondCrestedSpec(n, 2, Q, p0)


def _check_bi_insect(n, q, m):
    if n < 3 or q < 2 or m < 3:
        raise ValueError("bi-insect needs n >= 3, q >= 2, m >= 3")


@dataclass(frozen=True)
class BiInsectRow:
    a: tuple[int, ...]
    k: int
    eigenvalue: float
    dimension: int

    @property
    def label(self) -> str:
        return f"P[h=2,a={''.join(map(str, self.a))},k={self.k}]"


def bi_insect_spectrum(n: int, q: int, m: int, p0: float) -> list[BiInsectRow]:
    """Closed-form eigenvalue/dimension table of the bi-insect chain.

    W_i (i = 1..m-1) are the insect eigenspaces on Y, of dimension
    (q-1) q^(i-1). For two factors in the same W_i the dimension is
    n(n-1)/2 dim(W_i)^2.
    """
    _check_bi_insect(n, q, m)
    lam = insect_eigenvalues(TreeShape((q,) * (m - 1)))
    dims = [(q - 1) * q ** (i - 1) for i in range(1, m)]

    def a_of(*spaces):
        a = [0] * m
        for j in spaces:
            a[j] += 1
        return tuple(a)

    rows = []
    for i in range(1, m):
        for j in range(i, m):
            if i == j:
                dim = n * (n - 1) // 2 * dims[i - 1] ** 2
            else:
                dim = n * (n - 1) * dims[i - 1] * dims[j - 1]
            rows.append(BiInsectRow(a_of(i, j), 2, p0 / 2 * (lam[i] + lam[j]), dim))
    for i in range(1, m):
        rows.append(BiInsectRow(a_of(0, i), 2, p0 * (1 + lam[i]) / 2 - (1 - p0) / (2 * (n - 2)),
                                n * (n - 2) * dims[i - 1]))
    rows.append(BiInsectRow(a_of(0, 0), 2, p0 - (1 - p0) / (n - 2), n * (n - 3) // 2))
    for i in range(1, m):
        rows.append(BiInsectRow(a_of(0, i), 1, p0 * (1 + lam[i]) / 2 + (1 - p0) / 2, n * dims[i - 1]))
    rows.append(BiInsectRow(a_of(0, 0), 1, p0 + (1 - p0) * (n - 4) / (2 * (n - 2)), n - 1))
    rows.append(BiInsectRow(a_of(0, 0), 0, 1.0, 1))
    return rows
