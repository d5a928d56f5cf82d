"""The insect chain on the leaves of a rooted tree, plus product presets.

The tree has branching ``(m_1, ..., m_n)``: the root has ``m_1`` children
and each vertex on level ``i`` has ``m_{i+1}`` children. Leaves are words
``x_1 ... x_n`` listed in mixed-radix order, top level first. The insect
starts on a leaf, performs a simple random walk on the tree, and the next
state is the first leaf it hits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain_core import ReversibleChain, mixed_radix_states, uniform_chain
from .first_crested import (
    CrestedSpec,
    EigenspaceDescriptor,
    FactorTag,
    crossed_spec,
    nested_spec,
)
from .spectral_oracle import make_rng


@dataclass(frozen=True)
class TreeShape:
    branching: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(m) for m in self.branching)
        if not b or any(m < 2 for m in b):
            raise ValueError("branching needs n >= 1 levels, each with m_i >= 2")
        object.__setattr__(self, "branching", b)

    @property
    def depth(self) -> int:
        return len(self.branching)

    @property
    def leaf_count(self) -> int:
        return math.prod(self.branching)

    def leaves(self) -> tuple:
        return mixed_radix_states(self.branching)

    def distance(self, x, y) -> int:
        """Ultrametric distance: depth minus the common prefix length."""
        common = 0
        for a, b in zip(x, y):
            if a != b:
                break
            common += 1
        return self.depth - common


def alphas_recursive(shape: TreeShape) -> np.ndarray:
    """alpha_j = P(walk reaches xi_{j+1} | it reached xi_j), j = 0..n.

    xi_j is the ancestor of the start leaf ``j`` levels up.
    """
    m, n = shape.branching, shape.depth
    a = np.zeros(n + 1)
    a[0] = 1.0
    if n >= 2:
        a[1] = 1.0 / (m[n - 1] + 1)
    for j in range(2, n):
        mj = m[n - j]  # m_{n+1-j}
        # alpha_j = 1/(mj+1) + alpha_{j-1} alpha_j mj/(mj+1), solved for alpha_j
        a[j] = (1.0 / (mj + 1)) / (1.0 - a[j - 1] * mj / (mj + 1))
    return a


def alphas_closed_form(shape: TreeShape) -> np.ndarray:
    m, n = shape.branching, shape.depth
    a = np.zeros(n + 1)
    a[0] = 1.0
    # partial sums 1 + m_n + m_n m_{n-1} + ...
    partial = [1]
    for j in range(1, n):
        partial.append(partial[-1] + math.prod(m[n - j:]))
    for j in range(1, n):
        a[j] = partial[j - 1] / partial[j]
    return a


def compute_alphas(shape: TreeShape) -> np.ndarray:
    return alphas_closed_form(shape)


def distance_kernel(shape: TreeShape) -> np.ndarray:
    """f[d] = probability of moving to a given leaf at distance d."""
    m, n = shape.branching, shape.depth
    a = compute_alphas(shape)
    # term j: climb exactly to xi_j, then descend uniformly into its subtree
    terms = np.zeros(n + 1)
    for j in range(1, n + 1):
        terms[j] = np.prod(a[1:j]) * (1.0 - a[j]) / math.prod(m[n - j:])
    return np.array([terms[max(d, 1):].sum() for d in range(n + 1)])


def insect_kernel(shape: TreeShape) -> ReversibleChain:
    leaves = shape.leaves()
    f = distance_kernel(shape)
    d = np.array([[shape.distance(x, y) for y in leaves] for x in leaves])
    N = len(leaves)
    return ReversibleChain(leaves, f[d], np.full(N, 1.0 / N))


def insect_weights(shape: TreeShape) -> np.ndarray:
    """Nested-product weights p_i = alpha_1..alpha_{n-i} (1 - alpha_{n-i+1})."""
    a = compute_alphas(shape)
    n = shape.depth
    return np.array([np.prod(a[1:n - i + 1]) * (1.0 - a[n - i + 1]) for i in range(1, n + 1)])


def insect_as_nested(shape: TreeShape) -> CrestedSpec:
    return nested_spec([uniform_chain(m) for m in shape.branching], insect_weights(shape))


def insect_eigenvalues(shape: TreeShape) -> np.ndarray:
    """lambda_j for Z_j, j = 0..n: 1, then 1 - alpha_1..alpha_{n-j}, then 0."""
    a = compute_alphas(shape)
    n = shape.depth
    lam = np.array([1.0 - np.prod(a[1:n - j + 1]) for j in range(n + 1)])
    lam[0], lam[n] = 1.0, 0.0
    return lam


def insect_spectrum(shape: TreeShape) -> list[EigenspaceDescriptor]:
    """Eigenspaces Z_0..Z_n: functions of the first j letters, centred in letter j."""
    m, n = shape.branching, shape.depth
    lam = insect_eigenvalues(shape)
    out = [EigenspaceDescriptor(tuple(FactorTag("trivial", i) for i in range(n)), 1.0, 1)]
    for j in range(1, n + 1):
        tags = [FactorTag("full", i) for i in range(j - 1)] + [FactorTag("eig", j - 1, 1)]
        tags += [FactorTag("trivial", i) for i in range(j, n)]
        out.append(EigenspaceDescriptor(tuple(tags), float(lam[j]),
                                        math.prod(m[: j - 1]) * (m[j - 1] - 1)))
    return out


def simulate_excursions(shape: TreeShape, start, n_excursions: int, seed: int) -> np.ndarray:
    """Counts of first-hit leaves over independent excursions from ``start``.

    Vertices are (level, index-within-level); the walk is the simple random
    walk on the tree graph, stopped on the first leaf after leaving start.
    """
    m, n = shape.branching, shape.depth
    rng = make_rng(seed)
    start_idx = int(np.ravel_multi_index(tuple(start), m))
    children = np.array(list(m) + [0])
    # first move is forced to the parent of the start leaf
    level = np.full(n_excursions, n - 1, dtype=np.int64)
    idx = np.full(n_excursions, start_idx // m[n - 1], dtype=np.int64)
    counts = np.zeros(shape.leaf_count, dtype=np.int64)
    while level.size:
        ch = children[level]
        deg = ch + (level > 0)
        r = np.floor(rng.random(level.size) * deg).astype(np.int64)
        up = r >= ch
        parent_size = np.where(level > 0, children[np.maximum(level - 1, 0)], 1)
        new_idx = np.where(up, idx // parent_size, idx * ch + np.minimum(r, ch - 1))
        level = np.where(up, level - 1, level + 1)
        idx = new_idx
        done = level == n
        counts += np.bincount(idx[done], minlength=shape.leaf_count)
        level, idx = level[~done], idx[~done]
    return counts


def random_automorphism(shape: TreeShape, rng: np.random.Generator) -> np.ndarray:
    """A random tree automorphism as a permutation of leaf indices.

    Each internal vertex independently permutes its children.
    """
    m = shape.branching
    perms = {}
    image = []
    for leaf in shape.leaves():
        word = []
        for i, x in enumerate(leaf):
            key = leaf[:i]
            if key not in perms:
                perms[key] = rng.permutation(m[i])
            word.append(int(perms[key][x]))
        image.append(int(np.ravel_multi_index(tuple(word), m)))
    return np.array(image)


def ehrenfest_preset(n_balls: int, n_urns: int) -> CrestedSpec:
    """n balls in m urns: pick a ball uniformly and put it in a uniform urn."""
    if n_balls < 1 or n_urns < 2:
        raise ValueError("need n_balls >= 1 and n_urns >= 2")
    return crossed_spec([uniform_chain(n_urns)] * n_balls)


def ehrenfest_spectrum(n_balls: int, n_urns: int) -> list[tuple[float, int]]:
    """(eigenvalue (n-j)/n, multiplicity C(n,j)(m-1)^j) for j = 0..n."""
    n, m = n_balls, n_urns
    return [((n - j) / n, math.comb(n, j) * (m - 1) ** j) for j in range(n + 1)]


def nested_uniform_preset(shape: TreeShape) -> CrestedSpec:
    return nested_spec([uniform_chain(m) for m in shape.branching])
