import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crested.chain_core import ChainError, ReversibleChain, Ergodicity, classify_ergodicity, spectral_decomposition, uniform_chain
from crested.corpus import random_reversible_chain, random_symmetric_chain
from crested.second_crested import (
    DegenerateDelta,
    PartialFunction,
    SecondCrestedSpec,
    apply_D,
    apply_Dstar,
    apply_Q_ka,
    assemble_second_crested,
    bi_insect_spec,
    bi_insect_spectrum,
    build_delta,
    build_M,
    build_P,
    d_matrix,
    dim_P,
    eigenspace_basis,
    eigenspace_dimension,
    enumerate_states,
    fundamental_basis,
    fundamental_functions,
    kernel_basis,
    level_range,
    q_eigenspaces,
    second_crested_census,
    type_vectors,
    ell,
)
from crested.spectral_oracle import compare_spectra, make_rng, numeric_spectrum


def sym_Q(s, seed=0):
    return random_symmetric_chain(make_rng(seed), s)


def test_state_enumeration():
    states = enumerate_states(4, 2, 3)
    assert len(states) == math.comb(4, 2) * 9
    assert states[0] == PartialFunction((0, 1), (0, 0))
    assert states[9] == PartialFunction((0, 2), (0, 0))
    assert states[1](1) == 1
    for bad in (0, 5):
        with pytest.raises(ValueError):
            enumerate_states(4, bad, 2)


def test_delta_is_regular_and_symmetric():
    D, norm = build_delta(5, 2, 3)
    assert norm == 3 * 3 * 2
    assert np.array_equal(D, D.T)
    assert np.all(D.sum(axis=1) == norm)
    assert np.all(np.diag(D) == 0)
    with pytest.raises(DegenerateDelta):
        build_delta(3, 3, 2)


def test_delta_adjacency_rule():
    states = enumerate_states(4, 2, 2)
    D, _ = build_delta(4, 2, 2)
    a = states.index(PartialFunction((0, 1), (0, 1)))
    assert D[a, states.index(PartialFunction((0, 2), (0, 1)))] == 1  # keeps 0 -> 0
    assert D[a, states.index(PartialFunction((1, 3), (1, 0)))] == 1  # keeps 1 -> 1
    assert D[a, states.index(PartialFunction((0, 2), (1, 1)))] == 0  # disagrees at 0
    assert D[a, states.index(PartialFunction((2, 3), (0, 1)))] == 0  # no overlap


def test_M_and_P_validation():
    asym = random_reversible_chain(make_rng(1), 3)
    with pytest.raises(ChainError):
        build_M(3, 2, asym)
    with pytest.raises(ChainError):
        SecondCrestedSpec(3, 2, asym, 0.5)
    Q = sym_Q(2)
    D, norm = build_delta(3, 1, 2)
    for p0 in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            build_P(p0, build_M(3, 1, Q), D, norm)
    with pytest.raises(ValueError):
        SecondCrestedSpec(3, 0, Q, 0.5)
    reducible = ReversibleChain((0, 1), np.eye(2), np.full(2, 0.5))
    with pytest.raises(ChainError):
        SecondCrestedSpec(3, 1, reducible, 0.5)


def test_crested_bernoulli_laplace_is_stochastic():
    c = assemble_second_crested(SecondCrestedSpec(4, 2, sym_Q(3), 0.4))
    assert np.allclose(c.P.sum(axis=1), 1, atol=1e-14)
    assert np.max(np.abs(c.P - c.P.T)) < 1e-15


@pytest.mark.parametrize("n,k,s", [(3, 1, 2), (4, 2, 3), (5, 3, 2), (6, 4, 2), (6, 2, 3)])
def test_adjointness(n, k, s):
    rng = np.random.default_rng(n * 100 + k * 10 + s)
    top = len(enumerate_states(n, k, s))
    low = math.comb(n, k - 1) * s ** (k - 1)
    Dm = d_matrix(n, k, s)
    worst = 0.0
    for _ in range(100):
        F = rng.normal(size=top)
        G = rng.normal(size=low)
        DF = apply_D(F, n, k, s)
        assert np.allclose(DF, Dm @ F)
        worst = max(worst, abs(DF @ G - F @ apply_Dstar(G, n, k, s)))
    assert worst < 1e-10


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 5), s=st.integers(2, 3), data=st.data())
def test_operator_identities_on_fundamental_functions(n, s, data):
    k = data.draw(st.integers(1, n - 1))
    Q = sym_Q(s, seed=n + s)
    qs = q_eigenspaces(Q)
    a = data.draw(st.sampled_from(list(type_vectors(k, len(qs.values)))))
    funcs = list(fundamental_functions(n, k, a, qs))
    F = funcs[data.draw(st.integers(0, len(funcs) - 1))]
    f = F.to_vector(n, s)
    QF = apply_Q_ka(F, n, s)
    l = ell(a)
    du = apply_Dstar(apply_D(f, n, k, s), n, k, s)
    ud = apply_D(apply_Dstar(f, n, k + 1, s), n, k + 1, s)
    assert np.max(np.abs(du - s * (k - l) * f - QF)) < 1e-10
    assert np.max(np.abs(ud - s * (n - k) * f - QF)) < 1e-10
    assert np.max(np.abs(ud - du - s * (n + l - 2 * k) * f)) < 1e-10


def test_Q_ka_vanishes_away_from_the_domain():
    qs = q_eigenspaces(uniform_chain(2))
    F = next(fundamental_functions(5, 2, (2, 0), qs))
    out = apply_Q_ka(F, 5, 2)
    for th, v in zip(enumerate_states(5, 2, 2), out):
        if len(set(th.domain) & set(F.domain)) != 1:
            assert v == 0


def test_fundamental_basis_is_orthonormal():
    qs = q_eigenspaces(sym_Q(3, 5))
    B = fundamental_basis(5, 2, (1, 1, 0), qs)
    assert B.shape[1] == dim_P(5, 2, (1, 1, 0), qs.dims)
    assert np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) < 1e-12


@pytest.mark.parametrize("n,h,s", [(5, 2, 2), (5, 3, 3), (6, 3, 2)])
def test_completeness_orthogonality_injectivity(n, h, s):
    spec = SecondCrestedSpec(n, h, sym_Q(s, 7), 0.5)
    qs = q_eigenspaces(spec.Q)
    N = len(spec.states)
    for a in type_vectors(h, len(qs.values)):
        triples = [eigenspace_basis(spec, a, k, qs) for k in level_range(n, h, a)]
        assert sum(t.dimension for t in triples) == dim_P(n, h, a, qs.dims)
        for t in triples:
            assert t.dimension == eigenspace_dimension(n, a, t.k, qs.dims)
            if t.dimension:
                sv = np.linalg.svd(t.basis / math.sqrt(N), compute_uv=False)
                assert sv.min() > 1e-7
                gram = t.basis.T @ t.basis / N
                assert np.max(np.abs(gram - np.eye(t.dimension))) < 1e-9
        for i, t in enumerate(triples):
            for u in triples[i + 1:]:
                if t.dimension and u.dimension:
                    assert np.max(np.abs(t.basis.T @ u.basis / N)) < 1e-9


def test_kernel_is_annihilated_by_D():
    qs = q_eigenspaces(sym_Q(2, 3))
    K = kernel_basis(5, 2, (1, 1), qs)
    assert K.shape[1] == eigenspace_dimension(5, (1, 1), 2, qs.dims)
    assert np.max(np.abs(d_matrix(5, 2, 2) @ K)) < 1e-12


def test_eigenbases_are_eigenvectors():
    spec = SecondCrestedSpec(5, 2, sym_Q(3, 2), 0.3)
    P = assemble_second_crested(spec).P
    for t in second_crested_census(spec, with_basis=True):
        assert np.max(np.abs(P @ t.basis - t.eigenvalue * t.basis)) < 1e-10


def test_h_equals_n_uses_crossed_eigenvalues():
    spec = SecondCrestedSpec(3, 3, sym_Q(2, 1), 0.5)
    rep = compare_spectra(second_crested_census(spec, with_basis=True),
                          numeric_spectrum(assemble_second_crested(spec)))
    assert rep.passed, rep.summary()


@pytest.mark.parametrize("n,h", [(3, 1), (4, 1), (4, 2), (5, 2), (6, 3), (6, 5)])
def test_delta_ergodicity(n, h):
    D, norm = build_delta(n, h, 2)
    w = np.linalg.eigvalsh(D / norm)
    assert np.sum(np.abs(w - 1) < 1e-9) == 1
    assert w.min() > -1 + 1e-9


def test_two_points_one_image_is_periodic():
    # K_2 on X is bipartite, so Delta/norm has eigenvalue -1 when n = 2, h = 1
    D, norm = build_delta(2, 1, 1)
    assert np.isclose(np.linalg.eigvalsh(D / norm).min(), -1)
    # mixing in p0 M still makes P aperiodic
    c = assemble_second_crested(SecondCrestedSpec(2, 1, sym_Q(2), 0.5))
    assert classify_ergodicity(spectral_decomposition(c)) is Ergodicity.ERGODIC


def test_bi_insect_rows():
    rows = bi_insect_spectrum(5, 2, 3, 0.3)
    assert len(rows) == 10
    assert sum(r.dimension for r in rows) == 160
    same = [r for r in rows if r.k == 2 and r.a[0] == 0 and max(r.a) == 2]
    # two factors in the same W_i: unordered pairs of points
    assert {r.dimension for r in same} == {10, 40}
    with pytest.raises(ValueError):
        bi_insect_spectrum(2, 2, 3, 0.3)
    with pytest.raises(ValueError):
        bi_insect_spec(5, 2, 2, 0.3)


def test_bi_insect_larger_tree():
    n, q, m, p0 = 4, 3, 3, 0.6
    rows = bi_insect_spectrum(n, q, m, p0)
    spec = bi_insect_spec(n, q, m, p0)
    assert sum(r.dimension for r in rows) == math.comb(n, 2) * q ** (2 * (m - 1))
    rep = compare_spectra(rows, numeric_spectrum(assemble_second_crested(spec)))
    assert rep.passed, rep.summary()


def test_non_integral_dimension_is_impossible():
    # every census dimension is an integer for a spread of parameters
    for n in range(2, 7):
        for h in range(1, n + 1):
            for a in type_vectors(h, 3):
                for k in level_range(n, h, a):
                    assert eigenspace_dimension(n, a, k, (1, 2, 3)) >= 0


def test_subtree_eigenvalues_come_from_the_insect_kernel():
    # the shortcut 1 - (q-1)/q^(m-j-1) does not match the insect kernel on Y
    # (for q >= 3 it even reaches -1), so the table uses the alpha eigenvalues
    from crested.insect import TreeShape, insect_eigenvalues, insect_kernel

    for q, m in [(2, 3), (3, 3), (2, 4)]:
        shape = TreeShape((q,) * (m - 1))
        lam = insect_eigenvalues(shape)
        numeric = np.sort(numeric_spectrum(insect_kernel(shape)).lambdas)
        assert np.allclose(np.unique(np.round(numeric, 10)), np.unique(np.round(lam, 10)))
        shortcut = [1 - (q - 1) / q ** (m - j - 1) for j in range(1, m)]
        assert not np.allclose(shortcut, lam[1:m])
