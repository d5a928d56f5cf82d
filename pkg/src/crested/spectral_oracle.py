"""Independent numeric checks for the analytic spectra.

Nothing here imports the product-spectrum code: the eigensolver is a
self-contained cyclic Jacobi iteration, and the comparison only sees the
eigenvalues, dimensions and (optional) bases that an analytic routine
claims.

Randomness uses numpy's Philox-4x64 counter-based generator keyed by a
``SeedSequence(seed)``; replica ``r`` of a fanned-out run uses
``SeedSequence(seed, spawn_key=(r,))``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .chain_core import (
    EPS_CLUSTER,
    EPS_DB,
    EPS_EIG,
    DetailedBalanceError,
    ReversibleChain,
    SpectralData,
    check_detailed_balance,
    eigenvalue_clusters,
    spectral_from_symmetric,
    symmetrized,
)


@numba.njit(cache=True)
def _jacobi_inplace(A, V, tol, max_sweeps):
    n = A.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        if np.sqrt(off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return -1


class JacobiDidNotConverge(RuntimeError):
    pass


def jacobi_eigh(S, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``S = V diag(w) V^T`` and orthonormal ``V``.
    Iteration stops once the off-diagonal Frobenius norm drops below
    ``tol * ||S||_F``.
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("square matrix required")
    A = np.ascontiguousarray((S + S.T) / 2)
    V = np.eye(A.shape[0])
    scale = max(np.linalg.norm(A), 1.0)
    if _jacobi_inplace(A, V, tol * scale, max_sweeps) < 0:
        raise JacobiDidNotConverge(f"no convergence in {max_sweeps} sweeps")
    return np.diag(A).copy(), V


def numeric_spectrum(c: ReversibleChain) -> SpectralData:
    """Spectral data of ``c`` from the Jacobi solver on D^{1/2} P D^{-1/2}."""
    if not check_detailed_balance(c.P, c.pi, EPS_DB):
        raise DetailedBalanceError("numeric_spectrum needs a reversible chain")
    w, V = jacobi_eigh(symmetrized(c))
    return spectral_from_symmetric(c.states, c.pi, w, V)


@dataclass
class OracleReport:
    claimed: list[tuple[float, int]]
    numeric: list[tuple[float, int]]
    max_eigenvalue_error: float
    max_projector_discrepancy: float | None
    passed: bool
    errors: list[str] = field(default_factory=list)
    name: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        proj = "n/a" if self.max_projector_discrepancy is None else f"{self.max_projector_discrepancy:.3g}"
        line = (f"[{status}] {self.name or 'spectrum'}: {len(self.claimed)} eigenvalues, "
                f"max |dlambda| = {self.max_eigenvalue_error:.3g}, projector = {proj}")
        return line + "".join(f"\n    {e}" for e in self.errors)


def _multiset(values, tol) -> list[tuple[float, int]]:
    return [(v, len(ix)) for v, ix in eigenvalue_clusters(values, tol)]


def compare_spectra(analytic, numeric: SpectralData, tol: float = EPS_CLUSTER,
                    eps: float = EPS_EIG, name: str = "") -> OracleReport:
    """Compare claimed eigenspaces with a numeric decomposition.

    ``analytic`` is any sequence of objects with ``eigenvalue``,
    ``dimension`` and ``basis`` attributes (``basis`` may be ``None``; when
    given, its columns must be orthonormal in the pi-weighted product).
    """
    errors = []
    N = numeric.size
    claimed_vals = np.concatenate([np.full(d.dimension, d.eigenvalue) for d in analytic]) \
        if analytic else np.zeros(0)
    total = claimed_vals.size
    claimed = _multiset(claimed_vals, tol)
    observed = _multiset(numeric.lambdas, tol)
    if total != N:
        errors.append(f"dimension-sum mismatch: analytic {total}, state space {N}")
        return OracleReport(claimed, observed, float("inf"), None, False, errors, name)

    gap = float(np.max(np.abs(np.sort(claimed_vals) - np.sort(numeric.lambdas)), initial=0.0))
    if gap > tol:
        errors.append(f"eigenvalue multisets differ by {gap:.3g} > {tol:g}")

    proj_err = None
    if analytic and all(getattr(d, "basis", None) is not None for d in analytic):
        proj_err = 0.0
        values = np.array([d.eigenvalue for d in analytic])
        for value, members in eigenvalue_clusters(values, tol):
            B = np.hstack([analytic[i].basis for i in members])
            lo = min(values[i] for i in members) - tol
            hi = max(values[i] for i in members) + tol
            cols = (numeric.lambdas >= lo) & (numeric.lambdas <= hi)
            Un = numeric.U[:, cols]
            Pa = B @ (B.T * numeric.pi[None, :])
            Pn = Un @ (Un.T * numeric.pi[None, :])
            proj_err = max(proj_err, float(np.max(np.abs(Pa - Pn))))
        if proj_err >= eps * N:
            errors.append(f"projector discrepancy {proj_err:.3g} >= {eps * N:.3g}")

    return OracleReport(claimed, observed, gap, proj_err, not errors, errors, name)


def make_rng(seed: int, replica: int | None = None) -> np.random.Generator:
    key = np.random.SeedSequence(seed) if replica is None else np.random.SeedSequence(seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(key))


def simulate_chain(c: ReversibleChain, start, steps: int, replicas: int, seed: int) -> np.ndarray:
    """Empirical state distribution of ``replicas`` walkers at steps 0..steps.

    Returns an array of shape ``(steps + 1, c.size)``.
    """
    if steps < 0 or replicas < 1:
        raise ValueError("need steps >= 0 and replicas >= 1")
    i0 = c.index(start)
    rng = make_rng(seed)
    cum = np.cumsum(c.P, axis=1)
    cum[:, -1] = 1.0
    pos = np.full(replicas, i0, dtype=np.int64)
    out = np.empty((steps + 1, c.size))
    out[0] = np.bincount(pos, minlength=c.size) / replicas
    for t in range(1, steps + 1):
        u = rng.random(replicas)
        rows = cum[pos]
        pos = np.minimum((rows < u[:, None]).sum(axis=1), c.size - 1)
        out[t] = np.bincount(pos, minlength=c.size) / replicas
    return out


def exact_distributions(c: ReversibleChain, start, steps: int) -> np.ndarray:
    """Rows of P^t for t = 0..steps started at ``start`` (repeated products)."""
    mu = np.zeros(c.size)
    mu[c.index(start)] = 1.0
    out = [mu]
    for _ in range(steps):
        mu = mu @ c.P
        out.append(mu)
    return np.array(out)


def tv_distance(mu, nu) -> np.ndarray:
    return 0.5 * np.abs(np.asarray(mu) - np.asarray(nu)).sum(axis=-1)


def tv_envelope(exact: np.ndarray, replicas: int, sigmas: float = 3.0) -> np.ndarray:
    """Bound on |TV(empirical, pi) - TV(exact, pi)| at ``sigmas`` standard errors.

    By the triangle inequality the difference is at most
    TV(empirical, exact), whose per-state terms have standard error
    sqrt(mu(1-mu)/replicas).
    """
    return 0.5 * sigmas * np.sqrt(exact * (1 - exact) / replicas).sum(axis=-1) + 1.0 / replicas
