"""Open XX chains with site-dependent couplings and their free-fermion solution.

The spin Hamiltonian

    H = - sum_k J_k (S^x_k S^x_{k+1} + S^y_k S^y_{k+1})

maps under Jordan-Wigner to the hopping Hamiltonian
``- sum_k (J_k / 2) (c^dag_k c_{k+1} + h.c.)``. Energies and temperatures are
measured in units of the bulk coupling, with k_B = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

ZERO_MODE_TOL = 1e-12
DEGENERACY_TOL = 1e-10

KINDS = ("uniform", "dimerized", "lambda", "lambda_mu", "custom")
_MIN_SITES = {"uniform": 2, "dimerized": 2, "lambda": 4, "lambda_mu": 6, "custom": 2}


class ConvergenceError(RuntimeError):
    """Raised when the tridiagonal eigensolver fails to converge."""


@dataclass(frozen=True)
class CouplingProfile:
    """Nearest-neighbour couplings ``J_1 .. J_{N-1}`` of an open chain.

    ``couplings[k]`` is the bond between sites ``k`` and ``k + 1`` (0-based).
    """

    n_sites: int
    couplings: tuple[float, ...]
    kind: str = "custom"
    lam: Optional[float] = None
    mu: Optional[float] = None

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"need at least 2 sites, got {self.n_sites}")
        if len(self.couplings) != self.n_sites - 1:
            raise ValueError(
                f"expected {self.n_sites - 1} couplings, got {len(self.couplings)}"
            )
        if any(not np.isfinite(j) or j <= 0 for j in self.couplings):
            raise ValueError(f"couplings must be finite and positive: {self.couplings}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.couplings, dtype=float)

    def extended(self, coupling: float) -> "CouplingProfile":
        """Profile with one extra site prepended, attached by ``coupling``."""
        return CouplingProfile(self.n_sites + 1, (float(coupling),) + self.couplings)


def make_profile(
    kind: str,
    n_sites: int,
    lam: float = 1.0,
    mu: float = 1.0,
    custom_couplings: Optional[Sequence[float]] = None,
) -> CouplingProfile:
    """Build a coupling profile of the requested family.

    Parameters
    ----------
    kind : str
        ``uniform``, ``dimerized`` (odd bonds ``lam``, even bonds 1),
        ``lambda`` (end bonds ``lam``), ``lambda_mu`` (end bonds ``lam``,
        next-to-end bonds ``mu``) or ``custom``.
    n_sites : int
        Chain length N.
    lam, mu : float
        Reduced couplings, in units of the bulk coupling.
    custom_couplings : sequence of float, optional
        The N - 1 couplings, required when ``kind == "custom"``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {KINDS}")
    if n_sites < _MIN_SITES[kind]:
        raise ValueError(f"{kind} profile needs N >= {_MIN_SITES[kind]}, got {n_sites}")
    if lam <= 0 or mu <= 0:
        raise ValueError(f"lambda and mu must be positive, got {lam}, {mu}")

    J = np.ones(n_sites - 1)
    params = dict(lam=None, mu=None)
    if kind == "custom":
        if custom_couplings is None:
            raise ValueError("custom profile requires custom_couplings")
        J = np.asarray(custom_couplings, dtype=float)
        if J.shape != (n_sites - 1,):
            raise ValueError(f"custom profile needs {n_sites - 1} couplings, got {J.size}")
    elif kind == "dimerized":
        J[0::2] = lam  # bonds k = 1, 3, 5, ... in 1-based numbering
        params["lam"] = lam
    elif kind == "lambda":
        J[0] = J[-1] = lam
        params["lam"] = lam
    elif kind == "lambda_mu":
        J[1] = J[-2] = mu
        J[0] = J[-1] = lam
        params.update(lam=lam, mu=mu)
    return CouplingProfile(n_sites, tuple(float(j) for j in J), kind, **params)


def hopping_matrix(profile: CouplingProfile) -> np.ndarray:
    """Single-particle hopping matrix, ``M[k, k+1] = M[k+1, k] = -J_k / 2``."""
    off = -0.5 * profile.array
    return np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True)
class FermionModes:
    """Single-particle eigenpairs; ``vectors[:, q]`` belongs to ``energies[q]``."""

    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.energies.size


def _canonical_degenerate_basis(vecs: np.ndarray) -> np.ndarray:
    # Project unit vectors in ascending index order and Gram-Schmidt the survivors.
    n, k = vecs.shape
    proj = vecs @ vecs.T
    out = []
    for i in range(n):
        w = proj[:, i].copy()
        for u in out:
            w -= (u @ w) * u
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            out.append(w / norm)
        if len(out) == k:
            break
    return np.column_stack(out)


def diagonalize_modes(matrix: np.ndarray) -> FermionModes:
    """Eigen-decompose a real symmetric tridiagonal hopping matrix.

    Energies come out ascending. Each eigenvector is fixed by making its first
    component above 1e-12 positive; degenerate subspaces get a canonical basis
    so the result is reproducible bit-for-bit.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError("hopping matrix must be square")
    if np.any(np.triu(matrix, 2)) or np.any(np.tril(matrix, -2)):
        raise ValueError("hopping matrix must be tridiagonal")
    if not np.allclose(matrix, matrix.T, atol=1e-14):
        raise ValueError("hopping matrix must be symmetric")

    if n == 1:
        return FermionModes(matrix.diagonal().copy(), np.ones((1, 1)))
    try:
        energies, vectors = eigh_tridiagonal(np.diag(matrix).copy(), np.diag(matrix, 1).copy())
    except LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(vectors))):
        raise ConvergenceError("tridiagonal eigensolver returned non-finite values")

    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[start] <= DEGENERACY_TOL:
            stop += 1
        if stop - start > 1:
            vectors[:, start:stop] = _canonical_degenerate_basis(vectors[:, start:stop])
        start = stop

    for q in range(n):
        pivot = np.flatnonzero(np.abs(vectors[:, q]) > 1e-12)[0]
        if vectors[pivot, q] < 0:
            vectors[:, q] *= -1
    energies.flags.writeable = False
    vectors.flags.writeable = False
    return FermionModes(energies, vectors)


def solve(profile: CouplingProfile) -> FermionModes:
    return diagonalize_modes(hopping_matrix(profile))


def fermi_occupation(energies: np.ndarray, T: float) -> np.ndarray:
    """Fermi function at zero chemical potential.

    At ``T == 0`` this is the T -> 0+ limit: levels within 1e-12 of zero are
    half filled.
    """
    energies = np.asarray(energies, dtype=float)
    if T < 0:
        raise ValueError(f"temperature must be non-negative, got {T}")
    if T == 0:
        return np.where(energies < -ZERO_MODE_TOL, 1.0,
                        np.where(energies > ZERO_MODE_TOL, 0.0, 0.5))
    # 1 / (1 + exp(e/T)) written to avoid overflow
    return 0.5 * (1.0 - np.tanh(energies / (2.0 * T)))


@dataclass(frozen=True)
class CorrelationMatrix:
    """``g[i, j] = <c^dag_i c_j>`` of the Gibbs state at temperature ``T``."""

    g: np.ndarray = field(repr=False)
    temperature: float

    @property
    def n_sites(self) -> int:
        return self.g.shape[0]


def correlation_matrix(modes: FermionModes, T: float) -> CorrelationMatrix:
    occ = fermi_occupation(modes.energies, T)
    phi = modes.vectors
    g = (phi * occ) @ phi.T
    g = 0.5 * (g + g.T)
    g.flags.writeable = False
    return CorrelationMatrix(g, float(T))


def _count_below(offdiag: np.ndarray, x: float) -> int:
    """Sturm count of eigenvalues below ``x`` for a zero-diagonal tridiagonal matrix."""
    count = 0
    q = -x
    tiny = np.finfo(float).tiny
    for b in offdiag:
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
        q = -x - b * b / q
    if q == 0.0:
        q = -tiny
    return count + (q < 0)


def smallest_positive_energy(profile: CouplingProfile, rel_tol: float = 1e-14) -> float:
    """Smallest positive mode energy to high relative accuracy.

    Bisection with Sturm counts on the zero-diagonal hopping matrix keeps full
    relative precision even for exponentially small levels, which a dense
    eigensolver (absolute accuracy ~1e-16) cannot resolve.
    """
    b = 0.5 * profile.array
    n = profile.n_sites
    n_nonpositive = n - n // 2
    hi = float(b.max()) * 2.0
    lo = hi
    while _count_below(b, lo) > n_nonpositive:
        lo *= 1e-4
        if lo < 1e-300:
            return 0.0
    # geometric bisection on [lo, hi]
    while hi / lo - 1.0 > rel_tol:
        mid = np.sqrt(lo * hi)
        if _count_below(b, mid) > n_nonpositive:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(lo * hi))


def energy_gap(profile: CouplingProfile) -> float:
    """Lowest particle-hole excitation energy.

    Defined as the smallest positive mode energy minus the largest negative one
    (exact zero modes of odd chains excluded), i.e. the lowest excitation at
    fixed particle number. By the +-symmetry of the spectrum this is twice the
    smallest positive level, computed with high relative accuracy.
    """
    if profile.n_sites < 2:
        return 0.0
    return 2.0 * smallest_positive_energy(profile)
