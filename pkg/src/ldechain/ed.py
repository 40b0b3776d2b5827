"""Exact diagonalization of open XX chains, resolved by total magnetization.

Basis states are bit patterns with bit ``i`` set when site ``i`` (0-based) is
up. A density matrix is stored as diagonal blocks ``(m, m)`` and coherence
blocks ``(m, m + 1)`` between adjacent magnetization sectors; the ``(m + 1, m)``
blocks are implied by Hermiticity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np

from .chain import CouplingProfile
from .entanglement import TwoQubitDensity

MAX_SITES = 14
GROUND_TOL = 1e-10


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class SectorBasis:
    n_sites: int
    n_up: int
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.size

    def index(self, patterns: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.states, patterns)

    def bits(self, site: int) -> np.ndarray:
        return (self.states >> site) & 1


@lru_cache(maxsize=None)
def sector_basis(n_sites: int, n_up: int) -> SectorBasis:
    if not 0 <= n_up <= n_sites:
        raise ValueError(f"sector m={n_up} invalid for {n_sites} sites")
    if n_sites > MAX_SITES:
        raise SizeLimitError(f"{n_sites} sites exceeds the ED limit of {MAX_SITES}")
    states = np.fromiter(
        (sum(1 << b for b in c) for c in itertools.combinations(range(n_sites), n_up)),
        dtype=np.int64,
        count=comb(n_sites, n_up),
    )
    states.sort()
    states.flags.writeable = False
    return SectorBasis(n_sites, n_up, states)


def sector_hamiltonian(profile: CouplingProfile, m: int) -> np.ndarray:
    """Dense XX Hamiltonian in the sector with ``m`` up spins."""
    n = profile.n_sites
    basis = sector_basis(n, m)
    s = basis.states
    h = np.zeros((basis.dim, basis.dim))
    cols = np.arange(basis.dim)
    for k, J in enumerate(profile.couplings):
        hop = ((s >> k) & 1) != ((s >> (k + 1)) & 1)
        rows = basis.index(s[hop] ^ (3 << k))
        h[rows, cols[hop]] = -0.5 * J
    return h


@dataclass(frozen=True)
class SectorSpectrum:
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)


@lru_cache(maxsize=64)
def sector_spectrum(profile: CouplingProfile, m: int) -> SectorSpectrum:
    e, v = np.linalg.eigh(sector_hamiltonian(profile, m))
    e.flags.writeable = False
    v.flags.writeable = False
    return SectorSpectrum(e, v)


@dataclass(frozen=True)
class BlockDensityMatrix:
    """Magnetization-blocked operator on ``n_sites`` spins.

    ``diag[m]`` is the ``(m, m)`` block and ``coh[m]`` the ``(m, m + 1)``
    block. Missing keys are zero blocks. Used both for density matrices and for
    the traceless Hermitian pieces the protocol propagates by linearity.
    """

    n_sites: int
    diag: dict = field(default_factory=dict, repr=False)
    coh: dict = field(default_factory=dict, repr=False)
    temperature: Optional[float] = None

    def block(self, m: int, m2: int) -> Optional[np.ndarray]:
        if m == m2:
            return self.diag.get(m)
        if m2 == m + 1:
            return self.coh.get(m)
        if m == m2 + 1:
            b = self.coh.get(m2)
            return None if b is None else b.conj().T
        return None

    def blocks(self) -> Iterable[tuple[int, int, np.ndarray]]:
        """Every stored block, including the implied ``(m + 1, m)`` ones."""
        for m, b in self.diag.items():
            yield m, m, b
        for m, b in self.coh.items():
            yield m, m + 1, b
            yield m + 1, m, b.conj().T

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self.diag.values()))

    def check(self, trace_tol: float = 1e-10, herm_tol: float = 1e-12) -> None:
        if abs(self.trace() - 1) > trace_tol:
            raise ValueError(f"trace {self.trace()} differs from 1")
        for m, b in self.diag.items():
            if np.max(np.abs(b - b.conj().T), initial=0) > herm_tol:
                raise ValueError(f"diagonal block {m} is not Hermitian")

    def to_dense(self) -> np.ndarray:
        """Full ``2^N x 2^N`` matrix indexed by bit pattern."""
        dim = 1 << self.n_sites
        out = np.zeros((dim, dim), dtype=complex)
        for m, m2, b in self.blocks():
            r = sector_basis(self.n_sites, m).states
            c = sector_basis(self.n_sites, m2).states
            out[np.ix_(r, c)] = b
        return out

    @classmethod
    def from_dense(cls, n_sites: int, rho: np.ndarray) -> "BlockDensityMatrix":
        """Keep the ``|dm| <= 1`` blocks of a dense matrix; others are dropped."""
        diag, coh = {}, {}
        for m in range(n_sites + 1):
            r = sector_basis(n_sites, m).states
            diag[m] = np.array(rho[np.ix_(r, r)], dtype=complex)
            if m < n_sites:
                c = sector_basis(n_sites, m + 1).states
                coh[m] = np.array(rho[np.ix_(r, c)], dtype=complex)
        return cls(n_sites, diag, coh)

    def scaled(self, factor: complex) -> "BlockDensityMatrix":
        return BlockDensityMatrix(
            self.n_sites,
            {m: factor * b for m, b in self.diag.items()},
            {m: factor * b for m, b in self.coh.items()},
            self.temperature,
        )


def gibbs_state(profile: CouplingProfile, T: float) -> BlockDensityMatrix:
    """Thermal state over all sectors; ``T == 0`` mixes the ground manifold equally."""
    if T < 0:
        raise ValueError(f"temperature must be non-negative, got {T}")
    n = profile.n_sites
    spectra = [sector_spectrum(profile, m) for m in range(n + 1)]
    e0 = min(s.energies[0] for s in spectra)
    weights = []
    for s in spectra:
        if T == 0:
            w = (s.energies - e0 <= GROUND_TOL * max(1.0, abs(e0))).astype(float)
        else:
            w = np.exp(-(s.energies - e0) / T)
        weights.append(w)
    z = sum(w.sum() for w in weights)
    diag = {}
    for m, (s, w) in enumerate(zip(spectra, weights)):
        keep = w > 0
        v = s.vectors[:, keep]
        diag[m] = ((v * (w[keep] / z)) @ v.T).astype(complex)
    return BlockDensityMatrix(n, diag, {}, float(T))


def product_state(bits: Sequence[int]) -> BlockDensityMatrix:
    """Pure computational-basis state; ``bits[i] == 1`` means site ``i`` is up."""
    n = len(bits)
    pattern = sum(int(b) << i for i, b in enumerate(bits))
    m = int(sum(bits))
    basis = sector_basis(n, m)
    d = np.zeros((basis.dim, basis.dim), dtype=complex)
    k = basis.index(np.array([pattern]))[0]
    d[k, k] = 1.0
    return BlockDensityMatrix(n, {m: d}, {})


def prepend_qubit(qubit: np.ndarray, rho: BlockDensityMatrix) -> BlockDensityMatrix:
    """Tensor a single-site operator (basis ``up, down``) in front as new site 0.

    Existing sites shift up by one. Only sector blocks with ``|dm| <= 1`` are
    kept, which is exact when ``rho`` has no coherences itself.
    """
    qubit = np.asarray(qubit, dtype=complex)
    n = rho.n_sites + 1
    # qubit[a, b] with a, b in {0: up, 1: down}
    bit_of = {0: 1, 1: 0}

    def assemble(M: int, M2: int) -> Optional[np.ndarray]:
        rows = sector_basis(n, M).states
        cols = sector_basis(n, M2).states
        out = None
        for a in (0, 1):
            for b in (0, 1):
                amp = qubit[a, b]
                if amp == 0:
                    continue
                sa, sb = bit_of[a], bit_of[b]
                inner = rho.block(M - sa, M2 - sb) if 0 <= M - sa and 0 <= M2 - sb else None
                if inner is None:
                    continue
                ri = np.flatnonzero((rows & 1) == sa)
                ci = np.flatnonzero((cols & 1) == sb)
                rb = sector_basis(rho.n_sites, M - sa).index(rows[ri] >> 1)
                cb = sector_basis(rho.n_sites, M2 - sb).index(cols[ci] >> 1)
                if out is None:
                    out = np.zeros((rows.size, cols.size), dtype=complex)
                out[np.ix_(ri, ci)] += amp * inner[np.ix_(rb, cb)]
        return out

    diag, coh = {}, {}
    for M in range(n + 1):
        b = assemble(M, M)
        if b is not None:
            diag[M] = b
        if M < n:
            b = assemble(M, M + 1)
            if b is not None:
                coh[M] = b
    return BlockDensityMatrix(n, diag, coh, rho.temperature)


def evolve(rho: BlockDensityMatrix, profile: CouplingProfile, t: float) -> BlockDensityMatrix:
    """Conjugate every block by the sector propagators ``exp(-i H_m t)``."""
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    if profile.n_sites != rho.n_sites:
        raise ValueError("profile and state sizes differ")
    if t == 0:
        return rho
    cache = {}

    def factors(m):
        if m not in cache:
            s = sector_spectrum(profile, m)
            cache[m] = (s.vectors, np.exp(-1j * s.energies * t))
        return cache[m]

    def conjugate(b, m, m2):
        v1, p1 = factors(m)
        v2, p2 = factors(m2)
        # U_m b U_m2^dag computed in the eigenbases
        inner = v1.T @ b @ v2
        inner *= p1[:, None] * p2.conj()[None, :]
        return v1 @ inner @ v2.T

    diag = {m: conjugate(b, m, m) for m, b in rho.diag.items()}
    coh = {m: conjugate(b, m, m + 1) for m, b in rho.coh.items()}
    return BlockDensityMatrix(rho.n_sites, diag, coh, rho.temperature)


def _pattern_mask(n_sites: int, m: int, sites: Sequence[int], pattern: Sequence[int]) -> np.ndarray:
    s = sector_basis(n_sites, m).states
    mask = np.ones(s.size, dtype=bool)
    for site, bit in zip(sites, pattern):
        mask &= ((s >> site) & 1) == bit
    return mask


def project_z(rho: BlockDensityMatrix, sites: Sequence[int], pattern: Sequence[int]) -> BlockDensityMatrix:
    """Unnormalized ``P rho P`` for the S^z pattern (1 = up) on ``sites``."""
    n = rho.n_sites
    masks = {}

    def mask(m):
        if m not in masks:
            masks[m] = _pattern_mask(n, m, sites, pattern)
        return masks[m]

    def proj(b, m, m2):
        return b * (mask(m)[:, None] & mask(m2)[None, :])

    diag = {m: proj(b, m, m) for m, b in rho.diag.items()}
    coh = {m: proj(b, m, m + 1) for m, b in rho.coh.items()}
    return BlockDensityMatrix(n, diag, coh, rho.temperature)


@dataclass(frozen=True)
class MeasurementOutcome:
    pattern: tuple[int, ...]
    probability: float
    state: Optional[BlockDensityMatrix] = field(repr=False)


def measure_z(rho: BlockDensityMatrix, sites: Sequence[int]) -> list[MeasurementOutcome]:
    """Projective S^z measurement of ``sites``; one record per bit pattern.

    Patterns are ordered with up (1) before down (0) on each site. Post-states
    are renormalized; zero-probability outcomes carry ``state=None``.
    """
    sites = tuple(sites)
    if not sites:
        raise ValueError("need at least one site to measure")
    if len(set(sites)) != len(sites):
        raise ValueError("measured sites must be distinct")
    for s in sites:
        if not 0 <= s < rho.n_sites:
            raise IndexError(f"site {s} out of range")
    out = []
    for pattern in itertools.product((1, 0), repeat=len(sites)):
        post = project_z(rho, sites, pattern)
        p = float(post.trace().real)
        state = post.scaled(1.0 / p) if p > 0 else None
        out.append(MeasurementOutcome(pattern, max(p, 0.0), state))
    return out


def reduce_to_sites(rho: BlockDensityMatrix, sites: Sequence[int]) -> np.ndarray:
    """Partial trace onto ``sites``.

    The result is ``2^k x 2^k`` in the basis ordered like ``uu.., ud.., ...``
    with the first listed site most significant.
    """
    sites = tuple(sites)
    n = rho.n_sites
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")
    for s in sites:
        if not 0 <= s < n:
            raise IndexError(f"site {s} out of range for {n} sites")
    k = len(sites)
    keep = sum(1 << s for s in sites)

    def local_index(states):
        idx = np.zeros(states.size, dtype=np.int64)
        for s in sites:
            idx = 2 * idx + (1 - ((states >> s) & 1))
        return idx

    out = np.zeros((1 << k, 1 << k), dtype=complex)
    for m, m2, b in rho.blocks():
        r = sector_basis(n, m).states
        c = sector_basis(n, m2).states
        match = (r & ~keep)[:, None] == (c & ~keep)[None, :]
        ri, ci = np.nonzero(match)
        flat = local_index(r)[ri] * (1 << k) + local_index(c)[ci]
        out += np.bincount(flat, weights=b[ri, ci].real, minlength=4**k).reshape(out.shape)
        out += 1j * np.bincount(flat, weights=b[ri, ci].imag, minlength=4**k).reshape(out.shape)
    return out


def reduce_to_pair(rho: BlockDensityMatrix, site_a: int, site_b: int) -> TwoQubitDensity:
    if site_a == site_b:
        raise ValueError("pair sites must differ")
    return TwoQubitDensity(reduce_to_sites(rho, (site_a, site_b)))


def spectrum(profile: CouplingProfile) -> np.ndarray:
    """All ``2^N`` many-body energies, sorted."""
    return np.sort(np.concatenate([sector_spectrum(profile, m).energies
                                   for m in range(profile.n_sites + 1)]))
