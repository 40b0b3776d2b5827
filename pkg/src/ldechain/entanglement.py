"""End-to-end two-qubit states of free-fermion chains and their entanglement.

Two-qubit matrices use the basis ``|uu>, |ud>, |du>, |dd>`` (first qubit is
the first site), with spin up identified with an occupied fermion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.stats import unitary_group

from .chain import CorrelationMatrix

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10

# Global sign of the Jordan-Wigner string determinant; pinned against the ED oracle.
STRING_SIGN = 1.0

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SIGMA_Y, SIGMA_Y)

_S = 1 / np.sqrt(2)
MAGIC_BASIS = np.array(
    [
        [_S, 1j * _S, 0, 0],
        [0, 0, 1j * _S, _S],
        [0, 0, 1j * _S, -_S],
        [_S, -1j * _S, 0, 0],
    ]
)
"""Columns are the magic-basis vectors in the ``uu, ud, du, dd`` basis."""

ArrayLikeG = Union[CorrelationMatrix, np.ndarray]


class InvalidDensityMatrix(ValueError):
    pass


@dataclass(frozen=True)
class TwoQubitDensity:
    """Validated 4x4 density matrix of a spin pair.

    Construction checks Hermiticity and unit trace. Eigenvalues in
    ``(-1e-9, 0)`` are clipped to zero; anything more negative is rejected.
    """

    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidDensityMatrix(f"expected a 4x4 matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidDensityMatrix("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise InvalidDensityMatrix(f"trace is {np.trace(rho).real}, expected 1")
        rho = 0.5 * (rho + rho.conj().T)
        w, v = np.linalg.eigh(rho)
        if w[0] < -PSD_TOL:
            raise InvalidDensityMatrix(f"density matrix has eigenvalue {w[0]:.3e}")
        if w[0] < 0:
            if w[0] < -1e-13:
                logger.warning("clipping negative eigenvalue %.3e of two-qubit state", w[0])
            rho = (v * np.clip(w, 0, None)) @ v.conj().T
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    def is_x_state(self, tol: float = 1e-12) -> bool:
        mask = np.ones((4, 4), dtype=bool)
        for i, j in [(0, 3), (3, 0), (1, 2), (2, 1)]:
            mask[i, j] = False
        np.fill_diagonal(mask, False)
        return bool(np.all(np.abs(self.rho[mask]) <= tol))

    @property
    def concurrence(self) -> float:
        return concurrence(self)

    @property
    def fully_entangled_fraction(self) -> float:
        return fully_entangled_fraction(self)

    @property
    def max_fidelity(self) -> float:
        return max_fidelity(self)


def _g(G: ArrayLikeG) -> np.ndarray:
    return G.g if isinstance(G, CorrelationMatrix) else np.asarray(G)


def _check_site(g: np.ndarray, i: int) -> None:
    if not 0 <= i < g.shape[0]:
        raise IndexError(f"site {i} out of range for {g.shape[0]} sites")


def local_magnetization(G: ArrayLikeG, i: int) -> float:
    """``<S^z_i> = G_ii - 1/2`` (0-based site index)."""
    g = _g(G)
    _check_site(g, i)
    return float(g[i, i].real - 0.5)


def zz_correlator(G: ArrayLikeG, i: int, j: int) -> float:
    """``<S^z_i S^z_j>`` from Wick's theorem."""
    g = _g(G)
    _check_site(g, i)
    _check_site(g, j)
    if i == j:
        raise ValueError("zz_correlator needs distinct sites; use local_magnetization")
    return float(((g[i, i] - 0.5) * (g[j, j] - 0.5) - g[i, j] * g[j, i]).real)


def string_correlator(G: ArrayLikeG) -> complex:
    """``<S^+_1 S^-_N>`` for the two end sites of the chain.

    The Jordan-Wigner string ``prod_{k=2}^{N-1} (1 - 2 n_k)`` is handled with
    the Majorana contraction ``<B_j A_k> = 2 G_jk - delta_jk`` for rows
    ``j = 1..N-1`` and columns ``k = 2..N``; the correlator is half the
    determinant of that matrix.
    """
    g = _g(G)
    n = g.shape[0]
    if n < 2:
        raise ValueError("string correlator needs at least 2 sites")
    contraction = 2.0 * g[:-1, 1:] - np.eye(n)[:-1, 1:]
    return complex(STRING_SIGN * 0.5 * np.linalg.det(contraction))


def end_to_end_rdm(G: ArrayLikeG) -> TwoQubitDensity:
    """Reduced density matrix of the first and last site."""
    g = _g(G)
    n = g.shape[0]
    if n < 2:
        raise ValueError("need at least 2 sites")
    m1 = local_magnetization(g, 0)
    mn = local_magnetization(g, n - 1)
    zz = zz_correlator(g, 0, n - 1)
    flip = string_correlator(g)

    rho = np.zeros((4, 4), dtype=complex)
    # <(1/2 + s1 S^z_1)(1/2 + s2 S^z_N)> for s = +1 (up), -1 (down)
    for a, s1 in enumerate((1, -1)):
        for b, s2 in enumerate((1, -1)):
            rho[2 * a + b, 2 * a + b] = 0.25 + 0.5 * s1 * m1 + 0.5 * s2 * mn + s1 * s2 * zz
    # rho_23 = <ud|rho|du> = <S^-_1 S^+_N> = conj(<S^+_1 S^-_N>)
    rho[1, 2] = np.conj(flip)
    rho[2, 1] = flip
    return TwoQubitDensity(rho)


def _as_rho(rho) -> np.ndarray:
    if isinstance(rho, TwoQubitDensity):
        return rho.rho
    return TwoQubitDensity(rho).rho


def wootters_concurrence(rho) -> float:
    """Concurrence from the spectrum of ``rho (Y x Y) rho* (Y x Y)``."""
    r = _as_rho(rho)
    r_tilde = YY @ r.conj() @ YY
    ev = np.linalg.eigvals(r @ r_tilde)
    lams = np.sort(np.sqrt(np.clip(ev.real, 0, None)))[::-1]
    return float(max(0.0, lams[0] - lams[1:].sum()))


def x_state_concurrence(rho) -> float:
    """Closed form for X states: ``2 max(0, |r23| - sqrt(r11 r44), |r14| - sqrt(r22 r33))``."""
    r = _as_rho(rho)
    d = r.diagonal().real.clip(0, None)
    c1 = abs(r[1, 2]) - np.sqrt(d[0] * d[3])
    c2 = abs(r[0, 3]) - np.sqrt(d[1] * d[2])
    return float(2 * max(0.0, c1, c2))


def concurrence(rho) -> float:
    """Wootters concurrence; uses the X-state closed form when it applies."""
    state = rho if isinstance(rho, TwoQubitDensity) else TwoQubitDensity(rho)
    if state.is_x_state():
        return x_state_concurrence(state)
    return wootters_concurrence(state)


def fully_entangled_fraction(rho) -> float:
    """Largest overlap with a maximally entangled state.

    Maximally entangled states are real combinations of the magic basis up to a
    phase, so the maximum is the top eigenvalue of the real part of ``rho`` in
    that basis.
    """
    r = _as_rho(rho)
    r_magic = MAGIC_BASIS.conj().T @ r @ MAGIC_BASIS
    return float(np.linalg.eigvalsh(r_magic.real)[-1])


def max_fidelity(rho) -> float:
    """Optimal standard teleportation fidelity ``(2 f + 1) / 3``."""
    return (2.0 * fully_entangled_fraction(rho) + 1.0) / 3.0


def sampled_entangled_fraction(
    rho, n_samples: int, rng: Optional[np.random.Generator] = None
) -> float:
    """Monte-Carlo lower bound on the fully entangled fraction.

    Samples ``(1 x U)|Phi+>`` with Haar-random ``U``.
    """
    r = _as_rho(rho)
    rng = np.random.default_rng(rng)
    us = unitary_group.rvs(2, size=n_samples, random_state=rng)
    us = us.reshape(n_samples, 2, 2)
    # (1 x U)|Phi+> amplitudes: psi[a, b] = U[b, a] / sqrt(2)
    psis = np.transpose(us, (0, 2, 1)).reshape(n_samples, 4) / np.sqrt(2)
    overlaps = np.einsum("ni,ij,nj->n", psis.conj(), r, psis).real
    return float(overlaps.max())
