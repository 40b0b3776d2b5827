"""Single-atom cavities as effective spins, and cavity-array geometry.

A cavity doped with a two-level atom has polariton branches
``eps_{n+-} = n*omega +- sqrt(n g^2 + Delta^2)``. At ``omega = sqrt(g^2 +
Delta^2)`` the vacuum and the lower one-excitation polariton are degenerate,
and if hopping and temperature stay well below ``eps_{2-}`` each cavity acts as
a spin 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain import CouplingProfile, make_profile

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class CavityParams:
    omega: float
    omega_prime: float
    g: float

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("atom-photon coupling g must be positive")

    @property
    def delta(self) -> float:
        return self.omega_prime - self.omega

    @classmethod
    def at_resonance(cls, g: float, delta: float) -> "CavityParams":
        """Parameters with ``omega`` tuned to the ground-state degeneracy."""
        omega = resonance_frequency(g, delta)
        return cls(omega, omega + delta, g)


@dataclass(frozen=True)
class PolaritonLevel:
    n: int
    branch: Optional[str]
    energy: float
    mixing_angle: Optional[float] = None


def _check_branch(n: int, branch: Optional[str]) -> None:
    if n < 0:
        raise ValueError("excitation number must be non-negative")
    if n == 0 and branch is not None:
        raise ValueError("the vacuum level has no branch")
    if n > 0 and branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-' for n >= 1, got {branch!r}")


def polariton_energy(params: CavityParams, n: int, branch: Optional[str] = None) -> float:
    _check_branch(n, branch)
    if n == 0:
        return 0.0
    split = np.sqrt(n * params.g**2 + params.delta**2)
    return float(n * params.omega + (split if branch == "+" else -split))


def mixing_angle(params: CavityParams, n: int) -> float:
    """``theta_n = atan2(-g sqrt(n), Delta) / 2``; resonance (Delta = 0) gives -pi/4."""
    if n < 1:
        raise ValueError("mixing angle is defined for n >= 1")
    return float(0.5 * np.arctan2(-params.g * np.sqrt(n), params.delta))


def polariton_level(params: CavityParams, n: int, branch: Optional[str] = None) -> PolaritonLevel:
    energy = polariton_energy(params, n, branch)
    theta = mixing_angle(params, n) if n > 0 else None
    return PolaritonLevel(n, branch, energy, theta)


def dressed_states(params: CavityParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``|n+>`` and ``|n->`` in the bare basis ``(|g, n>, |e, n-1>)``."""
    th = mixing_angle(params, n)
    plus = np.array([np.cos(th), np.sin(th)])
    minus = np.array([np.sin(th), -np.cos(th)])
    return plus, minus


def polariton_block(params: CavityParams, n: int) -> np.ndarray:
    """2x2 block of the ``n``-excitation manifold in the basis ``(|g, n>, |e, n-1>)``.

    Written in the convention whose eigenpairs are exactly the polariton energies
    and dressed states above.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w, d, c = params.omega, params.delta, params.g * np.sqrt(n)
    return np.array([[n * w + d, -c], [-c, n * w - d]])


def resonance_frequency(g: float, delta: float) -> float:
    if g <= 0:
        raise ValueError("g must be positive")
    return float(np.hypot(g, delta))


def eps_2minus(params: CavityParams) -> float:
    return polariton_energy(params, 2, "-")


@dataclass(frozen=True)
class ValidityReport:
    eps2minus: float
    max_coupling: float
    temperature: float
    coupling_ratio: float
    temperature_ratio: float
    threshold: float
    symmetric_geometry_note: str = ""

    @property
    def coupling_ok(self) -> bool:
        return self.coupling_ratio < self.threshold

    @property
    def temperature_ok(self) -> bool:
        return self.temperature_ratio < self.threshold

    @property
    def passed(self) -> bool:
        return self.coupling_ok and self.temperature_ok


SYMMETRIC_NOTE = (
    "symmetric displacement forces lambda*mu = 1; other (lambda, mu) pairs need "
    "independent end and near-end shifts"
)


def validity_check(
    params: CavityParams,
    couplings: Sequence[float],
    temperature: float,
    threshold: float = DEFAULT_THRESHOLD,
) -> ValidityReport:
    """Compare the largest hopping and the temperature against ``eps_{2-}``."""
    if abs(params.omega - resonance_frequency(params.g, params.delta)) > 1e-9 * max(1.0, params.omega):
        raise ValueError("cavity is not tuned to the degeneracy point")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    eps = eps_2minus(params)
    jmax = float(max(couplings)) if len(couplings) else 0.0
    return ValidityReport(
        eps2minus=eps,
        max_coupling=jmax,
        temperature=float(temperature),
        coupling_ratio=jmax / eps,
        temperature_ratio=float(temperature) / eps,
        threshold=threshold,
        symmetric_geometry_note=SYMMETRIC_NOTE,
    )


@dataclass(frozen=True)
class ArrayGeometry:
    """Couplings derived from cavity spacings."""

    profile: CouplingProfile
    bulk_coupling: float
    positions: np.ndarray
    symmetric: bool

    @property
    def couplings(self) -> np.ndarray:
        """Physical hopping amplitudes (profile times the bulk coupling)."""
        return self.bulk_coupling * self.profile.array


def overlap_coupling(distance, base_spacing: float, decay_length: float, bulk_coupling: float = 1.0):
    """Exponential overlap model ``J(d) = J_b exp(-(d - d0) / xi)``."""
    return bulk_coupling * np.exp(-(np.asarray(distance) - base_spacing) / decay_length)


def geometry_to_couplings(
    n_sites: int,
    base_spacing: float,
    displacement: float,
    decay_length: float,
    bulk_coupling: float = 1.0,
    end_displacement: Optional[float] = None,
) -> ArrayGeometry:
    """Lambda-mu profile from displacing the two next-to-end cavities toward the bulk.

    Moving cavity 2 (and N-1) by ``displacement`` stretches the end bond to
    ``d0 + displacement`` and shrinks the next bond to ``d0 - displacement``,
    so ``lambda = exp(-displacement/xi)`` and ``mu = 1/lambda``. Passing
    ``end_displacement`` additionally moves the end cavities outward, which
    decouples the two parameters.
    """
    if decay_length <= 0:
        raise ValueError("decay length must be positive")
    if base_spacing <= 0 or bulk_coupling <= 0:
        raise ValueError("spacing and bulk coupling must be positive")
    if not 0 <= displacement < base_spacing:
        raise ValueError("displacement must satisfy 0 <= displacement < base spacing")
    extra = 0.0 if end_displacement is None else float(end_displacement)
    if extra < 0:
        raise ValueError("end displacement must be non-negative")

    positions = base_spacing * np.arange(n_sites, dtype=float)
    positions[1] += displacement
    positions[-2] -= displacement
    positions[0] -= extra
    positions[-1] += extra
    bonds = np.diff(positions)
    lam = float(overlap_coupling(bonds[0], base_spacing, decay_length))
    mu = float(overlap_coupling(bonds[1], base_spacing, decay_length))
    profile = make_profile("lambda_mu", n_sites, lam, mu)
    return ArrayGeometry(profile, float(bulk_coupling), positions, end_displacement is None)
