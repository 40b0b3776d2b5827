"""Measurement-based teleportation through an XX channel.

The sender holds an input spin (site 0) and the first channel site (site 1);
the receiver holds the last channel site. After a free evolution with the
input spin coupled to site 1, the sender measures S^z on sites 0 and 1, keeps
the outcomes with zero pair magnetization, and the receiver applies a z
rotation of +-pi/2 chosen by the outcome.

Two paths are provided: the closed-form two-cavity state (ideal regime where
the input coupling dominates everything else) and exact diagonalization of the
full (N + 1)-spin system with a thermal channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import ed
from .chain import CouplingProfile

ACCEPTED = ((1, 0), (0, 1))
"""Accepted (site 0, site 1) patterns, 1 = up."""


@dataclass(frozen=True)
class InputQubit:
    """``alpha |up> + beta |down>``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm}, expected 1")

    @classmethod
    def from_abs_alpha(cls, a: float, phase: float = 0.0) -> "InputQubit":
        if not 0 <= a <= 1:
            raise ValueError("|alpha| must lie in [0, 1]")
        return cls(complex(a), np.sqrt(1 - a * a) * np.exp(1j * phase))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    @property
    def density(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())


def rz(theta: float) -> np.ndarray:
    """``exp(-i theta S^z)`` in the ``up, down`` basis."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class OutcomeRecord:
    pattern: tuple[int, int]
    probability: float
    accepted: bool
    receiver_state: Optional[np.ndarray] = field(repr=False)
    """Corrected, normalized receiver state (None for rejected or empty outcomes)."""


@dataclass(frozen=True)
class ProtocolOutcome:
    accepted_probability: float
    fidelity: float
    records: tuple[OutcomeRecord, ...]

    @property
    def total_probability(self) -> float:
        return float(sum(r.probability for r in self.records))


def _finish(records_raw, phi: np.ndarray, angles: dict) -> ProtocolOutcome:
    """Apply corrections to unnormalized receiver states and average the fidelity."""
    records = []
    p_acc = 0.0
    overlap = 0.0
    for pattern, rho_u in records_raw:
        p = float(max(np.trace(rho_u).real, 0.0))
        accepted = pattern in ACCEPTED
        state = None
        if accepted and p > 0:
            u = rz(angles[pattern])
            corrected = u @ rho_u @ u.conj().T
            state = corrected / p
            p_acc += p
            overlap += float((phi.conj() @ corrected @ phi).real)
        records.append(OutcomeRecord(pattern, p, accepted, state))
    fid = overlap / p_acc if p_acc > 0 else 0.0
    return ProtocolOutcome(p_acc, float(np.clip(fid, 0.0, 1.0)), tuple(records))


# ---------------------------------------------------------------------------
# Ideal two-cavity protocol

IDEAL_ANGLES = {(1, 0): np.pi / 2, (0, 1): -np.pi / 2}


def ideal_state_at(qubit: InputQubit, J0: float, t: float) -> np.ndarray:
    """Closed-form three-spin state, indexed ``psi[s0, s1, s2]`` with 0 = up.

    Starts from the input on site 0 times ``(|ud> + |du>)/sqrt(2)`` on sites
    1, 2 and lets sites 0 and 1 exchange with amplitude ``J0`` (channel frozen).
    """
    if J0 <= 0:
        raise ValueError("J0 must be positive")
    a, b = qubit.alpha, qubit.beta
    c, s = np.cos(J0 * t), np.sin(J0 * t)
    psi = np.zeros((2, 2, 2), dtype=complex)
    U, D = 0, 1
    psi[U, U, D] = a
    psi[D, D, U] = b
    psi[U, D, U] = a * c
    psi[U, D, D] = -1j * b * s
    psi[D, U, U] = -1j * a * s
    psi[D, U, D] = b * c
    return psi / np.sqrt(2)


def ideal_protocol(
    qubit: InputQubit, J0: float = 1.0, angles: Optional[dict] = None
) -> ProtocolOutcome:
    """Run the closed-form protocol at ``t = pi / (4 J0)``."""
    psi = ideal_state_at(qubit, J0, np.pi / (4 * J0))
    raw = []
    for pattern in ((1, 1), (1, 0), (0, 1), (0, 0)):
        amp = psi[1 - pattern[0], 1 - pattern[1], :]
        raw.append((pattern, np.outer(amp, amp.conj())))
    return _finish(raw, qubit.vector, IDEAL_ANGLES if angles is None else angles)


# ---------------------------------------------------------------------------
# Exact-diagonalization protocol


@dataclass(frozen=True)
class ProtocolConfig:
    """Channel, input coupling and temperature of a protocol run.

    ``nu`` is the input-to-site-1 coupling in units of the bulk coupling, in
    the same normalization as the channel couplings. ``measurement_time``
    defaults to the half-exchange time ``pi / (2 nu)`` of that bond.
    """

    channel: CouplingProfile
    nu: float
    temperature: float
    measurement_time: Optional[float] = None

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.measurement_time is not None and self.measurement_time <= 0:
            raise ValueError("measurement time must be positive")
        if self.channel.n_sites + 1 > ed.MAX_SITES:
            raise ed.SizeLimitError(
                f"channel of {self.channel.n_sites} sites needs "
                f"{self.channel.n_sites + 1} spins, limit is {ed.MAX_SITES}"
            )

    @property
    def t_star(self) -> float:
        if self.measurement_time is not None:
            return self.measurement_time
        return half_exchange_time(self.nu)

    @property
    def full_profile(self) -> CouplingProfile:
        return self.channel.extended(self.nu)


def half_exchange_time(coupling: float) -> float:
    """Time at which an XX bond of strength ``coupling`` has swapped half an excitation.

    Under ``-J (S^x S^x + S^y S^y)`` the ``|ud>, |du>`` pair mixes as
    ``cos(J t / 2)``, ``i sin(J t / 2)``.
    """
    return np.pi / (2 * coupling)


def correction_angles(coupling_sign: float = 1.0) -> dict:
    """Receiver z-rotation per accepted pattern for an exchange bond of the given sign.

    A positive coupling transfers the excitation with phase ``+i``, the reverse of
    the closed-form ideal state, so the two angles swap relative to it.
    """
    s = np.sign(coupling_sign)
    return {(1, 0): -s * np.pi / 2, (0, 1): s * np.pi / 2}


# Pauli-type pieces of the input density matrix, basis (up, down)
_PIECES = {
    "up": np.array([[1, 0], [0, 0]], dtype=complex),
    "down": np.array([[0, 0], [0, 1]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def _piece_weights(qubit_rho: np.ndarray) -> dict:
    off = qubit_rho[0, 1]
    return {
        "up": qubit_rho[0, 0].real,
        "down": qubit_rho[1, 1].real,
        "x": off.real,
        "y": -off.imag,
    }


@dataclass(frozen=True)
class ProtocolResponse:
    """Linear map from the input qubit to unnormalized receiver states.

    ``receiver[pattern][piece]`` is the 2x2 receiver operator obtained by running
    the protocol on ``piece x channel``. The protocol is linear in the input
    density matrix, so one evolution per piece covers every input.
    """

    config: ProtocolConfig
    receiver: dict = field(repr=False)

    def apply_density(self, qubit_rho: np.ndarray):
        w = _piece_weights(np.asarray(qubit_rho, dtype=complex))
        raw = []
        for pattern in ((1, 1), (1, 0), (0, 1), (0, 0)):
            raw.append((pattern, sum(w[k] * self.receiver[pattern][k] for k in _PIECES)))
        return raw

    def run(self, qubit: InputQubit) -> ProtocolOutcome:
        raw = self.apply_density(qubit.density)
        return _finish(raw, qubit.vector, correction_angles(self.config.nu))

    def run_phase_averaged(self, abs_alpha: float, n_phases: int = 16) -> ProtocolOutcome:
        """Average fidelity over a uniform grid of relative input phases."""
        outs = [self.run(InputQubit.from_abs_alpha(abs_alpha, 2 * np.pi * k / n_phases))
                for k in range(n_phases)]
        fid = float(np.mean([o.fidelity for o in outs]))
        p_acc = float(np.mean([o.accepted_probability for o in outs]))
        return ProtocolOutcome(p_acc, fid, outs[0].records)


@lru_cache(maxsize=16)
def protocol_response(config: ProtocolConfig) -> ProtocolResponse:
    n = config.channel.n_sites
    full = config.full_profile
    receiver_site = n
    channel_state = ed.gibbs_state(config.channel, config.temperature)
    receiver = {p: {} for p in ((1, 1), (1, 0), (0, 1), (0, 0))}
    for name, piece in _PIECES.items():
        rho0 = ed.prepend_qubit(piece, channel_state)
        rho_t = ed.evolve(rho0, full, config.t_star)
        for pattern in receiver:
            post = ed.project_z(rho_t, (0, 1), pattern)
            receiver[pattern][name] = ed.reduce_to_sites(post, (receiver_site,))
    return ProtocolResponse(config, receiver)


def thermal_protocol(config: ProtocolConfig, qubit: InputQubit) -> ProtocolOutcome:
    """Full protocol with a Gibbs channel, by exact diagonalization."""
    return protocol_response(config).run(qubit)


def thermal_protocol_direct(config: ProtocolConfig, qubit: InputQubit) -> ProtocolOutcome:
    """Same as :func:`thermal_protocol` but propagating the actual input state.

    Slower; kept as a cross-check of the linear decomposition.
    """
    channel_state = ed.gibbs_state(config.channel, config.temperature)
    rho0 = ed.prepend_qubit(qubit.density, channel_state)
    rho_t = ed.evolve(rho0, config.full_profile, config.t_star)
    raw = []
    for outcome in ed.measure_z(rho_t, (0, 1)):
        if outcome.state is None:
            rho_u = np.zeros((2, 2), dtype=complex)
        else:
            rho_u = outcome.probability * ed.reduce_to_sites(outcome.state, (config.channel.n_sites,))
        raw.append((outcome.pattern, rho_u))
    return _finish(raw, qubit.vector, correction_angles(config.nu))


@dataclass(frozen=True)
class AlphaRow:
    abs_alpha: float
    fidelity: float
    accepted_probability: float


def fidelity_vs_alpha(
    config: ProtocolConfig,
    alpha_grid: Sequence[float],
    phase_average: bool = False,
    n_phases: int = 16,
) -> list[AlphaRow]:
    """Fidelity and acceptance probability for each ``|alpha|`` (real ``beta`` by default)."""
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha grid is empty")
    if any(not 0 < a < 1 for a in grid):
        raise ValueError("alpha grid values must lie in (0, 1)")
    response = protocol_response(config)
    rows = []
    for a in grid:
        if phase_average:
            out = response.run_phase_averaged(a, n_phases)
        else:
            out = response.run(InputQubit.from_abs_alpha(a))
        rows.append(AlphaRow(a, out.fidelity, out.accepted_probability))
    return rows


def measurement_time_scan(config: ProtocolConfig, qubit: InputQubit, times: Sequence[float]):
    """Fidelity as a function of the measurement time (diagnostic utility)."""
    out = []
    for t in times:
        cfg = ProtocolConfig(config.channel, config.nu, config.temperature, float(t))
        res = thermal_protocol(cfg, qubit)
        out.append((float(t), res.fidelity, res.accepted_probability))
    return out
