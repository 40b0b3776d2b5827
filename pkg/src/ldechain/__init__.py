"""Long-distance entanglement and teleportation in engineered open XX chains."""

__version__ = "0.1.0"

from .chain import (  # noqa: E402
    CorrelationMatrix,
    CouplingProfile,
    FermionModes,
    correlation_matrix,
    diagonalize_modes,
    energy_gap,
    hopping_matrix,
    make_profile,
    solve,
)
from .entanglement import (  # noqa: E402
    TwoQubitDensity,
    concurrence,
    end_to_end_rdm,
    fully_entangled_fraction,
    max_fidelity,
)

__all__ = [
    "CorrelationMatrix",
    "CouplingProfile",
    "FermionModes",
    "TwoQubitDensity",
    "concurrence",
    "correlation_matrix",
    "diagonalize_modes",
    "end_to_end_rdm",
    "energy_gap",
    "fully_entangled_fraction",
    "hopping_matrix",
    "make_profile",
    "max_fidelity",
    "solve",
]
