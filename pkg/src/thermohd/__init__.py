"""Hamilton-d'Alembert dynamics of simple adiabatically closed thermodynamic systems."""

__version__ = "0.1.0"

from .dynamics import (
    DiracReactionSystem,
    FrictionSystem,
    LinearRateLaw,
    MassActionRateLaw,
    NonholonomicSystem,
    ReactionNetwork,
    ReactionSystem,
    TransferNetwork,
    TransferSystem,
    dirac_reduce,
    linear_nonholonomic_field,
    piston_cylinder_model,
    reaction_field,
    reaction_total_hamiltonian,
    simple_friction_field,
    transfer_field,
)
from .integrators import IntegratorConfig, Method, Trajectory, integrate, integrate_at
from .model import (
    ForceField,
    HarmonicDrive,
    IdealMixtureEnergy,
    PistonModel,
    PistonParams,
    ThermalOscillatorModel,
    ThermoPhaseState,
    TransferModel,
    ReactionModel,
    eval_hamiltonian,
    eval_partials,
    temperature,
)

__all__ = [
    "dirac_reduce",
    "DiracReactionSystem",
    "eval_hamiltonian",
    "eval_partials",
    "ForceField",
    "FrictionSystem",
    "HarmonicDrive",
    "IdealMixtureEnergy",
    "integrate",
    "integrate_at",
    "IntegratorConfig",
    "linear_nonholonomic_field",
    "LinearRateLaw",
    "MassActionRateLaw",
    "Method",
    "NonholonomicSystem",
    "piston_cylinder_model",
    "PistonModel",
    "PistonParams",
    "reaction_field",
    "reaction_total_hamiltonian",
    "ReactionModel",
    "ReactionNetwork",
    "ReactionSystem",
    "simple_friction_field",
    "temperature",
    "ThermalOscillatorModel",
    "ThermoPhaseState",
    "Trajectory",
    "transfer_field",
    "TransferModel",
    "TransferNetwork",
    "TransferSystem",
]
