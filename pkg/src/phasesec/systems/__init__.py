from .base import CallableSystem, DynamicalSystem
from .pendulum import (
    CartesianState,
    PendulumParams,
    PendulumSystem,
    constraint_jacobian,
    constraint_rates,
    constraint_values,
    pendulum_angular_momentum,
    pendulum_energy,
    pendulum_rhs,
)
from .satellite import (
    THETA_MIN,
    SatelliteParams,
    SatelliteState,
    SatelliteSystem,
    satellite_full_hamiltonian,
    satellite_hamiltonian,
    satellite_rhs,
)

__all__ = [
    "CallableSystem",
    "DynamicalSystem",
    "CartesianState",
    "PendulumParams",
    "PendulumSystem",
    "constraint_jacobian",
    "constraint_rates",
    "constraint_values",
    "pendulum_angular_momentum",
    "pendulum_energy",
    "pendulum_rhs",
    "THETA_MIN",
    "SatelliteParams",
    "SatelliteState",
    "SatelliteSystem",
    "satellite_full_hamiltonian",
    "satellite_hamiltonian",
    "satellite_rhs",
]
