"""Deformed multi-photon Jaynes-Cummings dynamics.

Simulates a two-level atom coupled to one quantized field mode through a
k-photon, intensity-deformed, time-modulated interaction with optional
Kerr and Stark terms, and reports atomic inversion and entropy-squeezing
time series for coherent, squeezed-vacuum and thermal initial fields.
"""

from .dynamics import (
    AmplitudeState,
    ModeCoefficients,
    ModelParams,
    evolve_closed_form,
    evolve_ode_oracle,
    max_amplitude_deviation,
    mode_coefficients,
    norm,
)
from .errors import (
    ConfigError,
    IntegrationFailureError,
    InvalidNonlinearityError,
    InvalidParameterError,
    NumericalConsistencyError,
    OutputError,
    PhysicsValidationError,
    PresetLookupError,
    SimulationError,
)
from .field_states import (
    PhotonDistribution,
    choose_truncation,
    coherent_distribution,
    squeezed_distribution,
    thermal_distribution,
    thermal_nbar_from_temperature,
)
from .nonlinearity import Nonlinearity
from .observables import (
    ObservableRecord,
    ReducedAtomDensity,
    atomic_inversion,
    atomic_inversion_closed,
    entropy_squeezing,
    pauli_entropies,
    reduced_density,
)
from .scenario import (
    ScenarioConfig,
    ScenarioResult,
    available_presets,
    emit,
    measure_revivals,
    parse_config,
    preset,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeState",
    "ConfigError",
    "IntegrationFailureError",
    "InvalidNonlinearityError",
    "InvalidParameterError",
    "ModeCoefficients",
    "ModelParams",
    "Nonlinearity",
    "NumericalConsistencyError",
    "ObservableRecord",
    "OutputError",
    "PhotonDistribution",
    "PhysicsValidationError",
    "PresetLookupError",
    "ReducedAtomDensity",
    "ScenarioConfig",
    "ScenarioResult",
    "SimulationError",
    "atomic_inversion",
    "atomic_inversion_closed",
    "available_presets",
    "choose_truncation",
    "coherent_distribution",
    "emit",
    "entropy_squeezing",
    "evolve_closed_form",
    "evolve_ode_oracle",
    "max_amplitude_deviation",
    "measure_revivals",
    "mode_coefficients",
    "norm",
    "parse_config",
    "pauli_entropies",
    "preset",
    "reduced_density",
    "run_scenario",
    "squeezed_distribution",
    "thermal_distribution",
    "thermal_nbar_from_temperature",
]
