"""Number-of-states estimation with the rodeo algorithm on a state-vector simulator."""

__version__ = "0.1.0"

from .circuit import StateVector, init_rider_state  # noqa: E402
from .evolution import TrotterConfig, controlled_time_evolution  # noqa: E402
from .hamiltonian import Hamiltonian, PauliString, TfimParams, build_tfim, exact_spectrum  # noqa: E402
from .rodeo import EnergyGrid, NosEstimate, RodeoParams, nos_scan, score_average, theory_score  # noqa: E402
from .thermo import NosTable, partition_function, specific_heat  # noqa: E402

__all__ = [
    "StateVector",
    "init_rider_state",
    "TrotterConfig",
    "controlled_time_evolution",
    "Hamiltonian",
    "PauliString",
    "TfimParams",
    "build_tfim",
    "exact_spectrum",
    "EnergyGrid",
    "NosEstimate",
    "RodeoParams",
    "nos_scan",
    "score_average",
    "theory_score",
    "NosTable",
    "partition_function",
    "specific_heat",
]
