"""Gaussian covariance-matrix simulator for Caldeira-Leggett battery cycles."""

__version__ = "0.1.0"

from .cycles import (
    BIPARTITE,
    TRIPARTITE,
    ChargingTrace,
    CycleConfig,
    CycleEngine,
    CycleReport,
    SweepCell,
    connect_work_bipartite,
    connect_work_tripartite,
    disconnect_work,
    run_bipartite_cycle,
    run_tripartite_cycle,
    sweep,
    theta_extrema,
)
from .evolution import (
    NormalModeFlow,
    StepperConfig,
    evolve,
    evolve_with_free_bath,
    propagator_const,
    propagator_protocol,
)
from .extraction import (
    ExtractionResult,
    apply_local_battery,
    ergotropy,
    extract,
    extraction_transform,
    theta_rotation,
    theta_transform,
)
from .gqm import (
    SymplecticError,
    WilliamsonResult,
    mean_energy,
    mutual_information,
    relative_entropy_to_thermal,
    sub_block,
    symplectic_eigenvalues,
    symplectic_form,
    thermal_cm,
    von_neumann_entropy,
    williamson_decompose,
)
from .model import (
    BathSample,
    ModelSpec,
    Protocol,
    battery_hamiltonian,
    build_bath,
    build_hamiltonian,
    interaction_matrix,
    protocol_value,
    sample_couplings,
    sample_frequencies,
    spectral_density,
)
from .oracle import MeanForceCM, OracleConfig, gamma_tilde, mean_force_cm, stationary_moments
