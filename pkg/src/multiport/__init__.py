"""Physically consistent MIMO link simulation from antenna impedances."""

from .channel_model import (
    BOLTZMANN_J_PER_K,
    ChannelBundle,
    ImpedanceSystem,
    NoiseConfig,
    build_bundle,
    decoupled_power_root,
    is_scalar_matrix,
    mismatch_power_matrix,
    port_noise_covariance,
    power_coupling,
    power_coupling_root,
    reciprocal_channel,
    reversed_link,
    voltage_transfer,
)
from .em_arrays import (
    ArrayGeometry,
    array_impedance_matrix,
    dipole_mutual_impedance,
    dipole_self_impedance,
    read_impedance_csv,
    sine_cosine_integrals,
    uniform_circular_array,
    write_impedance_csv,
)
from .montecarlo import (
    ConfigError,
    ScenarioConfig,
    ScenarioResult,
    SimulationAbort,
    config_from_dict,
    config_to_dict,
    coupling_realization,
    far_field_coupling_std,
    gaussian_kde,
    read_coupling_file,
    run_scenario,
    write_coupling_file,
)
from .numerics import (
    FactorizationError,
    cholesky_psd,
    hermitize,
    principal_sqrt_psd,
    project_psd_trace,
    simplex_project,
    waterfill,
)
from .strategies import (
    MacSolution,
    PrecodingSolution,
    RateResult,
    SuStrategyResult,
    dpc_sum_rate,
    evaluate_bc_rates,
    greedy_zf,
    mac_sum_capacity,
    su_mimo_capacity,
    su_mimo_naive,
    su_mimo_reciprocal,
    su_miso_capacity,
    su_miso_naive,
    su_miso_reciprocal,
    with_true_power,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "BOLTZMANN_J_PER_K",
    "ChannelBundle",
    "ConfigError",
    "FactorizationError",
    "ImpedanceSystem",
    "MacSolution",
    "NoiseConfig",
    "PrecodingSolution",
    "RateResult",
    "ScenarioConfig",
    "ScenarioResult",
    "SimulationAbort",
    "SuStrategyResult",
    "array_impedance_matrix",
    "build_bundle",
    "cholesky_psd",
    "config_from_dict",
    "config_to_dict",
    "coupling_realization",
    "decoupled_power_root",
    "dipole_mutual_impedance",
    "dipole_self_impedance",
    "dpc_sum_rate",
    "evaluate_bc_rates",
    "far_field_coupling_std",
    "gaussian_kde",
    "greedy_zf",
    "hermitize",
    "is_scalar_matrix",
    "mac_sum_capacity",
    "mismatch_power_matrix",
    "port_noise_covariance",
    "power_coupling",
    "power_coupling_root",
    "principal_sqrt_psd",
    "project_psd_trace",
    "read_coupling_file",
    "read_impedance_csv",
    "reciprocal_channel",
    "reversed_link",
    "run_scenario",
    "simplex_project",
    "sine_cosine_integrals",
    "su_mimo_capacity",
    "su_mimo_naive",
    "su_mimo_reciprocal",
    "su_miso_capacity",
    "su_miso_naive",
    "su_miso_reciprocal",
    "uniform_circular_array",
    "voltage_transfer",
    "waterfill",
    "with_true_power",
    "write_coupling_file",
    "write_impedance_csv",
]
