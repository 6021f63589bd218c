"""Classical simulation of rf-dressed adiabatic shell traps for 87Rb."""

__version__ = "0.1.0"

from .characterization import (
    TrapCharacterization,
    characterize,
    hessian_frequencies,
    local_gradient_alpha,
    pendulum_frequencies,
    resonance_height,
    shell_radius,
    shell_surface_sample,
    trap_minimum,
    transverse_frequency,
)
from .condensate import GasSpec, critical_temperature, dimensionality_report, tf_chemical_potential
from .config import ConfigError, RunConfig, parse_config
from .dressed import (
    DressedPotential,
    RfDrive,
    adiabatic_energy,
    dressed_manifold,
    force,
    mixing_angle,
    rabi_from_field_amplitude,
    total_potential,
)
from .dynamics import (
    CloudState,
    build_loading_schedule,
    cloud_statistics,
    dipole_resonance_scan,
    energy_drift,
    integrate_ensemble,
    landau_zener_survival,
    sample_shell_cloud,
    sample_thermal_cloud,
    time_of_flight,
)
from .errors import (
    CalibrationError,
    CharacterizationError,
    DegenerateGradientError,
    DomainError,
    EmptyCloudError,
    NoShellError,
    RfShellError,
    SaddlePointError,
    StepSizeError,
)
from .field import (
    RB87,
    IoffePritchardField,
    PhysicalConstants,
    TrapPotential,
    calibrate_ip_from_quic,
    field_norm,
    reference_quic_field,
    trap_potential,
)
from .imperfections import (
    FrequencyNoiseModel,
    StaircaseSpec,
    calibrate_to_fwhm,
    decorate_schedule_with_noise,
    heating_rate_from_position_noise,
    phase_jump_schedule,
    position_sensitivity,
    simulate_holding_heating,
    staircase_schedule,
)
from .schedule import RfSchedule, Segment
