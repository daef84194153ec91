"""Pseudo-spectral simulator for a micropolar two-phase mixture on the torus."""

from .cahn_hilliard import (
    ChStepOptions,
    MollifierReport,
    ch_step,
    mollify_initial_phi,
    truncate_mu,
)
from .diagnostics import (
    ConvergenceReport,
    DiffAccumulator,
    DiffReport,
    EnergyOrderReport,
    SweepReport,
    decoupling_identity,
    difference_norms,
    energy_order,
    etar_sweep,
    modelh_sweep,
    spatial_convergence,
)
from .errors import (
    CflViolation,
    ConfigError,
    GridMismatch,
    MaggError,
    MagicMismatch,
    MeanModeError,
    NonConvergence,
    PositivityLoss,
    SeparationViolation,
    SnapshotError,
)
from .hydrodynamics import (
    FlowStepOptions,
    microrotation_step,
    momentum_rhs_explicit,
    momentum_step,
)
from .io import (
    config_digest,
    load_config,
    read_ledger_csv,
    read_snapshot,
    save_config,
    write_ledger_csv,
    write_snapshot,
    write_sweep_report,
)
from .model import (
    DissipationBreakdown,
    EnergyBreakdown,
    ModelParams,
    State,
    capillary_force,
    chemical_potential,
    coeff_of_phi,
    dissipation,
    eta_of_phi,
    eta_r_of_phi,
    make_state,
    potential_deriv,
    potential_second,
    potential_value,
    rho_of_phi,
    total_energy,
)
from .simulation import (
    CoupledStepOptions,
    EnergyLedger,
    InitialCondition,
    ModeSpec,
    OutputConfig,
    RunResult,
    SimConfig,
    build_initial_state,
    cfl_dt,
    config_with,
    coupled_step,
    run,
)
from .spectral import (
    Field,
    SpectralGrid,
    VecField,
    curl_scalar,
    curl_vector,
    dealias,
    derivative,
    divergence,
    gradient,
    inverse_helmholtz,
    l2_norm_sq,
    laplacian,
    leray_project,
    make_grid,
    restrict_coeffs,
    sobolev_norm_sq,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
