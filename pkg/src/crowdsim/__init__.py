"""Crowd dynamics toolkit: coupled eikonal/Fokker-Planck evolution in 1D,
radial characteristic analysis with shock detection, and the stationary
flow problem with critical-current computation."""

from .grid import (
    DensityField,
    DirichletDensity,
    DirichletValue,
    Grid1D,
    InfluxDensity,
    NoFlux,
    ReflectingValue,
    ValueField,
    build_grid,
    sample_function,
    total_mass,
)
from .eikonal import (
    EikonalConfig,
    EikonalConvergenceError,
    NoExitError,
    congestion_mask,
    hj_residual,
    solve_eikonal,
)
from .transport import (
    BdfStepper,
    FluxSpec,
    TransportOperator,
    assemble_adjoint,
    hj_tilde_residual,
    interface_fluxes,
    step_transport,
)
from .coupled import (
    Scenario,
    SimulationAborted,
    SimulationRecord,
    discrete_flow_steady_state,
    distance_to_stationary,
    run_scenario,
)
from .radial import (
    Characteristic,
    RadialProfile,
    ShockReport,
    analytic_shock_time_3d,
    case_profile,
    closed_form_3d,
    detect_shock,
    integrate_characteristic,
    rho_from_radius,
    solve_2d_implicit,
    v_of_rho,
    vacuum_profile,
)
from .stationary import (
    StationaryProblem,
    StationarySolution,
    critical_current,
    critical_current_exact,
    match_current_to_left_value,
    riccati_closed_form,
    solve_stationary,
    solve_stationary_inviscid,
    sweep_currents,
    sweep_viscosities,
)
from .diagnostics import (
    EstimateReport,
    check_bounds,
    du_lp_norms,
    dissipation_integral,
    estimate_report,
    lyapunov_series,
)

__version__ = "0.1.0"
