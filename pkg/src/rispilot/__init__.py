"""Pilot power allocation for multi-surface reflected links.

The toolkit models a downlink where the direct path is blocked and all
energy arrives through reconfigurable reflecting surfaces. Training is
one uplink slot per element; the resulting LS estimation errors damp
the achievable coherent combining gain. The package provides the
closed-form ergodic gain, closed-form and numeric pilot power
allocators that maximize it under a total training energy budget, and
a reproducible Monte Carlo harness that validates the closed forms.
"""

from .scenario import (
    Position,
    RisSpec,
    Scenario,
    LargeScale,
    dbm_to_watts,
    watts_to_dbm,
    path_loss,
    cascaded_large_scale,
    two_ris_layout,
    from_large_scale,
)
from .channel import RngStream, ChannelRealization, sample_channels
from .estimation import PilotAllocation, ChannelEstimate, estimate_mse, ls_estimate, pilot_overhead
from .reflection import (
    PhaseConfig,
    configure_phases,
    random_phases,
    composite_channel,
    achievable_rate,
    rate_from_gain,
)
from .analysis import (
    GainBreakdown,
    ModelAssumptionWarning,
    alignment_mean,
    ergodic_gain_closed_form,
    objective_phi,
    stationarity_residual,
)
from .allocation import (
    PerRisPowers,
    InfeasibleAllocationError,
    UniformFallbackWarning,
    NonConvergenceError,
    SolverDiagnostics,
    allocate_average,
    allocate_moderate_snr,
    allocate_large_m,
    allocate_equal_m,
    allocate_exact_numeric,
    exact_solver_diagnostics,
    ALLOCATOR_IDS,
    resolve_allocator,
    run_allocator,
)
from .montecarlo import (
    TrialConfig,
    MetricEstimate,
    SweepRow,
    SweepResult,
    trial_gains,
    simulate_metrics,
    sweep_user,
    dynamic_range,
)

__version__ = "0.1.0"
