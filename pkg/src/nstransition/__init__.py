"""Weak-singularity transition diagnostics for 2D periodic Navier-Stokes flow."""

__version__ = "0.1.0"

from .field_core import (  # noqa: E402
    FlowParams,
    Grid,
    ScalarField,
    Snapshot,
    VelocityField,
    divergence,
    snapshot_read,
    snapshot_write,
    taylor_green,
)
from .leray_diagnostics import (  # noqa: E402
    Regime,
    classify_regime,
    critical_set,
    diagnose_timeline,
    energy_identity_residual,
    h1_norm_sq,
    kinetic_energy,
    leray_membership,
    mechanical_energy_field,
    singularity_indicator,
    streamwise_energy_derivative,
)
from .spectral_solver import (  # noqa: E402
    InitialCondition,
    SolverConfig,
    Timeline,
    analytic_taylor_green,
    pressure_from_velocity,
    simulate,
    step,
)
from .transition_scaling import (  # noqa: E402
    SweepConfig,
    detect_transition_time,
    powerlaw_fit,
    reynolds_sweep,
    synth_sk_dataset,
    timescales,
)
