"""Entropy production of a driven quantum oscillator and its geometric bounds."""

from .bounds import (
    BoundReport,
    classical_lower_bound,
    evaluate_bounds,
    lower_bounds,
    s_exact,
    s_series,
    sigma_exact,
    sigma_numeric,
    upper_bound_spectral,
    work_decomposition,
)
from .dynamics import (
    OscillatorParams,
    Protocol,
    Trajectory,
    adiabaticity,
    ground_state_persistence,
    integrate_trajectory,
    mean_energy_final,
    sudden_qstar,
)
from .gaussian import (
    DiscretizedKernel,
    GaussianState,
    GridSpec,
    closed_form_fidelity,
    equilibrium_state,
    fock_populations,
    gaussian_fidelity,
    kernel_equilibrium,
    kernel_nonequilibrium,
    kernel_pair,
    nonequilibrium_state,
)
from .metrics import (
    MetricReport,
    bures_angle,
    bures_distance,
    hellinger_distance,
    metric_report,
    trace_distance,
)

__version__ = "0.1.0"
