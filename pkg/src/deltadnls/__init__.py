"""Discrete nonlinear Schroedinger lattices with a point defect.

Submodules
----------
lattice      fields, operators and conserved functionals
modes        closed-form linear defect modes and eigen checks
groundstate  Nehari-manifold and fixed-mass ground-state solvers
thresholds   trial-profile energies and excitation thresholds
dynamics     split-step time evolution and decay experiments
cli          file-driven experiment runner
"""

from .errors import (
    AdmissibilityError,
    ConvergenceError,
    DNLSError,
    IntegrationError,
    NoBoundState,
    NoNehariProjection,
    ParameterError,
    SolverCollapse,
    WindowError,
)
from .lattice import (
    Boundary,
    LatticeField,
    ModelParams,
    WeightSpec,
    action,
    apply_delta,
    energy,
    hamiltonian,
    laplacian,
    lp_norm,
    mass,
    nehari,
    read_snapshot,
    weighted_l2,
    write_snapshot,
)
from .modes import Branch, DefectMode, bound_state_energy, defect_mode, eigensolve_check, mode_mass
from .groundstate import (
    GroundState,
    NehariCertificate,
    decay_fit,
    fibering_scale,
    m1_m2_crosscheck,
    minimize_action_m1,
    minimize_energy_m2,
    nehari_bounds,
    project_to_nehari,
)
from .thresholds import (
    Regime,
    ThresholdReport,
    TrialProfile,
    binomial_quotient,
    eta_scan,
    interpolation_check,
    power_sum,
    threshold_formulas,
    trial_energy,
)
from .dynamics import (
    ScatterFit,
    TrajectoryRecord,
    deflate,
    evolve,
    linear_dispersive_fit,
    persistence_experiment,
    scatter_experiment,
)

__version__ = "0.1.0"
