"""Galerkin time stepping for stochastic evolution equations with jumps."""

from .averaging import QuadratureSpec, impl_A, tilde_A, tilde_B, tilde_F
from .coefficients import (
    BoxSampler,
    CoefficientTriple,
    ConditionConstants,
    ConditionReport,
    MarkIntegral,
    check_bf_bounds,
    check_coercivity,
    check_growth,
    check_monotonicity,
    exponential_transform,
    probe_hemicontinuity,
)
from .fixtures import additive_multimode, heat_jump, semilinear, zero_triple
from .harness import (
    ConvergenceReport,
    LadderSpec,
    MCStats,
    SuiteConfig,
    convergence_study,
    coupled_error,
    monte_carlo,
    run_condition_suite,
)
from .noise import (
    AtomMarks,
    MarkPartition,
    NoiseBundle,
    PowerLawMarks,
    TimeGrid,
    build_partition,
    bundle_from_json,
    bundle_to_json,
    coarsen_wiener,
    compensated_cell_increments,
    kappa,
    sample_bundle,
)
from .schemes import (
    ImplicitStepError,
    SchemeConfig,
    SolveReport,
    Trajectory,
    run_explicit,
    run_implicit,
    run_scheme,
    solve_implicit_step,
    stability_margin,
    step_energy_bound,
)
from .space import (
    GalerkinSpace,
    build_sine_space,
    c_b,
    embed,
    norms,
    pairing,
    project,
    restrict,
    smooth_profile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
