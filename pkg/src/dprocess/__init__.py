"""Degree-constrained random graph process: simulation, deterministic
trajectory functions, and statistical verification of its limit behavior."""

from .errors import (
    ConfigMismatchError,
    DegenerateSampleError,
    DomainError,
    GuardError,
    ParameterError,
    ProcessStuckError,
    TailWindowError,
)
from .experiments import (
    ExperimentBatch,
    ExperimentConfig,
    ResultRow,
    analyze,
    audit_trajectory,
    compare_counts_to_exact,
    default_checkpoints,
    load_results,
    probe_zero_at,
    run_experiment,
    scale_hitting_time,
)
from .oracle import EnumerationTable, exact_enumeration
from .process import (
    EdgeAdded,
    EdgeClassCounts,
    ProcessParams,
    ProcessState,
    Stuck,
    TrajectoryRecord,
    edge_class_counts,
    new_process,
    run,
    run_full,
)
from .rng import SplitMix64, mix_seed
from .stats import (
    TestReport,
    chi_square_gof,
    chi_square_uniform,
    exp_cdf,
    independence_report,
    ks_statistic,
)
from .tail import (
    TailSequence,
    extract_tail_sequence,
    tail_law_report,
    truncation_model_probability,
)
from .theory import (
    EnvelopeParams,
    TheoryEval,
    asymptotic_sj,
    envelope_first,
    envelope_second,
    eval_theory,
    eval_theory_at_step,
    i_of_r,
    i_trans,
    ode_crosscheck,
    phase_bounds,
    solve_y0,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
