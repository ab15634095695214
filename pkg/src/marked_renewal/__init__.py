"""Bernoulli-thinned renewal processes: simulation, Laplace-transform
identities for the first marked epochs, and independence/HPP tests."""

from .laws import (
    INF,
    Erlang,
    Exponential,
    ExtendedLaw,
    LatticeGeometric,
    PointMass,
    Uniform,
    is_arithmetic_on_lattice,
    laplace,
    mass_at,
    mean_finite_part,
    parse_law_expr,
    sample,
)
from .rng import RandomStream
from .renewal_sim import (
    EpochPair,
    EpochPairs,
    EpochStatus,
    MarkedArrivalSequence,
    SimConfig,
    Termination,
    batch_counts_at_time,
    batch_sample_epoch_pairs,
    counts_at_time,
    first_epochs,
    simulate_marked_arrivals,
)
from .characterization import (
    CaseDescriptor,
    classify_pair,
    make_case_laws,
    predict_independence,
    theorem1_report,
)

__version__ = "0.1.0"
