//! Expansion-lab: a computational toolkit for one-dimensional semigroup
//! actions and non-autonomous systems.
//!
//! The library detects hyperbolic times of orbital branches, constructs and
//! verifies contraction preballs with explicit distortion constants,
//! classifies systems by expansion type, and runs empirical ergodicity
//! experiments (covering, exactness, minimality, equidistribution,
//! invariant-set closure) — all with seeded, reproducible randomness.

pub mod arcs;
pub mod catalog;
pub mod classify;
pub mod cli;
pub mod domain;
pub mod ergodicity;
pub mod error;
pub mod map;
pub mod pliss;
pub mod preball;
pub mod report;
pub mod rng;
pub mod spline;
pub mod sysfile;
pub mod system;

pub use arcs::{CellGrid, DomainArc};
pub use catalog::{
    doubling_system, interval_example, perturbed_doubling, reach_trapping_region,
    staying_branch, staying_cover, verify_example_conditions, ConditionCheck,
    ExampleConditionReport, IntervalExampleParams, ReachOutcome, StayingOutcome,
    ATTRACTING_LETTER, REPELLING_LETTER,
};
pub use classify::{
    backward_expanding_check, build_branch_from_cover, check_uniform_expansion, classify_action,
    diffeo_obstruction_check, search_expanding_branch, BranchCertificate, BranchResult,
    BranchStrategy, ClassificationReport, ClassifyParams, CoverPatch, DiffeoReport,
    SampleRecord, UniformExpansionReport, WordStrategy,
};
pub use domain::{DomainKind, DomainSpace};
pub use ergodicity::{
    backward_minimality_check, covering_time, equidistribution_test, exactness_check,
    invariant_set_closure, neutral_fixed_cell_exemptions, running_birkhoff_averages,
    BranchPolicy, ClosureOutcome,
    CoverState, CoverWitness, CoveringOutcome, EquidistributionReport, ExemptionMask,
    MinimalityOutcome, ObservableOutcome, TestObservable,
};
pub use error::{Error, Result};
pub use map::{HolderData, MapFamily, SmoothMap1D};
pub use pliss::{
    expansion_exponent, hyperbolic_times, hyperbolic_times_bruteforce, is_hyperbolic_time,
    pliss_times, HyperbolicTimeReport, LogPhiSequence, PhiMode,
};
pub use preball::{
    build_preball, check_bounded_distortion, check_regularity, distortion_constant,
    verify_contraction, ContractionReport, DistortionReport, PointedInterval, Preball,
    PreballMode, RegularityRecord,
};
pub use report::{csv_string, fmt_f64, write_text, ReportEnvelope, RNG_ALGORITHM, TOOL_NAME, TOOL_VERSION};
pub use rng::CounterRng;
pub use spline::MonotoneSpline;
pub use sysfile::{load_system, GeneratorEntry, SystemFile};
pub use system::{birkhoff_sum, log_inverse_lipschitz, GeneratorSystem, Mode, OrbitRecord, Word};
