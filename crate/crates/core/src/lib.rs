//! Zero-sum security games with assignment-constraint defender strategies.
//!
//! The defender picks an integral allocation matrix subject to assignment
//! constraints; adversary types each attack their worst target. The crate
//! solves the marginal LP relaxation, turns its solution into a mixed
//! strategy by comb sampling plus domain repair, and provides exact
//! baselines for small instances.

pub mod exact;
pub mod fams;
pub mod game;
pub mod generators;
pub mod harness;
pub mod implementability;
pub mod instance;
pub mod lp;
pub mod marginal;
pub mod sampler;
pub mod solve;
pub mod tsg;

pub use exact::{
    enumerate_pure, exact_maximin, maximin_lp, solve_exact, EnumeratedStrategySet, ExactError,
    ExactSolution,
};
pub use fams::{
    encode_fams, fams_column_generation, fams_dbr, CgOptions, CgSolution, FamsError, FamsFixer,
    FamsInstance,
};
pub use game::{
    AdversaryType, Allocation, AraGame, AssignmentConstraint, CellIndex, GameError,
    MarginalStrategy, MixedStrategyEstimate, PureCheck, PureStrategy, Target, TargetId, TypeId,
    Violation,
};
pub use generators::{gen_fams, gen_tsg, FamsGenConfig, GenConfig, GenError, TsgGenConfig};
pub use harness::{run_bench, write_csv, BenchConfig, BenchError, BenchRow, Family, RowStatus};
pub use implementability::{check_implementability, Implementability, ImplementabilityWitness};
pub use instance::{Instance, ParseError};
pub use marginal::{solve_marginal, MarginalError, MarginalSolution};
pub use sampler::{
    comb_round, comb_sample, estimate_mixed, estimate_mixed_until, sample_pure, to_pe0,
    DomainFixer, FixFailure, MixedEstimate, Pe0Form, PureSample, SamplerError,
};
pub use solve::{
    loss_pct, run_rand, solve, Method, RandOutcome, SolveError, SolveOptions, SolveReport,
};
pub use tsg::{encode_tsg, tsg_detection_ratio, DetectionRatio, TsgError, TsgFixer, TsgInstance};
