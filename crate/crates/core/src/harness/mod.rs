//! Randomized and worked-example checks built on the library.

pub mod checks;
pub mod demos;
pub mod random;
pub mod suites;

pub use checks::{
    check_ensemble_equivalence, check_ensemble_program, check_no_signaling, joint_distribution,
    squaring_transform, EnsembleReport, NoSignalingReport, SignalingWitness, Step,
};
pub use demos::{atom_demo, correlated_env_demo, stern_gerlach_demo, stern_gerlach_instrument};
pub use suites::{run_suite, SuiteConfig, SuiteName, SuiteReport};
