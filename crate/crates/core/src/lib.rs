//! Contraction certificates, parametric projection controllers and
//! closed-loop simulation for LTI plants under input constraints.
//!
//! The controller is `u*(x) = Π_{𝒰(x)}(Kx)`, the Euclidean projection of a
//! linear feedback onto a state-dependent polyhedral set. Since projections
//! are 1-cocoercive, `u*` can be certified with a Lur'e-type LMI, giving a
//! weighted-norm decay rate on the region where `𝒰(x)` has interior.

// `!(x > 0.0)` guards reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop_sim;
pub mod error;
pub mod lure_cert;
pub mod matlin;
pub mod param_proj;
pub mod rng;
pub mod synthesis;

pub use closed_loop_sim::{
    batch_simulate, check_decay_envelope, check_lyapunov_decrease, check_safety,
    detect_equilibrium, fit_semiglobal_rate, integrate, ClosedLoopSystem, EnvelopeReport,
    Equilibrium, LyapunovReport, RateFit, SafetyReport, SimConfig, Termination, Trajectory,
};
pub use error::{Error, Result};
pub use lure_cert::{
    find_certificate, max_contraction_rate, verify_certificate, CertSearchConfig, CertVerification,
    Feasibility, LtiPlant, LureCertificate, RateSearch,
};
pub use matlin::{Cholesky, Matrix, SymmetricMatrix};
pub use param_proj::{eval_controller, ConstraintFamily, ProjResult, ProjectionController};
pub use rng::SplitMix64;
pub use synthesis::{solve_care, CareSolution, LqrWeights};
