//! Growing question networks: the null growth model, question-selection
//! policies, superimposed-graph replay and the metrics that score them.
//!
//! Numeric kernels (link bias, its density, the binomial test, metrics and
//! theory curves) are generic over [`Scalar`]; simulation engines run in
//! `f64`. The aliases below name the common concrete instantiations.

pub mod experiment;
pub mod graphgen;
pub mod metrics;
pub mod net;
pub mod nullmodel;
pub mod policy;
pub mod replay;
pub mod scalar;
pub mod seed;

pub use graphgen::{ba_graph, er_gnm_connected, GraphError, UnderlyingGraph};
pub use metrics::{
    answers_histogram, degree_distribution, fit_tail_slope, snapshot, DegreeCounts, DegreeRow, Denominators,
    MetricsError, MetricsSnapshot,
};
pub use net::{Answer, AnswerTally, ItemId, NetError, QuestionKey, QuestionNet};
pub use nullmodel::{run_null, step_null, theory_curves, NullModelError, NullParams, TheoryCurves};
pub use policy::binom_test_two_sided;
pub use policy::{link_bias, phi_density, sample_link_bias, DomainError, LinkBias};
pub use policy::{select, PolicyError, PolicySpec, SamplerState};
pub use replay::{load_oracle, AnswerOracle, Dataset, Replay, ReplayConfig, ReplayError};
pub use scalar::Scalar;
pub use seed::replicate_seed;

pub type MetricsSnapshotF64 = MetricsSnapshot<f64>;
pub type MetricsSnapshotF32 = MetricsSnapshot<f32>;
pub type DegreeRowF64 = DegreeRow<f64>;
pub type DegreeRowF32 = DegreeRow<f32>;
pub type LinkBiasF64 = LinkBias<f64>;
pub type LinkBiasF32 = LinkBias<f32>;
pub type TheoryCurvesF64 = TheoryCurves<f64>;
pub type TheoryCurvesF32 = TheoryCurves<f32>;
