//! Drivers wiring the walker and tracker to concrete problems: streaming
//! exponential-family posteriors, drifting truncated targets and mixtures,
//! simulated-annealing linear optimization, and regret-minimizing
//! prediction.

pub mod anneal;
pub mod drift;
pub mod mixture;
pub mod posterior;
pub mod predict;

pub use anneal::{anneal_minimize, AnnealOptions, AnnealReport, AnnealSchedule};
pub use drift::{drift_track, DriftOptions, DriftPolicy, DriftTracker};
pub use mixture::{Mixture, MixtureComponent};
pub use posterior::{ExpFamilyModel, PosteriorOptions, PosteriorTracker};
pub use predict::{default_eta, PredictorOptions, PredictorState};
