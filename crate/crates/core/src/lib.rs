//! UAV-assisted integrated uplink communication and over-the-air computation.
//!
//! Two layers: a per-slot alternating optimizer for user power, sensor
//! coefficients and the receive normalizing factor ([`solver`]), and a soft
//! actor-critic learner for the UAV trajectory and user scheduling
//! ([`sac`], [`env`]). The numerical core is generic over [`Scalar`]; the
//! aliases below fix it to `f64`, which is what the learner uses.

pub mod approximator;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod phy;
pub mod rng;
pub mod sac;
pub mod scalar;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use scenario::{Point2, Scenario, ScenarioConfig, TopologyKind};

pub type ChannelParams = channel::ChannelParams<f64>;
pub type ChannelState = channel::ChannelState<f64>;
pub type PowerLimits = phy::PowerLimits<f64>;
pub type SlotDecision = phy::SlotDecision<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type SlotSolution = solver::SlotSolution<f64>;
pub type Pins = solver::Pins<f64>;
pub type Mlp = approximator::Mlp<f64>;
pub type Adam = approximator::Adam<f64>;
pub type SacConfig = sac::SacConfig<f64>;
pub type SacAgent = sac::SacAgent<f64>;
pub type Transition = sac::Transition<f64>;
pub type ReplayBuffer = sac::ReplayBuffer<f64>;
pub use env::{Env, EpisodeSummary, MdpState, RewardConfig, StepOutcome, TraceRecord};
pub use baselines::BaselineKind;
pub use harness::{Checkpoint, RunConfig};
