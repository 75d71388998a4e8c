//! Core library of the bilateral-control imitation learning workbench.
//!
//! The pipeline mirrors how the physical study runs: simulate two 3-DOF
//! robots under 4ch bilateral control ([`plant`], [`control`]), record
//! demonstrations from a scripted operator ([`teleop`], [`episode`]), train
//! LSTM sequence models with or without autoregressive learning
//! ([`seqmodel`]), replace the master with the trained model ([`autonomy`]),
//! and score the result ([`metrics`], [`experiment`]).

pub mod autonomy;
pub mod control;
pub mod det;
pub mod episode;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod operator;
pub mod plant;
pub mod plot;
pub mod seqmodel;
pub mod task;
pub mod teleop;

pub use autonomy::{run_autonomous, AutonomyConfig, CommandSource, ModelPredictor, ReplayPredictor};
pub use control::{
    bilateral_refs, slave_ref_autonomous, ControlGains, ObserverChain, RobotState9,
};
pub use episode::{
    downsample, load_episode, save_episode, Episode, EpisodeRow, TrainingSequence,
    PREDICTION_STRIDE, ROBOT_DIMS, STATE_DIMS,
};
pub use error::{Error, Result};
pub use experiment::{run_matrix, ExperimentSpec, MetricsReport};
pub use metrics::{
    metric_corridor, metric_cycle_variance, metric_open_loop, metric_sync, CorridorReport,
    SyncMetrics,
};
pub use operator::{CubicTrack, OperatorModel, Waypoint};
pub use plant::{
    env_torque, friction_torque, gravity_torque, step_plant, EnvironmentModel, JointTriple,
    PlantParams, PlantState, WallSide,
};
pub use plot::emit_plot;
pub use seqmodel::{train, ModelConfig, ModelVariant, Normalizer, SequenceModel, TrainRegime};
pub use task::{Corridor, TaskKind, TaskSpec};
pub use teleop::{run_demo, SimConfig};
