//! Autonomous operation: the trained model replaces the master robot and its
//! controller. Predictions run every 20 ms, the slave control loop every
//! 1 ms, with the command held between predictions (zero-order hold).

use crate::control::{compensation_torque, slave_ref_autonomous, RobotState9};
use crate::det::{derive_seed, Rng64};
use crate::episode::{Episode, EpisodeRow, PREDICTION_STRIDE};
use crate::error::{Error, Result};
use crate::plant::{env_torque, step_plant, JointTriple, PlantState};
use crate::seqmodel::{HiddenState, ModelVariant, Normalizer, SequenceModel};
use crate::task::TaskSpec;
use crate::teleop::SimConfig;

/// Timing of the autonomous loop.
#[derive(Clone, Copy, Debug)]
pub struct AutonomyConfig {
    pub prediction_period_ms: u64,
    pub control_period_ms: u64,
    /// Overrides the task's evaluation duration when set, s.
    pub max_duration_s: Option<f64>,
}

impl Default for AutonomyConfig {
    fn default() -> Self {
        AutonomyConfig {
            prediction_period_ms: PREDICTION_STRIDE as u64,
            control_period_ms: 1,
            max_duration_s: None,
        }
    }
}

impl AutonomyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.control_period_ms == 0
            || self.prediction_period_ms == 0
            || self.prediction_period_ms % self.control_period_ms != 0
        {
            return Err(Error::InvalidConfig(
                "prediction period must be a multiple of the control period".into(),
            ));
        }
        Ok(())
    }

    pub fn stride_ticks(&self) -> u64 {
        self.prediction_period_ms / self.control_period_ms
    }
}

/// Assembles the normalized model input from the measured slave state and
/// the virtual master.
pub fn build_input(
    variant: ModelVariant,
    normalizer: &Normalizer,
    slave: &RobotState9,
    virtual_master: &RobotState9,
) -> Vec<f64> {
    let mut row = [0.0; crate::episode::STATE_DIMS];
    row[..9].copy_from_slice(&slave.to_array());
    row[9..].copy_from_slice(&virtual_master.to_array());
    normalizer.normalize_cols(variant.input_cols(), &row)
}

/// Converts a normalized model output into the denormalized slave command.
///
/// Returns the command and, for the paired variant, the new virtual master
/// (the predicted master half; the predicted slave half is never used).
pub fn command_from_output(
    variant: ModelVariant,
    normalizer: &Normalizer,
    y: &[f64],
) -> Result<(RobotState9, Option<RobotState9>)> {
    if y.len() != variant.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: variant.output_dim(),
            got: y.len(),
            context: "model output",
        });
    }
    let cols = variant.output_cols();
    let denorm = |block: std::ops::Range<usize>| -> RobotState9 {
        let values: Vec<f64> = block
            .clone()
            .map(|d| normalizer.denorm_at(d, y[d - cols.start]))
            .collect();
        RobotState9::from_slice(&values)
    };
    Ok(match variant {
        ModelVariant::S2S => (denorm(0..9), None),
        ModelVariant::S2M => (denorm(9..18), None),
        ModelVariant::Sm2Sm => {
            let master = denorm(9..18);
            (master, Some(master))
        }
    })
}

/// Producer of slave commands at the prediction cadence. The neural model is
/// the production source; a replayed recording is the test oracle.
pub trait CommandSource {
    fn next_command(&mut self, measured_slave: &RobotState9) -> Result<RobotState9>;
    /// Label recorded in episode metadata.
    fn label(&self) -> String;
}

/// The trained model driving the loop.
pub struct ModelPredictor<'a> {
    model: &'a SequenceModel,
    hidden: HiddenState,
    virtual_master: Option<RobotState9>,
}

impl<'a> ModelPredictor<'a> {
    pub fn new(model: &'a SequenceModel) -> Self {
        ModelPredictor {
            model,
            hidden: model.fresh_hidden(),
            virtual_master: None,
        }
    }
}

impl CommandSource for ModelPredictor<'_> {
    fn next_command(&mut self, measured_slave: &RobotState9) -> Result<RobotState9> {
        // The virtual master starts as a copy of the measured slave.
        let vm = self.virtual_master.unwrap_or(*measured_slave);
        let x = build_input(
            self.model.config.variant,
            &self.model.normalizer,
            measured_slave,
            &vm,
        );
        let y = self.model.step(&x, &mut self.hidden)?;
        let (command, new_vm) =
            command_from_output(self.model.config.variant, &self.model.normalizer, &y)?;
        if let Some(vm) = new_vm {
            self.virtual_master = Some(vm);
        }
        Ok(command)
    }

    fn label(&self) -> String {
        self.model.config.label()
    }
}

/// Replays the recorded master stream of a demo episode at the prediction
/// cadence; the oracle for loop-correctness checks.
pub struct ReplayPredictor {
    commands: Vec<RobotState9>,
    cursor: usize,
}

impl ReplayPredictor {
    pub fn from_episode(ep: &Episode) -> Result<Self> {
        if ep.rows.len() < PREDICTION_STRIDE {
            return Err(Error::TooShort(ep.rows.len()));
        }
        let commands = ep
            .rows
            .iter()
            .step_by(PREDICTION_STRIDE)
            .map(|r| r.master)
            .collect();
        Ok(ReplayPredictor {
            commands,
            cursor: 0,
        })
    }
}

impl CommandSource for ReplayPredictor {
    fn next_command(&mut self, _measured_slave: &RobotState9) -> Result<RobotState9> {
        let idx = self.cursor.min(self.commands.len() - 1);
        self.cursor += 1;
        Ok(self.commands[idx])
    }

    fn label(&self) -> String {
        "replay".into()
    }
}

/// Runs the slave alone under the 4ch slave controller with commands from
/// `source`, recording a 1 ms episode.
pub fn run_with_source(
    source: &mut dyn CommandSource,
    task: &TaskSpec,
    sim: &SimConfig,
    auto: &AutonomyConfig,
    seed: u64,
) -> Result<Episode> {
    auto.validate()?;
    let params = &sim.params;
    let gains = &sim.gains;
    let dt = sim.control_dt;
    let stride = auto.stride_ticks();
    let duration = auto.max_duration_s.unwrap_or(task.eval_duration);
    let ticks = (duration / dt).round() as u64;

    let mut slave = start_state(task, sim, seed);
    let mut chain = crate::control::ObserverChain::new(gains);
    // As in the demo loop, observers initialize against the resting
    // compensation torque so the reaction-force estimate starts at zero.
    let mut applied = compensation_torque(
        params,
        &RobotState9 {
            theta: slave.theta,
            dtheta: JointTriple::ZERO,
            tau: JointTriple::ZERO,
        },
    );
    let mut command = RobotState9::default();
    let mut predictions = 0u64;
    let mut limit_hit = false;

    let mut ep = Episode::default();
    ep.meta.insert("mode".into(), "autonomous".into());
    ep.meta.insert("task".into(), task.name().into());
    ep.meta.insert("parameter".into(), format!("{}", task.parameter));
    ep.meta.insert("seed".into(), format!("{seed}"));
    ep.meta.insert("variant".into(), source.label());
    ep.meta
        .insert("config_hash".into(), format!("{:016x}", sim.config_hash()));
    ep.rows.reserve(ticks as usize);

    for tick in 0..ticks {
        let t = tick as f64 * dt;
        let s9 = chain.observe(slave.theta, applied, params, gains, dt);
        if !s9.is_finite() {
            return Err(Error::NonFinite {
                tick,
                context: "slave observation".into(),
            });
        }

        if tick % stride == 0 {
            command = source.next_command(&s9)?;
            if !command.is_finite() {
                return Err(Error::NonFinite {
                    tick,
                    context: "predicted command".into(),
                });
            }
            predictions += 1;
        }

        let ref_s = slave_ref_autonomous(&command, &s9, gains, params);
        crate::control::check_finite(ref_s, tick, "slave reference")?;
        let env_now = env_torque(&task.environment, &slave, t);

        ep.rows.push(EpisodeRow {
            t_ms: tick,
            slave: s9,
            master: command,
            ref_slave: ref_s,
            ref_master: JointTriple::ZERO,
            env: env_now,
        });

        applied = ref_s + compensation_torque(params, &s9);
        let sub_dt = dt / sim.substeps as f64;
        for s in 0..sim.substeps {
            let step = step_plant(
                &slave,
                applied,
                &task.environment,
                params,
                t + s as f64 * sub_dt,
                sub_dt,
            )
            .map_err(|e| match e {
                Error::NonFinite { context, .. } => Error::NonFinite { tick, context },
                other => other,
            })?;
            slave = step.state;
            limit_hit |= step.limit_clamped;
        }
    }

    ep.meta.insert("predictions".into(), format!("{predictions}"));
    if limit_hit {
        // A joint-limit excursion marks the trial failed but does not abort it.
        ep.meta.insert("limit_hit".into(), "true".into());
    }
    Ok(ep)
}

fn start_state(task: &TaskSpec, sim: &SimConfig, seed: u64) -> PlantState {
    let mut rng = Rng64::new(derive_seed(derive_seed(seed, "slave"), "start-pose"));
    let mut pose = task.start_pose();
    for j in 0..3 {
        let v = pose.get(j) + rng.range(-sim.start_jitter, sim.start_jitter);
        pose.set(j, v);
    }
    PlantState::at_rest(pose)
}

/// Autonomous run with the trained model as the command source.
pub fn run_autonomous(
    model: &SequenceModel,
    task: &TaskSpec,
    sim: &SimConfig,
    auto: &AutonomyConfig,
    seed: u64,
) -> Result<Episode> {
    let mut source = ModelPredictor::new(model);
    run_with_source(&mut source, task, sim, auto, seed)
}
