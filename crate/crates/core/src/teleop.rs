//! The demonstration loop: both robots under 4ch bilateral control at 1 kHz,
//! the master driven by the scripted operator, the slave by the task
//! environment, everything recorded into an [`Episode`].

use crate::control::{
    bilateral_refs, check_finite, compensation_torque, ControlGains, ObserverChain,
};
use crate::det::{derive_seed, fnv1a64, Rng64};
use crate::episode::{Episode, EpisodeRow};
use crate::error::{Error, Result};
use crate::operator::OperatorModel;
use crate::plant::{
    env_torque, step_plant, EnvironmentModel, JointTriple, PlantParams, PlantState,
};
use crate::task::TaskSpec;

/// Timing and physics configuration shared by the demo and autonomous loops.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub gains: ControlGains,
    pub params: PlantParams,
    /// Control and recording period, s.
    pub control_dt: f64,
    /// Integrator substeps per control tick.
    pub substeps: usize,
    /// Seeded start-pose perturbation per joint, rad.
    pub start_jitter: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gains: ControlGains::default(),
            params: PlantParams::default(),
            control_dt: 1e-3,
            substeps: 10,
            start_jitter: 0.002,
        }
    }
}

impl SimConfig {
    /// Stable hash of the numeric configuration, recorded in episode metadata.
    pub fn config_hash(&self) -> u64 {
        let g = &self.gains;
        let p = &self.params;
        let text = format!(
            "{};{};{};{};{};{};{:?};{:?};{};{};{};{};{}",
            g.kp,
            g.kd,
            g.kf,
            g.g_diff,
            g.g_dob,
            g.g_rfob,
            p.inertia,
            p.gravity,
            p.viscous,
            p.joint_limit,
            self.control_dt,
            self.substeps,
            self.start_jitter,
        );
        fnv1a64(text.as_bytes())
    }
}

/// Integrates one robot over a control tick with the applied torque held.
fn integrate_tick(
    state: &mut PlantState,
    tau_applied: JointTriple,
    env: &EnvironmentModel,
    params: &PlantParams,
    t_tick: f64,
    cfg: &SimConfig,
    tick: u64,
    limit_flag: &mut bool,
) -> Result<()> {
    let sub_dt = cfg.control_dt / cfg.substeps as f64;
    for s in 0..cfg.substeps {
        let t = t_tick + s as f64 * sub_dt;
        let step = step_plant(state, tau_applied, env, params, t, sub_dt).map_err(|e| match e {
            Error::NonFinite { context, .. } => Error::NonFinite { tick, context },
            other => other,
        })?;
        *state = step.state;
        *limit_flag |= step.limit_clamped;
    }
    Ok(())
}

fn jittered_start(task: &TaskSpec, cfg: &SimConfig, seed: u64) -> PlantState {
    let mut rng = Rng64::new(derive_seed(seed, "start-pose"));
    let mut pose = task.start_pose();
    for j in 0..3 {
        let v = pose.get(j) + rng.range(-cfg.start_jitter, cfg.start_jitter);
        pose.set(j, v);
    }
    PlantState::at_rest(pose)
}

/// Runs a full bilateral demonstration and records it at 1 ms.
///
/// The master is driven by the operator torque plus its half of the bilateral
/// law; the slave by its half plus the task environment. Identical inputs
/// give byte-identical episodes.
pub fn run_demo(
    task: &TaskSpec,
    op: &OperatorModel,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Episode> {
    let params = &cfg.params;
    let gains = &cfg.gains;
    let dt = cfg.control_dt;
    let ticks = (task.duration / dt).round() as u64;

    let mut master = jittered_start(task, cfg, derive_seed(seed, "master"));
    let mut slave = jittered_start(task, cfg, derive_seed(seed, "slave"));
    let mut master_chain = ObserverChain::new(gains);
    let mut slave_chain = ObserverChain::new(gains);
    // The robots sat at rest under gravity compensation before logging began,
    // so the observers initialize against that torque instead of zero.
    let rest = |theta| crate::control::RobotState9 {
        theta,
        dtheta: JointTriple::ZERO,
        tau: JointTriple::ZERO,
    };
    let mut applied_m = compensation_torque(params, &rest(master.theta));
    let mut applied_s = compensation_torque(params, &rest(slave.theta));
    let mut limit_hit = false;

    let mut ep = Episode::default();
    ep.meta.insert("mode".into(), "demo".into());
    ep.meta.insert("task".into(), task.name().into());
    ep.meta.insert("parameter".into(), format!("{}", task.parameter));
    ep.meta.insert("seed".into(), format!("{seed}"));
    ep.meta
        .insert("config_hash".into(), format!("{:016x}", cfg.config_hash()));
    ep.rows.reserve(ticks as usize);

    for tick in 0..ticks {
        let t = tick as f64 * dt;

        let m9 = master_chain.observe(master.theta, applied_m, params, gains, dt);
        let s9 = slave_chain.observe(slave.theta, applied_s, params, gains, dt);

        let (ref_m, ref_s) = bilateral_refs(&m9, &s9, gains, params);
        check_finite(ref_m, tick, "master reference")?;
        check_finite(ref_s, tick, "slave reference")?;
        let tau_op = op.torque(&m9, t);
        let env_now = env_torque(&task.environment, &slave, t);

        ep.rows.push(EpisodeRow {
            t_ms: tick,
            slave: s9,
            master: m9,
            ref_slave: ref_s,
            ref_master: ref_m,
            env: env_now,
        });

        applied_m = ref_m + compensation_torque(params, &m9);
        applied_s = ref_s + compensation_torque(params, &s9);

        integrate_tick(
            &mut master,
            applied_m + tau_op,
            &EnvironmentModel::Free,
            params,
            t,
            cfg,
            tick,
            &mut limit_hit,
        )?;
        integrate_tick(
            &mut slave,
            applied_s,
            &task.environment,
            params,
            t,
            cfg,
            tick,
            &mut limit_hit,
        )?;
    }

    if limit_hit {
        ep.meta.insert("limit_hit".into(), "true".into());
    }
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_row_count_matches_duration() {
        let task = TaskSpec::free_motion(3.0);
        let op = task.operator(1);
        let ep = run_demo(&task, &op, &SimConfig::default(), 1).unwrap();
        assert_eq!(ep.rows.len(), 3000);
        assert!(ep.is_finite());
    }

    #[test]
    fn static_reference_settles_synchronized() {
        use crate::operator::CubicTrack;
        let task = TaskSpec::free_motion(2.0);
        // Hold a pose that keeps every gravity term active.
        let hold = CubicTrack::hold(JointTriple::new(0.1, -0.2, 0.15));
        let op = OperatorModel::new(hold, 3.0, 0.15);
        let mut cfg = SimConfig::default();
        cfg.start_jitter = 0.0;
        let ep = run_demo(&task, &op, &cfg, 3).unwrap();
        let last = ep.rows.last().unwrap();
        let err = (last.master.theta - last.slave.theta).abs_max();
        assert!(err < 1e-3, "sync error {err}");
        // Settled near the commanded hold pose.
        assert!((last.slave.theta.j1 - 0.1).abs() < 0.02);
        assert!((last.slave.theta.j2 + 0.2).abs() < 0.05);
    }

    #[test]
    fn same_seed_byte_identical() {
        let task = TaskSpec::draw(20.0);
        let op = task.operator(9);
        let cfg = SimConfig::default();
        let a = run_demo(&task, &op, &cfg, 9).unwrap();
        let b = run_demo(&task, &op, &cfg, 9).unwrap();
        assert_eq!(
            crate::episode::episode_to_string(&a),
            crate::episode::episode_to_string(&b)
        );
        let c = run_demo(&task, &op, &cfg, 10).unwrap();
        assert_ne!(
            crate::episode::episode_to_string(&a),
            crate::episode::episode_to_string(&c)
        );
    }

    #[test]
    fn contact_demo_obeys_force_law() {
        let task = TaskSpec::draw(20.0);
        let mut clean = task.clone();
        clean.jitter_amplitude = 0.0;
        let op = clean.operator(4);
        let mut cfg = SimConfig::default();
        cfg.start_jitter = 0.0;
        let ep = run_demo(&clean, &op, &cfg, 4).unwrap();
        // After the press is established, action-reaction holds on joint 2.
        let rows: Vec<_> = ep.rows.iter().filter(|r| r.t_ms >= 1500).collect();
        let peak = rows
            .iter()
            .map(|r| r.slave.tau.j2.abs())
            .fold(0.0f64, f64::max);
        let mean_sum: f64 = rows
            .iter()
            .map(|r| (r.master.tau.j2 + r.slave.tau.j2).abs())
            .sum::<f64>()
            / rows.len() as f64;
        assert!(peak > 0.02, "no meaningful contact force, peak {peak}");
        assert!(
            mean_sum < 0.05 * peak,
            "force law violated: mean sum {mean_sum}, peak {peak}"
        );
    }
}
