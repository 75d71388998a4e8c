//! Pseudo-differentiation, disturbance observer, reaction-force observer,
//! and the 4ch bilateral controller.
//!
//! All first-order filters use the exact exponential discretization
//! `a = exp(-cutoff * dt)`, so step responses match the continuous-time
//! formulas at the tick instants.

use crate::error::Result;
use crate::plant::{gravity_torque, JointTriple, PlantParams, PlantState};

/// Controller gains and observer cutoffs.
#[derive(Clone, Copy, Debug)]
pub struct ControlGains {
    /// Position feedback gain, 1/s².
    pub kp: f64,
    /// Velocity feedback gain, 1/s.
    pub kd: f64,
    /// Force feedback gain, dimensionless.
    pub kf: f64,
    /// Pseudo-differentiation cutoff, rad/s.
    pub g_diff: f64,
    /// Disturbance observer cutoff, rad/s.
    pub g_dob: f64,
    /// Reaction-force observer cutoff, rad/s.
    pub g_rfob: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            kp: 121.0,
            kd: 22.0,
            kf: 1.00,
            g_diff: 40.0,
            g_dob: 40.0,
            g_rfob: 40.0,
        }
    }
}

/// Response values of one robot as the model and controller see them:
/// measured angles, estimated velocities, observed torques.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RobotState9 {
    /// rad
    pub theta: JointTriple,
    /// rad/s
    pub dtheta: JointTriple,
    /// N·m
    pub tau: JointTriple,
}

impl RobotState9 {
    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.dtheta.is_finite() && self.tau.is_finite()
    }

    pub fn to_array(&self) -> [f64; 9] {
        let t = self.theta.to_array();
        let d = self.dtheta.to_array();
        let q = self.tau.to_array();
        [t[0], t[1], t[2], d[0], d[1], d[2], q[0], q[1], q[2]]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), 9);
        RobotState9 {
            theta: JointTriple::new(v[0], v[1], v[2]),
            dtheta: JointTriple::new(v[3], v[4], v[5]),
            tau: JointTriple::new(v[6], v[7], v[8]),
        }
    }
}

/// First-order low-pass filter, exponentially discretized.
///
/// The state initializes to the first sample so there is no startup spike.
#[derive(Clone, Debug)]
pub struct Lpf1 {
    cutoff: f64,
    y: f64,
    initialized: bool,
}

impl Lpf1 {
    pub fn new(cutoff: f64) -> Self {
        assert!(cutoff > 0.0);
        Lpf1 {
            cutoff,
            y: 0.0,
            initialized: false,
        }
    }

    /// Starts already settled at `y0` instead of adopting the first sample.
    pub fn with_state(cutoff: f64, y0: f64) -> Self {
        assert!(cutoff > 0.0);
        Lpf1 {
            cutoff,
            y: y0,
            initialized: true,
        }
    }

    pub fn update(&mut self, u: f64, dt: f64) -> f64 {
        if !self.initialized {
            self.y = u;
            self.initialized = true;
        } else {
            let a = (-self.cutoff * dt).exp();
            self.y = a * self.y + (1.0 - a) * u;
        }
        self.y
    }

    pub fn output(&self) -> f64 {
        self.y
    }
}

/// Band-limited velocity estimate: backward difference of the angle stream
/// low-passed at cutoff `g`, realizing `g s / (s + g)`.
///
/// The first call initializes with zero velocity.
#[derive(Clone, Debug)]
pub struct PseudoDiff {
    lpf: Lpf1,
    prev: f64,
    primed: bool,
}

impl PseudoDiff {
    pub fn new(cutoff: f64) -> Self {
        PseudoDiff {
            lpf: Lpf1::with_state(cutoff, 0.0),
            prev: 0.0,
            primed: false,
        }
    }

    pub fn update(&mut self, theta: f64, dt: f64) -> f64 {
        if !self.primed {
            self.prev = theta;
            self.primed = true;
            return 0.0;
        }
        let raw = (theta - self.prev) / dt;
        self.prev = theta;
        self.lpf.update(raw, dt)
    }
}

/// Pseudo-differentiators for all three joints of one robot.
#[derive(Clone, Debug)]
pub struct VelocityEstimator {
    joints: [PseudoDiff; 3],
}

impl VelocityEstimator {
    pub fn new(cutoff: f64) -> Self {
        VelocityEstimator {
            joints: [
                PseudoDiff::new(cutoff),
                PseudoDiff::new(cutoff),
                PseudoDiff::new(cutoff),
            ],
        }
    }

    pub fn update(&mut self, theta: JointTriple, dt: f64) -> JointTriple {
        JointTriple::new(
            self.joints[0].update(theta.j1, dt),
            self.joints[1].update(theta.j2, dt),
            self.joints[2].update(theta.j3, dt),
        )
    }
}

/// Velocity-form disturbance observer for one joint.
///
/// Realizes the low-passed estimate `tau_dis_hat = g/(s+g) (tau_applied - J th'')`
/// without differentiating the velocity:
///
/// ```text
/// zeta' = g (tau + g J th' - zeta),    tau_dis_hat = zeta - g J th'
/// ```
#[derive(Clone, Debug)]
pub struct DobJoint {
    zeta: f64,
    initialized: bool,
}

impl DobJoint {
    pub fn new() -> Self {
        DobJoint {
            zeta: 0.0,
            initialized: false,
        }
    }

    pub fn update(&mut self, tau_applied: f64, dtheta: f64, inertia: f64, g_dob: f64, dt: f64) -> f64 {
        let momentum_term = g_dob * inertia * dtheta;
        let u = tau_applied + momentum_term;
        if !self.initialized {
            self.zeta = u;
            self.initialized = true;
        } else {
            let a = (-g_dob * dt).exp();
            self.zeta = a * self.zeta + (1.0 - a) * u;
        }
        self.zeta - momentum_term
    }
}

impl Default for DobJoint {
    fn default() -> Self {
        DobJoint::new()
    }
}

/// Disturbance observers for all three joints of one robot.
#[derive(Clone, Debug, Default)]
pub struct Dob {
    joints: [DobJoint; 3],
}

impl Dob {
    pub fn new() -> Self {
        Dob::default()
    }

    pub fn update(
        &mut self,
        tau_applied: JointTriple,
        dtheta: JointTriple,
        params: &PlantParams,
        g_dob: f64,
        dt: f64,
    ) -> JointTriple {
        JointTriple::new(
            self.joints[0].update(tau_applied.j1, dtheta.j1, params.inertia.j1, g_dob, dt),
            self.joints[1].update(tau_applied.j2, dtheta.j2, params.inertia.j2, g_dob, dt),
            self.joints[2].update(tau_applied.j3, dtheta.j3, params.inertia.j3, g_dob, dt),
        )
    }
}

/// Reaction torque from the disturbance estimate: strips the modeled
/// friction and gravity so only the contact torque remains.
pub fn rfob_torque(
    tau_dis_hat: JointTriple,
    state: &PlantState,
    params: &PlantParams,
) -> JointTriple {
    let grav = gravity_torque(params, state.theta);
    JointTriple::new(
        tau_dis_hat.j1 - params.viscous * state.dtheta.j1,
        tau_dis_hat.j2 - grav.j2,
        tau_dis_hat.j3 - grav.j3,
    )
}

/// RFOB with its output low-passed at `g_rfob`.
#[derive(Clone, Debug)]
pub struct Rfob {
    filters: [Lpf1; 3],
}

impl Rfob {
    pub fn new(g_rfob: f64) -> Self {
        Rfob {
            filters: [
                Lpf1::new(g_rfob),
                Lpf1::new(g_rfob),
                Lpf1::new(g_rfob),
            ],
        }
    }

    pub fn measure(
        &mut self,
        tau_dis_hat: JointTriple,
        state: &PlantState,
        params: &PlantParams,
        dt: f64,
    ) -> JointTriple {
        let raw = rfob_torque(tau_dis_hat, state, params);
        JointTriple::new(
            self.filters[0].update(raw.j1, dt),
            self.filters[1].update(raw.j2, dt),
            self.filters[2].update(raw.j3, dt),
        )
    }
}

/// The per-robot measurement pipeline: angle in, `RobotState9` out.
///
/// Demo and autonomous loops share this exact chain, so the state the model
/// sees is produced identically in both modes.
#[derive(Clone, Debug)]
pub struct ObserverChain {
    velocity: VelocityEstimator,
    dob: Dob,
    rfob: Rfob,
}

impl ObserverChain {
    pub fn new(gains: &ControlGains) -> Self {
        ObserverChain {
            velocity: VelocityEstimator::new(gains.g_diff),
            dob: Dob::new(),
            rfob: Rfob::new(gains.g_rfob),
        }
    }

    /// One tick: `theta` is the current angle sample, `tau_applied_prev` the
    /// motor torque that acted over the preceding tick.
    pub fn observe(
        &mut self,
        theta: JointTriple,
        tau_applied_prev: JointTriple,
        params: &PlantParams,
        gains: &ControlGains,
        dt: f64,
    ) -> RobotState9 {
        let dtheta = self.velocity.update(theta, dt);
        let tau_dis_hat = self.dob.update(tau_applied_prev, dtheta, params, gains.g_dob, dt);
        let est = PlantState { theta, dtheta };
        let tau = self.rfob.measure(tau_dis_hat, &est, params, dt);
        RobotState9 { theta, dtheta, tau }
    }
}

/// Torque references of the 4ch bilateral controller.
///
/// Per joint, with `e = th_m - th_s`:
///
/// ```text
/// tau_ref_s =  (J/2)(Kp e + Kd e') - (Kf/2)(tau_m + tau_s)
/// tau_ref_m = -(J/2)(Kp e + Kd e') - (Kf/2)(tau_m + tau_s)
/// ```
///
/// The position contributions are exact negatives of each other and the force
/// contributions are identical.
pub fn bilateral_refs(
    master: &RobotState9,
    slave: &RobotState9,
    gains: &ControlGains,
    params: &PlantParams,
) -> (JointTriple, JointTriple) {
    let mut tau_ref_m = JointTriple::ZERO;
    let mut tau_ref_s = JointTriple::ZERO;
    for j in 0..3 {
        let e = master.theta.get(j) - slave.theta.get(j);
        let de = master.dtheta.get(j) - slave.dtheta.get(j);
        let inertia = params.inertia.get(j);
        let position = 0.5 * inertia * (gains.kp * e + gains.kd * de);
        let force = -0.5 * gains.kf * (master.tau.get(j) + slave.tau.get(j));
        tau_ref_s.set(j, position + force);
        tau_ref_m.set(j, -position + force);
    }
    (tau_ref_m, tau_ref_s)
}

/// Slave torque reference during autonomous operation: the slave half of the
/// bilateral law with the predicted master state as command.
pub fn slave_ref_autonomous(
    command: &RobotState9,
    slave: &RobotState9,
    gains: &ControlGains,
    params: &PlantParams,
) -> JointTriple {
    bilateral_refs(command, slave, gains, params).1
}

/// Gravity + viscous feed-forward added to every torque reference before it
/// reaches the motor, using the identified model and estimated velocity.
pub fn compensation_torque(params: &PlantParams, state: &RobotState9) -> JointTriple {
    gravity_torque(params, state.theta)
        + crate::plant::friction_torque(params, state.dtheta)
}

/// Sanity wrapper so loops can abort on diverging references.
pub fn check_finite(tau: JointTriple, tick: u64, context: &str) -> Result<JointTriple> {
    if tau.is_finite() {
        Ok(tau)
    } else {
        Err(crate::error::Error::NonFinite {
            tick,
            context: context.to_string(),
        })
    }
}
