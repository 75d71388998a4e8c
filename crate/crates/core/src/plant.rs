//! Rigid-body dynamics of one 3-DOF robot plus joint-space environment
//! models that produce the contact torques the slave feels.
//!
//! Each joint integrates independently (the off-diagonal inertia terms are
//! negligible for this arm):
//!
//! ```text
//! J1 th1'' = tau1 - D th1'
//! J2 th2'' = tau2 - G1 cos(th2) - G2 sin(th3)
//! J3 th3'' = tau3 - G3 sin(th3)
//! ```
//!
//! where `tau` is the applied motor torque plus any environment torque.

use crate::error::{Error, Result};

/// One value per joint. Units depend on use (rad, rad/s, rad/s², N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JointTriple {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

impl JointTriple {
    pub const ZERO: JointTriple = JointTriple {
        j1: 0.0,
        j2: 0.0,
        j3: 0.0,
    };

    pub fn new(j1: f64, j2: f64, j3: f64) -> Self {
        JointTriple { j1, j2, j3 }
    }

    pub fn splat(v: f64) -> Self {
        JointTriple::new(v, v, v)
    }

    pub fn get(&self, joint: usize) -> f64 {
        match joint {
            0 => self.j1,
            1 => self.j2,
            2 => self.j3,
            _ => panic!("joint index {joint} out of range"),
        }
    }

    pub fn set(&mut self, joint: usize, v: f64) {
        match joint {
            0 => self.j1 = v,
            1 => self.j2 = v,
            2 => self.j3 = v,
            _ => panic!("joint index {joint} out of range"),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.j1, self.j2, self.j3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        JointTriple::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.j1.is_finite() && self.j2.is_finite() && self.j3.is_finite()
    }

    pub fn abs_max(&self) -> f64 {
        self.j1.abs().max(self.j2.abs()).max(self.j3.abs())
    }
}

impl std::ops::Add for JointTriple {
    type Output = JointTriple;
    fn add(self, rhs: JointTriple) -> JointTriple {
        JointTriple::new(self.j1 + rhs.j1, self.j2 + rhs.j2, self.j3 + rhs.j3)
    }
}

impl std::ops::Sub for JointTriple {
    type Output = JointTriple;
    fn sub(self, rhs: JointTriple) -> JointTriple {
        JointTriple::new(self.j1 - rhs.j1, self.j2 - rhs.j2, self.j3 - rhs.j3)
    }
}

impl std::ops::Neg for JointTriple {
    type Output = JointTriple;
    fn neg(self) -> JointTriple {
        JointTriple::new(-self.j1, -self.j2, -self.j3)
    }
}

impl std::ops::Mul<f64> for JointTriple {
    type Output = JointTriple;
    fn mul(self, k: f64) -> JointTriple {
        JointTriple::new(self.j1 * k, self.j2 * k, self.j3 * k)
    }
}

/// Identified plant parameters, SI units.
#[derive(Clone, Copy, Debug)]
pub struct PlantParams {
    /// Per-joint inertia, kg·m².
    pub inertia: JointTriple,
    /// Gravity coefficients G1, G2, G3, N·m.
    pub gravity: [f64; 3],
    /// Viscous friction on joint 1, kg·m²/s.
    pub viscous: f64,
    /// Symmetric joint limit, rad. Exceeding it clamps the joint and raises a flag.
    pub joint_limit: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            inertia: JointTriple::new(2.55e-3, 4.30e-3, 1.12e-3),
            gravity: [7.90e-2, 5.50e-2, 3.30e-2],
            viscous: 4.55e-3,
            joint_limit: std::f64::consts::PI,
        }
    }
}

/// Kinematic state of one robot.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantState {
    /// Joint angles, rad.
    pub theta: JointTriple,
    /// Joint angular velocities, rad/s.
    pub dtheta: JointTriple,
}

impl PlantState {
    pub fn at_rest(theta: JointTriple) -> Self {
        PlantState {
            theta,
            dtheta: JointTriple::ZERO,
        }
    }
}

/// Which side of a wall blocks motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallSide {
    /// Wall blocks angles above `position` (penetration when theta > position).
    Above,
    /// Wall blocks angles below `position`.
    Below,
}

/// Joint-space environment acting on the slave.
#[derive(Clone, Debug)]
pub enum EnvironmentModel {
    /// No contact anywhere.
    Free,
    /// One-sided spring-damper wall on a single joint.
    SpringWall {
        joint: usize,
        position: f64,
        /// N·m/rad
        stiffness: f64,
        /// N·m·s/rad
        damping: f64,
        side: WallSide,
    },
    /// Coulomb friction acting inside an angular region of one joint.
    CoulombPatch {
        joint: usize,
        /// N·m
        level: f64,
        /// (lo, hi) rad
        region: (f64, f64),
    },
    Composite(Vec<EnvironmentModel>),
}

/// Velocities below this produce no Coulomb torque, so the sign function is
/// deterministic near rest.
pub const COULOMB_DEADBAND: f64 = 1e-4;

/// Gravity terms of the dynamics model: `(0, G1 cos th2 + G2 sin th3, G3 sin th3)`.
pub fn gravity_torque(params: &PlantParams, theta: JointTriple) -> JointTriple {
    let [g1, g2, g3] = params.gravity;
    JointTriple::new(
        0.0,
        g1 * theta.j2.cos() + g2 * theta.j3.sin(),
        g3 * theta.j3.sin(),
    )
}

/// Viscous friction term of the dynamics model: `(D th1', 0, 0)`.
pub fn friction_torque(params: &PlantParams, dtheta: JointTriple) -> JointTriple {
    JointTriple::new(params.viscous * dtheta.j1, 0.0, 0.0)
}

/// Torque the environment applies to the robot at the given state.
///
/// Sign convention: the returned torque is added to the joint, so a wall
/// being penetrated returns a torque pushing the joint back out.
pub fn env_torque(env: &EnvironmentModel, state: &PlantState, t: f64) -> JointTriple {
    match env {
        EnvironmentModel::Free => JointTriple::ZERO,
        EnvironmentModel::SpringWall {
            joint,
            position,
            stiffness,
            damping,
            side,
        } => {
            let th = state.theta.get(*joint);
            let dth = state.dtheta.get(*joint);
            let penetration = match side {
                WallSide::Above => th - position,
                WallSide::Below => th - position,
            };
            let penetrating = match side {
                WallSide::Above => penetration > 0.0,
                WallSide::Below => penetration < 0.0,
            };
            let mut out = JointTriple::ZERO;
            if penetrating {
                out.set(*joint, -stiffness * penetration - damping * dth);
            }
            out
        }
        EnvironmentModel::CoulombPatch {
            joint,
            level,
            region,
        } => {
            let th = state.theta.get(*joint);
            let dth = state.dtheta.get(*joint);
            let mut out = JointTriple::ZERO;
            if th >= region.0 && th <= region.1 && dth.abs() >= COULOMB_DEADBAND {
                out.set(*joint, -level * dth.signum());
            }
            out
        }
        EnvironmentModel::Composite(parts) => {
            let mut sum = JointTriple::ZERO;
            for part in parts {
                sum = sum + env_torque(part, state, t);
            }
            sum
        }
    }
}

/// Result of one integrator step.
#[derive(Clone, Copy, Debug)]
pub struct PlantStep {
    pub state: PlantState,
    /// Environment torque that acted during the step.
    pub tau_env: JointTriple,
    /// True when a joint was clamped at the limit this step.
    pub limit_clamped: bool,
}

/// One semi-implicit Euler step of the joint dynamics.
///
/// `tau_ref` is the applied motor torque; the environment torque is evaluated
/// at the pre-step state and time `t`. `dt` must be in (0, 1e-3]; the control
/// loops call this at a 0.1 ms substep, ten per 1 ms tick.
pub fn step_plant(
    state: &PlantState,
    tau_ref: JointTriple,
    env: &EnvironmentModel,
    params: &PlantParams,
    t: f64,
    dt: f64,
) -> Result<PlantStep> {
    debug_assert!(dt > 0.0 && dt <= 1e-3, "dt out of range: {dt}");
    let tau_env = env_torque(env, state, t);
    let grav = gravity_torque(params, state.theta);
    let fric = friction_torque(params, state.dtheta);

    let net = tau_ref + tau_env - grav - fric;
    let accel = JointTriple::new(
        net.j1 / params.inertia.j1,
        net.j2 / params.inertia.j2,
        net.j3 / params.inertia.j3,
    );

    let mut dtheta = state.dtheta + accel * dt;
    let mut theta = state.theta + dtheta * dt;

    let mut limit_clamped = false;
    let lim = params.joint_limit;
    for j in 0..3 {
        let th = theta.get(j);
        if th > lim {
            theta.set(j, lim);
            dtheta.set(j, 0.0);
            limit_clamped = true;
        } else if th < -lim {
            theta.set(j, -lim);
            dtheta.set(j, 0.0);
            limit_clamped = true;
        }
    }

    if !theta.is_finite() || !dtheta.is_finite() {
        return Err(Error::NonFinite {
            tick: 0,
            context: format!("plant step at t={t}"),
        });
    }

    Ok(PlantStep {
        state: PlantState { theta, dtheta },
        tau_env,
        limit_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SUB_DT: f64 = 1e-4;

    #[test]
    fn gravity_at_table_poses() {
        let p = PlantParams::default();
        let g = gravity_torque(&p, JointTriple::ZERO);
        assert_eq!(g.j1, 0.0);
        assert!((g.j2 - 7.90e-2).abs() < 1e-12);
        assert_eq!(g.j3, 0.0);

        // cos(pi/2) = 0 and sin(0) = 0 kill both terms.
        let g = gravity_torque(&p, JointTriple::new(1.3, PI / 2.0, 0.0));
        assert!(g.j2.abs() < 1e-12);
        assert!(g.j3.abs() < 1e-12);

        let g = gravity_torque(&p, JointTriple::new(0.0, 0.0, PI / 2.0));
        assert!((g.j2 - 0.1340).abs() < 1e-12);
        assert!((g.j3 - 0.0330).abs() < 1e-12);
    }

    #[test]
    fn gravity_joint1_always_zero() {
        let p = PlantParams::default();
        for i in 0..100 {
            let th = JointTriple::new(i as f64 * 0.1 - 5.0, i as f64 * 0.07, -(i as f64) * 0.03);
            assert_eq!(gravity_torque(&p, th).j1, 0.0);
        }
    }

    #[test]
    fn friction_on_joint1_only() {
        let p = PlantParams::default();
        assert_eq!(
            friction_torque(&p, JointTriple::ZERO),
            JointTriple::ZERO
        );
        let f = friction_torque(&p, JointTriple::splat(1.0));
        assert!((f.j1 - 4.55e-3).abs() < 1e-15);
        assert_eq!(f.j2, 0.0);
        assert_eq!(f.j3, 0.0);
        let f = friction_torque(&p, JointTriple::new(-2.0, 0.0, 0.0));
        assert!((f.j1 + 9.10e-3).abs() < 1e-15);
    }

    #[test]
    fn spring_wall_torque() {
        let wall = EnvironmentModel::SpringWall {
            joint: 0,
            position: 0.5,
            stiffness: 10.0,
            damping: 0.1,
            side: WallSide::Above,
        };
        let s = PlantState::at_rest(JointTriple::new(0.6, 0.0, 0.0));
        let tau = env_torque(&wall, &s, 0.0);
        assert!((tau.j1 + 1.0).abs() < 1e-12);

        let s = PlantState::at_rest(JointTriple::new(0.4, 0.0, 0.0));
        assert_eq!(env_torque(&wall, &s, 0.0), JointTriple::ZERO);
    }

    #[test]
    fn coulomb_patch_deadband() {
        let patch = EnvironmentModel::CoulombPatch {
            joint: 1,
            level: 0.05,
            region: (-1.0, 1.0),
        };
        let mut s = PlantState::at_rest(JointTriple::ZERO);
        s.dtheta.j2 = 1e-5; // inside deadband
        assert_eq!(env_torque(&patch, &s, 0.0), JointTriple::ZERO);
        s.dtheta.j2 = 0.5;
        assert!((env_torque(&patch, &s, 0.0).j2 + 0.05).abs() < 1e-12);
        s.dtheta.j2 = -0.5;
        assert!((env_torque(&patch, &s, 0.0).j2 - 0.05).abs() < 1e-12);
        s.theta.j2 = 2.0; // outside region
        assert_eq!(env_torque(&patch, &s, 0.0), JointTriple::ZERO);
    }

    #[test]
    fn equilibrium_pose_is_fixed_point() {
        let p = PlantParams::default();
        // Gravity vanishes at th2 = pi/2, th3 = 0; joint 1 has no gravity.
        let s = PlantState::at_rest(JointTriple::new(0.0, PI / 2.0, 0.0));
        let out = step_plant(&s, JointTriple::ZERO, &EnvironmentModel::Free, &p, 0.0, SUB_DT)
            .unwrap();
        // cos(pi/2) is ~6e-17 in binary64, so "unchanged" means sub-1e-15 drift.
        assert!((out.state.theta - s.theta).abs_max() < 1e-15);
        assert!((out.state.dtheta - s.dtheta).abs_max() < 1e-15);
    }

    #[test]
    fn joint1_terminal_velocity_matches_ode() {
        // J1 th'' = c - D th'  =>  th' -> c/D.
        let p = PlantParams::default();
        let c = 1e-3;
        let mut s = PlantState::at_rest(JointTriple::ZERO);
        let tau = JointTriple::new(c, 0.0, 0.0);
        // Lock gravity joints out of the way (th2 = pi/2, th3 = 0 is gravity-free).
        s.theta.j2 = PI / 2.0;
        let mut t = 0.0;
        for _ in 0..30_000 {
            s = step_plant(&s, tau, &EnvironmentModel::Free, &p, t, SUB_DT)
                .unwrap()
                .state;
            t += SUB_DT;
        }
        let expected = c / p.viscous;
        assert!(
            (s.dtheta.j1 - expected).abs() < 0.01 * expected,
            "got {}, expected {}",
            s.dtheta.j1,
            expected
        );
    }

    #[test]
    fn halving_dt_converges() {
        let p = PlantParams::default();
        let run = |dt: f64| {
            let mut s = PlantState::at_rest(JointTriple::new(0.0, PI / 2.0, 0.0));
            let steps = (1.0 / dt) as usize;
            let mut t: f64 = 0.0;
            for _ in 0..steps {
                // Smooth, gentle torque profile on all joints.
                let tau = JointTriple::new(
                    2e-5 * (1.0 * t).sin(),
                    1e-5 * (1.5 * t).cos(),
                    1e-5 * (0.75 * t).sin(),
                );
                s = step_plant(&s, tau, &EnvironmentModel::Free, &p, t, dt)
                    .unwrap()
                    .state;
                t += dt;
            }
            s.theta
        };
        let coarse = run(1e-4);
        let fine = run(5e-5);
        let diff = (coarse - fine).abs_max();
        assert!(diff < 1e-6, "integrator drift {diff}");
    }

    #[test]
    fn energy_drift_tiny_with_conservative_terms() {
        // th3 quiet keeps the G2 coupling silent, so E = sum(J th'^2)/2 + G1 sin th2
        // is an exact invariant of the continuous dynamics. Swing around the
        // stable equilibrium at -pi/2 so the joint limit never engages.
        let mut p = PlantParams::default();
        p.viscous = 0.0;
        let mut s = PlantState {
            theta: JointTriple::new(0.0, -std::f64::consts::FRAC_PI_2 + 0.3, 0.0),
            dtheta: JointTriple::new(0.0, 0.5, 0.0),
        };
        let energy = |s: &PlantState| {
            0.5 * p.inertia.j2 * s.dtheta.j2 * s.dtheta.j2 + p.gravity[0] * s.theta.j2.sin()
        };
        let e0 = energy(&s);
        let dt = 1e-7;
        let steps = (10.0 / dt) as usize;
        let mut t = 0.0;
        for _ in 0..steps {
            s = step_plant(&s, JointTriple::ZERO, &EnvironmentModel::Free, &p, t, dt)
                .unwrap()
                .state;
            t += dt;
        }
        let drift = (energy(&s) - e0).abs() / e0.abs();
        assert!(drift < 1e-6, "energy drift {drift}");
    }

    #[test]
    fn step_is_pure() {
        let p = PlantParams::default();
        let s = PlantState {
            theta: JointTriple::new(0.11, -0.42, 0.3),
            dtheta: JointTriple::new(1.0, -0.5, 0.25),
        };
        let tau = JointTriple::new(0.01, -0.02, 0.005);
        let wall = EnvironmentModel::SpringWall {
            joint: 1,
            position: -0.4,
            stiffness: 25.0,
            damping: 0.2,
            side: WallSide::Below,
        };
        let a = step_plant(&s, tau, &wall, &p, 1.5, SUB_DT).unwrap();
        let b = step_plant(&s, tau, &wall, &p, 1.5, SUB_DT).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.tau_env, b.tau_env);
    }

    #[test]
    fn limit_clamps_with_flag() {
        let p = PlantParams::default();
        let mut s = PlantState {
            theta: JointTriple::new(PI - 1e-4, PI / 2.0, 0.0),
            dtheta: JointTriple::new(5.0, 0.0, 0.0),
        };
        let out = step_plant(&s, JointTriple::ZERO, &EnvironmentModel::Free, &p, 0.0, SUB_DT)
            .unwrap();
        assert!(out.limit_clamped);
        assert_eq!(out.state.theta.j1, PI);
        assert_eq!(out.state.dtheta.j1, 0.0);
        s.theta.j1 = -(PI - 1e-4);
        s.dtheta.j1 = -5.0;
        let out = step_plant(&s, JointTriple::ZERO, &EnvironmentModel::Free, &p, 0.0, SUB_DT)
            .unwrap();
        assert!(out.limit_clamped);
        assert_eq!(out.state.theta.j1, -PI);
    }
}
