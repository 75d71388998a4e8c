//! Scripted virtual operator that drives the master robot.
//!
//! The operator is an impedance around a reference trajectory: piecewise-cubic
//! waypoint tracks per joint, a hand stiffness/damping pair, and seeded
//! band-limited jitter standing in for the fluctuations a human hand adds.

use crate::control::RobotState9;
use crate::det::Rng64;
use crate::plant::JointTriple;

/// A (time, angle) waypoint, seconds and radians.
#[derive(Clone, Copy, Debug)]
pub struct Waypoint {
    pub t: f64,
    pub value: f64,
}

impl Waypoint {
    pub fn new(t: f64, value: f64) -> Self {
        Waypoint { t, value }
    }
}

/// Piecewise-cubic Hermite interpolation through waypoints (Catmull-Rom
/// tangents), optionally periodic. Continuous with continuous derivative.
#[derive(Clone, Debug)]
pub struct CubicTrack {
    joints: [Vec<Waypoint>; 3],
    /// When set, time wraps modulo this period and tangents close the loop.
    pub period: Option<f64>,
}

impl CubicTrack {
    pub fn new(j1: Vec<Waypoint>, j2: Vec<Waypoint>, j3: Vec<Waypoint>) -> Self {
        let track = CubicTrack {
            joints: [j1, j2, j3],
            period: None,
        };
        track.validate();
        track
    }

    pub fn periodic(mut self, period: f64) -> Self {
        assert!(period > 0.0);
        for j in &self.joints {
            let first = j[0];
            let last = j[j.len() - 1];
            assert!(first.t == 0.0, "periodic track must start at t = 0");
            assert!(
                (last.t - period).abs() < 1e-12 && (last.value - first.value).abs() < 1e-12,
                "periodic track must close its loop at t = period"
            );
        }
        self.period = Some(period);
        self
    }

    /// Constant pose for all time.
    pub fn hold(pose: JointTriple) -> Self {
        let wp = |v: f64| vec![Waypoint::new(0.0, v), Waypoint::new(1.0, v)];
        CubicTrack::new(wp(pose.j1), wp(pose.j2), wp(pose.j3))
    }

    fn validate(&self) {
        for j in &self.joints {
            assert!(j.len() >= 2, "track needs at least two waypoints");
            for w in j.windows(2) {
                assert!(w[1].t > w[0].t, "waypoint times must increase");
            }
        }
    }

    /// Position and velocity of the reference at time `t`. Clamped to the
    /// end values outside the waypoint span (unless periodic).
    pub fn sample(&self, t: f64) -> (JointTriple, JointTriple) {
        let mut pos = [0.0; 3];
        let mut vel = [0.0; 3];
        for (i, wps) in self.joints.iter().enumerate() {
            let (p, v) = sample_joint(wps, self.period, t);
            pos[i] = p;
            vel[i] = v;
        }
        (JointTriple::from_array(pos), JointTriple::from_array(vel))
    }
}

fn sample_joint(wps: &[Waypoint], period: Option<f64>, t: f64) -> (f64, f64) {
    let t = match period {
        Some(p) => t.rem_euclid(p),
        None => t,
    };
    let first = wps[0];
    let last = wps[wps.len() - 1];
    if period.is_none() {
        if t <= first.t {
            return (first.value, 0.0);
        }
        if t >= last.t {
            return (last.value, 0.0);
        }
    }
    // Find the segment containing t.
    let mut seg = wps.len() - 2;
    for i in 0..wps.len() - 1 {
        if t < wps[i + 1].t {
            seg = i;
            break;
        }
    }
    let w0 = wps[seg];
    let w1 = wps[seg + 1];
    let h = w1.t - w0.t;
    let u = (t - w0.t) / h;

    let tangent = |i: isize| -> f64 {
        // Catmull-Rom finite-difference slope at waypoint i, rad/s.
        let n = wps.len() as isize;
        let get = |k: isize| -> (f64, f64) {
            match period {
                Some(p) => {
                    // Wrap index; unwrap time by whole periods.
                    let wrapped = k.rem_euclid(n - 1); // last point repeats first in time
                    let lap = ((k - wrapped) / (n - 1)) as f64;
                    let w = wps[wrapped as usize];
                    (w.t + lap * p, w.value)
                }
                None => {
                    let k = k.clamp(0, n - 1);
                    let w = wps[k as usize];
                    (w.t, w.value)
                }
            }
        };
        let (tm, vm) = get(i - 1);
        let (tp, vp) = get(i + 1);
        (vp - vm) / (tp - tm)
    };
    let m0 = tangent(seg as isize);
    let m1 = tangent(seg as isize + 1);

    // Cubic Hermite basis.
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let p = h00 * w0.value + h10 * h * m0 + h01 * w1.value + h11 * h * m1;

    let d00 = 6.0 * u2 - 6.0 * u;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = -6.0 * u2 + 6.0 * u;
    let d11 = 3.0 * u2 - 2.0 * u;
    let v = (d00 * w0.value + d01 * w1.value) / h + d10 * m0 + d11 * m1;
    (p, v)
}

/// Band-limited trajectory jitter: a seeded sum of sinusoids with all energy
/// below the cutoff, evaluated as a pure function of time.
#[derive(Clone, Debug)]
pub struct JitterGen {
    components: [Vec<(f64, f64, f64)>; 3], // (amplitude rad, omega rad/s, phase)
}

const JITTER_COMPONENTS: usize = 6;

impl JitterGen {
    pub fn new(amplitude: f64, cutoff: f64, seed: u64) -> Self {
        let mut rng = Rng64::new(seed);
        let mut components: [Vec<(f64, f64, f64)>; 3] = Default::default();
        for joint in &mut components {
            let mut total = 0.0;
            let mut comps = Vec::with_capacity(JITTER_COMPONENTS);
            for _ in 0..JITTER_COMPONENTS {
                let a = rng.range(0.2, 1.0);
                let omega = rng.range(0.1 * cutoff, cutoff);
                let phase = rng.range(0.0, std::f64::consts::TAU);
                total += a;
                comps.push((a, omega, phase));
            }
            // Normalize so the worst-case sum equals the requested amplitude.
            if total > 0.0 {
                for c in &mut comps {
                    c.0 *= amplitude / total;
                }
            }
            *joint = comps;
        }
        JitterGen { components }
    }

    pub fn eval(&self, t: f64) -> JointTriple {
        let mut out = [0.0; 3];
        for (i, comps) in self.components.iter().enumerate() {
            let mut v = 0.0;
            for &(a, w, ph) in comps {
                v += a * (w * t + ph).sin();
            }
            out[i] = v;
        }
        JointTriple::from_array(out)
    }
}

/// The virtual operator: impedance hand around a jittered reference track.
#[derive(Clone, Debug)]
pub struct OperatorModel {
    pub track: CubicTrack,
    /// Hand stiffness, N·m/rad.
    pub stiffness: f64,
    /// Hand damping, N·m·s/rad.
    pub damping: f64,
    jitter: JitterGen,
}

impl OperatorModel {
    pub fn new(track: CubicTrack, stiffness: f64, damping: f64) -> Self {
        assert!(stiffness >= 0.0 && damping >= 0.0);
        OperatorModel {
            track,
            stiffness,
            damping,
            jitter: JitterGen::new(0.0, 5.0, 0),
        }
    }

    /// Adds seeded jitter of the given amplitude (rad) to the reference.
    pub fn with_jitter(mut self, amplitude: f64, seed: u64) -> Self {
        self.jitter = JitterGen::new(amplitude, 5.0, seed);
        self
    }

    /// Torque the operator's hand applies to the master at time `t`.
    pub fn torque(&self, master: &RobotState9, t: f64) -> JointTriple {
        let (theta_ref, dtheta_ref) = self.track.sample(t);
        let jit = self.jitter.eval(t);
        let spring = (theta_ref - master.theta + jit) * self.stiffness;
        let damper = (dtheta_ref - master.dtheta) * self.damping;
        spring + damper
    }

    /// Reference pose at t = 0; loops start both robots here.
    pub fn start_pose(&self) -> JointTriple {
        self.track.sample(0.0).0
    }
}
