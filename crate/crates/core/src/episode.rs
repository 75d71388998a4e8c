//! Episode recording: the 1 ms log of a demonstration or autonomous run,
//! its CSV serialization, and downsampling to 20 ms training sequences.
//!
//! File layout: `#key=value` metadata lines, one header row, then one row per
//! millisecond. Numbers are written as the shortest decimal that round-trips
//! the underlying binary64, so save/load is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::control::RobotState9;
use crate::error::{Error, Result};
use crate::plant::JointTriple;

/// Dimensions of one robot state in a training row.
pub const ROBOT_DIMS: usize = 9;
/// Dimensions of a paired slave+master training row.
pub const STATE_DIMS: usize = 18;
/// Model prediction stride in control ticks.
pub const PREDICTION_STRIDE: usize = 20;

pub const EPISODE_HEADER: &str = "t_ms,s_th1,s_th2,s_th3,s_dth1,s_dth2,s_dth3,s_tau1,s_tau2,s_tau3,m_th1,m_th2,m_th3,m_dth1,m_dth2,m_dth3,m_tau1,m_tau2,m_tau3,ref_s1,ref_s2,ref_s3,ref_m1,ref_m2,ref_m3,env1,env2,env3";

/// One 1 ms sample of both robots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRow {
    pub t_ms: u64,
    pub slave: RobotState9,
    pub master: RobotState9,
    pub ref_slave: JointTriple,
    pub ref_master: JointTriple,
    pub env: JointTriple,
}

/// A recorded run: uniform 1 ms time base plus metadata.
#[derive(Clone, Debug, Default)]
pub struct Episode {
    /// Ordered `#key=value` metadata written before the header.
    pub meta: BTreeMap<String, String>,
    pub rows: Vec<EpisodeRow>,
}

impl Episode {
    pub fn duration_s(&self) -> f64 {
        self.rows.len() as f64 * 1e-3
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(|s| s.as_str())
    }

    /// Paired slave+master row as the model sees it: slave block then master
    /// block, each theta(3), dtheta(3), tau(3).
    pub fn state_row(&self, idx: usize) -> [f64; STATE_DIMS] {
        let r = &self.rows[idx];
        let mut out = [0.0; STATE_DIMS];
        out[..ROBOT_DIMS].copy_from_slice(&r.slave.to_array());
        out[ROBOT_DIMS..].copy_from_slice(&r.master.to_array());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.slave.is_finite()
                && r.master.is_finite()
                && r.ref_slave.is_finite()
                && r.ref_master.is_finite()
                && r.env.is_finite()
        })
    }
}

/// 20 ms-stride rows of paired states, in recorded order. Consecutive rows
/// form the (input at t, target at t+20 ms) supervision pairs.
#[derive(Clone, Debug)]
pub struct TrainingSequence {
    pub rows: Vec<[f64; STATE_DIMS]>,
}

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Picks every 20th row of a 1 ms episode.
pub fn downsample(ep: &Episode) -> Result<TrainingSequence> {
    if ep.rows.len() < 2 * PREDICTION_STRIDE {
        return Err(Error::TooShort(ep.rows.len()));
    }
    let rows = (0..ep.rows.len())
        .step_by(PREDICTION_STRIDE)
        .map(|i| ep.state_row(i))
        .collect();
    Ok(TrainingSequence { rows })
}

fn push_triple(line: &mut String, t: JointTriple) {
    let _ = write!(line, ",{},{},{}", t.j1, t.j2, t.j3);
}

fn push_state(line: &mut String, s: &RobotState9) {
    push_triple(line, s.theta);
    push_triple(line, s.dtheta);
    push_triple(line, s.tau);
}

/// Serializes an episode to its CSV text form.
pub fn episode_to_string(ep: &Episode) -> String {
    let mut out = String::with_capacity(ep.rows.len() * 220 + 256);
    for (k, v) in &ep.meta {
        let _ = writeln!(out, "#{k}={v}");
    }
    out.push_str(EPISODE_HEADER);
    out.push('\n');
    for r in &ep.rows {
        let mut line = String::with_capacity(220);
        let _ = write!(line, "{}", r.t_ms);
        push_state(&mut line, &r.slave);
        push_state(&mut line, &r.master);
        push_triple(&mut line, r.ref_slave);
        push_triple(&mut line, r.ref_master);
        push_triple(&mut line, r.env);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn save_episode(ep: &Episode, path: &Path) -> Result<()> {
    fs::write(path, episode_to_string(ep))?;
    Ok(())
}

/// Parses an episode from CSV text. `origin` names the source in errors.
pub fn episode_from_str(text: &str, origin: &str) -> Result<Episode> {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if saw_header {
                return Err(Error::malformed(origin, lineno, "comment after header"));
            }
            match rest.split_once('=') {
                Some((k, v)) => {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => return Err(Error::malformed(origin, lineno, "metadata without '='")),
            }
            continue;
        }
        if !saw_header {
            if line != EPISODE_HEADER {
                return Err(Error::malformed(origin, lineno, "unexpected header"));
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let t_ms: u64 = fields
            .next()
            .ok_or_else(|| Error::malformed(origin, lineno, "empty row"))?
            .parse()
            .map_err(|_| Error::malformed(origin, lineno, "bad t_ms"))?;
        let mut values = [0.0f64; 27];
        let mut n = 0;
        for f in fields {
            if n >= 27 {
                return Err(Error::malformed(origin, lineno, "too many columns"));
            }
            values[n] = f
                .parse()
                .map_err(|_| Error::malformed(origin, lineno, format!("bad number {f:?}")))?;
            n += 1;
        }
        if n != 27 {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("expected 27 value columns, got {n}"),
            ));
        }
        rows.push(EpisodeRow {
            t_ms,
            slave: RobotState9::from_slice(&values[0..9]),
            master: RobotState9::from_slice(&values[9..18]),
            ref_slave: JointTriple::new(values[18], values[19], values[20]),
            ref_master: JointTriple::new(values[21], values[22], values[23]),
            env: JointTriple::new(values[24], values[25], values[26]),
        });
    }
    if !saw_header {
        return Err(Error::malformed(origin, text.lines().count(), "missing header"));
    }
    Ok(Episode { meta, rows })
}

pub fn load_episode(path: &Path) -> Result<Episode> {
    let text = fs::read_to_string(path)?;
    episode_from_str(&text, &path.display().to_string())
}
