//! Evaluation metrics: bilateral synchronization, open-loop prediction
//! error, task-success corridors, and cycle-to-cycle repeatability.

use crate::episode::{downsample, Episode};
use crate::error::{Error, Result};
use crate::seqmodel::{loss_mse, SequenceModel};
use crate::task::{Corridor, TaskSpec};

/// Position/force synchronization statistics of a demo episode.
#[derive(Clone, Copy, Debug)]
pub struct SyncMetrics {
    /// Mean |th_m - th_s| per joint, rad.
    pub mean_pos_err: [f64; 3],
    /// Max |th_m - th_s| per joint, rad.
    pub max_pos_err: [f64; 3],
    /// Mean |tau_m + tau_s| per joint, N·m.
    pub mean_force_sum: [f64; 3],
    /// Peak |tau_s| per joint, N·m.
    pub peak_slave_tau: [f64; 3],
}

/// Synchronization metrics over `[t0, t1)` seconds of the episode.
pub fn metric_sync_window(ep: &Episode, t0: f64, t1: f64) -> Result<SyncMetrics> {
    let lo = (t0 * 1e3) as u64;
    let hi = (t1 * 1e3) as u64;
    let rows: Vec<_> = ep
        .rows
        .iter()
        .filter(|r| r.t_ms >= lo && r.t_ms < hi)
        .collect();
    if rows.len() < 2 {
        return Err(Error::TooShort(rows.len()));
    }
    let mut out = SyncMetrics {
        mean_pos_err: [0.0; 3],
        max_pos_err: [0.0; 3],
        mean_force_sum: [0.0; 3],
        peak_slave_tau: [0.0; 3],
    };
    for r in &rows {
        for j in 0..3 {
            let pe = (r.master.theta.get(j) - r.slave.theta.get(j)).abs();
            let fs = (r.master.tau.get(j) + r.slave.tau.get(j)).abs();
            out.mean_pos_err[j] += pe;
            out.max_pos_err[j] = out.max_pos_err[j].max(pe);
            out.mean_force_sum[j] += fs;
            out.peak_slave_tau[j] = out.peak_slave_tau[j].max(r.slave.tau.get(j).abs());
        }
    }
    let n = rows.len() as f64;
    for j in 0..3 {
        out.mean_pos_err[j] /= n;
        out.mean_force_sum[j] /= n;
    }
    Ok(out)
}

/// Synchronization metrics after a transient cut (default 0.5 s).
pub fn metric_sync(ep: &Episode, transient_cut_s: f64) -> Result<SyncMetrics> {
    metric_sync_window(ep, transient_cut_s, ep.duration_s())
}

/// Free-running prediction error: seed the model with the episode's first
/// 20 ms row, feed its own outputs for `horizon` steps, and report the
/// normalized MSE against the recording.
///
/// The slave-to-master variant has no self-consistent free run (its output
/// space is not its input space) and is rejected.
pub fn metric_open_loop(model: &SequenceModel, ep: &Episode, horizon: usize) -> Result<f64> {
    let variant = model.config.variant;
    if !variant.supports_autoregression() {
        return Err(Error::UnsupportedVariant(variant.name()));
    }
    let seq = downsample(ep)?;
    if horizon == 0 || horizon + 1 > seq.len() {
        return Err(Error::TooShort(seq.len()));
    }
    let norm = &model.normalizer;
    let in_cols = variant.input_cols();
    let out_cols = variant.output_cols();

    let mut hidden = model.fresh_hidden();
    let mut x = norm.normalize_cols(in_cols, &seq.rows[0]);
    let mut predictions = Vec::with_capacity(horizon);
    let mut targets = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let y = model.step(&x, &mut hidden)?;
        targets.push(norm.normalize_cols(out_cols.clone(), &seq.rows[t + 1]));
        x = y.clone();
        predictions.push(y);
    }
    loss_mse(&predictions, &targets)
}

/// Success decision plus the reasons behind a failure.
#[derive(Clone, Debug)]
pub struct CorridorReport {
    pub success: bool,
    pub diagnostics: Vec<String>,
    /// Complete cycles (write) or reversals (erase) observed.
    pub events: usize,
}

impl CorridorReport {
    fn fail(reason: impl Into<String>, events: usize) -> Self {
        CorridorReport {
            success: false,
            diagnostics: vec![reason.into()],
            events,
        }
    }
}

fn check_task_match(ep: &Episode, task: &TaskSpec) -> Result<()> {
    match ep.meta_str("task") {
        Some(name) if name == task.name() => Ok(()),
        Some(other) => Err(Error::TaskMismatch(format!(
            "episode was recorded for task {other:?}, not {:?}",
            task.name()
        ))),
        None => Err(Error::TaskMismatch("episode has no task metadata".into())),
    }
}

/// Joint-1 reversal extrema after `transient`, with hysteresis.
fn reversal_extrema(ep: &Episode, transient: f64, hysteresis: f64) -> Vec<(f64, f64)> {
    let start = (transient * 1e3) as u64;
    let mut extrema = Vec::new();
    let mut dir = 0i8; // +1 rising, -1 falling, 0 unknown
    let mut best = f64::NAN;
    let mut best_t = 0.0;
    for r in ep.rows.iter().filter(|r| r.t_ms >= start) {
        let v = r.slave.theta.j1;
        let t = r.t_ms as f64 * 1e-3;
        if best.is_nan() {
            best = v;
            best_t = t;
            continue;
        }
        match dir {
            0 => {
                if v > best + hysteresis {
                    dir = 1;
                    best = v;
                    best_t = t;
                } else if v < best - hysteresis {
                    dir = -1;
                    best = v;
                    best_t = t;
                }
            }
            1 => {
                if v > best {
                    best = v;
                    best_t = t;
                } else if v < best - hysteresis {
                    extrema.push((best_t, best));
                    dir = -1;
                    best = v;
                    best_t = t;
                }
            }
            _ => {
                if v < best {
                    best = v;
                    best_t = t;
                } else if v > best + hysteresis {
                    extrema.push((best_t, best));
                    dir = 1;
                    best = v;
                    best_t = t;
                }
            }
        }
    }
    extrema
}

/// Pen-down spans: detects touchdown events of joint 2 against the wall.
/// Returns cycle boundary times (each touchdown after a sustained lift).
fn touchdown_times(ep: &Episode, wall: f64, contact_margin: f64, lift_margin: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut lifted_since: Option<u64> = None;
    const SUSTAIN_MS: u64 = 50;
    for r in &ep.rows {
        let th2 = r.slave.theta.j2;
        if th2 > wall + lift_margin {
            lifted_since.get_or_insert(r.t_ms);
        } else if th2 < wall + contact_margin {
            if let Some(since) = lifted_since {
                if r.t_ms - since >= SUSTAIN_MS {
                    out.push(r.t_ms as f64 * 1e-3);
                }
                lifted_since = None;
            }
        }
    }
    out
}

/// First pen touchdown of the nominal track inside an interior cycle.
fn nominal_touchdown(
    track: &crate::operator::CubicTrack,
    period: f64,
    wall: f64,
    contact_margin: f64,
    lift_margin: f64,
) -> f64 {
    let mut lifted_since: Option<f64> = None;
    let mut t = period;
    while t < 3.0 * period {
        let th2 = track.sample(t).0.j2;
        if th2 > wall + lift_margin {
            lifted_since.get_or_insert(t);
        } else if th2 < wall + contact_margin {
            if let Some(since) = lifted_since {
                if t - since >= 0.05 {
                    return t;
                }
                lifted_since = None;
            }
        }
        t += 1e-3;
    }
    period
}

/// Resamples a joint over a cycle on a uniform phase grid. Pure integer
/// index arithmetic so equal-length cycles sample identical phase patterns.
fn resample_cycle(ep: &Episode, t0: f64, t1: f64, grid: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(grid);
    let n = ep.rows.len();
    let t0_ms = (t0 * 1e3).round() as usize;
    let t1_ms = (t1 * 1e3).round() as usize;
    let span = t1_ms.saturating_sub(t0_ms).max(1);
    for k in 0..grid {
        let idx = (t0_ms + span * k / grid).min(n - 1);
        let th = ep.rows[idx].slave.theta;
        out.push([th.j1, th.j2, th.j3]);
    }
    out
}

/// Task-specific success predicate over an autonomous (or demo) episode.
pub fn metric_corridor(ep: &Episode, task: &TaskSpec) -> Result<CorridorReport> {
    check_task_match(ep, task)?;
    if ep.rows.is_empty() {
        return Err(Error::TooShort(0));
    }
    if ep.meta_str("limit_hit") == Some("true") {
        return Ok(CorridorReport::fail("limit", 0));
    }
    match &task.corridor {
        Corridor::None => Err(Error::TaskMismatch(format!(
            "task {:?} has no success corridor",
            task.name()
        ))),
        Corridor::Draw {
            window,
            contact_band,
            min_sweep,
        } => {
            let wall = task
                .wall_position()
                .ok_or_else(|| Error::TaskMismatch("draw task without wall".into()))?;
            let lo = (window.0 * 1e3) as u64;
            let hi = (window.1 * 1e3) as u64;
            let rows: Vec<_> = ep
                .rows
                .iter()
                .filter(|r| r.t_ms >= lo && r.t_ms < hi)
                .collect();
            if rows.len() < 100 {
                return Err(Error::TooShort(rows.len()));
            }
            let mut th1_min = f64::INFINITY;
            let mut th1_max = f64::NEG_INFINITY;
            let mut contact_rows = 0usize;
            let mut out_of_band = 0usize;
            for r in &rows {
                let rel = r.slave.theta.j2 - wall;
                if rel < contact_band.0 || rel > contact_band.1 {
                    out_of_band += 1;
                }
                if r.env.j2 != 0.0 {
                    contact_rows += 1;
                }
                th1_min = th1_min.min(r.slave.theta.j1);
                th1_max = th1_max.max(r.slave.theta.j1);
            }
            let mut diagnostics = Vec::new();
            if out_of_band > rows.len() / 50 {
                diagnostics.push(format!("out-of-band ({out_of_band} rows)"));
            }
            if (contact_rows as f64) < 0.7 * rows.len() as f64 {
                diagnostics.push("lost-contact".into());
            }
            let sweep = th1_max - th1_min;
            if sweep < *min_sweep {
                diagnostics.push(format!("short-stroke ({sweep:.3} rad)"));
            }
            Ok(CorridorReport {
                success: diagnostics.is_empty(),
                diagnostics,
                events: 0,
            })
        }
        Corridor::Erase {
            extremum_band,
            max_reversal_gap,
            min_reversals,
            transient,
        } => {
            let extrema = reversal_extrema(ep, *transient, 0.05);
            let end = ep.duration_s();
            if extrema.is_empty() {
                return Ok(CorridorReport::fail("stopped", 0));
            }
            let mut diagnostics = Vec::new();
            let mut last_t = *transient;
            let mut max_gap: f64 = 0.0;
            let mut worst_band: Option<f64> = None;
            for (t, v) in &extrema {
                max_gap = max_gap.max(t - last_t);
                last_t = *t;
                let mag = v.abs();
                if mag < extremum_band.0 || mag > extremum_band.1 {
                    worst_band = Some(*v);
                }
            }
            max_gap = max_gap.max(end - last_t);
            if let Some(v) = worst_band {
                diagnostics.push(format!("out-of-band (extremum {v:.3} rad)"));
            }
            if max_gap > *max_reversal_gap {
                diagnostics.push(format!("stopped (gap {max_gap:.2} s)"));
            }
            if extrema.len() < *min_reversals {
                diagnostics.push(format!("too-few-reversals ({})", extrema.len()));
            }
            Ok(CorridorReport {
                success: diagnostics.is_empty(),
                diagnostics,
                events: extrema.len(),
            })
        }
        Corridor::Write {
            theta1_band,
            contact_margin,
            lift_margin,
            cycles_needed,
            period_tolerance,
        } => {
            let wall = task
                .wall_position()
                .ok_or_else(|| Error::TaskMismatch("write task without wall".into()))?;
            let period = task
                .cycle_period
                .ok_or_else(|| Error::TaskMismatch("write task without period".into()))?;
            let bounds = touchdown_times(ep, wall, *contact_margin, *lift_margin);
            if bounds.len() < 2 {
                return Ok(CorridorReport::fail("stopped (no cycles)", 0));
            }
            let track = task.nominal_track();
            // Nominal cycle shape from an interior cycle, phase-aligned to the
            // track's own touchdown so measured and nominal cycles start at
            // the same event.
            let t_touch = nominal_touchdown(track, period, wall, *contact_margin, *lift_margin);
            let grid = 100usize;
            let nominal: Vec<f64> = (0..grid)
                .map(|k| {
                    let ph = k as f64 / grid as f64;
                    track.sample(t_touch + ph * period).0.j1
                })
                .collect();
            let targets = task.stroke_targets();

            let mut good_streak = 0usize;
            let mut best_streak = 0usize;
            let mut complete = 0usize;
            let mut diagnostics = Vec::new();
            for w in bounds.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                let len = t1 - t0;
                complete += 1;
                let mut ok = true;
                if len < period_tolerance.0 * period || len > period_tolerance.1 * period {
                    ok = false;
                    diagnostics.push(format!("cycle-period ({len:.2} s)"));
                }
                let samples = resample_cycle(ep, t0, t1, grid);
                if ok {
                    let mut worst = 0.0f64;
                    for (k, s) in samples.iter().enumerate() {
                        worst = worst.max((s[0] - nominal[k]).abs());
                    }
                    if worst > *theta1_band {
                        ok = false;
                        diagnostics.push(format!("out-of-band (dev {worst:.3} rad)"));
                    }
                }
                if ok {
                    // Stroke order: each target must be reached in sequence.
                    let mut cursor = 0usize;
                    for (phase_frac, value) in &targets {
                        let lo = ((phase_frac - 0.18).max(0.0) * grid as f64) as usize;
                        let hi = (((phase_frac + 0.18) * grid as f64) as usize).min(grid - 1);
                        let found = (lo.max(cursor)..=hi)
                            .find(|&k| (samples[k][0] - value).abs() < 0.10);
                        match found {
                            Some(k) => cursor = k,
                            None => {
                                ok = false;
                                diagnostics.push("wrong-order".into());
                                break;
                            }
                        }
                    }
                }
                if ok {
                    good_streak += 1;
                    best_streak = best_streak.max(good_streak);
                } else {
                    good_streak = 0;
                }
            }
            if best_streak < *cycles_needed {
                diagnostics.push(format!(
                    "too-few-cycles (best streak {best_streak} of {cycles_needed})"
                ));
            }
            Ok(CorridorReport {
                success: best_streak >= *cycles_needed,
                diagnostics,
                events: complete,
            })
        }
    }
}

/// Cycle-to-cycle repeatability of a periodic episode: mean pairwise RMS
/// joint deviation over phase-aligned cycles.
pub fn metric_cycle_variance(ep: &Episode, task: &TaskSpec) -> Result<f64> {
    check_task_match(ep, task)?;
    let wall = task
        .wall_position()
        .ok_or_else(|| Error::TaskMismatch("task has no wall for cycle detection".into()))?;
    let (contact_margin, lift_margin) = match &task.corridor {
        Corridor::Write {
            contact_margin,
            lift_margin,
            ..
        } => (*contact_margin, *lift_margin),
        _ => (0.04, 0.06),
    };
    let bounds = touchdown_times(ep, wall, contact_margin, lift_margin);
    if bounds.len() < 3 {
        return Err(Error::NoCycles);
    }
    let grid = 100usize;
    let cycles: Vec<Vec<[f64; 3]>> = bounds
        .windows(2)
        .map(|w| resample_cycle(ep, w[0], w[1], grid))
        .collect();
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for i in 0..cycles.len() {
        for jdx in i + 1..cycles.len() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (a, b) in cycles[i].iter().zip(&cycles[jdx]) {
                for j in 0..3 {
                    let d = a[j] - b[j];
                    sum += d * d;
                    n += 1;
                }
            }
            acc += (sum / n as f64).sqrt();
            pairs += 1;
        }
    }
    Ok(acc / pairs as f64)
}
