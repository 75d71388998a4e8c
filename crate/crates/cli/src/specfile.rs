//! Experiment spec files: `key = value` lines under `[section]` headers,
//! `#` comments. Values override the task's built-in defaults.
//!
//! ```text
//! [experiment]
//! task = draw
//! demo_trials = 8
//! eval_trials = 3
//! layers = 6          # comma list runs several depths
//! units = 50
//! window = 150
//! batch = 100
//! epochs = 300
//! ar_epochs_factor = 2.0
//! lr = 0.001
//! seed = 1
//!
//! [grid]
//! train = 0, 20, 40
//! eval = -30, -20, -10, 0, 10, 20, 30, 40, 50, 60, 70, 80
//! ```

use bcil_core::error::{Error, Result};
use bcil_core::experiment::ExperimentSpec;
use bcil_core::task::TaskKind;

fn bad(path: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::malformed(path, line, reason)
}

fn parse_list(v: &str, path: &str, line: usize) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(path, line, format!("bad number {s:?}")))
        })
        .collect()
}

fn parse_usize_list(v: &str, path: &str, line: usize) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad(path, line, format!("bad integer {s:?}")))
        })
        .collect()
}

pub fn parse_spec(text: &str, path: &str) -> Result<ExperimentSpec> {
    let mut section = String::new();
    let mut entries: Vec<(usize, String, String, String)> = Vec::new();
    let mut task: Option<TaskKind> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad(path, line, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| bad(path, line, "expected key = value"))?;
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if section == "experiment" && key == "task" {
            task = Some(value.parse()?);
        } else {
            entries.push((line, section.clone(), key, value));
        }
    }
    let task = task.ok_or_else(|| {
        Error::InvalidConfig("spec file must set task under [experiment]".into())
    })?;
    let mut spec = ExperimentSpec::default_for(task)?;

    for (line, section, key, value) in entries {
        match (section.as_str(), key.as_str()) {
            ("experiment", "demo_trials") => {
                spec.demo_trials = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "eval_trials") => {
                spec.eval_trials = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "layers") => spec.layers = parse_usize_list(&value, path, line)?,
            ("experiment", "units") => {
                spec.units = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "window") => {
                spec.window = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "batch") => {
                spec.batch_size = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "epochs") => {
                spec.epochs = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("experiment", "ar_epochs_factor") => {
                spec.ar_epochs_factor =
                    value.parse().map_err(|_| bad(path, line, "bad number"))?
            }
            ("experiment", "lr") => {
                spec.lr = value.parse().map_err(|_| bad(path, line, "bad number"))?
            }
            ("experiment", "seed") => {
                spec.seed = value.parse().map_err(|_| bad(path, line, "bad integer"))?
            }
            ("grid", "train") => spec.train_grid = parse_list(&value, path, line)?,
            ("grid", "eval") => spec.eval_grid = parse_list(&value, path, line)?,
            (s, k) => {
                return Err(bad(path, line, format!("unknown key {k:?} in section {s:?}")));
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_spec() {
        let text = "\
# comment
[experiment]
task = draw
demo_trials = 2
eval_trials = 1
layers = 2
units = 16
window = 75
batch = 10
epochs = 40
ar_epochs_factor = 1.5
lr = 0.002
seed = 9

[grid]
train = 0, 20, 40
eval = -30, 0, 20, 40, 80
";
        let spec = parse_spec(text, "mem").unwrap();
        assert_eq!(spec.task, TaskKind::Draw);
        assert_eq!(spec.demo_trials, 2);
        assert_eq!(spec.layers, vec![2]);
        assert_eq!(spec.eval_grid.len(), 5);
        assert_eq!(spec.seed, 9);
    }

    #[test]
    fn defaults_fill_unset_keys() {
        let spec = parse_spec("[experiment]\ntask = erase\n", "mem").unwrap();
        assert_eq!(spec.layers, vec![2, 4]);
        assert_eq!(spec.demo_trials, 5);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_spec("[experiment]\ntask = draw\nbogus = 1\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }));
    }

    #[test]
    fn missing_task_rejected() {
        assert!(matches!(
            parse_spec("[grid]\ntrain = 0\neval = 0\n", "mem"),
            Err(Error::InvalidConfig(_))
        ));
    }
}
