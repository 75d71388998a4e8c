//! Checkpoint file format.
//!
//! Layout: the magic `BCIL1\n`, a UTF-8 metadata block of `key = value`
//! lines (configuration, normalizer bounds, tensor names and shapes in
//! declaration order), a single NUL separator, then the tensor payloads
//! concatenated as little-endian binary64 in the declared order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::adam::AdamParams;
use super::lstm::ModelWeights;
use super::normalizer::Normalizer;
use super::{ModelConfig, ModelVariant, SequenceModel};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"BCIL1\n";

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn metadata_block(model: &SequenceModel) -> String {
    let c = &model.config;
    let (mins, maxs) = model.normalizer.bounds();
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("variant", c.variant.to_string());
    kv("lstm_layers", c.lstm_layers.to_string());
    kv("units", c.units.to_string());
    kv("window", c.window.to_string());
    kv("batch_size", c.batch_size.to_string());
    kv("autoregressive", c.autoregressive.to_string());
    kv("anchor_period", c.anchor_period.to_string());
    kv("prediction_stride_ms", c.prediction_stride_ms.to_string());
    kv("lr", c.adam.lr.to_string());
    kv("beta1", c.adam.beta1.to_string());
    kv("beta2", c.adam.beta2.to_string());
    kv("epsilon", c.adam.epsilon.to_string());
    kv("epochs", c.epochs.to_string());
    kv("seed", c.seed.to_string());
    kv(
        "grad_clip",
        c.grad_clip.map_or("none".to_string(), |v| v.to_string()),
    );
    kv("norm_min", join_floats(mins));
    kv("norm_max", join_floats(maxs));
    for t in model.weights.topo.tensors() {
        kv("tensor", format!("{} {} {}", t.name, t.rows, t.cols));
    }
    out
}

pub fn save_model(model: &SequenceModel, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(model.weights.data.len() * 8 + 1024);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(metadata_block(model).as_bytes());
    bytes.push(0);
    for v in &model.weights.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

struct MetaParser<'a> {
    origin: &'a str,
    entries: Vec<(usize, String, String)>, // (line, key, value)
}

impl<'a> MetaParser<'a> {
    fn parse(text: &str, origin: &'a str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed(origin, idx + 2, "metadata line without '='"))?;
            entries.push((idx + 2, k.trim().to_string(), v.trim().to_string()));
        }
        Ok(MetaParser { origin, entries })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(_, _, v)| v.as_str())
            .ok_or_else(|| Error::malformed(self.origin, 1, format!("missing key {key:?}")))
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::malformed(self.origin, 1, format!("bad value for {key:?}")))
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::malformed(self.origin, 1, format!("bad float in {key:?}")))
            })
            .collect()
    }

    fn tensors(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, k, _)| k == "tensor")
            .map(|(_, _, v)| v.as_str())
            .collect()
    }
}

pub fn load_model(path: &Path) -> Result<SequenceModel> {
    let bytes = fs::read(path)?;
    let origin = path.display().to_string();
    load_model_bytes(&bytes, &origin)
}

pub(crate) fn load_model_bytes(bytes: &[u8], origin: &str) -> Result<SequenceModel> {
    if bytes.len() < CHECKPOINT_MAGIC.len() {
        return Err(Error::malformed(origin, 1, "file too short for magic"));
    }
    let magic = &bytes[..CHECKPOINT_MAGIC.len()];
    if magic != CHECKPOINT_MAGIC {
        // A recognizable family with a different version digit is a version
        // mismatch; anything else is corruption.
        if magic.starts_with(b"BCIL") {
            return Err(Error::VersionMismatch(
                String::from_utf8_lossy(&magic[..5]).into_owned(),
            ));
        }
        return Err(Error::malformed(origin, 1, "bad magic"));
    }
    let rest = &bytes[CHECKPOINT_MAGIC.len()..];
    let nul = rest
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| Error::malformed(origin, 1, "missing metadata terminator"))?;
    let meta_text = std::str::from_utf8(&rest[..nul])
        .map_err(|_| Error::malformed(origin, 1, "metadata is not UTF-8"))?;
    let payload = &rest[nul + 1..];

    let meta = MetaParser::parse(meta_text, origin)?;
    let variant: ModelVariant = meta
        .get("variant")?
        .parse()
        .map_err(|_| Error::malformed(origin, 1, "unknown variant"))?;
    let grad_clip = match meta.get("grad_clip")? {
        "none" => None,
        v => Some(v.parse().map_err(|_| {
            Error::malformed(origin, 1, "bad grad_clip")
        })?),
    };
    let config = ModelConfig {
        variant,
        lstm_layers: meta.parse_num("lstm_layers")?,
        units: meta.parse_num("units")?,
        window: meta.parse_num("window")?,
        batch_size: meta.parse_num("batch_size")?,
        autoregressive: meta.parse_num("autoregressive")?,
        anchor_period: meta.parse_num("anchor_period")?,
        prediction_stride_ms: meta.parse_num("prediction_stride_ms")?,
        adam: AdamParams {
            lr: meta.parse_num("lr")?,
            beta1: meta.parse_num("beta1")?,
            beta2: meta.parse_num("beta2")?,
            epsilon: meta.parse_num("epsilon")?,
        },
        epochs: meta.parse_num("epochs")?,
        seed: meta.parse_num("seed")?,
        grad_clip,
    };
    config.validate().map_err(|e| {
        Error::malformed(origin, 1, format!("invalid stored config: {e}"))
    })?;

    let normalizer = Normalizer::from_bounds(meta.float_list("norm_min")?, meta.float_list("norm_max")?)
        .map_err(|e| Error::malformed(origin, 1, format!("bad normalizer: {e}")))?;

    // The declared tensor list must agree with the config-derived topology.
    let topo = config.topology();
    let expected: Vec<String> = topo
        .tensors()
        .iter()
        .map(|t| format!("{} {} {}", t.name, t.rows, t.cols))
        .collect();
    let declared = meta.tensors();
    if declared.len() != expected.len()
        || declared.iter().zip(&expected).any(|(a, b)| a != b)
    {
        return Err(Error::malformed(
            origin,
            1,
            "tensor declarations do not match the stored configuration",
        ));
    }

    let count = topo.param_count();
    if payload.len() != count * 8 {
        return Err(Error::malformed(
            origin,
            1,
            format!(
                "payload holds {} bytes, expected {}",
                payload.len(),
                count * 8
            ),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::malformed(origin, 1, "non-finite weight in payload"));
    }

    Ok(SequenceModel {
        config,
        normalizer,
        weights: ModelWeights { topo, data },
    })
}
