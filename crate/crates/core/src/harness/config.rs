//! Typed key-value run configuration (TOML syntax, unknown keys rejected)
//! and stable hashing of configurations for self-describing outputs.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::train::{Sampling, TrainConfig};

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses a training configuration. Errors name the offending line.
pub fn parse_train_config(text: &str) -> Result<TrainConfig> {
    let cfg: TrainConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                Error::Config(format!("line {line}, column {col}: {msg}"))
            }
            None => Error::Config(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_train_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_train_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Renders a configuration in the same syntax the parser accepts.
pub fn render_train_config(cfg: &TrainConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// First 16 hex digits of the SHA-256 of the value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configurations serialise to JSON");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Desk-scale deblurring: one 128x128 pair, every training patch each
/// epoch, dense stride-1 reassembly.
pub fn deblur_desk_config() -> TrainConfig {
    TrainConfig {
        sampling: Sampling::All,
        stride: Some(1),
        ..TrainConfig::default()
    }
}

/// Desk-scale x3 super-resolution with residual learning on top of bicubic
/// upsampling.
pub fn sr_desk_config() -> TrainConfig {
    TrainConfig {
        decimation: 3,
        residual: true,
        sampling: Sampling::All,
        stride: Some(1),
        ..TrainConfig::default()
    }
}
