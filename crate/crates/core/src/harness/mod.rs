//! Experiment drivers behind the command-line tool. Every command is a
//! library function that writes its artifacts under an output directory and
//! returns a report describing them.

pub mod commands;
pub mod config;
pub mod evaluation;
pub mod records;
pub mod synth;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use commands::*;
pub use config::{config_hash, deblur_desk_config, load_train_config, parse_train_config, sr_desk_config};
pub use evaluation::{degrade_set, evaluate_model, load_set, EvalImage, EvalRow};
pub use synth::{render_pattern, Pattern};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// A file as a one-element list, or the image files of a directory in
/// lexicographic order.
pub fn list_images(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.is_file() && is_image(&p) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::contract(format!("no images in {}", path.display())));
    }
    Ok(files)
}

/// All images named by `inputs`, expanding directories.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(list_images(p)?);
    }
    Ok(all)
}

pub(crate) fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}
