//! JSON model files.
//!
//! A file is a single object whose first key is `format_version`, followed
//! by `model`. Readers check the version before decoding anything else.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeModel;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u32,
    model: &'a CascadeModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[allow(dead_code)]
    format_version: u32,
    model: CascadeModel,
}

pub fn model_to_json(model: &CascadeModel) -> String {
    serde_json::to_string(&ModelFileRef {
        format_version: FORMAT_VERSION,
        model,
    })
    .expect("models contain only finite numbers")
}

pub fn model_from_json(text: &str) -> Result<CascadeModel> {
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| Error::CorruptModel(format!("unreadable header: {e}")))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: probe.format_version,
        });
    }
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    file.model.validate().map_err(Error::CorruptModel)?;
    Ok(file.model)
}

pub fn save_model(model: &CascadeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CascadeModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
