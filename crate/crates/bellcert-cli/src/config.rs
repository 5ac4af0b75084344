//! Optional JSON config files; values present in the file override the
//! corresponding command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

macro_rules! override_from_config {
    ($args:expr, $cfg:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $cfg.$field {
            $args.$field = v;
        })+
    };
}
pub(crate) use override_from_config;
