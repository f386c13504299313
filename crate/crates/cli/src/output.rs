//! Writing result files. Every file carries the run configuration: CSVs in
//! a leading `# run_config=` comment, JSON in a `run_config` field and SVGs
//! in their `<metadata>` element.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// A CSV buffer that starts with the configuration comment and `header`.
pub fn csv(config: &RunConfig, header: &str) -> Vec<u8> {
    format!("# run_config={}\n{header}\n", config.to_json()).into_bytes()
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json<T: Serialize>(config: &RunConfig, body: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(&Report {
        run_config: config,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

/// File-name-safe form of a user id or method name.
pub fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(file_stem("ols+hmm"), "ols_hmm");
        assert_eq!(file_stem("u/1"), "u_1");
    }
}
