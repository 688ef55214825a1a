//! Deterministic artifact writing. Files carry the master seed and config
//! hash in `# key=value` header lines, never timestamps, and floats are
//! printed in shortest round-trip form, so a rerun with the same config
//! reproduces every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Metadata<'a> {
    pub seed: u64,
    pub hash: &'a str,
}

impl Metadata<'_> {
    /// Header comment lines: seed, config hash, then file-specific keys.
    pub fn header(&self, extra: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# config=sha256:{}", self.hash);
        for (key, value) in extra {
            let _ = writeln!(out, "# {key}={value}");
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_text(path: &Path, content: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    write_text(path, &text)
}

/// CSV with `#` metadata lines, a column header, and comma-joined rows.
pub fn write_csv(
    path: &Path,
    meta: &Metadata<'_>,
    extra: &[(&str, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf> {
    let mut text = meta.header(extra);
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_shortest_round_trip() {
        assert_eq!(fmt_f64(1.0 / 3.0), "0.3333333333333333");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(-0.0), "-0");
        assert_eq!(fmt_f64(1e-9), "0.000000001");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn header_lists_seed_then_hash_then_extras() {
        let meta = Metadata {
            seed: 42,
            hash: "abc",
        };
        let header = meta.header(&[("n", "8".into())]);
        assert_eq!(header, "# seed=42\n# config=sha256:abc\n# n=8\n");
    }
}
