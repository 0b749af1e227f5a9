//! Artifacts produced by a command and how they are written.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

pub enum Artifact {
    Csv { name: String, comments: Vec<String>, header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Json { name: String, value: Value },
    Text { name: String, body: String },
}

/// Formats every entry with [`num`].
pub fn numeric_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<String>> {
    rows.into_iter().map(|r| r.into_iter().map(num).collect()).collect()
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv { name, .. } | Artifact::Json { name, .. } | Artifact::Text { name, .. } => name,
        }
    }

    pub fn render(&self) -> std::io::Result<Vec<u8>> {
        match self {
            Artifact::Csv { comments, header, rows, .. } => {
                let mut out = Vec::new();
                for c in comments {
                    for line in c.lines() {
                        writeln!(out, "# {line}")?;
                    }
                }
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
                w.write_record(header)?;
                for row in rows {
                    w.write_record(row)?;
                }
                w.into_inner().map_err(|e| e.into_error())
            }
            Artifact::Json { value, .. } => {
                let mut out = serde_json::to_vec_pretty(value)?;
                out.push(b'\n');
                Ok(out)
            }
            Artifact::Text { body, .. } => Ok(body.clone().into_bytes()),
        }
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        let path = dir.join(self.name());
        std::fs::write(&path, self.render()?)?;
        Ok(path)
    }
}
