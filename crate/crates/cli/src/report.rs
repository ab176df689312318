//! CSV report rendering. One fixed header; numbers in shortest
//! round-trip decimal; deterministic row order (insertion order).

use std::path::Path;

use anyhow::{Context, Result};

pub const CSV_HEADER: &str = "instance_id,mechanism,opt,sw,ratio,method,trials,stderr";

pub struct CsvRow {
    pub instance_id: String,
    pub mechanism: String,
    pub opt: f64,
    pub sw: f64,
    pub ratio: f64,
    pub method: String,
    pub trials: Option<u64>,
    pub stderr: Option<f64>,
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let trials = r.trials.map(|t| t.to_string()).unwrap_or_default();
        let stderr = r.stderr.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.instance_id, r.mechanism, r.opt, r.sw, r.ratio, r.method, trials, stderr
        ));
    }
    out
}

/// Prints the document to stdout and, when a path is given, writes the
/// identical bytes there.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
