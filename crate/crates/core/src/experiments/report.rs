//! Study reports and their CSV / JSON renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::fit::LogLogFit;
use crate::error::Result;

pub const CSV_HEADER: &str = "study,param_name,param_value,gap,stderr,seed_count,t_final,m,N,p,q,extra";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub param_value: f64,
    pub gap: f64,
    /// NaN when the row has no Monte Carlo error bar.
    pub stderr: f64,
    pub seed_count: usize,
    pub t_final: f64,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub p: f64,
    pub q: f64,
    /// `key=value` pairs joined by `;`.
    pub extra: String,
}

impl StudyRow {
    /// Looks up `key` in the `extra` column.
    pub fn extra_value(&self, key: &str) -> Option<&str> {
        self.extra
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub param_name: String,
    pub rows: Vec<StudyRow>,
    pub fit: Option<LogLogFit>,
    /// Why no fit is available, when it is not.
    pub fit_error: Option<String>,
    pub metadata: serde_json::Value,
}

/// Builds the `extra` column from key/value pairs. Values are formatted like
/// the numeric columns.
pub(crate) fn extra(pairs: &[(&str, ExtraValue)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = match v {
            ExtraValue::Num(x) => write!(s, "{k}={}", float(*x)),
            ExtraValue::Int(x) => write!(s, "{k}={x}"),
            ExtraValue::Bool(x) => write!(s, "{k}={x}"),
            ExtraValue::Text(x) => write!(s, "{k}={x}"),
        };
    }
    s
}

pub(crate) enum ExtraValue {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(&'static str),
}

/// 17 significant digits in scientific notation; non-finite values as
/// `nan`, `inf`, `-inf`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.study,
                self.param_name,
                float(r.param_value),
                float(r.gap),
                float(r.stderr),
                r.seed_count,
                float(r.t_final),
                opt(r.m),
                opt(r.n),
                float(r.p),
                float(r.q),
                r.extra
            );
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.metadata.json` into `dir`. The
    /// timestamp goes into the sidecar only, so the CSV is reproducible
    /// byte for byte.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv())?;
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let sidecar = serde_json::json!({
            "study": self.study,
            "param_name": self.param_name,
            "fit": self.fit,
            "fit_error": self.fit_error,
            "metadata": self.metadata,
            "code_version": env!("CARGO_PKG_VERSION"),
            "timestamp_unix": timestamp,
        });
        let meta = dir.join(format!("{stem}.metadata.json"));
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| crate::error::Error::Data(e.to_string()))?;
        std::fs::write(&meta, text + "\n")?;
        Ok((csv, meta))
    }
}
