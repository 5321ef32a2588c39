//! Result records (JSON) and flat tables (CSV).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::mcengine::{ConstantFit, RatioEstimate};
use crate::theory::TheoryPrediction;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub n: usize,
    pub zeta_config_id: usize,
    pub ratio: RatioEstimate,
    /// Absent when the run was forced outside the theorem's conditions.
    pub prediction: Option<TheoryPrediction>,
    /// `log_ratio - predicted - log C` (the fitted constant at this `n`
    /// when there is one, else zero).
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub n: usize,
    pub fit: ConstantFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub created_unix: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub status: RecordStatus,
    pub diagnostic: Option<String>,
    pub entries: Vec<RecordEntry>,
    pub fits: Vec<FitEntry>,
    pub singular_samples: usize,
    /// The only fields that differ between reruns with the same seed.
    pub timing: Timing,
}

impl ResultRecord {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            status: RecordStatus::Complete,
            diagnostic: None,
            entries: Vec::new(),
            fits: Vec::new(),
            singular_samples: 0,
            timing: Timing { created_unix: 0, wall_seconds: 0.0 },
        }
    }

    /// Every number in the record must be finite.
    pub fn check_finite(&self) -> Result<()> {
        fn walk(v: &serde_json::Value, path: &str) -> Result<()> {
            match v {
                serde_json::Value::Number(x) if !x.as_f64().is_some_and(f64::is_finite) => {
                    Err(Error::Estimation(format!("non-finite value at {path}")))
                }
                serde_json::Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| walk(x, &format!("{path}[{i}]"))),
                serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| walk(x, &format!("{path}.{k}"))),
                _ => Ok(()),
            }
        }
        // serde_json writes non-finite floats as null, so test the source
        // values directly as well.
        for e in &self.entries {
            let r = &e.ratio;
            let mut nums = vec![r.log_ratio, r.stderr, r.log_ratio_median, r.stderr_median];
            nums.extend(&r.log_f1);
            nums.extend(&r.log_f1_stderr);
            if let Some(x) = e.residual {
                nums.push(x);
            }
            if let Some(f) = &r.log_fm {
                nums.extend([f.log_mean, f.stderr_log]);
            }
            if nums.iter().any(|x| !x.is_finite()) {
                return Err(Error::Estimation(format!(
                    "non-finite estimate at n = {}, configuration {}",
                    e.n, e.zeta_config_id
                )));
            }
        }
        walk(&serde_json::to_value(self)?, "record")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let r: ResultRecord = serde_json::from_str(&text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "{}: schema version {} (expected {SCHEMA_VERSION})",
                path.display(),
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// Summary table: `n, zeta_config_id, log_ratio, stderr,
    /// predicted_log_mod_C, residual`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "zeta_config_id", "log_ratio", "stderr", "predicted_log_mod_C", "residual"])?;
        for e in &self.entries {
            w.write_record([
                e.n.to_string(),
                e.zeta_config_id.to_string(),
                e.ratio.log_ratio.to_string(),
                e.ratio.stderr.to_string(),
                e.prediction.as_ref().map_or(String::new(), |p| p.log_ratio_mod_constant.to_string()),
                e.residual.map_or(String::new(), |r| r.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plot series over all records: one row per `(n, configuration)` with
/// `x = n` and `|zeta_1 - zeta_2|` (0 when `m = 1`) as abscissae.
pub fn write_plotdata<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["record", "n", "zeta_config_id", "zeta_distance", "log_ratio", "stderr", "log_ratio_theory"])?;
    for (i, r) in records.iter().enumerate() {
        for e in &r.entries {
            let z = &e.ratio.cfg.zetas;
            let dist = if z.len() >= 2 { (z[0] - z[1]).norm() } else { 0.0 };
            w.write_record([
                i.to_string(),
                e.n.to_string(),
                e.zeta_config_id.to_string(),
                dist.to_string(),
                e.ratio.log_ratio.to_string(),
                e.ratio.stderr.to_string(),
                e.prediction.as_ref().map_or(String::new(), |p| p.log_ratio_mod_constant.to_string()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
