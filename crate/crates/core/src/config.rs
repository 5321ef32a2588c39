//! Run configuration: JSON file format, `re,im` complex syntax and the
//! precedence command line > config file > `CHARPOLY_SEED` > default.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcengine::{Denominator, Engine, Method, RatioOptions, SamplingPlan};
use crate::sampling::{make_distribution, EntryDistribution, EntryKind};
use crate::theory::{check_conditions, cumulant22, SpectralConfig};
use crate::verify::Suite;

pub const SEED_ENV: &str = "CHARPOLY_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Parses `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let mut parts = s.split(',');
    let (re, im) = match (parts.next(), parts.next(), parts.next()) {
        (Some(re), Some(im), None) => (re.trim(), im.trim()),
        _ => return Err(Error::invalid(format!("`{s}` is not of the form re,im"))),
    };
    let p = |t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| Error::invalid(format!("`{t}` in `{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::invalid(format!("`{s}` is not finite")))
        }
    };
    Ok(Complex64::new(p(re)?, p(im)?))
}

/// Renders `re,im` in shortest round-trip form.
pub fn render_complex(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Predict,
    #[default]
    Estimate,
    Verify,
    Plotdata,
    Moments,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Estimate => "estimate",
            Command::Verify => "verify",
            Command::Plotdata => "plotdata",
            Command::Moments => "moments",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Command::Predict, Command::Estimate, Command::Verify, Command::Plotdata, Command::Moments]
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyScale {
    #[default]
    Full,
    Quick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub dist_kind: EntryKind,
    pub kappa20: Complex64,
    /// Overrides the entry law's own fourth cumulant in predictions.
    pub kappa22: Option<f64>,
    pub z0: Complex64,
    /// One configuration of local shifts; defaults to `0, 1, ..., m-1`.
    pub zetas: Vec<Complex64>,
    /// Further configurations; when non-empty they replace `zetas`.
    pub zeta_sets: Vec<Vec<Complex64>>,
    pub n_list: Vec<usize>,
    pub m: Option<usize>,
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub estimator: Method,
    pub engine: Engine,
    pub denominator: Denominator,
    pub force: bool,
    pub threads: Option<usize>,
    pub only: Vec<Suite>,
    pub verify_scale: VerifyScale,
    pub records: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Estimate,
            dist_kind: EntryKind::Gaussian,
            kappa20: Complex64::new(0.0, 0.0),
            kappa22: None,
            z0: Complex64::new(0.0, 0.0),
            zetas: Vec::new(),
            zeta_sets: Vec::new(),
            n_list: vec![32],
            m: None,
            samples: 10_000,
            batches: 10,
            seed: DEFAULT_SEED,
            output_path: None,
            estimator: Method::Mean,
            engine: Engine::Sequential,
            denominator: Denominator::Exact,
            force: false,
            threads: None,
            only: Vec::new(),
            verify_scale: VerifyScale::Full,
            records: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a config file. A missing `seed` key falls back to
    /// `env_seed`, then to the default.
    pub fn from_json(text: &str, env_seed: Option<u64>) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config file: {e}")))?;
        let has_seed = v.get("seed").is_some();
        let mut cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::invalid(format!("config file: {e}")))?;
        if !has_seed {
            cfg.seed = env_seed.unwrap_or(DEFAULT_SEED);
        }
        Ok(cfg)
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or_else(|| self.zeta_configs().first().map_or(1, Vec::len))
    }

    /// The configurations of shifts to run, in order.
    pub fn zeta_configs(&self) -> Vec<Vec<Complex64>> {
        if !self.zeta_sets.is_empty() {
            return self.zeta_sets.clone();
        }
        if !self.zetas.is_empty() {
            return vec![self.zetas.clone()];
        }
        let m = self.m.unwrap_or(1);
        vec![(0..m).map(|j| Complex64::new(j as f64, 0.0)).collect()]
    }

    pub fn distribution(&self) -> Result<EntryDistribution> {
        make_distribution(self.dist_kind, self.kappa20)
    }

    /// `kappa22` as configured, else that of the entry law.
    pub fn effective_kappa22(&self) -> Result<f64> {
        match self.kappa22 {
            Some(k) => Ok(k),
            None => Ok(cumulant22(self.distribution()?.abs4(), self.kappa20)),
        }
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan { samples: self.samples, batches: self.batches, engine: self.engine, method: self.estimator }
    }

    pub fn ratio_options(&self) -> RatioOptions {
        RatioOptions { plan: self.plan(), denominator: self.denominator, force: self.force }
    }

    pub fn spectral_configs(&self, n: usize) -> Result<Vec<SpectralConfig>> {
        self.zeta_configs()
            .into_iter()
            .map(|z| SpectralConfig::new(self.z0, z, n))
            .collect()
    }

    /// Structural checks (`InvalidArgument`) first, then the theorem's
    /// conditions for commands that use them unless `force`.
    pub fn validate(&self) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if !finite(self.kappa20) || !finite(self.z0) {
            return Err(Error::invalid("kappa20 and z0 must be finite"));
        }
        self.distribution()?;
        if let Some(k) = self.kappa22 {
            if !k.is_finite() {
                return Err(Error::invalid("kappa22 must be finite"));
            }
        }
        let configs = self.zeta_configs();
        let m = self.m();
        if m == 0 {
            return Err(Error::invalid("m must be positive"));
        }
        for c in &configs {
            if c.len() != m {
                return Err(Error::invalid(format!("a shift configuration has {} points but m = {m}", c.len())));
            }
            SpectralConfig::new(self.z0, c.clone(), 1)?;
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        match self.command {
            Command::Estimate => {
                if self.n_list.is_empty() || self.n_list.contains(&0) {
                    return Err(Error::invalid("n_list must be non-empty with positive entries"));
                }
                self.plan().validate()?;
            }
            Command::Moments if self.samples < 1000 => {
                return Err(Error::invalid("moments needs at least 1000 samples"));
            }
            _ => {}
        }
        if self.command == Command::Estimate && !self.force {
            check_conditions(self.kappa20, self.z0)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_syntax() {
        assert_eq!(parse_complex("0.5,-1").unwrap(), Complex64::new(0.5, -1.0));
        assert_eq!(parse_complex(" 1e-3 , 2 ").unwrap(), Complex64::new(1e-3, 2.0));
        for bad in ["1", "1,2,3", "a,b", "inf,0", ""] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn seed_precedence() {
        let with = r#"{"seed": 5}"#;
        let without = r#"{"samples": 2000}"#;
        assert_eq!(RunConfig::from_json(with, Some(9)).unwrap().seed, 5);
        assert_eq!(RunConfig::from_json(without, Some(9)).unwrap().seed, 9);
        assert_eq!(RunConfig::from_json(without, None).unwrap().seed, DEFAULT_SEED);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"sampels": 5}"#, None).is_err());
    }

    #[test]
    fn complex_serialises_as_pair() {
        let cfg = RunConfig { z0: Complex64::new(0.25, -0.5), ..RunConfig::default() };
        let v: serde_json::Value = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(v["z0"], serde_json::json!([0.25, -0.5]));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig { zetas: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], ..RunConfig::default() };
        cfg.validate().unwrap();
        cfg.kappa20 = Complex64::new(1.0, 0.0);
        cfg.z0 = Complex64::new(0.5, 0.0);
        assert!(matches!(cfg.validate(), Err(Error::ConditionsViolated(_))));
        cfg.force = true;
        cfg.validate().unwrap();
        cfg.samples = 1001;
        assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
        cfg.samples = 2000;
        cfg.zetas.push(Complex64::new(1.0, 0.0));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_shifts() {
        let cfg = RunConfig { m: Some(3), ..RunConfig::default() };
        assert_eq!(cfg.zeta_configs(), vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]]);
        assert_eq!(cfg.m(), 3);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, -1.0..1.0f64, Just(0.0), Just(-0.0)]
    }

    fn cplx() -> impl Strategy<Value = Complex64> {
        (finite(), finite()).prop_map(|(a, b)| Complex64::new(a, b))
    }

    proptest! {
        #[test]
        fn complex_render_parse_roundtrip(z in cplx()) {
            let s = render_complex(z);
            let back = parse_complex(&s).unwrap();
            prop_assert_eq!(back.re.to_bits(), z.re.to_bits());
            prop_assert_eq!(back.im.to_bits(), z.im.to_bits());
            prop_assert_eq!(render_complex(back), s);
        }

        #[test]
        fn config_roundtrip(
            k in cplx(), z0 in cplx(), zetas in prop::collection::vec(cplx(), 0..4),
            n_list in prop::collection::vec(1usize..512, 1..4), samples in 1000usize..1_000_000,
            batches in 8usize..64, seed in any::<u64>(), force in any::<bool>(),
            kind in prop::sample::select(EntryKind::ALL.to_vec()),
            method in prop::sample::select(vec![Method::Mean, Method::MedianOfMeans]),
            k22 in prop::option::of(finite()), threads in prop::option::of(1usize..64),
        ) {
            let cfg = RunConfig {
                kappa20: k, z0, zetas, n_list, samples, batches, seed, force, dist_kind: kind,
                estimator: method, kappa22: k22, threads,
                output_path: Some(PathBuf::from("out/result.json")),
                only: vec![Suite::Hciz],
                ..RunConfig::default()
            };
            let back = RunConfig::from_json(&cfg.to_json().unwrap(), None).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
