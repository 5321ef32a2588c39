//! Log-domain Monte Carlo estimation of `f_1`, `f_m` and the ratio
//! statistic, plus constant fitting across spectral configurations.

mod direct;
mod smc;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampling::{EntryDistribution, EntryKind};
use crate::theory::{check_conditions, f1_exact_log, SpectralConfig, TheoryPrediction};

/// Largest tolerated fraction of exactly singular samples.
pub const MAX_SINGULAR_FRACTION: f64 = 1e-4;

macro_rules! kebab_enum {
    ($name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $s),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($name::$variant),)+
                    _ => Err(Error::invalid(format!(concat!("unknown ", stringify!($name), " `{}`"), s))),
                }
            }
        }
    };
}

kebab_enum!(Method { Mean => "mean", MedianOfMeans => "median-of-means" });
kebab_enum!(Engine { Direct => "direct", Sequential => "sequential" });
kebab_enum!(Denominator { Exact => "exact", Estimated => "estimated" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEstimate {
    pub log_mean: f64,
    pub stderr_log: f64,
    pub batches: usize,
    pub samples_per_batch: usize,
    pub method: Method,
    /// Samples (direct) or particles (sequential) with an exactly zero
    /// integrand; they enter the mean as zeros.
    pub singular: usize,
    /// Per-batch log estimates, in batch order.
    #[serde(skip)]
    pub batch_logs: Vec<f64>,
}

impl LogEstimate {
    pub fn total_samples(&self) -> usize {
        self.batches * self.samples_per_batch
    }

    /// The same batches combined with the other method.
    pub fn recombine(&self, method: Method) -> Result<Self> {
        let mut e = combine(&self.batch_logs, method)?;
        e.samples_per_batch = self.samples_per_batch;
        e.singular = self.singular;
        Ok(e)
    }
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let s: f64 = v.iter().map(|x| (x - mx).exp()).sum();
    mx + (s / v.len() as f64).ln()
}

/// Combines per-batch log estimates. `Mean` takes the log of the mean of
/// the batch means (stderr by the delta method); `MedianOfMeans` the median
/// of the batch logs (stderr from their spread, scaled by the normal-theory
/// efficiency factor `sqrt(pi/2)`).
fn combine(batch_logs: &[f64], method: Method) -> Result<LogEstimate> {
    let b = batch_logs.len();
    if b == 0 {
        return Err(Error::invalid("no batches"));
    }
    if batch_logs.iter().all(|x| *x == f64::NEG_INFINITY) {
        return Err(Error::Estimation("every sample is exactly zero".into()));
    }
    if batch_logs.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::Estimation("non-finite batch estimate".into()));
    }
    let bf = b as f64;
    let (log_mean, stderr_log) = match method {
        Method::Mean => {
            let l = log_mean_exp(batch_logs);
            let w: Vec<f64> = batch_logs.iter().map(|x| (x - l).exp()).collect();
            let se = if b > 1 {
                let var = w.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / (bf - 1.0);
                (var / bf).sqrt()
            } else {
                0.0
            };
            (l, se)
        }
        Method::MedianOfMeans => {
            let mut s = batch_logs.to_vec();
            s.sort_by(f64::total_cmp);
            let med = if b % 2 == 1 { s[b / 2] } else { 0.5 * (s[b / 2 - 1] + s[b / 2]) };
            if med == f64::NEG_INFINITY {
                return Err(Error::Estimation("median batch is exactly zero".into()));
            }
            let finite: Vec<f64> = s.iter().copied().filter(|x| x.is_finite()).collect();
            let se = if finite.len() > 1 {
                let fl = finite.len() as f64;
                let mu = finite.iter().sum::<f64>() / fl;
                let var = finite.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (fl - 1.0);
                (std::f64::consts::FRAC_PI_2 * var / bf).sqrt()
            } else {
                0.0
            };
            (med, se)
        }
    };
    Ok(LogEstimate {
        log_mean,
        stderr_log,
        batches: b,
        samples_per_batch: 0,
        method,
        singular: 0,
        batch_logs: batch_logs.to_vec(),
    })
}

/// Log of the mean of `exp(values)`, split into `batches` equal contiguous
/// batches. Each batch is reduced by a max-shifted log-mean-exp; batches
/// are then combined according to `method`. `-inf` entries are exact zeros.
pub fn estimate_log_expectation(values: &[f64], batches: usize, method: Method) -> Result<LogEstimate> {
    if batches == 0 || values.len() < batches {
        return Err(Error::invalid(format!(
            "{} values cannot fill {batches} batches",
            values.len()
        )));
    }
    if values.len() % batches != 0 {
        return Err(Error::invalid(format!(
            "{} values do not split into {batches} equal batches",
            values.len()
        )));
    }
    if values.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::invalid("values must be finite or -inf"));
    }
    let spb = values.len() / batches;
    let logs: Vec<f64> = values.chunks_exact(spb).map(log_mean_exp).collect();
    let mut e = combine(&logs, method)?;
    e.samples_per_batch = spb;
    e.singular = values.iter().filter(|x| **x == f64::NEG_INFINITY).count();
    Ok(e)
}

/// Draws one `M_n` and returns `sum_j 2 log |det(M_n - z_j)|`.
pub fn sample_log_fm_integrand(dist: &EntryDistribution, cfg: &SpectralConfig, stream: RngStream) -> f64 {
    direct::integrand_with(dist, &cfg.z_points(), cfg.n, stream, &mut Vec::new(), &mut Vec::new())
}

/// Per-sample integrands for samples `0..count` (sample `i` uses
/// `stream.child(i)`).
pub fn sample_log_fm_integrands(dist: &EntryDistribution, cfg: &SpectralConfig, count: usize, stream: RngStream) -> Vec<f64> {
    direct::integrands(dist, &cfg.z_points(), cfg.n, count, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub batches: usize,
    pub engine: Engine,
    pub method: Method,
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::invalid(format!("samples = {} is below the minimum of 1000", self.samples)));
        }
        if self.batches < 8 {
            return Err(Error::invalid(format!("batches = {} is below the minimum of 8", self.batches)));
        }
        if self.samples % self.batches != 0 {
            return Err(Error::invalid(format!(
                "samples = {} is not a multiple of batches = {}",
                self.samples, self.batches
            )));
        }
        Ok(())
    }

    fn per_batch(&self) -> usize {
        self.samples / self.batches
    }
}

/// `log E prod_j |det(M_n - z_j)|^2` at the given points.
pub fn estimate_log_moment(
    dist: &EntryDistribution,
    zs: &[Complex64],
    n: usize,
    plan: &SamplingPlan,
    stream: RngStream,
) -> Result<LogEstimate> {
    plan.validate()?;
    if zs.is_empty() || n == 0 {
        return Err(Error::invalid("need at least one point and n >= 1"));
    }
    let est = match plan.engine {
        Engine::Direct => {
            let v = direct::integrands(dist, zs, n, plan.samples, stream);
            estimate_log_expectation(&v, plan.batches, plan.method)?
        }
        Engine::Sequential => {
            let p = plan.per_batch();
            let outs: Vec<smc::SmcOutcome> = (0..plan.batches)
                .into_par_iter()
                .map(|b| smc::run(dist, zs, n, p, stream.child(b as u64)))
                .collect();
            let logs: Vec<f64> = outs.iter().map(|o| o.log_z).collect();
            let mut e = combine(&logs, plan.method)?;
            e.samples_per_batch = p;
            e.singular = outs.iter().map(|o| o.dead).sum();
            e
        }
    };
    let frac = est.singular as f64 / plan.samples as f64;
    if frac > MAX_SINGULAR_FRACTION {
        return Err(Error::Estimation(format!(
            "{} of {} samples were exactly singular",
            est.singular, plan.samples
        )));
    }
    Ok(est)
}

pub fn estimate_log_f1(
    dist: &EntryDistribution,
    z: Complex64,
    n: usize,
    plan: &SamplingPlan,
    stream: RngStream,
) -> Result<LogEstimate> {
    estimate_log_moment(dist, &[z], n, plan, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioOptions {
    pub plan: SamplingPlan,
    pub denominator: Denominator,
    /// Run even when the theorem's conditions fail.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// `log f_m - sum_j log f_1(z_j) - (m^2 - m)/2 log n`.
    pub log_ratio: f64,
    pub stderr: f64,
    /// The same statistic with the numerator's batches combined by median.
    pub log_ratio_median: f64,
    pub stderr_median: f64,
    pub cfg: SpectralConfig,
    pub kappa20: Complex64,
    pub dist_kind: EntryKind,
    pub log_fm: Option<LogEstimate>,
    pub log_f1: Vec<f64>,
    pub log_f1_stderr: Vec<f64>,
    pub denominator: Denominator,
    pub singular: usize,
}

/// The ratio statistic at one configuration. The numerator runs on
/// `stream.child(0)`, estimated denominators on `stream.child(1 + j)`.
/// With `Denominator::Exact` the one-point functions come from their
/// closed form, which holds for every entry law.
pub fn estimate_ratio(
    dist: &EntryDistribution,
    cfg: &SpectralConfig,
    opts: &RatioOptions,
    stream: RngStream,
) -> Result<RatioEstimate> {
    if !opts.force {
        check_conditions(dist.kappa20, cfg.z0)?;
    }
    opts.plan.validate()?;
    let zs = cfg.z_points();
    let m = cfg.m();
    let base = RatioEstimate {
        log_ratio: 0.0,
        stderr: 0.0,
        log_ratio_median: 0.0,
        stderr_median: 0.0,
        cfg: cfg.clone(),
        kappa20: dist.kappa20,
        dist_kind: dist.kind,
        log_fm: None,
        log_f1: Vec::new(),
        log_f1_stderr: Vec::new(),
        denominator: opts.denominator,
        singular: 0,
    };
    if m == 1 {
        // f_1(z_1) / f_1(z_1).
        return Ok(base);
    }
    let num = estimate_log_moment(dist, &zs, cfg.n, &opts.plan, stream.child(0))?;
    let other = num.recombine(match opts.plan.method {
        Method::Mean => Method::MedianOfMeans,
        Method::MedianOfMeans => Method::Mean,
    })?;
    let num_median = if opts.plan.method == Method::MedianOfMeans { &num } else { &other };

    let mut log_f1 = Vec::with_capacity(m);
    let mut se_f1 = Vec::with_capacity(m);
    let mut singular = num.singular;
    for (j, &z) in zs.iter().enumerate() {
        match opts.denominator {
            Denominator::Exact => {
                log_f1.push(f1_exact_log(z, cfg.n));
                se_f1.push(0.0);
            }
            Denominator::Estimated => {
                let e = estimate_log_f1(dist, z, cfg.n, &opts.plan, stream.child(1 + j as u64))?;
                singular += e.singular;
                log_f1.push(e.log_mean);
                se_f1.push(e.stderr_log);
            }
        }
    }
    let mf = m as f64;
    let offset = log_f1.iter().sum::<f64>() + 0.5 * (mf * mf - mf) * (cfg.n as f64).ln();
    let den_var: f64 = se_f1.iter().map(|s| s * s).sum();
    Ok(RatioEstimate {
        log_ratio: num.log_mean - offset,
        stderr: (num.stderr_log.powi(2) + den_var).sqrt(),
        log_ratio_median: num_median.log_mean - offset,
        stderr_median: (num_median.stderr_log.powi(2) + den_var).sqrt(),
        log_f1,
        log_f1_stderr: se_f1,
        singular,
        log_fm: Some(num),
        ..base
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub log_c: f64,
    pub stderr: f64,
    /// `measured - predicted - log_c`, per configuration.
    pub residuals: Vec<f64>,
    /// Standard error of each measured ratio.
    pub residual_stderr: Vec<f64>,
}

impl ConstantFit {
    /// Largest `|residual| / stderr`.
    pub fn max_residual_z(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.residual_stderr)
            .map(|(r, s)| if *s > 0.0 { r.abs() / s } else if *r == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Fits the single additive constant `log C` shared by all configurations.
pub fn fit_constant(ratios: &[RatioEstimate], predictions: &[TheoryPrediction]) -> Result<ConstantFit> {
    if ratios.len() != predictions.len() {
        return Err(Error::Dimension(format!(
            "{} ratios against {} predictions",
            ratios.len(),
            predictions.len()
        )));
    }
    if ratios.len() < 3 {
        return Err(Error::invalid(format!(
            "constant fit needs at least 3 configurations, got {}",
            ratios.len()
        )));
    }
    let k = ratios.len() as f64;
    let diffs: Vec<f64> = ratios
        .iter()
        .zip(predictions)
        .map(|(r, p)| r.log_ratio - p.log_ratio_mod_constant)
        .collect();
    let log_c = diffs.iter().sum::<f64>() / k;
    let stderr = ratios.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / k;
    Ok(ConstantFit {
        log_c,
        stderr,
        residuals: diffs.iter().map(|d| d - log_c).collect(),
        residual_stderr: ratios.iter().map(|r| r.stderr).collect(),
    })
}
