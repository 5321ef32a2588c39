//! The `charpoly` command-line front end.
//!
//! Exit codes: 0 success, 1 theorem conditions or verification failed,
//! 2 bad configuration, 3 estimation diagnostic.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::config::{parse_complex, Command, RunConfig, VerifyScale, SEED_ENV};
use crate::error::{Error, Result};
use crate::mcengine::{estimate_ratio, fit_constant, Denominator, Engine, Method};
use crate::report::{write_plotdata, FitEntry, RecordEntry, RecordStatus, ResultRecord};
use crate::rng::RngStream;
use crate::sampling::{empirical_moments, EntryKind};
use crate::theory::predicted_ratio_log;
use crate::verify::{run_verify, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONDITIONS: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

/// Default location of the JSON record; the CSV goes next to it.
pub const DEFAULT_OUTPUT: &str = "charpoly_result.json";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConditionsViolated(_) | Error::Verification { .. } => EXIT_CONDITIONS,
        Error::Estimation(_) => EXIT_ESTIMATION,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "charpoly", version, about = "Correlation functions of characteristic polynomials of non-Hermitian random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Evaluate the large-n prediction for the ratio statistic.
    Predict(RunArgs),
    /// Monte Carlo estimate of the ratio statistic across n and shift sets.
    Estimate(RunArgs),
    /// Run the certification suites.
    Verify(RunArgs),
    /// Export plot series from result records.
    Plotdata(RunArgs),
    /// Sampling self-test of the entry moments.
    Moments(RunArgs),
}

fn complex_arg(s: &str) -> std::result::Result<Complex64, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

fn zeta_set_arg(s: &str) -> std::result::Result<Vec<Complex64>, String> {
    s.split(';').map(|p| parse_complex(p).map_err(|e| e.to_string())).collect()
}

fn parsed<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Entry law: gaussian, rademacher-pair or uniform-pair.
    #[arg(long = "dist", value_parser = parsed::<EntryKind>)]
    pub dist_kind: Option<EntryKind>,
    /// Second moment E x^2 as re,im.
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    pub kappa20: Option<Complex64>,
    /// Fourth cumulant override for predictions.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa22: Option<f64>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    pub z0: Option<Complex64>,
    /// One local shift re,im; repeat for each point.
    #[arg(long = "zeta", value_parser = complex_arg, allow_hyphen_values = true)]
    pub zetas: Vec<Complex64>,
    /// A whole shift configuration `re,im;re,im;...`; repeat for several.
    #[arg(long = "zeta-set", value_parser = zeta_set_arg, allow_hyphen_values = true)]
    pub zeta_sets: Vec<Vec<Complex64>>,
    /// Matrix size; repeat or comma-separate for several.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "output", short = 'o')]
    pub output_path: Option<PathBuf>,
    /// mean or median-of-means.
    #[arg(long, value_parser = parsed::<Method>)]
    pub estimator: Option<Method>,
    /// sequential (particle) or direct sampling.
    #[arg(long, value_parser = parsed::<Engine>)]
    pub engine: Option<Engine>,
    /// exact (closed form) or estimated one-point functions.
    #[arg(long, value_parser = parsed::<Denominator>)]
    pub denominator: Option<Denominator>,
    /// Proceed outside the theorem's conditions.
    #[arg(long)]
    pub force: bool,
    /// Cap on worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Restrict verify to the named suites.
    #[arg(long, value_parser = parsed::<Suite>)]
    pub only: Vec<Suite>,
    /// Reduced verify sizes.
    #[arg(long)]
    pub quick: bool,
    /// Result record(s) for plotdata.
    #[arg(long = "record")]
    pub records: Vec<PathBuf>,
}

/// Merges file, flags and the seed environment variable into one config.
pub fn resolve(command: Command, args: &RunArgs, env_seed: Option<&str>) -> Result<RunConfig> {
    let env_seed = match env_seed {
        Some(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("{SEED_ENV} = `{s}` is not an unsigned integer")))?,
        ),
        None => None,
    };
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text, env_seed)?
        }
        None => RunConfig { seed: env_seed.unwrap_or(crate::config::DEFAULT_SEED), ..RunConfig::default() },
    };
    cfg.command = command;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f.clone() { cfg.$f = v; })* };
    }
    set!(dist_kind, kappa20, z0, samples, batches, seed, estimator, engine, denominator);
    if args.kappa22.is_some() {
        cfg.kappa22 = args.kappa22;
    }
    if args.m.is_some() {
        cfg.m = args.m;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.output_path.is_some() {
        cfg.output_path = args.output_path.clone();
    }
    if !args.zeta_sets.is_empty() {
        cfg.zeta_sets = args.zeta_sets.clone();
        cfg.zetas.clear();
    } else if !args.zetas.is_empty() {
        cfg.zetas = args.zetas.clone();
        cfg.zeta_sets.clear();
    }
    if !args.n_list.is_empty() {
        cfg.n_list = args.n_list.clone();
    }
    if !args.only.is_empty() {
        cfg.only = args.only.clone();
    }
    if !args.records.is_empty() {
        cfg.records = args.records.clone();
    }
    cfg.force |= args.force;
    if args.quick {
        cfg.verify_scale = VerifyScale::Quick;
    }
    Ok(cfg)
}

fn io<T>(r: std::io::Result<T>) -> Result<T> {
    r.map_err(Error::from)
}

pub fn cmd_predict<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    cfg.validate()?;
    let k22 = cfg.effective_kappa22()?;
    let n = cfg.n_list.first().copied().unwrap_or(1);
    let mut preds = Vec::new();
    for (id, sc) in cfg.spectral_configs(n)?.into_iter().enumerate() {
        let p = predicted_ratio_log(&sc, cfg.kappa20, k22)?;
        io(writeln!(out, "zeta_config {id}: {:?}", sc.zetas.iter().map(|z| crate::config::render_complex(*z)).collect::<Vec<_>>()))?;
        io(writeln!(out, "  regime            {}", serde_json::to_value(p.regime)?.as_str().unwrap_or("?")))?;
        io(writeln!(out, "  kernel_det_ratio  {:.7}", p.kernel_det_ratio))?;
        io(writeln!(out, "  d_value           {:.7}", p.d_value))?;
        io(writeln!(out, "  log_ratio_mod_C   {:.7}", p.log_ratio_mod_constant))?;
        preds.push(p);
    }
    if let Some(path) = &cfg.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&preds)? + "\n")?;
    }
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs every `(n, configuration)` pair. The pair `(n, c)` samples on
/// `RngStream::new(seed, 0).child(n).child(c)`. On an estimation
/// diagnostic the record so far is returned marked partial together with
/// the error.
pub fn run_estimate(cfg: &RunConfig, progress: &mut dyn Write) -> Result<(ResultRecord, Option<Error>)> {
    cfg.validate()?;
    let t = Instant::now();
    let dist = cfg.distribution()?;
    let k22 = cfg.effective_kappa22()?;
    let opts = cfg.ratio_options();
    let root = RngStream::new(cfg.seed, 0);
    let mut rec = ResultRecord::new(cfg.clone());
    let mut failure = None;
    'outer: for &n in &cfg.n_list {
        let mut at_n = Vec::new();
        for (id, sc) in cfg.spectral_configs(n)?.into_iter().enumerate() {
            let started = Instant::now();
            let ratio = match estimate_ratio(&dist, &sc, &opts, root.child(n as u64).child(id as u64)) {
                Ok(r) => r,
                Err(e @ Error::Estimation(_)) => {
                    failure = Some(e);
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let _ = writeln!(
                progress,
                "n = {n}, zeta_config {id}: log_ratio = {:.5} +- {:.5} ({:.1} s)",
                ratio.log_ratio,
                ratio.stderr,
                started.elapsed().as_secs_f64()
            );
            rec.singular_samples += ratio.singular;
            let prediction = predicted_ratio_log(&sc, cfg.kappa20, k22).ok();
            at_n.push(RecordEntry { n, zeta_config_id: id, ratio, prediction, residual: None });
        }
        let preds: Option<Vec<_>> = at_n.iter().map(|e| e.prediction.clone()).collect();
        let fit = match preds {
            Some(p) if p.len() >= 3 => {
                let ratios: Vec<_> = at_n.iter().map(|e| e.ratio.clone()).collect();
                Some(fit_constant(&ratios, &p)?)
            }
            _ => None,
        };
        for (i, e) in at_n.iter_mut().enumerate() {
            e.residual = match (&fit, &e.prediction) {
                (Some(f), _) => Some(f.residuals[i]),
                (None, Some(p)) => Some(e.ratio.log_ratio - p.log_ratio_mod_constant),
                _ => None,
            };
        }
        rec.entries.extend(at_n);
        if let Some(fit) = fit {
            rec.fits.push(FitEntry { n, fit });
        }
    }
    if let Some(e) = &failure {
        rec.status = RecordStatus::Partial;
        rec.diagnostic = Some(e.to_string());
    }
    rec.timing.created_unix = unix_now();
    rec.timing.wall_seconds = t.elapsed().as_secs_f64();
    if failure.is_none() {
        if let Err(e) = rec.check_finite() {
            rec.status = RecordStatus::Partial;
            rec.diagnostic = Some(e.to_string());
            failure = Some(e);
        }
    }
    Ok((rec, failure))
}

fn output_paths(cfg: &RunConfig) -> (PathBuf, PathBuf) {
    let json = cfg.output_path.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let csv = json.with_extension("csv");
    (json, csv)
}

pub fn cmd_estimate<W: Write>(cfg: &RunConfig, out: &mut W, progress: &mut dyn Write) -> Result<()> {
    let (rec, failure) = run_estimate(cfg, progress)?;
    let (json, csv) = output_paths(cfg);
    rec.write_json(&json)?;
    rec.write_summary_csv(std::fs::File::create(&csv)?)?;
    rec.write_summary_csv(&mut *out)?;
    for f in &rec.fits {
        io(writeln!(out, "# n = {}: fitted log C = {:.5} +- {:.5}", f.n, f.fit.log_c, f.fit.stderr))?;
    }
    io(writeln!(out, "# wrote {} and {}", json.display(), csv.display()))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn cmd_verify<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let opts = match cfg.verify_scale {
        VerifyScale::Full => VerifyOptions::default(),
        VerifyScale::Quick => VerifyOptions::quick(),
    };
    let report = run_verify(&opts, &cfg.only, RngStream::new(cfg.seed, 1))?;
    for s in &report.suites {
        for i in &s.invariants {
            io(writeln!(
                out,
                "{} [{}] {}: worst {:.3e} (tolerance {:.1e})",
                if i.passed { "PASS" } else { "FAIL" },
                s.suite,
                i.invariant,
                i.worst,
                i.tolerance
            ))?;
            if !i.passed {
                io(writeln!(out, "    {}", i.detail))?;
            }
        }
        io(writeln!(out, "suite {} {} in {:.1} s", s.suite, if s.passed { "passed" } else { "FAILED" }, s.seconds))?;
    }
    if let Some(path) = &cfg.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    let first = report
        .failures()
        .next()
        .map(|(suite, inv)| Error::verification(format!("{suite}: {}", inv.invariant), inv.detail.clone()));
    match first {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

pub fn cmd_plotdata<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let records = cfg
        .records
        .iter()
        .map(|p| ResultRecord::read_json(p))
        .collect::<Result<Vec<_>>>()?;
    match &cfg.output_path {
        Some(path) => write_plotdata(&records, std::fs::File::create(path)?),
        None => write_plotdata(&records, out),
    }
}

pub fn cmd_moments<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    cfg.validate()?;
    let dist = cfg.distribution()?;
    let r = empirical_moments(&dist, cfg.samples, RngStream::new(cfg.seed, 2))?;
    io(writeln!(out, "{} kappa20 = {} ({} draws)", dist.kind, crate::config::render_complex(dist.kappa20), r.count))?;
    let gates = r.gates(&dist);
    for g in &gates {
        io(writeln!(
            out,
            "{} {:<7} deviation {:.3e} (bound {:.3e})",
            if g.passed() { "PASS" } else { "FAIL" },
            g.name,
            g.deviation,
            g.bound
        ))?;
    }
    if let Some(path) = &cfg.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&r)? + "\n")?;
    }
    match gates.iter().find(|g| !g.passed()) {
        None => Ok(()),
        Some(g) => Err(Error::verification(format!("moment {}", g.name), format!("deviation {} exceeds {}", g.deviation, g.bound))),
    }
}

/// Parses, resolves and runs one invocation; returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let (command, args) = match &cli.command {
        Cmd::Predict(a) => (Command::Predict, a),
        Cmd::Estimate(a) => (Command::Estimate, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Plotdata(a) => (Command::Plotdata, a),
        Cmd::Moments(a) => (Command::Moments, a),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = resolve(command, args, env_seed.as_deref()).and_then(|cfg| {
        if let Some(t) = cfg.threads {
            // Only the first pool configuration in a process takes effect.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        let mut w = WriteAdapter(out);
        match command {
            Command::Predict => cmd_predict(&cfg, &mut w),
            Command::Estimate => cmd_estimate(&cfg, &mut w, err),
            Command::Verify => cmd_verify(&cfg, &mut w),
            Command::Plotdata => cmd_plotdata(&cfg, &mut w),
            Command::Moments => cmd_moments(&cfg, &mut w),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct WriteAdapter<'a>(&'a mut dyn Write);

impl Write for WriteAdapter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.0.flush()
    }
}

/// The JSON path a run would write to.
pub fn record_path(cfg: &RunConfig) -> PathBuf {
    output_paths(cfg).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("charpoly").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn predict_complex_case() {
        let (code, out, _) = run_str(&["predict", "--kappa20", "0,0", "--z0", "0,0", "--zeta", "1,0", "--zeta", "0,0", "--kappa22", "0"]);
        assert_eq!(code, 0);
        assert!(out.contains("0.6321206"), "{out}");
        assert!(out.contains("complex-exact"), "{out}");
    }

    #[test]
    fn predict_boundary_names_condition() {
        let (code, _, err) = run_str(&["predict", "--kappa20", "1,0", "--z0", "0.5,0", "--zeta", "1,0", "--zeta", "0,0"]);
        assert_eq!(code, EXIT_CONDITIONS);
        assert!(err.contains("theorem conditions violated (positive det"), "{err}");
    }

    #[test]
    fn predict_m1() {
        let (code, out, _) = run_str(&["predict", "--m", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("kernel_det_ratio  1.0000000"), "{out}");
    }

    #[test]
    fn bad_config_exit_code() {
        assert_eq!(run_str(&["predict", "--kappa20", "2,0"]).0, EXIT_CONFIG);
        assert_eq!(run_str(&["predict", "--kappa20", "nonsense"]).0, EXIT_CONFIG);
        assert_eq!(run_str(&["estimate", "--samples", "10"]).0, EXIT_CONFIG);
        assert_eq!(run_str(&["bogus"]).0, EXIT_CONFIG);
    }

    #[test]
    fn flags_override_file_and_env() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "samples": 4000, "z0": [0.1, 0.0]}"#).unwrap();
        let args = RunArgs { config: Some(p.clone()), samples: Some(8000), ..RunArgs::default() };
        let cfg = resolve(Command::Estimate, &args, Some("11")).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.samples, 8000);
        assert_eq!(cfg.z0, Complex64::new(0.1, 0.0));
        std::fs::write(&p, r#"{"samples": 4000}"#).unwrap();
        assert_eq!(resolve(Command::Estimate, &args, Some("11")).unwrap().seed, 11);
        let args = RunArgs { config: Some(p), seed: Some(7), ..RunArgs::default() };
        assert_eq!(resolve(Command::Estimate, &args, Some("11")).unwrap().seed, 7);
        assert!(resolve(Command::Estimate, &RunArgs::default(), Some("x")).is_err());
    }

    #[test]
    fn zeta_sets_parse() {
        let cli = Cli::try_parse_from(["charpoly", "estimate", "--zeta-set", "1,0;0,0", "--zeta-set", "0.5,-0.5;0,0", "--n", "16,32"]).unwrap();
        let Cmd::Estimate(a) = cli.command else { panic!() };
        let cfg = resolve(Command::Estimate, &a, None).unwrap();
        assert_eq!(cfg.zeta_configs().len(), 2);
        assert_eq!(cfg.n_list, vec![16, 32]);
        assert_eq!(cfg.zeta_configs()[1][0], Complex64::new(0.5, -0.5));
    }
}
