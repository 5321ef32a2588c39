//! Certification harnesses: exact property suites for the linear algebra,
//! the saddle-point landscape and the unitary-group integral.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hciz::hciz_check;
use crate::landscape::{hessian_fd_check, hessian_quadratic_min_eig, verify_global_max, BOUND_TOL};
use crate::matalg::{lu_logdet, pfaffian, wedge2};
use crate::matrix::ComplexMatrix;
use crate::rng::RngStream;

pub type PfaffianFn = fn(&ComplexMatrix) -> Result<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Matalg,
    Landscape,
    Hciz,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Matalg, Suite::Landscape, Suite::Hciz];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Matalg => "matalg",
            Suite::Landscape => "landscape",
            Suite::Hciz => "hciz",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite `{s}` (expected matalg, landscape or hciz)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub invariant: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub invariants: Vec<InvariantResult>,
    pub seconds: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = (Suite, &InvariantResult)> {
        self.suites
            .iter()
            .flat_map(|s| s.invariants.iter().filter(|i| !i.passed).map(move |i| (s.suite, i)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Random skew-symmetric matrices per even dimension.
    pub pfaffian_samples: usize,
    pub pfaffian_max_dim: usize,
    pub pfaffian_tol: f64,
    /// Parameter pairs under condition (i) and condition (ii).
    pub saddle_pairs_interior: usize,
    pub saddle_pairs_unit: usize,
    pub saddle_probes: usize,
    pub saddle_radius: f64,
    pub fd_step: f64,
    pub hciz_trials_d2: usize,
    pub hciz_samples_d2: usize,
    pub hciz_trials_d3: usize,
    pub hciz_samples_d3: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            pfaffian_samples: 200,
            pfaffian_max_dim: 12,
            pfaffian_tol: 1e-9,
            saddle_pairs_interior: 10,
            saddle_pairs_unit: 5,
            saddle_probes: 100_000,
            saddle_radius: 3.0,
            fd_step: 1e-4,
            hciz_trials_d2: 20,
            hciz_samples_d2: 100_000,
            hciz_trials_d3: 20,
            hciz_samples_d3: 300_000,
        }
    }
}

impl VerifyOptions {
    /// Reduced sizes for smoke runs.
    pub fn quick() -> Self {
        Self {
            pfaffian_samples: 20,
            saddle_pairs_interior: 2,
            saddle_pairs_unit: 1,
            saddle_probes: 2_000,
            hciz_trials_d2: 3,
            hciz_samples_d2: 10_000,
            hciz_trials_d3: 2,
            hciz_samples_d3: 10_000,
            ..Self::default()
        }
    }
}

fn result(invariant: &str, worst: f64, tolerance: f64, detail: String) -> InvariantResult {
    InvariantResult {
        invariant: invariant.to_string(),
        passed: worst <= tolerance,
        worst,
        tolerance,
        detail,
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn skew_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(n, rng);
    ComplexMatrix::from_fn(n, n, |i, j| if i < j { g[(i, j)] } else if i > j { -g[(j, i)] } else { Complex64::new(0.0, 0.0) })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Tracks the worst case of one invariant together with a description of it.
struct Worst {
    value: f64,
    detail: String,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, detail: String::new() }
    }

    fn update(&mut self, v: f64, detail: impl FnOnce() -> String) {
        // NaN counts as the worst possible outcome.
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.value || self.detail.is_empty() {
            self.value = v;
            self.detail = detail();
        }
    }
}

/// Pfaffian and exterior-power identities, with `pf` as the Pfaffian under
/// test.
pub fn matalg_suite(opts: &VerifyOptions, stream: RngStream, pf: PfaffianFn) -> Result<Vec<InvariantResult>> {
    let mut sq = Worst::new();
    let mut cong = Worst::new();
    let mut rng = stream.rng();
    for n in (2..=opts.pfaffian_max_dim).step_by(2) {
        for s in 0..opts.pfaffian_samples {
            let a = skew_matrix(n, &mut rng);
            let p = pf(&a)?;
            let det = lu_logdet(&a)?.to_complex();
            sq.update(rel(p * p, det), || format!("n = {n}, sample {s}: Pf^2 = {}, det = {det}", p * p));

            let t = gaussian_matrix(n, &mut rng);
            let tat = t.matmul(&a)?.matmul(&t.transpose())?;
            let lhs = pf(&tat)?;
            let rhs = lu_logdet(&t)?.to_complex() * p;
            cong.update(rel(lhs, rhs), || format!("n = {n}, sample {s}: Pf(PAP^T) = {lhs}, det(P) Pf(A) = {rhs}"));
        }
    }

    // Values with a fixed sign convention: the standard symplectic form and
    // the 4x4 expansion Pf = a12 a34 - a13 a24 + a14 a23.
    let mut refv = Worst::new();
    for n in (2..=opts.pfaffian_max_dim).step_by(2) {
        let j = ComplexMatrix::from_fn(n, n, |r, c| {
            if r % 2 == 0 && c == r + 1 {
                Complex64::new(1.0, 0.0)
            } else if c % 2 == 0 && r == c + 1 {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let v = pf(&j)?;
        refv.update(rel(v, Complex64::new(1.0, 0.0)), || format!("Pf(J_{n}) = {v}, expected 1"));
    }
    for s in 0..opts.pfaffian_samples {
        let a = skew_matrix(4, &mut rng);
        let want = a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)];
        let v = pf(&a)?;
        refv.update(rel(v, want), || format!("4x4 sample {s}: Pf = {v}, expansion = {want}"));
    }

    let mut cb = Worst::new();
    for s in 0..opts.pfaffian_samples.min(50) {
        let n = 3 + s % 4;
        let a = gaussian_matrix(n, &mut rng);
        let b = gaussian_matrix(n, &mut rng);
        let lhs = wedge2(&a.matmul(&b)?)?;
        let rhs = wedge2(&a)?.matmul(&wedge2(&b)?)?;
        let err = lhs.sub(&rhs)?.max_abs() / rhs.max_abs();
        cb.update(err, || format!("n = {n}, sample {s}"));
    }

    let tol = opts.pfaffian_tol;
    Ok(vec![
        result("pfaffian squared equals determinant", sq.value, tol, sq.detail),
        result("pfaffian congruence covariance", cong.value, tol, cong.detail),
        result("pfaffian reference values", refv.value, 1e-12, refv.detail),
        result("second exterior power is multiplicative", cb.value, 1e-12, cb.detail),
    ])
}

/// Parameter draws: `(kappa20, z0)` with `|kappa20| < 1` (condition (i)) or
/// `|kappa20| = 1` and non-real `z0` (condition (ii)).
pub fn saddle_parameters(interior: usize, unit: usize, stream: RngStream) -> Vec<(Complex64, Complex64, usize)> {
    let mut rng = stream.rng();
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(interior + unit);
    for i in 0..interior + unit {
        let kappa = if i < interior {
            Complex64::from_polar(0.95 * rng.gen::<f64>().sqrt(), tau * rng.gen::<f64>())
        } else {
            Complex64::from_polar(1.0, tau * rng.gen::<f64>())
        };
        let z0 = loop {
            let z = Complex64::from_polar(0.9 * rng.gen::<f64>().sqrt(), tau * rng.gen::<f64>());
            if i < interior || z.im.abs() >= 0.05 {
                break z;
            }
        };
        out.push((kappa, z0, 2 + i % 2));
    }
    out
}

pub fn landscape_suite(opts: &VerifyOptions, stream: RngStream) -> Result<Vec<InvariantResult>> {
    let params = saddle_parameters(opts.saddle_pairs_interior, opts.saddle_pairs_unit, stream.child(0));
    let mut gmax = Worst::new();
    let mut failures = Vec::new();
    let mut grad = Worst::new();
    let mut hmax = Worst::new();
    let mut hmax_value = f64::NEG_INFINITY;
    let mut reduced = Worst::new();
    let mut spectrum = Worst::new();
    for (i, &(k, z0, m)) in params.iter().enumerate() {
        let tag = || format!("kappa20 = {k}, z0 = {z0}, m = {m}");
        match verify_global_max(k, z0, m, opts.saddle_probes, opts.saddle_radius, stream.child(1 + i as u64)) {
            Ok(r) => gmax.update(-r.gap, || format!("{}: max found {} vs bound {}", tag(), r.max_found, r.max_theoretical)),
            Err(Error::Verification { invariant, detail }) => failures.push(format!("{}: {invariant}: {detail}", tag())),
            Err(e) => return Err(e),
        }
        let h = hessian_fd_check(k, z0, m, opts.fd_step)?;
        grad.update(h.gradient_max_norm, tag);
        if h.max_eigenvalue > hmax_value {
            hmax_value = h.max_eigenvalue;
            hmax.detail = format!("{}: spectrum {:?}", tag(), h.eigenvalues);
        }
        spectrum.update(h.max_prediction_error(), || format!("{}: {:?} vs {:?}", tag(), h.eigenvalues, h.predicted));
        let l2 = 1.0 - z0.norm_sqr();
        let closed = (1.0 - k.norm() * (z0 * z0).re) - k.norm() * l2;
        let num = hessian_quadratic_min_eig(k, z0);
        reduced.update((num - closed).abs(), || format!("{}: {num} vs {closed}", tag()));
    }
    let mut out = Vec::new();
    if failures.is_empty() {
        out.push(result("global maximum of Re f0", gmax.value, BOUND_TOL, gmax.detail));
    } else {
        out.push(InvariantResult {
            invariant: "global maximum of Re f0".into(),
            passed: false,
            worst: f64::INFINITY,
            tolerance: BOUND_TOL,
            detail: failures.join("; "),
        });
    }
    out.push(result("stationary gradient vanishes", grad.value, 1e-6, grad.detail));
    out.push(InvariantResult {
        invariant: "hessian negative definite".into(),
        passed: hmax_value < 0.0,
        worst: hmax_value,
        tolerance: 0.0,
        detail: hmax.detail,
    });
    out.push(result("reduced form minimal eigenvalue", reduced.value, 1e-9, reduced.detail));
    out.push(result("hessian spectrum matches expansion", spectrum.value, 1e-4, spectrum.detail));
    Ok(out)
}

pub fn hciz_suite(opts: &VerifyOptions, stream: RngStream) -> Result<Vec<InvariantResult>> {
    let mut out = Vec::new();
    for (d, trials, samples) in [
        (2, opts.hciz_trials_d2, opts.hciz_samples_d2),
        (3, opts.hciz_trials_d3, opts.hciz_samples_d3),
    ] {
        if trials == 0 {
            continue;
        }
        let r = hciz_check(d, trials, samples, stream.child(d as u64))?;
        let offenders: Vec<String> = r
            .offending()
            .map(|t| format!("a = {:?}, b = {:?}, z = {}: {:.2} sigma", t.case.a_eigs, t.case.b_eigs, t.case.zscale, t.deviation))
            .collect();
        out.push(InvariantResult {
            invariant: format!("unitary integral closed form, d = {d}"),
            passed: r.passed,
            worst: 1.0 - r.pass_fraction,
            tolerance: 1.0 - crate::hciz::PASS_FRACTION,
            detail: format!("{}/{} within 4 sigma; {}", r.agreeing, r.evaluated, offenders.join("; ")),
        });
    }
    Ok(out)
}

/// Runs the selected suites (all when `only` is empty). Suite `s` draws from
/// `stream.child(index of s)`.
pub fn run_verify(opts: &VerifyOptions, only: &[Suite], stream: RngStream) -> Result<VerifyReport> {
    run_verify_with(opts, only, stream, pfaffian)
}

/// [`run_verify`] with a substitute Pfaffian in the linear-algebra suite.
pub fn run_verify_with(opts: &VerifyOptions, only: &[Suite], stream: RngStream, pf: PfaffianFn) -> Result<VerifyReport> {
    let mut suites = Vec::new();
    for (idx, suite) in Suite::ALL.into_iter().enumerate() {
        if !only.is_empty() && !only.contains(&suite) {
            continue;
        }
        let t = Instant::now();
        let s = stream.child(idx as u64);
        let invariants = match suite {
            Suite::Matalg => matalg_suite(opts, s, pf)?,
            Suite::Landscape => landscape_suite(opts, s)?,
            Suite::Hciz => hciz_suite(opts, s)?,
        };
        let passed = invariants.iter().all(|i| i.passed);
        suites.push(SuiteReport { suite, invariants, seconds: t.elapsed().as_secs_f64(), passed });
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { suites, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> VerifyOptions {
        VerifyOptions::quick()
    }

    #[test]
    fn matalg_suite_passes() {
        let r = matalg_suite(&opts(), RngStream::new(1, 0), pfaffian).unwrap();
        assert!(r.iter().all(|i| i.passed), "{r:?}");
    }

    fn flipped(a: &ComplexMatrix) -> Result<Complex64> {
        pfaffian(a).map(|p| -p)
    }

    #[test]
    fn sign_bug_is_caught_by_name() {
        let r = run_verify_with(&opts(), &[Suite::Matalg], RngStream::new(1, 0), flipped).unwrap();
        assert!(!r.passed);
        let names: Vec<&str> = r.failures().map(|(_, i)| i.invariant.as_str()).collect();
        assert!(names.contains(&"pfaffian reference values"), "{names:?}");
    }

    #[test]
    fn only_filter() {
        let r = run_verify(&opts(), &[Suite::Hciz], RngStream::new(3, 0)).unwrap();
        assert_eq!(r.suites.len(), 1);
        assert_eq!(r.suites[0].suite, Suite::Hciz);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn landscape_suite_quick() {
        let r = landscape_suite(&opts(), RngStream::new(5, 0)).unwrap();
        assert!(r.iter().all(|i| i.passed), "{r:?}");
    }

    #[test]
    fn parameters_satisfy_conditions() {
        for (k, z0, m) in saddle_parameters(10, 5, RngStream::new(0, 0)) {
            assert!(crate::theory::conditions_hold(k, z0), "{k} {z0}");
            assert!(m == 2 || m == 3);
        }
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("pfaff".parse::<Suite>().is_err());
    }
}
