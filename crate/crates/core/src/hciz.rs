//! The unitary-group integral `int exp(z tr A U* B U) dU`: closed form and a
//! Haar Monte Carlo check of it.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{lu_logdet, vandermonde, LogComplex};
use crate::matrix::ComplexMatrix;
use crate::rng::RngStream;
use crate::sampling::haar_with;

/// Eigenvalue gaps below this make the closed form a near 0/0 quotient.
pub const ILL_CONDITIONED_GAP: f64 = 1e-2;
/// Minimum pairwise gap of the random configurations in [`hciz_check`].
pub const TRIAL_GAP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcizCase {
    pub a_eigs: Vec<Complex64>,
    pub b_eigs: Vec<Complex64>,
    pub zscale: Complex64,
}

fn min_gap(v: &[Complex64]) -> f64 {
    let mut g = f64::INFINITY;
    for j in 0..v.len() {
        for k in 0..j {
            g = g.min((v[j] - v[k]).norm());
        }
    }
    g
}

impl HcizCase {
    pub fn new(a_eigs: Vec<Complex64>, b_eigs: Vec<Complex64>, zscale: Complex64) -> Result<Self> {
        if a_eigs.is_empty() || a_eigs.len() != b_eigs.len() {
            return Err(Error::Dimension(format!(
                "eigenvalue lists of lengths {} and {}",
                a_eigs.len(),
                b_eigs.len()
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !a_eigs.iter().chain(&b_eigs).all(finite) || !finite(&zscale) {
            return Err(Error::invalid("non-finite input"));
        }
        if min_gap(&a_eigs) == 0.0 || min_gap(&b_eigs) == 0.0 {
            return Err(Error::invalid("eigenvalues must be pairwise distinct"));
        }
        Ok(Self { a_eigs, b_eigs, zscale })
    }

    pub fn d(&self) -> usize {
        self.a_eigs.len()
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.a_eigs).min(min_gap(&self.b_eigs))
    }

    pub fn ill_conditioned(&self) -> bool {
        self.min_gap() < ILL_CONDITIONED_GAP
    }

    /// `tr(A U* B U) = sum_{j,k} a_j b_k |U_kj|^2` for diagonal `A`, `B`.
    fn trace_form(&self, u: &ComplexMatrix) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        for (k, b) in self.b_eigs.iter().enumerate() {
            for (j, a) in self.a_eigs.iter().enumerate() {
                t += a * b * u[(k, j)].norm_sqr();
            }
        }
        t
    }
}

/// `prod_{j<d} j! det[exp(z a_j b_k)] / (z^{(d^2-d)/2} V(a) V(b))`.
/// Returns exactly 1 at `z = 0`, where the integrand is constant.
pub fn hciz_closed_form(case: &HcizCase) -> Result<Complex64> {
    let d = case.d();
    let z = case.zscale;
    if d == 1 {
        return Ok((z * case.a_eigs[0] * case.b_eigs[0]).exp());
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let e = ComplexMatrix::from_fn(d, d, |j, k| (z * case.a_eigs[j] * case.b_eigs[k]).exp());
    let det = lu_logdet(&e)?;
    let log_fact: f64 = (1..d).map(|j| (1..=j).map(|i| (i as f64).ln()).sum::<f64>()).sum();
    let lz = LogComplex::from_complex(z);
    let pw = ((d * d - d) / 2) as f64;
    let zpow = LogComplex::new(pw * lz.log_mag, pw * lz.phase);
    let v = (det / zpow / vandermonde(&case.a_eigs) / vandermonde(&case.b_eigs)) * LogComplex::new(log_fact, 0.0);
    Ok(v.to_complex())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarEstimate {
    pub mean: Complex64,
    /// Standard error of the complex mean, `sqrt(E|X - mean|^2 / N)`.
    pub stderr: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples: usize,
}

/// Haar average of `exp(z tr(A U* B U))`; sample `i` draws its unitary
/// from `stream.child(i)`.
pub fn hciz_mc(case: &HcizCase, samples: usize, stream: RngStream) -> Result<HaarEstimate> {
    if samples < 10_000 {
        return Err(Error::invalid(format!("samples = {samples} is below the minimum of 10^4")));
    }
    let d = case.d();
    let z = case.zscale;
    let vals: Vec<Complex64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = haar_with(d, &mut stream.child(i as u64).rng());
            (z * case.trace_form(&u)).exp()
        })
        .collect();
    let nf = samples as f64;
    let mean = vals.iter().sum::<Complex64>() / nf;
    let (mut vr, mut vi) = (0.0, 0.0);
    for v in &vals {
        vr += (v.re - mean.re).powi(2);
        vi += (v.im - mean.im).powi(2);
    }
    let (vr, vi) = (vr / (nf - 1.0), vi / (nf - 1.0));
    Ok(HaarEstimate {
        mean,
        stderr: ((vr + vi) / nf).sqrt(),
        stderr_re: (vr / nf).sqrt(),
        stderr_im: (vi / nf).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcizTrial {
    pub case: HcizCase,
    pub closed: Complex64,
    pub mc: HaarEstimate,
    /// `|closed - mc| / stderr`.
    pub deviation: f64,
    pub ill_conditioned: bool,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcizReport {
    pub d: usize,
    pub samples: usize,
    pub trials: Vec<HcizTrial>,
    /// Well-conditioned trials, the ones that count towards the pass rate.
    pub evaluated: usize,
    pub agreeing: usize,
    pub pass_fraction: f64,
    pub passed: bool,
}

impl HcizReport {
    pub fn offending(&self) -> impl Iterator<Item = &HcizTrial> {
        self.trials.iter().filter(|t| !t.ill_conditioned && !t.within)
    }
}

/// Required share of agreeing trials.
pub const PASS_FRACTION: f64 = 0.95;
/// Agreement band in standard errors.
pub const AGREEMENT_SIGMAS: f64 = 4.0;

fn disc_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>())
}

fn spread_points<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..d).map(|_| disc_point(rng, 1.0)).collect();
        if min_gap(&v) >= TRIAL_GAP {
            return v;
        }
    }
}

/// Random case: eigenvalues in the unit disc with pairwise gap at least
/// [`TRIAL_GAP`], `|z|` in `[0.5, 1.5]`.
pub fn random_case(d: usize, stream: RngStream) -> Result<HcizCase> {
    let mut rng = stream.rng();
    let a = spread_points(&mut rng, d);
    let b = spread_points(&mut rng, d);
    let z = Complex64::from_polar(0.5 + rng.gen::<f64>(), std::f64::consts::TAU * rng.gen::<f64>());
    HcizCase::new(a, b, z)
}

fn trial(case: &HcizCase, samples: usize, stream: RngStream) -> Result<HcizTrial> {
    let closed = hciz_closed_form(case)?;
    let mc = hciz_mc(case, samples, stream)?;
    let gap = (closed - mc.mean).norm();
    let deviation = if mc.stderr > 0.0 {
        gap / mc.stderr
    } else if gap <= 1e-12 * closed.norm().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(HcizTrial {
        case: case.clone(),
        closed,
        mc,
        deviation,
        ill_conditioned: case.ill_conditioned(),
        within: deviation <= AGREEMENT_SIGMAS,
    })
}

fn summarize(d: usize, samples: usize, trials: Vec<HcizTrial>) -> HcizReport {
    let evaluated = trials.iter().filter(|t| !t.ill_conditioned).count();
    let agreeing = trials.iter().filter(|t| !t.ill_conditioned && t.within).count();
    let pass_fraction = if evaluated > 0 { agreeing as f64 / evaluated as f64 } else { 0.0 };
    HcizReport {
        d,
        samples,
        trials,
        evaluated,
        agreeing,
        pass_fraction,
        passed: evaluated > 0 && pass_fraction >= PASS_FRACTION,
    }
}

/// Closed form against Monte Carlo for the given cases; case `i` samples
/// on `stream.child(i)`. Ill-conditioned cases are reported but do not
/// count towards the pass rate.
pub fn hciz_check_cases(cases: &[HcizCase], samples: usize, stream: RngStream) -> Result<HcizReport> {
    let d = cases.first().map(HcizCase::d).ok_or_else(|| Error::invalid("no cases"))?;
    let trials = cases
        .iter()
        .enumerate()
        .map(|(i, k)| trial(k, samples, stream.child(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(d, samples, trials))
}

/// `trials` random cases in dimension `d` (2 or 3). Trial `i` draws its
/// case from `stream.child(2i)` and its samples from `stream.child(2i + 1)`.
pub fn hciz_check(d: usize, trials: usize, samples: usize, stream: RngStream) -> Result<HcizReport> {
    if !(2..=3).contains(&d) {
        return Err(Error::invalid(format!("d = {d}; the check covers d = 2 and d = 3")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let out = (0..trials as u64)
        .map(|i| trial(&random_case(d, stream.child(2 * i))?, samples, stream.child(2 * i + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(d, samples, out))
}
