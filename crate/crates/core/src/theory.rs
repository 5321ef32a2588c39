//! Closed-form limits: the kernels, the correction factor `d`, the one-point
//! asymptotic and the predicted ratio statistic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{lu_logdet, pfaffian, vandermonde, LogComplex};
use crate::matrix::ComplexMatrix;

/// `|kappa20|` within this distance of 1 counts as the boundary case.
pub const UNIT_KAPPA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub z0: Complex64,
    pub zetas: Vec<Complex64>,
    pub n: usize,
}

impl SpectralConfig {
    /// Rejects empty or coinciding `zetas` and `n = 0`.
    pub fn new(z0: Complex64, zetas: Vec<Complex64>, n: usize) -> Result<Self> {
        let cfg = Self::confluent(z0, zetas, n)?;
        if vandermonde(&cfg.zetas).is_zero() {
            return Err(Error::invalid("zetas must be pairwise distinct"));
        }
        Ok(cfg)
    }

    /// Like [`SpectralConfig::new`] but accepts repeated `zetas`.
    pub fn confluent(z0: Complex64, zetas: Vec<Complex64>, n: usize) -> Result<Self> {
        if zetas.is_empty() {
            return Err(Error::invalid("at least one zeta is required"));
        }
        if n == 0 {
            return Err(Error::invalid("matrix size must be positive"));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !finite(&z0) || !zetas.iter().all(finite) {
            return Err(Error::invalid("spectral parameters must be finite"));
        }
        Ok(Self { z0, zetas, n })
    }

    pub fn m(&self) -> usize {
        self.zetas.len()
    }

    /// `z_j = z0 + zeta_j / sqrt(n)`.
    pub fn z_points(&self) -> Vec<Complex64> {
        let s = (self.n as f64).sqrt();
        self.zetas.iter().map(|&zeta| self.z0 + zeta / s).collect()
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ComplexExact,
    Interpolating,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    /// `d + log kernel_det_ratio`; the full limit only when `regime` is
    /// complex-exact, otherwise up to the unknown additive `log C`.
    pub log_ratio_mod_constant: f64,
    pub kernel_det_ratio: f64,
    pub d_value: f64,
    pub conditions_ok: bool,
    pub regime: Regime,
}

pub fn kernel_c(z: Complex64, w: Complex64) -> Complex64 {
    (-0.5 * z.norm_sqr() - 0.5 * w.norm_sqr() + z * w.conj()).exp()
}

/// `det(K_C(zeta_j, zeta_k)) / |Delta(zeta)|^2`.
pub fn kernel_det_ratio(zetas: &[Complex64]) -> Result<f64> {
    if zetas.is_empty() {
        return Err(Error::invalid("at least one zeta is required"));
    }
    let vdm = vandermonde(zetas);
    if vdm.is_zero() {
        return Err(Error::invalid("coinciding zetas: kernel ratio is 0/0, perturb the configuration"));
    }
    let m = zetas.len();
    let gram = ComplexMatrix::from_fn(m, m, |j, k| kernel_c(zetas[j], zetas[k]));
    let det = lu_logdet(&gram)?;
    // Hermitian positive semi-definite: the phase is roundoff.
    let det = det.to_complex().re.max(0.0);
    Ok(det / (2.0 * vdm.log_mag).exp())
}

/// The 2x2 block of the real-case kernel.
pub fn kernel_r_block(zj: Complex64, zk: Complex64) -> [[Complex64; 2]; 2] {
    let pre = (-0.5 * zj.norm_sqr() - 0.5 * zk.norm_sqr()).exp();
    let e = |a: Complex64, b: Complex64| (a - b) * (a * b).exp() * pre;
    let (cj, ck) = (zj.conj(), zk.conj());
    [[e(zj, zk), e(zj, ck)], [e(cj, zk), e(cj, ck)]]
}

/// `Pf(K_R(zeta_j, zeta_k)) / Delta(zeta_1..zeta_m, conj zeta_1..conj zeta_m)`.
/// Real or coinciding zetas make the denominator vanish and are rejected.
pub fn kernel_r_pfaffian_ratio(zetas: &[Complex64]) -> Result<Complex64> {
    let m = zetas.len();
    if m == 0 {
        return Err(Error::invalid("at least one zeta is required"));
    }
    let mut pts = zetas.to_vec();
    pts.extend(zetas.iter().map(|z| z.conj()));
    let vdm = vandermonde(&pts);
    if vdm.is_zero() {
        return Err(Error::invalid("real-case kernel ratio needs distinct non-real zetas"));
    }
    let mut k = ComplexMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for l in 0..m {
            let b = kernel_r_block(zetas[j], zetas[l]);
            for (r, row) in b.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    k[(2 * j + r, 2 * l + c)] = v;
                }
            }
        }
    }
    let pf = LogComplex::from_complex(pfaffian(&k)?);
    Ok((pf / vdm).to_complex())
}

/// `abs4 - |kappa20|^2 - 2`.
pub fn cumulant22(abs4: f64, kappa20: Complex64) -> f64 {
    abs4 - kappa20.norm_sqr() - 2.0
}

/// `|1 - |kappa20| z0^2|^2 - |kappa20|^2 lambda0^4`, `lambda0^2 = 1 - |z0|^2`.
pub fn d1(kappa20: Complex64, z0: Complex64) -> f64 {
    let k = kappa20.norm();
    let l2 = 1.0 - z0.norm_sqr();
    (Complex64::new(1.0, 0.0) - k * z0 * z0).norm_sqr() - k * k * l2 * l2
}

/// `-m log d1 + (m^2 - m)/2 (1 - |z0|^2)^2 kappa22`.
pub fn d_factor(kappa20: Complex64, kappa22: f64, z0: Complex64, m: usize) -> Result<f64> {
    let arg = d1(kappa20, z0);
    if !(arg > 0.0) {
        return Err(Error::ConditionsViolated(format!(
            "positive det: d1(kappa20, z0) = {arg:e} <= 0"
        )));
    }
    let l2 = 1.0 - z0.norm_sqr();
    let mf = m as f64;
    Ok(-mf * arg.ln() + 0.5 * (mf * mf - mf) * l2 * l2 * kappa22)
}

/// `(1/2) log(2 pi n) + n (|z|^2 - 1)`.
pub fn f1_asymptotic_log(z: Complex64, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * (2.0 * std::f64::consts::PI * nf).ln() + nf * (z.norm_sqr() - 1.0)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Exact finite-n `log E|det(M_n - z)|^2`. The one-point function does not
/// depend on the entry law beyond `E x = 0`, `E|x|^2 = 1`:
/// `f1(z) = n!/n^n * sum_{l<=n} (n|z|^2)^l / l!`.
pub fn f1_exact_log(z: Complex64, n: usize) -> f64 {
    let nf = n as f64;
    let t = nf * z.norm_sqr();
    let lt = t.ln();
    let terms = (0..=n).map(move |l| {
        if l == 0 {
            0.0
        } else {
            l as f64 * lt - ln_factorial(l)
        }
    });
    // ln_factorial is O(l); fine for the sizes used here.
    ln_factorial(n) - nf * nf.ln() + log_sum_exp(terms)
}

/// Exact finite-n `log f_m` for the complex Ginibre ensemble (Gaussian
/// entries, `kappa20 = 0`), from the Christoffel–Darboux type identity
/// `f_m = prod_{j=n}^{n+m-1} (j!/n^j) det[K_{n+m}(z_j, z_k)] / |Delta(z)|^2`
/// with `K_N(z, w) = sum_{l<N} (n z conj w)^l / l!`.
pub fn complex_ginibre_log_fm(zs: &[Complex64], n: usize) -> Result<f64> {
    let m = zs.len();
    if m == 0 || n == 0 {
        return Err(Error::invalid("need m >= 1 and n >= 1"));
    }
    let vdm = vandermonde(zs);
    if vdm.is_zero() {
        return Err(Error::invalid("coinciding spectral points"));
    }
    let nf = n as f64;
    let big = n + m;
    // Scale row j and column k by exp(-n|z|^2/2) to keep entries O(1).
    let kern = ComplexMatrix::from_fn(m, m, |j, k| {
        let w = nf * zs[j] * zs[k].conj();
        let shift = 0.5 * nf * (zs[j].norm_sqr() + zs[k].norm_sqr());
        let mut term = Complex64::new((-shift).exp(), 0.0);
        let mut s = term;
        for l in 1..big {
            term = term * w / l as f64;
            s += term;
        }
        s
    });
    let det = lu_logdet(&kern)?;
    let det_re = det.to_complex().re;
    if !(det_re > 0.0) {
        return Err(Error::Estimation("kernel determinant lost positivity to roundoff".into()));
    }
    let unscale: f64 = zs.iter().map(|z| nf * z.norm_sqr()).sum();
    let prefactor: f64 = (n..n + m).map(|j| ln_factorial(j) - j as f64 * nf.ln()).sum();
    Ok(prefactor + det_re.ln() + unscale - 2.0 * vdm.log_mag)
}

/// Theorem conditions: (i) `|k20| < 1, |z0| < 1`, or
/// (ii) `|k20| = 1, |z0| < 1, z0` not real.
pub fn conditions_hold(kappa20: Complex64, z0: Complex64) -> bool {
    let k = kappa20.norm();
    if !(z0.norm() < 1.0) {
        return false;
    }
    if k < 1.0 - UNIT_KAPPA_TOL {
        return true;
    }
    (k - 1.0).abs() <= UNIT_KAPPA_TOL && z0.im != 0.0
}

pub fn check_conditions(kappa20: Complex64, z0: Complex64) -> Result<()> {
    if conditions_hold(kappa20, z0) {
        return Ok(());
    }
    let k = kappa20.norm();
    let why = if !(z0.norm() < 1.0) {
        format!("|z0| = {} is not inside the unit disc", z0.norm())
    } else if k > 1.0 + UNIT_KAPPA_TOL {
        format!("|kappa20| = {k} exceeds 1")
    } else {
        "|kappa20| = 1 requires non-real z0".to_string()
    };
    Err(Error::ConditionsViolated(why))
}

pub fn regime(kappa20: Complex64, z0: Complex64) -> Regime {
    if !conditions_hold(kappa20, z0) {
        Regime::Excluded
    } else if kappa20.norm() == 0.0 {
        Regime::ComplexExact
    } else {
        Regime::Interpolating
    }
}

/// Predicted `log` of `n^{-(m^2-m)/2} f_m / prod f_1` in the limit, up to
/// `log C` outside the complex-exact regime.
pub fn predicted_ratio_log(cfg: &SpectralConfig, kappa20: Complex64, kappa22: f64) -> Result<TheoryPrediction> {
    let d_value = d_factor(kappa20, kappa22, cfg.z0, cfg.m())?;
    check_conditions(kappa20, cfg.z0)?;
    let kdr = kernel_det_ratio(&cfg.zetas)?;
    Ok(TheoryPrediction {
        log_ratio_mod_constant: d_value + kdr.ln(),
        kernel_det_ratio: kdr,
        d_value,
        conditions_ok: true,
        regime: regime(kappa20, cfg.z0),
    })
}
