//! Entry distributions with prescribed moments, scaled random matrices and
//! Haar unitaries.
//!
//! An entry is `x = e^{i theta/2} (s1 g1 + i s2 g2)` with `theta = arg k20`,
//! `s1^2 = (1 + |k20|)/2`, `s2^2 = (1 - |k20|)/2` and `g1, g2` i.i.d. real
//! standardised draws. This gives `E x = 0`, `E|x|^2 = 1` and
//! `E x^2 = k20` for every kind, and a closed-form fourth moment.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::rng::RngStream;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Gaussian,
    RademacherPair,
    UniformPair,
}

impl EntryKind {
    pub const ALL: [EntryKind; 3] = [EntryKind::Gaussian, EntryKind::RademacherPair, EntryKind::UniformPair];

    /// Fourth moment of the underlying real standardised draw.
    pub fn real_fourth_moment(self) -> f64 {
        match self {
            EntryKind::Gaussian => 3.0,
            EntryKind::RademacherPair => 1.0,
            EntryKind::UniformPair => 1.8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Gaussian => "gaussian",
            EntryKind::RademacherPair => "rademacher-pair",
            EntryKind::UniformPair => "uniform-pair",
        }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryKind::Gaussian => rng.sample(StandardNormal),
            EntryKind::RademacherPair => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryKind::UniformPair => rng.gen_range(-SQRT3..SQRT3),
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown entry distribution `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub struct EntryDistribution {
    pub kind: EntryKind,
    pub kappa20: Complex64,
    pub kappa22: f64,
    pub phase: f64,
    rot: Complex64,
    s1: f64,
    s2: f64,
}

#[derive(Serialize, Deserialize)]
struct DistSpec {
    kind: EntryKind,
    kappa20: Complex64,
}

impl TryFrom<DistSpec> for EntryDistribution {
    type Error = Error;

    fn try_from(s: DistSpec) -> Result<Self> {
        make_distribution(s.kind, s.kappa20)
    }
}

impl From<EntryDistribution> for DistSpec {
    fn from(d: EntryDistribution) -> Self {
        DistSpec { kind: d.kind, kappa20: d.kappa20 }
    }
}

// Allow |k20| = 1 entered with a few ulps of slack.
const KAPPA_SLACK: f64 = 1e-12;

pub fn make_distribution(kind: EntryKind, kappa20: Complex64) -> Result<EntryDistribution> {
    let k = kappa20.norm();
    if !k.is_finite() || k > 1.0 + KAPPA_SLACK {
        return Err(Error::invalid(format!(
            "|kappa20| = {k} exceeds 1; no law with E|x|^2 = 1 has this second moment"
        )));
    }
    let k = k.min(1.0);
    let phase = if k == 0.0 { 0.0 } else { kappa20.arg() };
    let mu4 = kind.real_fourth_moment();
    let abs4 = mu4 * (1.0 + k * k) / 2.0 + (1.0 - k * k) / 2.0;
    Ok(EntryDistribution {
        kind,
        kappa20,
        kappa22: abs4 - k * k - 2.0,
        phase,
        rot: Complex64::from_polar(1.0, phase / 2.0),
        s1: ((1.0 + k) / 2.0).sqrt(),
        s2: ((1.0 - k) / 2.0).sqrt(),
    })
}

impl EntryDistribution {
    /// Closed-form `E|x|^4`.
    pub fn abs4(&self) -> f64 {
        self.kappa22 + self.kappa20.norm_sqr() + 2.0
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let g1 = self.kind.draw(rng);
        let g2 = self.kind.draw(rng);
        self.rot * Complex64::new(self.s1 * g1, self.s2 * g2)
    }

    /// Fills `out` with i.i.d. draws times `scale`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64, out: &mut [Complex64]) {
        for x in out.iter_mut() {
            *x = self.sample(rng) * scale;
        }
    }
}

/// `M_n = X / sqrt(n)` with i.i.d. entries, drawn row-major from `stream`.
pub fn sample_matrix(dist: &EntryDistribution, n: usize, stream: RngStream) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::invalid("matrix size must be positive"));
    }
    let mut rng = stream.rng();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    dist.fill(&mut rng, 1.0 / (n as f64).sqrt(), &mut data);
    ComplexMatrix::from_vec(n, n, data)
}

/// Haar unitary from the QR factor of a complex Ginibre draw, normalised so
/// that R has a positive diagonal.
pub fn sample_haar_unitary(d: usize, stream: RngStream) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(Error::invalid("unitary dimension must be positive"));
    }
    Ok(haar_with(d, &mut stream.rng()))
}

pub(crate) fn haar_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major work array: column j at q[j*d..(j+1)*d].
    let mut q: Vec<Complex64> = (0..d * d)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal) * h, rng.sample::<f64, _>(StandardNormal) * h))
        .collect();
    for j in 0..d {
        let (done, rest) = q.split_at_mut(j * d);
        let col = &mut rest[..d];
        // Classical Gram-Schmidt applied twice is orthogonal to working precision.
        for _ in 0..2 {
            for k in 0..j {
                let qk = &done[k * d..(k + 1) * d];
                let r: Complex64 = qk.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
                for (x, &a) in col.iter_mut().zip(qk) {
                    *x -= r * a;
                }
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in col.iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(d, d, |i, j| q[j * d + i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub count: usize,
    pub mean: Complex64,
    pub mean_se: f64,
    pub abs2: f64,
    pub abs2_se: f64,
    pub second: Complex64,
    pub second_se: f64,
    pub abs4: f64,
    pub abs4_se: f64,
    pub max_abs_imag: f64,
}

/// One 4-sigma gate of [`MomentReport::gates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentGate {
    pub name: &'static str,
    pub deviation: f64,
    pub bound: f64,
}

impl MomentGate {
    pub fn passed(&self) -> bool {
        self.deviation <= self.bound
    }
}

impl MomentReport {
    /// Deviations from the target moments of `dist` against `4 * se`.
    /// A tiny absolute slack covers laws where a moment is deterministic.
    pub fn gates(&self, dist: &EntryDistribution) -> Vec<MomentGate> {
        let slack = 1e-12;
        vec![
            MomentGate { name: "E x", deviation: self.mean.norm(), bound: 4.0 * self.mean_se + slack },
            MomentGate { name: "E|x|^2", deviation: (self.abs2 - 1.0).abs(), bound: 4.0 * self.abs2_se + slack },
            MomentGate {
                name: "E x^2",
                deviation: (self.second - dist.kappa20).norm(),
                bound: 4.0 * self.second_se + slack,
            },
            MomentGate {
                name: "E|x|^4",
                deviation: (self.abs4 - dist.abs4()).abs(),
                bound: 4.0 * self.abs4_se + slack,
            },
        ]
    }

    pub fn passes(&self, dist: &EntryDistribution) -> bool {
        self.gates(dist).iter().all(MomentGate::passed)
    }
}

pub fn empirical_moments(dist: &EntryDistribution, count: usize, stream: RngStream) -> Result<MomentReport> {
    if count < 1000 {
        return Err(Error::invalid(format!("moment self-test needs at least 1000 draws, got {count}")));
    }
    let mut rng = stream.rng();
    let xs: Vec<Complex64> = (0..count).map(|_| dist.sample(&mut rng)).collect();
    let nf = count as f64;

    let se_complex = |f: &dyn Fn(Complex64) -> Complex64| {
        let m: Complex64 = xs.iter().map(|&x| f(x)).sum::<Complex64>() / nf;
        let v = xs.iter().map(|&x| (f(x) - m).norm_sqr()).sum::<f64>() / (nf - 1.0);
        (m, (v / nf).sqrt())
    };
    let se_real = |f: &dyn Fn(Complex64) -> f64| {
        let m = xs.iter().map(|&x| f(x)).sum::<f64>() / nf;
        let v = xs.iter().map(|&x| (f(x) - m).powi(2)).sum::<f64>() / (nf - 1.0);
        (m, (v / nf).sqrt())
    };
    let (mean, mean_se) = se_complex(&|x| x);
    let (second, second_se) = se_complex(&|x| x * x);
    let (abs2, abs2_se) = se_real(&|x| x.norm_sqr());
    let (abs4, abs4_se) = se_real(&|x| x.norm_sqr().powi(2));
    let max_abs_imag = xs.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
    Ok(MomentReport {
        count,
        mean,
        mean_se,
        abs2,
        abs2_se,
        second,
        second_se,
        abs4,
        abs4_se,
        max_abs_imag,
    })
}
