//! Log-domain determinants, Pfaffians, second exterior powers and
//! Vandermonde products.

use std::f64::consts::PI;
use std::ops::{Div, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Skew-symmetry tolerance (absolute, max entry) accepted by [`pfaffian`].
pub const SKEW_TOL: f64 = 1e-12;

/// `exp(log_mag) * exp(i phase)`, with zero encoded as `(-inf, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(p: f64) -> f64 {
    let r = p.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl LogComplex {
    pub const ONE: Self = Self { log_mag: 0.0, phase: 0.0 };
    pub const ZERO: Self = Self { log_mag: f64::NEG_INFINITY, phase: 0.0 };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self { log_mag, phase: wrap_phase(phase) }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            Self::ZERO
        } else {
            Self::new(z.norm().ln(), z.arg())
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            *self
        } else {
            Self::new(self.log_mag, self.phase + PI)
        }
    }

    pub fn conj(&self) -> Self {
        if self.is_zero() {
            *self
        } else {
            Self::new(self.log_mag, -self.phase)
        }
    }

    /// `|a - b| / max(|a|, |b|)`, evaluated without leaving the log domain.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 1.0,
            _ => {
                let (big, small) = if self.log_mag >= other.log_mag { (self, other) } else { (other, self) };
                let r = Complex64::from_polar((small.log_mag - big.log_mag).exp(), small.phase - big.phase);
                (Complex64::new(1.0, 0.0) - r).norm()
            }
        }
    }
}

impl Mul for LogComplex {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag + rhs.log_mag, self.phase + rhs.phase)
    }
}

impl Div for LogComplex {
    type Output = Self;

    /// Division by zero yields `+inf` magnitude.
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag - rhs.log_mag, self.phase - rhs.phase)
    }
}

/// `det A` via LU with partial pivoting.
pub fn lu_logdet(a: &ComplexMatrix) -> Result<LogComplex> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "determinant of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut w = a.as_slice().to_vec();
    let mut acc = LogComplex::ONE;
    for k in 0..n {
        let p = pivot_row(&w, n, k);
        let piv = w[p * n + k];
        if piv.re == 0.0 && piv.im == 0.0 {
            return Ok(LogComplex::ZERO);
        }
        if p != k {
            swap_rows(&mut w, n, k, p);
            acc = acc.neg();
        }
        acc = acc * LogComplex::from_complex(piv);
        eliminate(&mut w, n, k);
    }
    Ok(acc)
}

/// `log |det A|` of the row-major `n x n` buffer, destroying it.
/// Returns `-inf` for an exactly singular matrix.
pub fn log_abs_det_in_place(w: &mut [Complex64], n: usize) -> f64 {
    debug_assert_eq!(w.len(), n * n);
    let mut acc = 0.0;
    for k in 0..n {
        let p = pivot_row(w, n, k);
        let piv = w[p * n + k];
        if piv.re == 0.0 && piv.im == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p != k {
            swap_rows(w, n, k, p);
        }
        acc += piv.norm().ln();
        eliminate(w, n, k);
    }
    acc
}

// |re| + |im| is the usual cheap pivot magnitude for complex LU.
fn pivot_row(w: &[Complex64], n: usize, k: usize) -> usize {
    let mut best = k;
    let mut best_v = -1.0;
    for i in k..n {
        let z = w[i * n + k];
        let v = z.re.abs() + z.im.abs();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

fn swap_rows(w: &mut [Complex64], n: usize, a: usize, b: usize) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (head, tail) = w.split_at_mut(hi * n);
    head[lo * n..(lo + 1) * n].swap_with_slice(&mut tail[..n]);
}

fn eliminate(w: &mut [Complex64], n: usize, k: usize) {
    let inv = w[k * n + k].inv();
    let (top, rest) = w.split_at_mut((k + 1) * n);
    let pivot_row = &top[k * n + k + 1..(k + 1) * n];
    for row in rest.chunks_exact_mut(n) {
        let f = row[k] * inv;
        if f.re == 0.0 && f.im == 0.0 {
            continue;
        }
        for (x, &p) in row[k + 1..].iter_mut().zip(pivot_row) {
            *x -= f * p;
        }
    }
}

/// Pfaffian of an even-dimensional skew-symmetric matrix by Parlett–Reid
/// reduction with column pivoting.
pub fn pfaffian(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("Pfaffian of a {}x{} matrix", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n % 2 == 1 {
        return Err(Error::Dimension(format!("Pfaffian of odd dimension {n}")));
    }
    let residual = a.skew_residual();
    if !(residual < SKEW_TOL) {
        return Err(Error::NotSkewSymmetric { residual });
    }
    let mut w: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            (a[(i, j)] - a[(j, i)]) * 0.5
        })
        .collect();
    let mut pf = Complex64::new(1.0, 0.0);
    let at = |i: usize, j: usize| i * n + j;
    for k in (0..n - 1).step_by(2) {
        let mut kp = k + 1;
        let mut best = w[at(k + 1, k)].norm();
        for i in k + 2..n {
            let v = w[at(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            for j in 0..n {
                w.swap(at(k + 1, j), at(kp, j));
            }
            for i in 0..n {
                w.swap(at(i, k + 1), at(i, kp));
            }
            pf = -pf;
        }
        let piv = w[at(k, k + 1)];
        if piv.re == 0.0 && piv.im == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| w[at(k, j)] / piv).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| w[at(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    w[at(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

/// Lexicographic enumeration of pairs `i < j` in `0..m`.
pub fn index_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            v.push((i, j));
        }
    }
    v
}

/// Second exterior power: entry `(alpha, gamma)` is the 2x2 minor of `A` on
/// row pair `alpha` and column pair `gamma`.
pub fn wedge2(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("wedge2 needs a square matrix".into()));
    }
    let m = a.rows();
    if m < 2 {
        return Err(Error::invalid(format!("wedge2 needs m >= 2, got {m}")));
    }
    let pairs = index_pairs(m);
    Ok(ComplexMatrix::from_fn(pairs.len(), pairs.len(), |r, c| {
        let (i1, i2) = pairs[r];
        let (j1, j2) = pairs[c];
        a[(i1, j1)] * a[(i2, j2)] - a[(i1, j2)] * a[(i2, j1)]
    }))
}

/// `prod_{j > k} (z_j - z_k)`.
pub fn vandermonde(zs: &[Complex64]) -> LogComplex {
    let mut acc = LogComplex::ONE;
    for j in 0..zs.len() {
        for k in 0..j {
            acc = acc * LogComplex::from_complex(zs[j] - zs[k]);
        }
    }
    acc
}

/// Eigenvalues (ascending) of a real symmetric matrix given row-major.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(n: usize, seed: u64) -> ComplexMatrix {
        let mut r = RngStream::new(seed, 0).rng();
        ComplexMatrix::from_fn(n, n, |_, _| c(r.sample(StandardNormal), r.sample(StandardNormal)))
    }

    fn random_skew(n: usize, seed: u64) -> ComplexMatrix {
        let g = random(n, seed);
        ComplexMatrix::from_fn(n, n, |i, j| g[(i, j)] - g[(j, i)])
    }

    #[test]
    fn phase_wrap_convention() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(LogComplex::from_complex(c(-1.0, -0.0)).phase, PI);
        assert_eq!(LogComplex::from_complex(c(0.0, 0.0)), LogComplex::ZERO);
    }

    #[test]
    fn logdet_identity_and_diagonal() {
        let d = lu_logdet(&ComplexMatrix::identity(5)).unwrap();
        assert_eq!(d, LogComplex::ONE);
        let d = lu_logdet(&ComplexMatrix::from_diagonal(&[c(2.0, 0.0), c(0.0, 3.0)])).unwrap();
        assert!((d.log_mag - 6f64.ln()).abs() < 1e-15);
        assert!((d.phase - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn logdet_rejects_non_square_and_flags_singular() {
        assert!(lu_logdet(&ComplexMatrix::zeros(2, 3)).is_err());
        let s = ComplexMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!(lu_logdet(&s).unwrap().is_zero());
    }

    #[test]
    fn logdet_multiplicative() {
        let a = random(8, 1);
        let b = random(8, 2);
        let ab = lu_logdet(&a.matmul(&b).unwrap()).unwrap();
        let prod = lu_logdet(&a).unwrap() * lu_logdet(&b).unwrap();
        assert!(ab.rel_diff(&prod) < 1e-10, "{ab:?} vs {prod:?}");
    }

    fn cofactor_det(a: &ComplexMatrix) -> Complex64 {
        let n = a.rows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let minor = ComplexMatrix::from_fn(n - 1, n - 1, |r, cc| a[(r + 1, if cc < j { cc } else { cc + 1 })]);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += a[(0, j)] * cofactor_det(&minor) * sign;
        }
        s
    }

    #[test]
    fn logdet_matches_cofactor_expansion() {
        for n in 1..=4 {
            for seed in 0..20 {
                let a = random(n, 100 * n as u64 + seed);
                let lu = lu_logdet(&a).unwrap();
                let cf = LogComplex::from_complex(cofactor_det(&a));
                assert!(lu.rel_diff(&cf) < 1e-12, "n={n}");
                let mut w = a.as_slice().to_vec();
                assert!((log_abs_det_in_place(&mut w, n) - cf.log_mag).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pfaffian_base_cases() {
        let a = c(0.3, -1.2);
        let m = ComplexMatrix::from_vec(2, 2, vec![c(0.0, 0.0), a, -a, c(0.0, 0.0)]).unwrap();
        assert!((pfaffian(&m).unwrap() - a).norm() < 1e-15);

        let u = [c(1.0, 0.5), c(-2.0, 0.1), c(0.7, 0.0), c(0.0, 1.3), c(2.2, -0.4), c(-0.9, 0.8)];
        let idx = index_pairs(4);
        let mut m = ComplexMatrix::zeros(4, 4);
        for (&(i, j), &v) in idx.iter().zip(&u) {
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
        let expected = u[0] * u[5] - u[1] * u[4] + u[2] * u[3];
        let pf = pfaffian(&m).unwrap();
        assert!((pf - expected).norm() < 1e-14);
        let det = lu_logdet(&m).unwrap().to_complex();
        assert!((pf * pf - det).norm() < 1e-12 * det.norm());
    }

    #[test]
    fn pfaffian_rejects_bad_input() {
        assert!(matches!(pfaffian(&ComplexMatrix::zeros(3, 3)), Err(Error::Dimension(_))));
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(pfaffian(&m), Err(Error::NotSkewSymmetric { .. })));
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        for n in (2..=12).step_by(2) {
            for seed in 0..10 {
                let a = random_skew(n, 7 * n as u64 + seed);
                let pf = LogComplex::from_complex(pfaffian(&a).unwrap());
                let det = lu_logdet(&a).unwrap();
                assert!((pf * pf).rel_diff(&det) < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn pfaffian_congruence() {
        let a = random_skew(6, 3);
        let p = random(6, 4);
        let pap = p.matmul(&a).unwrap().matmul(&p.transpose()).unwrap();
        let lhs = LogComplex::from_complex(pfaffian(&pap).unwrap());
        let rhs = lu_logdet(&p).unwrap() * LogComplex::from_complex(pfaffian(&a).unwrap());
        assert!(lhs.rel_diff(&rhs) < 1e-10);
    }

    #[test]
    fn wedge2_examples() {
        let a = random(2, 9);
        let w = wedge2(&a).unwrap();
        assert_eq!((w.rows(), w.cols()), (1, 1));
        assert!((w[(0, 0)] - cofactor_det(&a)).norm() < 1e-14);
        assert_eq!(wedge2(&ComplexMatrix::identity(4)).unwrap(), ComplexMatrix::identity(6));
        assert!(wedge2(&ComplexMatrix::identity(1)).is_err());

        let a = random(4, 10);
        let b = random(4, 11);
        let lhs = wedge2(&a.matmul(&b).unwrap()).unwrap();
        let rhs = wedge2(&a).unwrap().matmul(&wedge2(&b).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde(&[c(0.4, 2.0)]), LogComplex::ONE);
        let v = vandermonde(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert!((v.to_complex() - c(2.0, 0.0)).norm() < 1e-14);
        assert!(vandermonde(&[c(1.0, 1.0), c(1.0, 1.0)]).is_zero());

        let z = [c(0.3, -0.2), c(1.1, 0.4), c(-0.7, 0.9)];
        let base = vandermonde(&z).to_complex();
        let perms = [[0, 1, 2, 1], [0, 2, 1, -1], [1, 0, 2, -1], [1, 2, 0, 1], [2, 0, 1, 1], [2, 1, 0, -1]];
        for p in perms {
            let zp = [z[p[0] as usize], z[p[1] as usize], z[p[2] as usize]];
            let v = vandermonde(&zp).to_complex();
            assert!((v - base * p[3] as f64).norm() < 1e-13);
        }
    }

    #[test]
    fn symmetric_eigenvalues_small() {
        let ev = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
