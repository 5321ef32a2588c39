//! The saddle functional `Re f0 = -<Q,Q> + log |Pf F~|` and its numerical
//! certification: global maximum, Hadamard chain, stationarity and Hessian.
//!
//! Real coordinates of a point are laid out as
//! `[lambda_1..lambda_m, (re, im) of B20 upper entries, (re, im) of B02
//! upper entries, t]` with `t^2 = ||Q_{>1}||^2`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{index_pairs, lu_logdet, pfaffian, symmetric_eigenvalues};
use crate::matrix::ComplexMatrix;
use crate::rng::RngStream;
use crate::theory::check_conditions;

/// Slack allowed above the proven bound.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub lambdas: Vec<f64>,
    /// Upper-triangular entries of `B20`, lexicographic pair order.
    pub b20: Vec<Complex64>,
    /// Upper-triangular entries of `B02`, lexicographic pair order.
    pub b02: Vec<Complex64>,
    pub q_rest_norm2: f64,
}

fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

impl LandscapePoint {
    pub fn new(lambdas: Vec<f64>, b20: Vec<Complex64>, b02: Vec<Complex64>, q_rest_norm2: f64) -> Result<Self> {
        let m = lambdas.len();
        if m == 0 {
            return Err(Error::invalid("landscape point needs m >= 1"));
        }
        if b20.len() != pair_count(m) || b02.len() != pair_count(m) {
            return Err(Error::Dimension(format!(
                "m = {m} needs {} skew entries per block",
                pair_count(m)
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0)) || !(q_rest_norm2 >= 0.0) {
            return Err(Error::invalid("lambdas and ||Q_{>1}||^2 must be non-negative"));
        }
        Ok(Self { lambdas, b20, b02, q_rest_norm2 })
    }

    /// `Lambda = lambda0 I`, all other coordinates zero.
    pub fn stationary(z0: Complex64, m: usize) -> Self {
        let l0 = (1.0 - z0.norm_sqr()).max(0.0).sqrt();
        Self::zero(m).with_lambdas(vec![l0; m])
    }

    pub fn zero(m: usize) -> Self {
        let p = pair_count(m);
        Self {
            lambdas: vec![0.0; m],
            b20: vec![Complex64::new(0.0, 0.0); p],
            b02: vec![Complex64::new(0.0, 0.0); p],
            q_rest_norm2: 0.0,
        }
    }

    fn with_lambdas(mut self, l: Vec<f64>) -> Self {
        self.lambdas = l;
        self
    }

    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn dim(&self) -> usize {
        coord_dim(self.m())
    }

    /// `<Q1, Q1>`: each independent skew entry is counted once.
    pub fn q1_norm2(&self) -> f64 {
        self.lambdas.iter().map(|l| l * l).sum::<f64>()
            + self.b20.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self.b02.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn to_coords(&self) -> Vec<f64> {
        let mut v = self.lambdas.clone();
        for z in self.b20.iter().chain(&self.b02) {
            v.push(z.re);
            v.push(z.im);
        }
        v.push(self.q_rest_norm2.sqrt());
        v
    }

    /// Inverse of [`to_coords`](Self::to_coords); negative lambdas are
    /// reflected to keep the point in the domain.
    pub fn from_coords(m: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), coord_dim(m));
        let p = pair_count(m);
        let lambdas = x[..m].iter().map(|l| l.abs()).collect();
        let cplx = |off: usize| -> Vec<Complex64> {
            (0..p).map(|a| Complex64::new(x[off + 2 * a], x[off + 2 * a + 1])).collect()
        };
        Self {
            lambdas,
            b20: cplx(m),
            b02: cplx(m + 2 * p),
            q_rest_norm2: x[m + 4 * p].powi(2),
        }
    }

    fn skew(&self, entries: &[Complex64]) -> ComplexMatrix {
        let m = self.m();
        let mut b = ComplexMatrix::zeros(m, m);
        for (&(i, j), &v) in index_pairs(m).iter().zip(entries) {
            b[(i, j)] = v;
            b[(j, i)] = -v;
        }
        b
    }

    pub fn b20_matrix(&self) -> ComplexMatrix {
        self.skew(&self.b20)
    }

    pub fn b02_matrix(&self) -> ComplexMatrix {
        self.skew(&self.b02)
    }
}

pub fn coord_dim(m: usize) -> usize {
    m + 4 * pair_count(m) + 1
}

/// The `4m x 4m` skew-symmetric matrix
/// ```text
/// [ B20'    0       -z0 I    L      ]
/// [ 0       B02'^*  -L       -z0~ I ]
/// [ z0 I    L       B20'^*   0      ]
/// [ -L      z0~ I   0        B02'   ]
/// ```
/// with `B20' = sqrt(k20) B20`, `B02' = conj(sqrt(k20)) B02` (principal root).
pub fn build_f_tilde(pt: &LandscapePoint, kappa20: Complex64, z0: Complex64) -> ComplexMatrix {
    let m = pt.m();
    let s = kappa20.sqrt();
    let b20 = pt.b20_matrix().scale(s);
    let b02 = pt.b02_matrix().scale(s.conj());
    let b20h = b20.adjoint();
    let b02h = b02.adjoint();
    let mut f = ComplexMatrix::zeros(4 * m, 4 * m);
    let mut put = |bi: usize, bj: usize, blk: &ComplexMatrix| {
        for i in 0..m {
            for j in 0..m {
                f[(bi * m + i, bj * m + j)] = blk[(i, j)];
            }
        }
    };
    put(0, 0, &b20);
    put(1, 1, &b02h);
    put(2, 2, &b20h);
    put(3, 3, &b02);
    let zc = z0.conj();
    let lam = |sign: f64| ComplexMatrix::from_diagonal(&pt.lambdas.iter().map(|&l| Complex64::new(sign * l, 0.0)).collect::<Vec<_>>());
    let zi = |z: Complex64| ComplexMatrix::from_diagonal(&vec![z; m]);
    put(0, 2, &zi(-z0));
    put(0, 3, &lam(1.0));
    put(1, 2, &lam(-1.0));
    put(1, 3, &zi(-zc));
    put(2, 0, &zi(z0));
    put(2, 1, &lam(1.0));
    put(3, 0, &lam(-1.0));
    put(3, 1, &zi(zc));
    f
}

/// `Pf F~` at `pt`.
pub fn pfaffian_f_tilde(pt: &LandscapePoint, kappa20: Complex64, z0: Complex64) -> Result<Complex64> {
    pfaffian(&build_f_tilde(pt, kappa20, z0))
}

/// `-(<Q1,Q1> + ||Q_{>1}||^2) + log |Pf F~|`; `-inf` on the zero set of
/// the Pfaffian.
pub fn re_f0(pt: &LandscapePoint, kappa20: Complex64, z0: Complex64) -> f64 {
    let pf = pfaffian_f_tilde(pt, kappa20, z0).expect("F~ is skew-symmetric by construction");
    let lp = if pf.norm() == 0.0 { f64::NEG_INFINITY } else { pf.norm().ln() };
    -(pt.q1_norm2() + pt.q_rest_norm2) + lp
}

/// `m (|z0|^2 - 1)`, the proven maximum.
pub fn max_theoretical(z0: Complex64, m: usize) -> f64 {
    m as f64 * (z0.norm_sqr() - 1.0)
}

/// The successive upper bounds in the proof of the global maximum, each
/// evaluated at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardChain {
    pub re_f0: f64,
    /// `-<Q1,Q1> + (1/2) log |det F~|`.
    pub drop_rest: f64,
    /// `-<Q1,Q1> + (1/2) sum_j log(c1_j c2_j)` (Hadamard).
    pub hadamard: f64,
    /// `-<Q1,Q1> + (1/2) sum_j (c1_j + c2_j - 2)` (`log x <= x - 1`).
    pub linearised: f64,
    /// `m (|z0|^2 - 1)` (`|k20| <= 1`).
    pub bound: f64,
    /// `| |Pf|^2 - |det| | / |det|`.
    pub pf_det_rel: f64,
}

impl HadamardChain {
    /// First link `(name, lhs, rhs)` with `lhs > rhs` beyond tolerance.
    pub fn first_violation(&self) -> Option<(&'static str, f64, f64)> {
        let links = [
            ("Re f0 <= -<Q1,Q1> + log|det F~|/2", self.re_f0, self.drop_rest),
            ("Hadamard column bound", self.drop_rest, self.hadamard),
            ("log x <= x - 1", self.hadamard, self.linearised),
            ("|kappa20| <= 1 bound", self.linearised, self.bound),
        ];
        links
            .into_iter()
            .find(|&(_, lhs, rhs)| lhs > rhs + BOUND_TOL * rhs.abs().max(1.0))
    }
}

pub fn hadamard_chain(pt: &LandscapePoint, kappa20: Complex64, z0: Complex64) -> HadamardChain {
    let m = pt.m();
    let f = build_f_tilde(pt, kappa20, z0);
    let pf = pfaffian(&f).expect("F~ is skew-symmetric by construction");
    let det = lu_logdet(&f).expect("square");
    let q1 = pt.q1_norm2();
    let k = kappa20.norm();
    let (b20, b02) = (pt.b20_matrix(), pt.b02_matrix());
    let (mut log_sum, mut lin_sum) = (0.0, 0.0);
    for j in 0..m {
        let base = z0.norm_sqr() + pt.lambdas[j].powi(2);
        let row = |b: &ComplexMatrix| (0..m).map(|i| b[(j, i)].norm_sqr()).sum::<f64>();
        let c1 = base + k * row(&b20);
        let c2 = base + k * row(&b02);
        log_sum += (c1 * c2).ln();
        lin_sum += c1 + c2 - 2.0;
    }
    let pf_det_rel = if det.is_zero() {
        pf.norm()
    } else {
        ((2.0 * pf.norm().ln() - det.log_mag).exp() - 1.0).abs()
    };
    HadamardChain {
        re_f0: re_f0(pt, kappa20, z0),
        drop_rest: -q1 + 0.5 * det.log_mag,
        hadamard: -q1 + 0.5 * log_sum,
        linearised: -q1 + 0.5 * lin_sum,
        bound: max_theoretical(z0, m),
        pf_det_rel,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub kappa20: Complex64,
    pub z0: Complex64,
    pub m: usize,
    pub probes: usize,
    /// Largest `Re f0` over all probes.
    pub max_found: f64,
    pub max_theoretical: f64,
    /// `max_theoretical - max_found`.
    pub gap: f64,
    /// Gap at the stationary point itself.
    pub stationary_gap: f64,
    /// Smallest gap among probes that are not the stationary point.
    pub min_off_stationary_gap: f64,
    /// Distance from the highest ascent end point to the stationary point.
    pub argmax_distance: f64,
    pub ascent_value: f64,
    /// Ascent end points away from the stationary point (lower local
    /// maxima or stalls), each strictly below the bound.
    pub secondary: Vec<SecondaryPoint>,
    pub hessian_min_eig: f64,
    /// Recorded, not asserted: only `|Pf| = 1` is fixed there.
    pub stationary_pfaffian: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryPoint {
    pub value: f64,
    pub distance: f64,
    pub gradient_norm: f64,
}

/// Local ascents started from the best random probes.
pub const ASCENT_STARTS: usize = 8;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

struct ProbeOutcome {
    value: f64,
    coords: Vec<f64>,
    dist: f64,
}

/// Evaluates one probe, failing on any violated link of the chain or on a
/// near-maximal value away from the stationary point.
fn probe(x: &[f64], m: usize, kappa20: Complex64, z0: Complex64, star: &[f64]) -> Result<ProbeOutcome> {
    let pt = LandscapePoint::from_coords(m, x);
    let chain = hadamard_chain(&pt, kappa20, z0);
    if let Some((name, lhs, rhs)) = chain.first_violation() {
        return Err(Error::verification(
            "global maximum of Re f0",
            format!("{name}: {lhs} > {rhs} at {pt:?}"),
        ));
    }
    if chain.pf_det_rel > 1e-9 && chain.re_f0.is_finite() {
        return Err(Error::verification(
            "Pf^2 = det on F~",
            format!("relative mismatch {} at {pt:?}", chain.pf_det_rel),
        ));
    }
    let dist = distance(&pt.to_coords(), star);
    if chain.re_f0 > chain.bound - BOUND_TOL && dist > 1e-5 {
        return Err(Error::verification(
            "uniqueness of the maximiser",
            format!("Re f0 = {} within 1e-9 of the maximum at distance {dist} from it: {pt:?}", chain.re_f0),
        ));
    }
    Ok(ProbeOutcome { value: chain.re_f0, coords: pt.to_coords(), dist })
}

/// Falsification harness for the global-maximum claim: random points in
/// the ball of `radius` about the origin, deterministic probes around the
/// stationary point, then projected gradient ascents from the best random
/// points. The highest ascent end point must be the stationary point; other
/// end points (lower local maxima exist for some parameters) are reported
/// and must stay strictly below the bound.
pub fn verify_global_max(
    kappa20: Complex64,
    z0: Complex64,
    m: usize,
    trials: usize,
    radius: f64,
    stream: RngStream,
) -> Result<SaddleReport> {
    check_conditions(kappa20, z0)?;
    if m == 0 || trials == 0 || !(radius > 0.0) {
        return Err(Error::invalid("need m >= 1, trials >= 1 and radius > 0"));
    }
    let star_pt = LandscapePoint::stationary(z0, m);
    let star = star_pt.to_coords();
    let d = star.len();
    let bound = max_theoretical(z0, m);

    let mut fixed: Vec<Vec<f64>> = vec![star.clone()];
    for i in 0..d {
        for delta in [1e-3, 1e-2, 0.3, 1.0] {
            for sgn in [1.0, -1.0] {
                let mut x = star.clone();
                x[i] += sgn * delta;
                fixed.push(x);
            }
        }
    }
    let mut shell_rng = stream.child(u64::MAX).rng();
    for r in [1e-3, 0.1, radius] {
        for _ in 0..4 * d {
            let dir = gaussian_direction(d, &mut shell_rng);
            fixed.push(star.iter().zip(&dir).map(|(s, u)| s + r * u).collect());
        }
    }

    let stationary_value = re_f0(&star_pt, kappa20, z0);
    let mut best_fixed = f64::NEG_INFINITY;
    let mut min_off = f64::INFINITY;
    for x in &fixed {
        let o = probe(x, m, kappa20, z0, &star)?;
        best_fixed = best_fixed.max(o.value);
        if o.dist > 0.0 {
            min_off = min_off.min(bound - o.value);
        }
    }

    const BATCH: usize = 1024;
    let batches = trials.div_ceil(BATCH);
    let results: Vec<Result<Vec<ProbeOutcome>>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let count = BATCH.min(trials - b * BATCH);
            let mut top: Vec<ProbeOutcome> = Vec::with_capacity(ASCENT_STARTS + 1);
            for _ in 0..count {
                let dir = gaussian_direction(d, &mut rng);
                let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                let x: Vec<f64> = dir.iter().map(|u| u * r).collect();
                let o = probe(&x, m, kappa20, z0, &star)?;
                keep_top(&mut top, o);
            }
            Ok(top)
        })
        .collect();
    let mut top: Vec<ProbeOutcome> = Vec::new();
    for r in results {
        for o in r? {
            min_off = min_off.min(bound - o.value);
            keep_top(&mut top, o);
        }
    }
    let best_random = top.first().map_or(f64::NEG_INFINITY, |o| o.value);

    let mut ends: Vec<(f64, f64, Vec<f64>)> = top
        .iter()
        .map(|o| {
            let (end, v) = ascend(&o.coords, m, kappa20, z0);
            (v, distance(&end, &star), end)
        })
        .collect();
    ends.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (ascent_value, argmax_distance, _) = ends[0].clone();
    let mut secondary = Vec::new();
    for (v, dist, end) in &ends {
        if *dist <= 1e-4 {
            continue;
        }
        if *v > bound - BOUND_TOL {
            return Err(Error::verification(
                "uniqueness of the maximiser",
                format!("ascent reached Re f0 = {v} at distance {dist} from the stationary point"),
            ));
        }
        let g = grad_at(end, m, kappa20, z0, 1e-6);
        secondary.push(SecondaryPoint {
            value: *v,
            distance: *dist,
            gradient_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
        });
    }
    if argmax_distance > 1e-4 {
        return Err(Error::verification(
            "ascent converges to the stationary point",
            format!("highest ascent end point is at distance {argmax_distance} (value {ascent_value})"),
        ));
    }
    let max_found = best_fixed.max(best_random).max(ascent_value);
    Ok(SaddleReport {
        kappa20,
        z0,
        m,
        probes: fixed.len() + trials,
        max_found,
        max_theoretical: bound,
        gap: bound - max_found,
        stationary_gap: bound - stationary_value,
        min_off_stationary_gap: min_off,
        argmax_distance,
        ascent_value,
        secondary,
        hessian_min_eig: hessian_quadratic_min_eig(kappa20, z0),
        stationary_pfaffian: pfaffian_f_tilde(&star_pt, kappa20, z0)?,
    })
}

/// Keeps the `ASCENT_STARTS` highest probes, best first.
fn keep_top(top: &mut Vec<ProbeOutcome>, o: ProbeOutcome) {
    let pos = top.partition_point(|t| t.value >= o.value);
    if pos < ASCENT_STARTS {
        top.insert(pos, o);
        top.truncate(ASCENT_STARTS);
    }
}

fn gaussian_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

fn eval_coords(x: &[f64], m: usize, kappa20: Complex64, z0: Complex64) -> f64 {
    re_f0(&LandscapePoint::from_coords(m, x), kappa20, z0)
}

/// Central-difference gradient of `Re f0` in real coordinates.
pub fn gradient_fd(pt: &LandscapePoint, kappa20: Complex64, z0: Complex64, step: f64) -> Vec<f64> {
    let m = pt.m();
    let x = pt.to_coords();
    grad_at(&x, m, kappa20, z0, step)
}

fn grad_at(x: &[f64], m: usize, kappa20: Complex64, z0: Complex64, h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = eval_coords(&xp, m, kappa20, z0);
            xp[i] = x[i] - h;
            let fm = eval_coords(&xp, m, kappa20, z0);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Gradient ascent with Armijo backtracking; lambdas are projected onto
/// `[0, inf)`. Returns the final coordinates and value.
fn ascend(start: &[f64], m: usize, kappa20: Complex64, z0: Complex64) -> (Vec<f64>, f64) {
    let project = |x: &mut Vec<f64>| {
        for l in x[..m].iter_mut() {
            *l = l.abs();
        }
    };
    let mut x = start.to_vec();
    project(&mut x);
    let mut fx = eval_coords(&x, m, kappa20, z0);
    let mut step = 0.1;
    for _ in 0..20_000 {
        let g = grad_at(&x, m, kappa20, z0, 1e-6);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < 1e-9 {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            project(&mut y);
            let fy = eval_coords(&y, m, kappa20, z0);
            if fy >= fx + 1e-4 * step * gn2 {
                x = y;
                fx = fy;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, fx)
}

/// Minimal eigenvalue of the reduced `B`-block quadratic form
/// `[[a, +-b], [+-b, a]]`, `a = 1 - |k20| Re z0^2`, `b = |k20| lambda0^2`,
/// over both signs.
pub fn hessian_quadratic_min_eig(kappa20: Complex64, z0: Complex64) -> f64 {
    let (a, b) = reduced_form(kappa20, z0);
    [b, -b]
        .into_iter()
        .map(|s| symmetric_eigenvalues(&[a, s, s, a], 2)[0])
        .fold(f64::INFINITY, f64::min)
}

fn reduced_form(kappa20: Complex64, z0: Complex64) -> (f64, f64) {
    let k = kappa20.norm();
    let l2 = 1.0 - z0.norm_sqr();
    (1.0 - k * (z0 * z0).re, k * l2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub step: f64,
    pub gradient_max_norm: f64,
    /// Finite-difference Hessian spectrum, ascending.
    pub eigenvalues: Vec<f64>,
    /// Spectrum read off the quadratic expansion at the stationary point:
    /// `-4 lambda0^2` (Lambda block), `-2 (a +- b)` (each `B` pair, real and
    /// imaginary parts), `-2` (`Q_{>1}`); ascending.
    pub predicted: Vec<f64>,
    pub max_eigenvalue: f64,
}

impl HessianReport {
    pub fn max_prediction_error(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.predicted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn predicted_hessian_spectrum(kappa20: Complex64, z0: Complex64, m: usize) -> Vec<f64> {
    let l2 = 1.0 - z0.norm_sqr();
    let (a, b) = reduced_form(kappa20, z0);
    let mut v = vec![-4.0 * l2; m];
    for _ in 0..pair_count(m) {
        v.extend([-2.0 * (a + b), -2.0 * (a - b), -2.0 * (a + b), -2.0 * (a - b)]);
    }
    v.push(-2.0);
    v.sort_by(f64::total_cmp);
    v
}

/// Central finite differences of `Re f0` at the stationary point.
pub fn hessian_fd_check(kappa20: Complex64, z0: Complex64, m: usize, step: f64) -> Result<HessianReport> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(Error::invalid(format!("finite-difference step {step} outside [1e-6, 1e-3]")));
    }
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    let star = LandscapePoint::stationary(z0, m);
    let x = star.to_coords();
    let d = x.len();
    let g = grad_at(&x, m, kappa20, z0, step);
    // Signed evaluation (no lambda reflection) so the stencil is symmetric
    // even when a coordinate sits at 0.
    let f = |y: &[f64]| {
        let mut pt = LandscapePoint::from_coords(m, y);
        pt.lambdas = y[..m].to_vec();
        let t = y[d - 1];
        pt.q_rest_norm2 = t * t;
        re_f0(&pt, kappa20, z0)
    };
    let h = step;
    let f0 = f(&x);
    let mut hess = vec![0.0; d * d];
    let mut y = x.clone();
    for i in 0..d {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        hess[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in i + 1..d {
            let mut e = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h * h);
            hess[i * d + j] = v;
            hess[j * d + i] = v;
        }
    }
    let eigenvalues = symmetric_eigenvalues(&hess, d);
    let max_eigenvalue = *eigenvalues.last().expect("d >= 2");
    Ok(HessianReport {
        step,
        gradient_max_norm: g.iter().map(|v| v.abs()).fold(0.0, f64::max),
        eigenvalues,
        predicted: predicted_hessian_spectrum(kappa20, z0, m),
        max_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_point(m: usize, seed: u64) -> LandscapePoint {
        let mut r = RngStream::new(seed, 5).rng();
        let x: Vec<f64> = (0..coord_dim(m)).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        LandscapePoint::from_coords(m, &x)
    }

    #[test]
    fn point_validation_and_coords() {
        assert!(LandscapePoint::new(vec![], vec![], vec![], 0.0).is_err());
        assert!(LandscapePoint::new(vec![1.0, 1.0], vec![], vec![], 0.0).is_err());
        assert!(LandscapePoint::new(vec![-1.0], vec![], vec![], 0.0).is_err());
        let p = random_point(3, 1);
        assert_eq!(LandscapePoint::from_coords(3, &p.to_coords()), p);
    }

    #[test]
    fn f_tilde_is_skew() {
        for m in 1..=4 {
            let p = random_point(m, m as u64);
            let f = build_f_tilde(&p, c(0.3, -0.6), c(0.2, 0.5));
            assert!(f.skew_residual() < 1e-14);
            assert_eq!(f.rows(), 4 * m);
        }
    }

    #[test]
    fn m1_pfaffian_modulus() {
        let z0 = c(0.3, -0.4);
        let p = LandscapePoint::new(vec![0.7], vec![], vec![], 0.0).unwrap();
        let pf = pfaffian_f_tilde(&p, c(0.5, 0.1), z0).unwrap();
        let expect = z0.norm_sqr() + 0.49;
        assert!((pf.norm() - expect).abs() < 1e-15);
        // The block layout gives the negative sign for m = 1.
        assert!((pf + expect).norm() < 1e-15);
    }

    #[test]
    fn stationary_pfaffian_unimodular() {
        for m in 1..=4 {
            let z0 = c(0.3, 0.45);
            let pf = pfaffian_f_tilde(&LandscapePoint::stationary(z0, m), c(0.4, 0.4), z0).unwrap();
            assert!((pf.norm() - 1.0).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn re_f0_examples() {
        let z0 = c(0.5, 0.0);
        let v = re_f0(&LandscapePoint::stationary(z0, 2), c(0.3, 0.0), z0);
        assert!((v + 1.5).abs() < 1e-14);
        for m in 1..=3 {
            let z0 = c(-0.2, 0.6);
            let v = re_f0(&LandscapePoint::stationary(z0, m), c(0.0, 0.7), z0);
            assert!((v - max_theoretical(z0, m)).abs() < 1e-12);
        }
        let z0 = c(0.3, 0.1);
        let v = re_f0(&LandscapePoint::zero(1), c(0.2, 0.0), z0);
        assert!((v - 2.0 * z0.norm().ln()).abs() < 1e-14);
        assert_eq!(re_f0(&LandscapePoint::zero(1), c(0.2, 0.0), c(0.0, 0.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn re_f0_branch_independent() {
        let p = random_point(3, 4);
        let z0 = c(0.1, -0.3);
        let k = c(-0.5, 0.2);
        // Flipping the square-root branch negates both scaled B blocks.
        let mut q = p.clone();
        for z in q.b20.iter_mut().chain(q.b02.iter_mut()) {
            *z = -*z;
        }
        assert!((re_f0(&p, k, z0) - re_f0(&q, k, z0)).abs() < 1e-12);
    }

    #[test]
    fn hadamard_chain_holds_at_random_points() {
        for seed in 0..200 {
            let m = 1 + (seed % 3) as usize;
            let p = random_point(m, 100 + seed);
            let ch = hadamard_chain(&p, c(0.6, -0.3), c(0.25, 0.4));
            assert!(ch.first_violation().is_none(), "{ch:?}");
            assert!(ch.pf_det_rel < 1e-9);
        }
    }

    #[test]
    fn reduced_form_examples() {
        assert!((hessian_quadratic_min_eig(c(0.0, 0.0), c(0.4, 0.2)) - 1.0).abs() < 1e-15);
        assert!((hessian_quadratic_min_eig(c(1.0, 0.0), c(0.0, 0.5)) - 0.5).abs() < 1e-14);
        assert!(hessian_quadratic_min_eig(c(1.0, 0.0), c(0.5, 0.0)).abs() < 1e-14);
    }

    #[test]
    fn fd_hessian_complex_case() {
        let r = hessian_fd_check(c(0.0, 0.0), c(0.0, 0.0), 2, 1e-4).unwrap();
        assert!(r.gradient_max_norm < 1e-7, "{}", r.gradient_max_norm);
        assert!(r.max_eigenvalue <= -0.5);
        assert!(r.max_prediction_error() < 1e-5, "{:?} vs {:?}", r.eigenvalues, r.predicted);
        assert!(hessian_fd_check(c(0.0, 0.0), c(0.0, 0.0), 2, 1e-2).is_err());
    }

    #[test]
    fn fd_hessian_matches_prediction_interpolating() {
        for (k, z0, m) in [(c(0.6, 0.0), c(0.2, 0.0), 2), (c(0.0, 0.8), c(-0.3, 0.4), 3), (c(1.0, 0.0), c(0.0, 0.5), 2)] {
            let r = hessian_fd_check(k, z0, m, 1e-4).unwrap();
            assert!(r.gradient_max_norm < 1e-7);
            assert!(r.max_eigenvalue < 0.0);
            assert!(r.max_prediction_error() < 1e-5, "{:?} vs {:?}", r.eigenvalues, r.predicted);
        }
    }

    #[test]
    fn gradient_nonzero_off_stationary() {
        let z0 = c(0.2, 0.1);
        let mut p = LandscapePoint::stationary(z0, 2);
        for l in p.lambdas.iter_mut() {
            *l *= 0.9;
        }
        let g = gradient_fd(&p, c(0.3, 0.0), z0, 1e-4);
        assert!(g.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-3);
    }

    #[test]
    fn hessian_spectrum_invariant_under_kappa_phase() {
        let z0 = c(0.3, 0.0);
        let a = hessian_fd_check(c(0.7, 0.0), z0, 2, 1e-4).unwrap();
        let b = hessian_fd_check(Complex64::from_polar(0.7, 2.1), z0, 2, 1e-4).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn global_max_small_runs() {
        for (k, z0) in [(c(0.0, 0.0), c(0.3, 0.0)), (c(1.0, 0.0), c(0.0, 0.5))] {
            let r = verify_global_max(k, z0, 2, 2000, 3.0, RngStream::new(3, 0)).unwrap();
            assert!(r.gap >= -BOUND_TOL);
            assert!(r.stationary_gap.abs() < 1e-12);
            assert!(r.min_off_stationary_gap > 0.0);
            assert!(r.argmax_distance < 1e-4);
        }
        assert!(verify_global_max(c(1.0, 0.0), c(0.5, 0.0), 2, 10, 1.0, RngStream::new(0, 0)).is_err());
    }
}
