//! Plain Monte Carlo: one independent matrix per sample, `m` LU
//! factorisations per matrix.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::matalg::log_abs_det_in_place;
use crate::rng::RngStream;
use crate::sampling::EntryDistribution;

/// `sum_j 2 log |det(M - z_j)|` for `M` drawn from `stream`, reusing the
/// caller's buffers.
pub(crate) fn integrand_with(
    dist: &EntryDistribution,
    zs: &[Complex64],
    n: usize,
    stream: RngStream,
    m_buf: &mut Vec<Complex64>,
    work: &mut Vec<Complex64>,
) -> f64 {
    m_buf.resize(n * n, Complex64::new(0.0, 0.0));
    let mut rng = stream.rng();
    dist.fill(&mut rng, 1.0 / (n as f64).sqrt(), m_buf);
    let mut acc = 0.0;
    for &z in zs {
        work.clear();
        work.extend_from_slice(m_buf);
        for i in 0..n {
            work[i * n + i] -= z;
        }
        acc += 2.0 * log_abs_det_in_place(work, n);
        if acc == f64::NEG_INFINITY {
            break;
        }
    }
    acc
}

/// Integrand values for samples `0..count`, sample `i` on `stream.child(i)`.
/// Independent of the thread count.
pub(crate) fn integrands(dist: &EntryDistribution, zs: &[Complex64], n: usize, count: usize, stream: RngStream) -> Vec<f64> {
    (0..count)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(mb, wk), i| integrand_with(dist, zs, n, stream.child(i as u64), mb, wk),
        )
        .collect()
}
