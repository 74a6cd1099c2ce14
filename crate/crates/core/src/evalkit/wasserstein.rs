use crate::scalar::Scalar;

/// Exact Wasserstein-1 distance between two empirical distributions: the
/// integral of `|F_a^{-1}(u) - F_b^{-1}(u)|` over `u`, evaluated on the merged
/// breakpoints `i/n` and `j/m` of the two step quantile functions.
///
/// Returns zero when either sample is empty.
pub fn wasserstein_1d<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::zero();
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    let (n, m) = (xa.len(), xb.len());
    if n == m {
        let s: T = xa.iter().zip(&xb).map(|(p, q)| (*p - *q).abs()).sum();
        return s / T::of(n as f64);
    }
    // walk both quantile functions; u advances to the next breakpoint
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0f64;
    let mut total = T::zero();
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (xa[i] - xb[j]).abs() * T::of(next - u);
        u = next;
        // integer comparison avoids drifting breakpoints
        match ((i + 1) * m).cmp(&((j + 1) * n)) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    total
}
