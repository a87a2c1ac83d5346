//! Globally adaptive 7/15-point Gauss–Kronrod quadrature for complex
//! integrands on a union of finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::weakcore::Complex;

// Kronrod abscissae on [0, 1]; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Target error relative to `|value|`.
    pub rel_tol: f64,
    /// Absolute error that is always acceptable.
    pub abs_tol: f64,
    /// Initial pieces are no longer than this.
    pub max_piece: f64,
    pub max_pieces: usize,
    /// Relative noise of the integrand values; errors below `noise_rel * ∫|f|`
    /// cannot be resolved and are accepted.
    pub noise_rel: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-11, abs_tol: 0.0, max_piece: f64::INFINITY, max_pieces: 4_000_000, noise_rel: 64.0 * f64::EPSILON }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: Complex,
    /// Sum of the per-piece `|K15 - G7|` estimates.
    pub error: f64,
    /// Approximation of `∫|f|`, the scale below which cancellation is noise.
    pub l1: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn relative_error(&self) -> f64 {
        self.error / self.value.norm()
    }
}

#[derive(Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: Complex,
    error: f64,
    l1: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut l1 = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * WGK[j];
        l1 += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Piece { a, b, value, error, l1: l1 * half.abs() }
}

/// Merge possibly overlapping intervals into a sorted disjoint union.
pub fn merge_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.retain(|(a, b)| b > a);
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (a, b) in intervals {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Integrate `f` over the union of `intervals`, additionally splitting at
/// every point of `breaks` that falls inside an interval.
pub fn integrate<F>(f: F, intervals: &[(f64, f64)], breaks: &[f64], opts: &QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Complex,
{
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for &(lo, hi) in &merge_intervals(intervals.to_vec()) {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let count = ((b - a) / opts.max_piece).ceil().max(1.0) as usize;
            let h = (b - a) / count as f64;
            for k in 0..count {
                let pa = a + k as f64 * h;
                let pb = if k + 1 == count { b } else { a + (k + 1) as f64 * h };
                heap.push(gk15(&f, pa, pb));
                evaluations += 15;
            }
        }
    }
    let sums = |heap: &BinaryHeap<Piece>| {
        heap.iter().fold((Complex::new(0.0, 0.0), 0.0, 0.0), |(v, e, l), p| (v + p.value, e + p.error, l + p.l1))
    };
    let (mut value, mut error, mut l1) = sums(&heap);
    loop {
        let target = (opts.rel_tol * value.norm()).max(opts.abs_tol).max(opts.noise_rel * l1);
        if error <= target || heap.len() >= opts.max_pieces {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }
    // recompute from scratch to shed accumulated update drift
    let (value, error, l1) = sums(&heap);
    QuadResult { value, error, l1, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x| Complex::new((-x * x).exp(), 0.0), &[(-12.0, 12.0)], &[], &QuadOptions::default());
        assert!((r.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(r.value.im.abs() < 1e-15);
    }

    #[test]
    fn oscillatory_gaussian() {
        // ∫ exp(2ikx - x^2) = sqrt(pi) exp(-k^2)
        let k = 3.0;
        let opts = QuadOptions { max_piece: 0.25, ..QuadOptions::default() };
        let r = integrate(|x| Complex::new(-x * x, 2.0 * k * x).exp(), &[(-12.0, 12.0)], &[0.0], &opts);
        let exact = std::f64::consts::PI.sqrt() * (-k * k).exp();
        assert!((r.value.re - exact).abs() < 1e-12 * exact.max(1e-3), "{}", r.value);
        assert!(r.value.im.abs() < 1e-14);
    }

    #[test]
    fn polynomial() {
        let r = integrate(|x| Complex::new(x.powi(20), 0.0), &[(0.0, 1.0)], &[], &QuadOptions::default());
        assert!((r.value.re - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn union_of_intervals() {
        let iv = merge_intervals(vec![(0.0, 1.0), (0.5, 2.0), (3.0, 4.0), (5.0, 5.0)]);
        assert_eq!(iv, vec![(0.0, 2.0), (3.0, 4.0)]);
        let r = integrate(|_| Complex::new(1.0, 0.0), &iv, &[1.5, 10.0], &QuadOptions::default());
        assert!((r.value.re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kink_refined_adaptively() {
        let r = integrate(|x| Complex::new(x.abs().sqrt(), 0.0), &[(-1.0, 1.0)], &[], &QuadOptions::default());
        assert!((r.value.re - 4.0 / 3.0).abs() < 1e-9);
    }
}
