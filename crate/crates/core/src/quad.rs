//! Gauss-Legendre quadrature: node/weight generation and composite/adaptive drivers.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Build the rule by Newton iteration on the Legendre polynomial roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th positive root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_and_deriv(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (d * d);
        }
        GaussLegendre { nodes, weights }
    }

    /// Cached rule lookup; rules are immutable once built.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(n)
            .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
    }

    /// Integrate `f` over [a, b] with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre over `cells` equal subintervals of [a, b].
pub fn composite<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    cells: usize,
    order: usize,
    mut f: F,
) -> f64 {
    let rule = GaussLegendre::cached(order);
    let h = (b - a) / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        let lo = a + c as f64 * h;
        acc += rule.integrate(lo, lo + h, &mut f);
    }
    acc
}

/// Adaptive quadrature with interval bisection (Gauss-Kronrod style error
/// estimate from GL-7 vs GL-15 on the same interval).
///
/// Fails with an integrability error naming the deepest interval when the
/// refinement stalls on a non-finite or non-convergent region.
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, mut f: F) -> Result<f64> {
    let coarse_rule = GaussLegendre::cached(7);
    let fine_rule = GaussLegendre::cached(15);
    // Manual stack of (lo, hi, depth).
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let scale = {
        // Crude magnitude scan to anchor the relative tolerance.
        let probe = composite(a, b, 16, 8, &mut f).abs();
        probe.max(1e-300)
    };
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = coarse_rule.integrate(lo, hi, &mut f);
        let fine = fine_rule.integrate(lo, hi, &mut f);
        if !fine.is_finite() {
            if depth >= 52 || hi - lo < 1e-14 {
                return Err(Error::Integrability {
                    location: 0.5 * (lo + hi),
                    reason: "integrand is not finite on a vanishing interval".into(),
                });
            }
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
            continue;
        }
        let err = (fine - coarse).abs();
        if err <= rel_tol * scale.max(fine.abs()) {
            total += fine;
            continue;
        }
        if depth >= 52 || hi - lo < 1e-14 {
            return Err(Error::Integrability {
                location: 0.5 * (lo + hi),
                reason: "adaptive refinement did not converge".into(),
            });
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, depth + 1));
        stack.push((mid, hi, depth + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // An n-point rule is exact through degree 2n-1.
        for n in [2usize, 4, 8, 16] {
            let deg = 2 * n - 1;
            let exact = 1.0 / (deg as f64 + 1.0);
            let got = GaussLegendre::cached(n).integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_handles_oscillatory_integrand() {
        let got = composite(0.0, 1.0, 32, 16, |x| (20.0 * x).sin());
        let exact = (1.0 - (20.0f64).cos()) / 20.0;
        assert_abs_diff_eq!(got, exact, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_integrates_integrable_singularity() {
        // log(x)^2 is integrable on (0,1] with integral 2.
        let got = adaptive(0.0, 1.0, 1e-9, |x| x.ln().powi(2)).unwrap();
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_rejects_nonintegrable_singularity() {
        let err = adaptive(0.0, 1.0, 1e-8, |x| 1.0 / (x * x)).unwrap_err();
        match err {
            crate::error::Error::Integrability { location, .. } => assert!(location < 1e-3),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
