//! Orthonormal Daubechies filter generation by spectral factorization.
//!
//! The low-pass filter for S vanishing moments is the minimum-phase square
//! root of the half-band polynomial. Roots of the binomial polynomial
//! P(y) = sum_{k<S} C(S-1+k,k) y^k are found by Durand-Kerner iteration,
//! mapped into the z-plane, and the in-disk factors are assembled into the
//! filter. Computing the taps at runtime avoids transcription errors; the
//! db2 closed form is pinned in a test.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cpx {
    re: f64,
    im: f64,
}

impl Cpx {
    const fn new(re: f64, im: f64) -> Self {
        Cpx { re, im }
    }
    fn add(self, o: Cpx) -> Cpx {
        Cpx::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Cpx) -> Cpx {
        Cpx::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Cpx) -> Cpx {
        Cpx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn div(self, o: Cpx) -> Cpx {
        let d = o.re * o.re + o.im * o.im;
        Cpx::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn sqrt(self) -> Cpx {
        let r = self.abs();
        let re = ((r + self.re) * 0.5).max(0.0).sqrt();
        let im_mag = ((r - self.re) * 0.5).max(0.0).sqrt();
        Cpx::new(re, if self.im < 0.0 { -im_mag } else { im_mag })
    }
}

fn horner(coeffs: &[f64], z: Cpx) -> Cpx {
    let mut acc = Cpx::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc.mul(z).add(Cpx::new(c, 0.0));
    }
    acc
}

/// All roots of a real-coefficient polynomial (ascending coefficients) by
/// Durand-Kerner iteration.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Cpx> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let seed = Cpx::new(0.4, 0.9);
    let mut roots: Vec<Cpx> = (0..deg)
        .map(|i| {
            let mut p = Cpx::new(1.0, 0.0);
            for _ in 0..=i {
                p = p.mul(seed);
            }
            p
        })
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Cpx::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom = denom.mul(roots[i].sub(roots[j]));
                }
            }
            let step = horner(&monic, roots[i]).div(denom);
            roots[i] = roots[i].sub(step);
            max_step = max_step.max(step.abs());
        }
        if max_step < 1e-15 {
            break;
        }
    }
    roots
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Low-pass filter taps for the Daubechies family with `s` vanishing
/// moments (length 2s), normalized so the taps sum to sqrt(2).
pub fn daubechies_lowpass(s: u32) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::Config("vanishing moments must be >= 1".into()));
    }
    if s > 10 {
        return Err(Error::Config(format!(
            "vanishing moments {s} exceeds the supported maximum of 10"
        )));
    }
    let s = s as usize;
    if s == 1 {
        let v = std::f64::consts::FRAC_1_SQRT_2;
        return Ok(vec![v, v]);
    }

    // P(y) = sum_{k=0}^{s-1} C(s-1+k, k) y^k.
    let mut p = vec![0.0; s];
    let mut binom = 1.0f64;
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = binom;
        binom *= (s + k) as f64 / (k + 1) as f64;
    }

    // Map each root y into the z-plane via z + 1/z = 2 - 4y and keep the
    // in-disk partner, accumulating the real factor polynomial B(z).
    let mut b = vec![1.0f64];
    let mut pending_conj: Vec<Cpx> = Vec::new();
    for root in polynomial_roots(&p) {
        if root.im < -1e-12 {
            // Conjugate pairs are handled jointly through the + member.
            continue;
        }
        let half = Cpx::new(1.0 - 2.0 * root.re, -2.0 * root.im);
        let disc = half.mul(half).sub(Cpx::new(1.0, 0.0)).sqrt();
        let mut z = half.sub(disc);
        if z.abs() > 1.0 {
            z = half.add(disc);
        }
        if root.im.abs() <= 1e-12 {
            // Real root: single linear factor (z - z0).
            b = poly_mul(&b, &[-z.re, 1.0]);
        } else {
            pending_conj.push(z);
        }
    }
    for z in pending_conj {
        // Combine z and its conjugate into z^2 - 2 Re(z) z + |z|^2.
        let quad = [z.re * z.re + z.im * z.im, -2.0 * z.re, 1.0];
        b = poly_mul(&b, &quad);
    }

    // m0(z) = ((1+z)/2)^s * B(z)/B(1); taps are sqrt(2) * coefficients.
    let mut m0 = vec![1.0f64];
    for _ in 0..s {
        m0 = poly_mul(&m0, &[0.5, 0.5]);
    }
    m0 = poly_mul(&m0, &b);
    let b1: f64 = b.iter().sum();
    let scale = std::f64::consts::SQRT_2 / b1;
    let mut h: Vec<f64> = m0.iter().map(|c| c * scale).collect();
    // The in-disk factorization yields the reversed (maximum-phase) sequence;
    // flip to the conventional extremal-phase ordering.
    h.reverse();
    debug_assert_eq!(h.len(), 2 * s);
    Ok(h)
}

/// Quadrature-mirror high-pass taps g_k = (-1)^k h_{L-1-k}.
pub fn highpass_from_lowpass(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[l - 1 - k]
        })
        .collect()
}
