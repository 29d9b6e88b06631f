//! Test-function descriptors with exact derivatives, numerical flat-Holder
//! seminorms and norms, and the smooth compactly supported mollifier.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Any derivative ratio beyond this is reported as +inf by the seminorms.
pub const SEMINORM_DIVERGENCE_CUTOFF: f64 = 1e12;

/// Default evaluation grid for seminorms and norms: 2^14 + 1 points.
pub const DEFAULT_NORM_GRID: usize = (1 << 14) + 1;

/// Highest derivative order carried by the closed-form descriptors.
pub const MAX_DERIVATIVE_ORDER: usize = 10;

/// Named smooth positive closed forms with trigonometric derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothKind {
    /// sin^2(pi x / 2) = (1 - cos(pi x))/2, range \[0,1\], flat at both ends.
    SinSq,
    /// 0.5 + 0.25 sin(2 pi x), bounded away from 0 and 1.
    SineMid,
}

/// Closed-form test function on \[0,1\] with exact derivative evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionDescriptor {
    Constant(f64),
    /// slope * x + intercept.
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// |x - x0|^beta * factor(x); nonnegative when the factor is, vanishing
    /// only at x0 for a positive factor.
    PowerBump {
        x0: f64,
        beta: f64,
        factor: Box<FunctionDescriptor>,
    },
    /// amplitude * K0((x - center)/bandwidth) with the exponential mollifier.
    MollifierBump {
        center: f64,
        bandwidth: f64,
        amplitude: f64,
    },
    SmoothPositive(SmoothKind),
    Sum(Vec<FunctionDescriptor>),
    /// Uniform samples on \[0,1\] inclusive; linear interpolation, central
    /// differences up to order two at the grid spacing.
    Grid(Vec<f64>),
}

impl FunctionDescriptor {
    pub fn linear(slope: f64, intercept: f64) -> Self {
        FunctionDescriptor::Linear { slope, intercept }
    }

    pub fn power_bump(x0: f64, beta: f64, factor: FunctionDescriptor) -> Self {
        FunctionDescriptor::PowerBump {
            x0,
            beta,
            factor: Box::new(factor),
        }
    }

    pub fn mollifier_bump(center: f64, bandwidth: f64, amplitude: f64) -> Self {
        FunctionDescriptor::MollifierBump {
            center,
            bandwidth,
            amplitude,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            FunctionDescriptor::Constant(c) => *c,
            FunctionDescriptor::Linear { slope, intercept } => slope * x + intercept,
            FunctionDescriptor::PowerBump { x0, beta, factor } => {
                (x - x0).abs().powf(*beta) * factor.evaluate(x)
            }
            FunctionDescriptor::MollifierBump {
                center,
                bandwidth,
                amplitude,
            } => amplitude * mollifier_k0((x - center) / bandwidth),
            FunctionDescriptor::SmoothPositive(kind) => match kind {
                SmoothKind::SinSq => 0.5 * (1.0 - (std::f64::consts::PI * x).cos()),
                SmoothKind::SineMid => 0.5 + 0.25 * (2.0 * std::f64::consts::PI * x).sin(),
            },
            FunctionDescriptor::Sum(parts) => parts.iter().map(|p| p.evaluate(x)).sum(),
            FunctionDescriptor::Grid(values) => grid_interpolate(values, x),
        }
    }

    /// Exact j-th derivative for closed forms (j <= 10); grid functions
    /// support j <= 2 by central differences at the grid spacing.
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        if order == 0 {
            return Ok(self.evaluate(x));
        }
        match self {
            FunctionDescriptor::Grid(values) => grid_derivative(values, x, order),
            _ => {
                if order > MAX_DERIVATIVE_ORDER {
                    return Err(Error::Capability(format!(
                        "derivative order {order} exceeds the closed-form maximum {MAX_DERIVATIVE_ORDER}"
                    )));
                }
                self.closed_form_derivative(x, order)
            }
        }
    }

    fn closed_form_derivative(&self, x: f64, order: usize) -> Result<f64> {
        Ok(match self {
            FunctionDescriptor::Constant(_) => 0.0,
            FunctionDescriptor::Linear { slope, .. } => {
                if order == 1 {
                    *slope
                } else {
                    0.0
                }
            }
            FunctionDescriptor::PowerBump { x0, beta, factor } => {
                // Leibniz rule over |u|^beta and the smooth factor.
                let mut acc = 0.0;
                let mut binom = 1.0;
                for i in 0..=order {
                    let p = abs_power_derivative(x - x0, *beta, i);
                    if p != 0.0 {
                        acc += binom * p * factor.derivative(x, order - i)?;
                    }
                    binom *= (order - i) as f64 / (i + 1) as f64;
                }
                acc
            }
            FunctionDescriptor::MollifierBump {
                center,
                bandwidth,
                amplitude,
            } => {
                let u = (x - center) / bandwidth;
                amplitude * mollifier_k0_derivative(u, order) / bandwidth.powi(order as i32)
            }
            FunctionDescriptor::SmoothPositive(kind) => match kind {
                SmoothKind::SinSq => {
                    // f = (1 - cos(pi x))/2; d^m f = -(pi^m/2) cos(pi x + m pi/2).
                    let pi = std::f64::consts::PI;
                    -(pi.powi(order as i32) / 2.0)
                        * (pi * x + order as f64 * std::f64::consts::FRAC_PI_2).cos()
                }
                SmoothKind::SineMid => {
                    let w = 2.0 * std::f64::consts::PI;
                    0.25 * w.powi(order as i32)
                        * (w * x + order as f64 * std::f64::consts::FRAC_PI_2).sin()
                }
            },
            FunctionDescriptor::Sum(parts) => {
                let mut acc = 0.0;
                for p in parts {
                    acc += p.derivative(x, order)?;
                }
                acc
            }
            FunctionDescriptor::Grid(_) => unreachable!(),
        })
    }

    /// Zeros of f and f' declared by the variant; the seminorm grids sample
    /// these exactly because they dominate the flat ratios.
    pub fn critical_points(&self) -> Vec<f64> {
        let mut pts = match self {
            FunctionDescriptor::Constant(_) | FunctionDescriptor::Grid(_) => vec![],
            FunctionDescriptor::Linear { slope, intercept } => {
                if *slope != 0.0 {
                    let z = -intercept / slope;
                    if (0.0..=1.0).contains(&z) {
                        vec![z]
                    } else {
                        vec![]
                    }
                } else {
                    vec![]
                }
            }
            FunctionDescriptor::PowerBump { x0, factor, .. } => {
                let mut v = vec![*x0];
                v.extend(factor.critical_points());
                v
            }
            FunctionDescriptor::MollifierBump {
                center, bandwidth, ..
            } => vec![center - bandwidth, *center, center + bandwidth],
            FunctionDescriptor::SmoothPositive(kind) => match kind {
                SmoothKind::SinSq => vec![0.0, 1.0],
                SmoothKind::SineMid => vec![0.25, 0.75],
            },
            FunctionDescriptor::Sum(parts) => {
                parts.iter().flat_map(|p| p.critical_points()).collect()
            }
        };
        pts.retain(|p| (0.0..=1.0).contains(p));
        pts
    }

    /// Whether every derivative evaluator used by the seminorms is exact.
    pub fn is_closed_form(&self) -> bool {
        match self {
            FunctionDescriptor::Grid(_) => false,
            FunctionDescriptor::Sum(parts) => parts.iter().all(|p| p.is_closed_form()),
            FunctionDescriptor::PowerBump { factor, .. } => factor.is_closed_form(),
            _ => true,
        }
    }
}

/// d^j/du^j |u|^beta away from u = 0; zero at u = 0 (all orders below beta
/// vanish there, and the measure-zero convention applies above).
fn abs_power_derivative(u: f64, beta: f64, order: usize) -> f64 {
    if order == 0 {
        return u.abs().powf(beta);
    }
    if u == 0.0 {
        return 0.0;
    }
    let mut coeff = 1.0;
    for i in 0..order {
        coeff *= beta - i as f64;
    }
    let sign = if u < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    coeff * u.abs().powf(beta - order as f64) * sign
}

fn grid_interpolate(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let pos = x.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

fn grid_derivative(values: &[f64], x: f64, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::Capability(format!(
            "grid functions support derivatives up to order 2, requested {order}"
        )));
    }
    let n = values.len();
    if n < 3 {
        return Err(Error::Capability("grid too short for differences".into()));
    }
    let h = 1.0 / (n - 1) as f64;
    let i = ((x.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize).clamp(1, n - 2);
    Ok(match order {
        1 => (values[i + 1] - values[i - 1]) / (2.0 * h),
        _ => (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h),
    })
}

/// The mollifier K0(x) = exp(-1/(1-x^2)) on (-1,1), zero outside.
pub fn mollifier_k0(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// ||K0||_2^2 and ||K0||_1 on [-1,1], by high-order quadrature.
pub fn mollifier_norms() -> (f64, f64) {
    static NORMS: OnceLock<(f64, f64)> = OnceLock::new();
    *NORMS.get_or_init(|| {
        let l2sq = crate::quad::composite(-1.0, 1.0, 64, 16, |x| {
            let v = mollifier_k0(x);
            v * v
        });
        let l1 = crate::quad::composite(-1.0, 1.0, 64, 16, mollifier_k0);
        (l2sq, l1)
    })
}

// K0^{(j)}(x) = p_j(x) (1 - x^2)^{-2j} K0(x); the polynomials p_j follow the
// recurrence p_{j+1} = p_j' (1-x^2)^2 + p_j (4 j x (1-x^2) - 2x).
fn mollifier_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        // (1-x^2)^2 = 1 - 2x^2 + x^4.
        let sq = vec![1.0, 0.0, -2.0, 0.0, 1.0];
        for j in 0..MAX_DERIVATIVE_ORDER {
            let p = &polys[j];
            let dp = poly_derive(p);
            let jf = j as f64;
            // 4 j x (1 - x^2) - 2x = (4j - 2) x - 4j x^3.
            let factor = vec![0.0, 4.0 * jf - 2.0, 0.0, -4.0 * jf];
            let next = poly_add(&poly_mul(&dp, &sq), &poly_mul(p, &factor));
            polys.push(next);
        }
        polys
    })
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

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_derive(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

fn poly_eval(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// j-th derivative of the mollifier via the exact polynomial recurrence.
pub fn mollifier_k0_derivative(x: f64, order: usize) -> f64 {
    if order == 0 {
        return mollifier_k0(x);
    }
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let p = &mollifier_polys()[order];
    let w = 1.0 - x * x;
    poly_eval(p, x) * w.powi(-2 * (order as i32)) * mollifier_k0(x)
}

/// sup over the grid and 1 <= j <= floor(beta) of |K0^{(j)}|/K0^{(beta-j)/beta}.
pub fn mollifier_ratio_bound(beta: f64, grid_size: usize) -> f64 {
    let jmax = holder_floor(beta).max(1);
    let mut bound: f64 = 0.0;
    for i in 0..=grid_size {
        let x = -1.0 + 2.0 * i as f64 / grid_size as f64;
        let base = mollifier_k0(x);
        if base == 0.0 {
            continue;
        }
        for j in 1..=jmax {
            let num = mollifier_k0_derivative(x, j).abs();
            let den = base.powf((beta - j as f64) / beta);
            bound = bound.max(num / den);
        }
    }
    bound
}

/// Greatest integer strictly smaller than beta (0 for beta <= 1).
pub fn holder_floor(beta: f64) -> usize {
    if beta <= 1.0 {
        return 0;
    }
    let c = beta.ceil();
    (if c == beta { beta - 1.0 } else { beta.floor() }) as usize
}

/// Largest a > 0 with (e^a - 1) + a^beta / floor(beta)! <= 1/2, by bisection.
pub fn fluctuation_constant(beta: f64) -> f64 {
    let fact: f64 = (1..=holder_floor(beta))
        .map(|i| i as f64)
        .product::<f64>()
        .max(1.0);
    let h = |a: f64| (a.exp() - 1.0) + a.powf(beta) / fact - 0.5;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    debug_assert!(h(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Numerical estimate of the flat-Holder seminorm and the classical part.
#[derive(Debug, Clone, Serialize)]
pub struct SpaceNormReport {
    /// ||f||_inf + ||f^{(floor(beta))}||_inf + the Holder quotient estimate.
    pub c_beta_norm: f64,
    /// |f|_{H^beta} (0 for beta <= 1; +inf past the divergence cutoff).
    pub flat_seminorm: f64,
    /// |1-f|_{H^beta}; populated for the \[0,1\]-valued two-sided norm only.
    pub hb_extra: Option<f64>,
    pub grid_size: usize,
}

impl SpaceNormReport {
    /// ||f||_{H^beta} = C^beta part plus the flat seminorm.
    pub fn holder_total(&self) -> f64 {
        self.c_beta_norm + self.flat_seminorm
    }

    /// Two-sided total for \[0,1\]-valued classes.
    pub fn two_sided_total(&self) -> f64 {
        self.c_beta_norm + self.flat_seminorm + self.hb_extra.unwrap_or(0.0)
    }
}

/// View of either f or 1-f, sharing the descriptor's exact derivatives.
struct FnView<'a> {
    desc: &'a FunctionDescriptor,
    one_minus: bool,
}

impl FnView<'_> {
    fn value(&self, x: f64) -> f64 {
        let v = self.desc.evaluate(x);
        if self.one_minus {
            1.0 - v
        } else {
            v
        }
    }
    fn deriv(&self, x: f64, order: usize) -> Result<f64> {
        let v = self.desc.derivative(x, order)?;
        Ok(if self.one_minus && order > 0 { -v } else { v })
    }
}

fn seminorm_grid(desc: &FunctionDescriptor, grid_size: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=grid_size)
        .map(|i| i as f64 / grid_size as f64)
        .collect();
    pts.extend(desc.critical_points());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn flat_seminorm_view(view: &FnView, beta: f64, pts: &[f64]) -> Result<f64> {
    if beta <= 1.0 {
        return Ok(0.0);
    }
    let mut result = 0.0f64;
    for j in 1..=holder_floor(beta) {
        let mut sup = 0.0f64;
        for &x in pts {
            let fj = view.deriv(x, j)?.abs();
            let f0 = view.value(x).abs();
            // 0/0 counts as 0 by convention; the tolerance absorbs floating
            // point residue of analytically vanishing derivatives (cos(pi/2)
            // and friends evaluate to ~1e-16, not 0).
            if fj <= 1e-12 {
                continue;
            }
            let ratio = fj.powf(beta) / f0.powf(beta - j as f64);
            if !ratio.is_finite() || ratio > SEMINORM_DIVERGENCE_CUTOFF {
                return Ok(f64::INFINITY);
            }
            sup = sup.max(ratio);
        }
        result = result.max(sup.powf(1.0 / j as f64));
    }
    Ok(result)
}

/// The flat seminorm |f|_{H^beta} on a grid of `grid_size` uniform cells
/// plus the descriptor's declared critical points.
pub fn flat_seminorm(desc: &FunctionDescriptor, beta: f64, grid_size: usize) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::Precondition("beta must be positive".into()));
    }
    if !desc.is_closed_form() && beta > 3.0 {
        return Err(Error::Capability(
            "grid-backed descriptors support the flat seminorm only for beta <= 3".into(),
        ));
    }
    let pts = seminorm_grid(desc, grid_size);
    flat_seminorm_view(
        &FnView {
            desc,
            one_minus: false,
        },
        beta,
        &pts,
    )
}

fn c_beta_part(view: &FnView, beta: f64, pts: &[f64]) -> Result<f64> {
    let k = holder_floor(beta);
    let mut sup_f = 0.0f64;
    let mut sup_fk = 0.0f64;
    let mut vals_k = Vec::with_capacity(pts.len());
    for &x in pts {
        sup_f = sup_f.max(view.value(x).abs());
        let vk = view.deriv(x, k)?;
        sup_fk = sup_fk.max(vk.abs());
        vals_k.push(vk);
    }
    // Holder quotient estimate over pair lags up to 32 grid steps.
    let exponent = beta - k as f64;
    let mut quotient = 0.0f64;
    for lag in 1..=32usize {
        for i in 0..pts.len().saturating_sub(lag) {
            let dx = pts[i + lag] - pts[i];
            if dx <= 0.0 {
                continue;
            }
            let q = (vals_k[i + lag] - vals_k[i]).abs() / dx.powf(exponent);
            quotient = quotient.max(q);
        }
    }
    Ok(sup_f + if k > 0 { sup_fk } else { 0.0 } + quotient)
}

/// Holder norm report for nonnegative classes: C^beta part + |f|_{H^beta}.
pub fn holder_norm(
    desc: &FunctionDescriptor,
    beta: f64,
    grid_size: usize,
) -> Result<SpaceNormReport> {
    let pts = seminorm_grid(desc, grid_size);
    let view = FnView {
        desc,
        one_minus: false,
    };
    Ok(SpaceNormReport {
        c_beta_norm: c_beta_part(&view, beta, &pts)?,
        flat_seminorm: flat_seminorm_view(&view, beta, &pts)?,
        hb_extra: None,
        grid_size,
    })
}

/// Two-sided norm report for \[0,1\]-valued classes: adds |1-f|_{H^beta}.
///
/// Fails with a domain error if f leaves \[0,1\] on the grid.
pub fn hb_norm(desc: &FunctionDescriptor, beta: f64, grid_size: usize) -> Result<SpaceNormReport> {
    let pts = seminorm_grid(desc, grid_size);
    for &x in &pts {
        let v = desc.evaluate(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Domain {
                value: v,
                reason: format!("f({x}) leaves [0,1]"),
            });
        }
    }
    let view = FnView {
        desc,
        one_minus: false,
    };
    let mirror = FnView {
        desc,
        one_minus: true,
    };
    Ok(SpaceNormReport {
        c_beta_norm: c_beta_part(&view, beta, &pts)?,
        flat_seminorm: flat_seminorm_view(&view, beta, &pts)?,
        hb_extra: Some(flat_seminorm_view(&mirror, beta, &pts)?),
        grid_size,
    })
}

/// The class norm relevant for a link: two-sided on \[0,1\] for the arcsine
/// link, one-sided otherwise.
pub fn space_norm_for_link(
    desc: &FunctionDescriptor,
    beta: f64,
    grid_size: usize,
    link: crate::links::LinkKind,
) -> Result<f64> {
    match link {
        crate::links::LinkKind::Bernoulli => Ok(hb_norm(desc, beta, grid_size)?.two_sided_total()),
        _ => Ok(holder_norm(desc, beta, grid_size)?.holder_total()),
    }
}

/// Local fluctuation check: under the admissibility precondition
/// |h| <= a(beta) (|f(x)| / ||f||)^{1/beta}, small steps move f by at most
/// half its value.
pub fn local_fluctuation_check(
    desc: &FunctionDescriptor,
    beta: f64,
    x: f64,
    h: f64,
) -> Result<bool> {
    let report = holder_norm(desc, beta, DEFAULT_NORM_GRID)?;
    let norm = report.holder_total();
    let fx = desc.evaluate(x);
    if !(0.0..=1.0).contains(&(x + h)) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Precondition(format!(
            "x = {x} and x+h = {} must stay inside [0,1]",
            x + h
        )));
    }
    let admissible = if norm == 0.0 {
        f64::INFINITY
    } else {
        fluctuation_constant(beta) * (fx.abs() / norm).powf(1.0 / beta)
    };
    if h.abs() > admissible {
        return Err(Error::Precondition(format!(
            "|h| = {} exceeds the admissible radius {admissible}",
            h.abs()
        )));
    }
    Ok((desc.evaluate(x + h) - fx).abs() <= 0.5 * fx.abs())
}

/// Parse a descriptor spec string such as
/// `powerbump:x0=0.5,beta=2` or `mollifierbump:center=0.7,h=0.3,a=2`;
/// `+`-joined terms form a sum. The power bump's positive factor is the
/// affine g0 + g1 x (defaults 1 and 0).
pub fn parse_descriptor(spec: &str) -> Result<FunctionDescriptor> {
    let terms: Vec<&str> = spec.split('+').map(str::trim).collect();
    let mut parts = Vec::with_capacity(terms.len());
    for term in terms {
        if term.is_empty() {
            return Err(Error::Parse("empty descriptor term".into()));
        }
        parts.push(parse_term(term)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        FunctionDescriptor::Sum(parts)
    })
}

fn parse_term(term: &str) -> Result<FunctionDescriptor> {
    let (name, args) = match term.split_once(':') {
        Some((n, a)) => (n.trim(), a.trim()),
        None => (term, ""),
    };
    let mut kv = std::collections::BTreeMap::new();
    if !args.is_empty() {
        for pair in args.split(',') {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in '{pair}'")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{v}' in '{term}'")))?;
            kv.insert(k.trim().to_string(), value);
        }
    }
    let get = |key: &str| -> Result<f64> {
        kv.get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("descriptor '{name}' needs '{key}'")))
    };
    match name.to_ascii_lowercase().as_str() {
        "constant" | "const" => Ok(FunctionDescriptor::Constant(get("c")?)),
        "linear" => Ok(FunctionDescriptor::linear(get("a")?, get("b")?)),
        "powerbump" => {
            let g0 = kv.get("g0").copied().unwrap_or(1.0);
            let g1 = kv.get("g1").copied().unwrap_or(0.0);
            let factor = if g1 == 0.0 {
                FunctionDescriptor::Constant(g0)
            } else {
                FunctionDescriptor::linear(g1, g0)
            };
            Ok(FunctionDescriptor::power_bump(
                get("x0")?,
                get("beta")?,
                factor,
            ))
        }
        "mollifierbump" => Ok(FunctionDescriptor::mollifier_bump(
            get("center")?,
            get("h")?,
            get("a")?,
        )),
        "sinsq" => Ok(FunctionDescriptor::SmoothPositive(SmoothKind::SinSq)),
        "sine" | "sinemid" => Ok(FunctionDescriptor::SmoothPositive(SmoothKind::SineMid)),
        other => Err(Error::Parse(format!("unknown descriptor '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivative_examples() {
        let c = FunctionDescriptor::Constant(3.0);
        assert_eq!(c.derivative(0.4, 1).unwrap(), 0.0);
        let lin = FunctionDescriptor::linear(1.0, 0.0);
        assert_abs_diff_eq!(lin.evaluate(0.3), 0.3);
        assert_abs_diff_eq!(lin.derivative(0.3, 1).unwrap(), 1.0);
        // d^2/dx^2 (x-1/2)^4 at 0.75 = 12 * 0.25^2 = 0.75.
        let bump = FunctionDescriptor::power_bump(0.5, 4.0, FunctionDescriptor::Constant(1.0));
        assert_abs_diff_eq!(bump.derivative(0.75, 2).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn derivative_order_cap() {
        let c = FunctionDescriptor::Constant(1.0);
        assert!(matches!(c.derivative(0.5, 11), Err(Error::Capability(_))));
        let g = FunctionDescriptor::Grid(vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(matches!(g.derivative(0.5, 3), Err(Error::Capability(_))));
    }

    #[test]
    fn power_bump_derivatives_match_finite_differences() {
        let bump = FunctionDescriptor::power_bump(0.5, 2.5, FunctionDescriptor::linear(1.0, 1.0));
        let h = 1e-6;
        for x in [0.1, 0.3, 0.62, 0.9] {
            let exact = bump.derivative(x, 1).unwrap();
            let fd = (bump.evaluate(x + h) - bump.evaluate(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(exact, fd, epsilon = 1e-5);
            let exact2 = bump.derivative(x, 2).unwrap();
            let fd2 =
                (bump.evaluate(x + h) - 2.0 * bump.evaluate(x) + bump.evaluate(x - h)) / (h * h);
            assert_abs_diff_eq!(exact2, fd2, epsilon = 1e-3);
        }
    }

    #[test]
    fn mollifier_values_and_symmetry() {
        assert_abs_diff_eq!(mollifier_k0(0.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(mollifier_k0(1.0), 0.0);
        assert_eq!(mollifier_k0(-1.0), 0.0);
        for x in [0.1, 0.35, 0.77, 0.99] {
            assert_eq!(mollifier_k0(x), mollifier_k0(-x));
        }
    }

    #[test]
    fn mollifier_derivatives_match_finite_differences() {
        let h = 1e-7;
        for x in [-0.6, -0.2, 0.0, 0.4, 0.8] {
            let fd = (mollifier_k0(x + h) - mollifier_k0(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(mollifier_k0_derivative(x, 1), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn mollifier_ratio_bound_is_finite() {
        let b = mollifier_ratio_bound(3.0, 10_000);
        assert!(b.is_finite() && b > 0.0, "bound {b}");
    }

    #[test]
    fn flat_seminorm_examples() {
        let c = FunctionDescriptor::Constant(5.0);
        assert_eq!(flat_seminorm(&c, 2.5, 1024).unwrap(), 0.0);
        // |f'|^2/|f| = 1/x is unbounded near the zero of f(x) = x.
        let lin = FunctionDescriptor::linear(1.0, 0.0);
        assert!(flat_seminorm(&lin, 2.0, 1024).unwrap().is_infinite());
        // The flat member (x-x0)^beta stays finite at matching beta.
        let bump = FunctionDescriptor::power_bump(0.3, 2.0, FunctionDescriptor::Constant(1.0));
        let v = flat_seminorm(&bump, 2.0, 4096).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn flat_seminorm_vanishes_at_or_below_one() {
        let bump = FunctionDescriptor::power_bump(0.5, 1.5, FunctionDescriptor::Constant(2.0));
        assert_eq!(flat_seminorm(&bump, 1.0, 512).unwrap(), 0.0);
        assert_eq!(flat_seminorm(&bump, 0.7, 512).unwrap(), 0.0);
    }

    #[test]
    fn flat_seminorm_is_positively_homogeneous() {
        let base = FunctionDescriptor::mollifier_bump(0.5, 0.3, 1.0);
        let beta = 2.5;
        let s1 = flat_seminorm(&base, beta, 4096).unwrap();
        for lambda in [0.25, 3.0, 17.5] {
            let scaled = FunctionDescriptor::mollifier_bump(0.5, 0.3, lambda);
            let s2 = flat_seminorm(&scaled, beta, 4096).unwrap();
            assert!(
                (s2 - lambda * s1).abs() <= 1e-10 * (lambda * s1),
                "lambda {lambda}: {s2} vs {}",
                lambda * s1
            );
        }
    }

    #[test]
    fn convex_cone_combinations_stay_finite() {
        let f = FunctionDescriptor::mollifier_bump(0.4, 0.25, 2.0);
        let g = FunctionDescriptor::Constant(0.5);
        let combo = FunctionDescriptor::Sum(vec![
            FunctionDescriptor::mollifier_bump(0.4, 0.25, 2.0 * 1.5),
            FunctionDescriptor::Constant(0.5 * 0.7),
        ]);
        let beta = 2.0;
        assert!(flat_seminorm(&f, beta, 4096).unwrap().is_finite());
        assert!(flat_seminorm(&g, beta, 4096).unwrap().is_finite());
        assert!(flat_seminorm(&combo, beta, 4096).unwrap().is_finite());
    }

    #[test]
    fn hb_norm_examples() {
        let half = FunctionDescriptor::Constant(0.5);
        let rep = hb_norm(&half, 3.0, 1024).unwrap();
        assert_eq!(rep.flat_seminorm, 0.0);
        assert_eq!(rep.hb_extra, Some(0.0));

        let lin = FunctionDescriptor::linear(1.0, 0.0);
        let rep = hb_norm(&lin, 2.0, 1024).unwrap();
        assert!(rep.flat_seminorm.is_infinite());

        let sinsq = FunctionDescriptor::SmoothPositive(SmoothKind::SinSq);
        let rep = hb_norm(&sinsq, 2.0, 10_000).unwrap();
        assert!(rep.flat_seminorm.is_finite());
        assert!(rep.hb_extra.unwrap().is_finite());
    }

    #[test]
    fn hb_norm_rejects_out_of_range_functions() {
        let f = FunctionDescriptor::linear(2.0, 0.0);
        assert!(matches!(hb_norm(&f, 2.0, 256), Err(Error::Domain { .. })));
    }

    #[test]
    fn fluctuation_constant_solves_the_defining_equation() {
        // beta = 1: (e^a - 1) + a = 1/2, root 0.235040...
        let a1 = fluctuation_constant(1.0);
        assert_abs_diff_eq!(a1, 0.235040, epsilon = 1e-5);
        assert_abs_diff_eq!(a1.exp() + a1, 1.5, epsilon = 1e-10);
        for beta in [1.5, 2.0, 4.0] {
            let a = fluctuation_constant(beta);
            let fact: f64 = (1..=holder_floor(beta))
                .map(|i| i as f64)
                .product::<f64>()
                .max(1.0);
            assert_abs_diff_eq!((a.exp() - 1.0) + a.powf(beta) / fact, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn local_fluctuation_examples() {
        let c = FunctionDescriptor::Constant(2.0);
        assert!(local_fluctuation_check(&c, 2.0, 0.5, 0.2).unwrap());

        let bump = FunctionDescriptor::power_bump(0.5, 2.0, FunctionDescriptor::Constant(1.0));
        let norm = holder_norm(&bump, 2.0, DEFAULT_NORM_GRID)
            .unwrap()
            .holder_total();
        let fx = bump.evaluate(0.7);
        let h = 0.9 * fluctuation_constant(2.0) * (fx / norm).sqrt();
        assert!(local_fluctuation_check(&bump, 2.0, 0.7, h).unwrap());

        // Oversized step trips the precondition.
        assert!(matches!(
            local_fluctuation_check(&bump, 2.0, 0.7, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn local_fluctuation_holds_over_random_admissible_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let members: Vec<(FunctionDescriptor, f64)> = vec![
            (FunctionDescriptor::Constant(0.8), 2.0),
            (
                FunctionDescriptor::power_bump(0.5, 2.0, FunctionDescriptor::Constant(1.0)),
                2.0,
            ),
            (FunctionDescriptor::mollifier_bump(0.5, 0.4, 1.0), 1.5),
        ];
        for (desc, beta) in members {
            let norm = holder_norm(&desc, beta, DEFAULT_NORM_GRID)
                .unwrap()
                .holder_total();
            let a = fluctuation_constant(beta);
            let mut checked = 0;
            while checked < 1000 {
                let x: f64 = rng.random_range(0.05..0.95);
                let fx = desc.evaluate(x).abs();
                let radius = if norm == 0.0 {
                    0.04
                } else {
                    a * (fx / norm).powf(1.0 / beta)
                };
                let h = rng.random_range(-1.0..1.0) * radius;
                if x + h < 0.0 || x + h > 1.0 || h == 0.0 {
                    continue;
                }
                assert!(
                    local_fluctuation_check(&desc, beta, x, h).unwrap(),
                    "violated at x={x}, h={h}"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn grid_functions_interpolate_and_difference() {
        let values: Vec<f64> = (0..=64).map(|i| (i as f64 / 64.0).powi(2)).collect();
        let g = FunctionDescriptor::Grid(values);
        assert_abs_diff_eq!(g.evaluate(0.5), 0.25, epsilon = 1e-4);
        assert_abs_diff_eq!(g.derivative(0.5, 1).unwrap(), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(g.derivative(0.5, 2).unwrap(), 2.0, epsilon = 1e-6);
        assert!(matches!(
            flat_seminorm(&g, 3.5, 256),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn descriptor_parsing_round_trips() {
        let d = parse_descriptor("powerbump:x0=0.5,beta=2,g0=1,g1=1").unwrap();
        assert_abs_diff_eq!(d.evaluate(0.75), 0.0625 * 1.75, epsilon = 1e-14);
        let d = parse_descriptor("constant:c=0.3").unwrap();
        assert_eq!(d.evaluate(0.9), 0.3);
        let d = parse_descriptor("mollifierbump:center=0.7,h=0.3,a=2").unwrap();
        assert_eq!(d.evaluate(0.3), 0.0);
        assert!(d.evaluate(0.7) > 0.0);
        let d = parse_descriptor("sinsq + constant:c=0.25").unwrap();
        assert_abs_diff_eq!(d.evaluate(0.0), 0.25, epsilon = 1e-14);
        assert!(parse_descriptor("nope:x=1").is_err());
        assert!(parse_descriptor("linear:a=1").is_err());
    }
}
