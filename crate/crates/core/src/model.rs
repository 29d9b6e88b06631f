//! Sequence-space simulation of the white noise experiment and the s-fold
//! integration forward operator.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::links::LinkKind;
use crate::quad::GaussLegendre;
use crate::spaces::FunctionDescriptor;
use crate::wavelet::{clean_tree_fn, CoefficientTree, TreeKind, WaveletBasis};

/// Floor applied to log f inside the log-link integrand so simulations with
/// vanishing signals stay defined; the detector gates those regions off.
const LOG_INTEGRAND_FLOOR: f64 = -708.0;

/// One realization of the sequence-space experiment.
#[derive(Debug, Clone)]
pub struct Observation {
    pub n: u64,
    pub link: LinkKind,
    /// Noisy coefficients Y_{j,k} = d_{j,k} + n^{-1/2} Z_{j,k}.
    pub y_tree: CoefficientTree,
    /// Finest simulated level, floor(log2 n).
    pub j_n: u32,
    /// Clean coefficients d_{j,k}, retained for oracle checks.
    pub clean_tree: CoefficientTree,
    pub seed: u64,
    /// Substream index (replication number) of the generator.
    pub stream: u64,
    /// Log-link only: per-window signal integrals (n/sqrt(2)) int log f,
    /// -inf where f hits zero inside the window.
    pub zn_clean: Vec<f64>,
    /// Log-link only: i.i.d. standard normal window noises.
    pub zn_noise: Vec<f64>,
}

/// Clean (noise-free) parts of an experiment, reusable across replications.
#[derive(Debug, Clone)]
pub struct CleanExperiment {
    pub n: u64,
    pub link: LinkKind,
    pub j_n: u32,
    pub clean_tree: CoefficientTree,
    pub zn_clean: Vec<f64>,
}

/// Finest simulated level: floor(log2 n), so 2^{J_n} lies in [n/2, n].
pub fn finest_level(n: u64) -> u32 {
    63 - n.leading_zeros()
}

fn domain_scan(f: &FunctionDescriptor, link: LinkKind) -> Result<()> {
    for i in 0..=4096 {
        let x = i as f64 / 4096.0;
        let v = f.evaluate(x);
        let ok = match link {
            LinkKind::Poisson => v >= 0.0,
            LinkKind::Bernoulli => (0.0..=1.0).contains(&v),
            // Zero is tolerated for the log link; the estimator's detector
            // handles vanishing regions. Negative values are rejected.
            LinkKind::GaussVar => v >= 0.0,
        };
        if !ok || !v.is_finite() {
            return Err(Error::Domain {
                value: v,
                reason: format!("f({x}) outside the {} domain", link.name()),
            });
        }
    }
    Ok(())
}

/// Link integrand h(f(x)) with the log-link floor.
fn link_integrand(f: &FunctionDescriptor, link: LinkKind) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let v = f.evaluate(x);
        match link {
            LinkKind::GaussVar => {
                let lv = v.max(f64::MIN_POSITIVE).ln() * std::f64::consts::FRAC_1_SQRT_2;
                lv.max(LOG_INTEGRAND_FLOOR)
            }
            _ => link.apply_unchecked(v.clamp(link.domain().0, link.domain().1)),
        }
    }
}

/// Compute the clean coefficient tree and, for the log link, the window
/// integrals of the local averaging process.
pub fn clean_experiment(
    f: &FunctionDescriptor,
    link: LinkKind,
    n: u64,
    basis: &WaveletBasis,
) -> Result<CleanExperiment> {
    if n < 8 {
        return Err(Error::Precondition(format!("sample size {n} is below 8")));
    }
    domain_scan(f, link)?;
    let j_n = finest_level(n);
    if basis.jmax < j_n {
        return Err(Error::Config(format!(
            "basis finest level {} is below J_n = {j_n}",
            basis.jmax
        )));
    }
    let clean_tree = clean_tree_fn(link_integrand(f, link), basis, j_n, 16)?;
    let zn_clean = if link == LinkKind::GaussVar {
        window_log_integrals(f, n)?
    } else {
        Vec::new()
    };
    Ok(CleanExperiment {
        n,
        link,
        j_n,
        clean_tree,
        zn_clean,
    })
}

/// (n/sqrt(2)) int_{i/n}^{(i+1)/n} log f over the n disjoint windows; -inf
/// when f vanishes anywhere the quadrature looks.
fn window_log_integrals(f: &FunctionDescriptor, n: u64) -> Result<Vec<f64>> {
    let rule = GaussLegendre::cached(8);
    let width = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        let lo = i as f64 * width;
        let mut acc = 0.0;
        let mut dead = false;
        for (node, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = lo + 0.5 * (node + 1.0) * width;
            let v = f.evaluate(x);
            if v < 0.0 {
                return Err(Error::Domain {
                    value: v,
                    reason: format!("f({x}) negative under the log link"),
                });
            }
            if v == 0.0 {
                dead = true;
                break;
            }
            acc += w * v.ln();
        }
        if dead {
            out.push(f64::NEG_INFINITY);
        } else {
            out.push(acc * 0.5 * width * n as f64 * std::f64::consts::FRAC_1_SQRT_2);
        }
    }
    Ok(out)
}

/// Draw the noise for one replication on top of precomputed clean parts.
///
/// The generator is a counter-based stream cipher; distinct replications use
/// distinct substreams, so parallel runs reproduce serial ones bit for bit.
pub fn apply_noise(clean: &CleanExperiment, seed: u64, stream: u64) -> Observation {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sd = 1.0 / (clean.n as f64).sqrt();
    let mut y = clean.clean_tree.clone();
    y.kind = TreeKind::Noisy;
    for s in y.scaling.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s += sd * z;
    }
    for block in y.details.iter_mut() {
        for v in block.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sd * z;
        }
    }
    let zn_noise = if clean.link == LinkKind::GaussVar {
        (0..clean.n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    } else {
        Vec::new()
    };
    Observation {
        n: clean.n,
        link: clean.link,
        y_tree: y,
        j_n: clean.j_n,
        clean_tree: clean.clean_tree.clone(),
        seed,
        stream,
        zn_clean: clean.zn_clean.clone(),
        zn_noise,
    }
}

/// Simulate one observation of the sequence-space experiment.
pub fn simulate(
    f: &FunctionDescriptor,
    link: LinkKind,
    n: u64,
    basis: &WaveletBasis,
    seed: u64,
) -> Result<Observation> {
    simulate_stream(f, link, n, basis, seed, 0)
}

/// [`simulate`] on an explicit replication substream.
pub fn simulate_stream(
    f: &FunctionDescriptor,
    link: LinkKind,
    n: u64,
    basis: &WaveletBasis,
    seed: u64,
    stream: u64,
) -> Result<Observation> {
    let clean = clean_experiment(f, link, n, basis)?;
    Ok(apply_noise(&clean, seed, stream))
}

/// Noise-off hook: Y = d exactly, window noises zero.
pub fn simulate_noiseless(
    f: &FunctionDescriptor,
    link: LinkKind,
    n: u64,
    basis: &WaveletBasis,
) -> Result<Observation> {
    let clean = clean_experiment(f, link, n, basis)?;
    let mut y = clean.clean_tree.clone();
    y.kind = TreeKind::Noisy;
    let zn_noise = if link == LinkKind::GaussVar {
        vec![0.0; n as usize]
    } else {
        Vec::new()
    };
    Ok(Observation {
        n,
        link,
        y_tree: y,
        j_n: clean.j_n,
        clean_tree: clean.clean_tree,
        seed: 0,
        stream: 0,
        zn_clean: clean.zn_clean,
        zn_noise,
    })
}

/// Exact mirror coupling for the arcsine link: complements the signal
/// (f -> 1-f) and negates the noise, using pi - h(u) = h(1-u).
///
/// Wavelet entries flip sign exactly; scaling entries are reflected about
/// the coefficient of the constant pi.
pub fn mirror_bernoulli(obs: &Observation) -> Observation {
    assert_eq!(
        obs.link,
        LinkKind::Bernoulli,
        "mirror coupling is arcsine-only"
    );
    let mut clean = obs.clean_tree.clone();
    let mut y = obs.y_tree.clone();
    let j0 = clean.j0;
    let phi_mean = std::f64::consts::PI / ((1u64 << j0) as f64).sqrt();
    for k in 0..clean.scaling.len() {
        let d = clean.scaling[k];
        let noise = obs.y_tree.scaling[k] - d;
        clean.scaling[k] = phi_mean - d;
        y.scaling[k] = clean.scaling[k] - noise;
    }
    for (cb, yb) in clean.details.iter_mut().zip(y.details.iter_mut()) {
        for (c, yv) in cb.iter_mut().zip(yb.iter_mut()) {
            *c = -*c;
            *yv = -*yv;
        }
    }
    Observation {
        n: obs.n,
        link: obs.link,
        y_tree: y,
        j_n: obs.j_n,
        clean_tree: clean,
        seed: obs.seed,
        stream: obs.stream,
        zn_clean: obs.zn_clean.clone(),
        zn_noise: obs.zn_noise.clone(),
    }
}

/// s-fold iterated antiderivative with zero integration constants.
///
/// Constant/linear chains integrate in closed form; everything else falls
/// back to a cumulative trapezoid grid at 2^16 + 1 points.
pub fn integrate_k(f: &FunctionDescriptor, s: u32) -> Result<FunctionDescriptor> {
    if s == 0 || s > 3 {
        return Err(Error::Precondition(format!(
            "integration order {s} outside the supported 1..=3"
        )));
    }
    let mut current = f.clone();
    for _ in 0..s {
        current = integrate_once(&current)?;
    }
    Ok(current)
}

fn integrate_once(f: &FunctionDescriptor) -> Result<FunctionDescriptor> {
    if let Some(closed) = antiderivative_closed(f) {
        return Ok(closed);
    }
    const GRID: usize = (1 << 16) + 1;
    let h = 1.0 / (GRID - 1) as f64;
    let mut values = Vec::with_capacity(GRID);
    let mut acc = 0.0;
    let mut prev = f.evaluate(0.0);
    values.push(0.0);
    for i in 1..GRID {
        let x = i as f64 * h;
        let v = f.evaluate(x);
        if !v.is_finite() {
            return Err(Error::Integrability {
                location: x,
                reason: "integrand is not finite".into(),
            });
        }
        acc += 0.5 * (prev + v) * h;
        values.push(acc);
        prev = v;
    }
    Ok(FunctionDescriptor::Grid(values))
}

/// Exact antiderivative (vanishing at 0) for descriptors that admit one:
/// constants, linears, monomial bumps anchored at 0, and sums of those.
fn antiderivative_closed(f: &FunctionDescriptor) -> Option<FunctionDescriptor> {
    match f {
        FunctionDescriptor::Constant(c) => Some(FunctionDescriptor::linear(*c, 0.0)),
        FunctionDescriptor::Linear { slope, intercept } => {
            let quad =
                FunctionDescriptor::power_bump(0.0, 2.0, FunctionDescriptor::Constant(slope / 2.0));
            Some(if *intercept == 0.0 {
                quad
            } else {
                FunctionDescriptor::Sum(vec![quad, FunctionDescriptor::linear(*intercept, 0.0)])
            })
        }
        FunctionDescriptor::PowerBump { x0, beta, factor } if *x0 == 0.0 && beta.fract() == 0.0 => {
            if let FunctionDescriptor::Constant(c) = factor.as_ref() {
                Some(FunctionDescriptor::power_bump(
                    0.0,
                    beta + 1.0,
                    FunctionDescriptor::Constant(c / (beta + 1.0)),
                ))
            } else {
                None
            }
        }
        FunctionDescriptor::Sum(parts) => {
            let mut out = Vec::with_capacity(parts.len());
            for p in parts {
                out.push(antiderivative_closed(p)?);
            }
            Some(FunctionDescriptor::Sum(out))
        }
        _ => None,
    }
}

/// Two-sided Kolmogorov-Smirnov p-value of samples against standard normal.
pub fn ks_normal_pvalue(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let m = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &z) in samples.iter().enumerate() {
        let cdf = 0.5 * (1.0 + libm::erf(z * std::f64::consts::FRAC_1_SQRT_2));
        let lo = i as f64 / m;
        let hi = (i as f64 + 1.0) / m;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    let lambda = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    p.clamp(0.0, 1.0)
}
