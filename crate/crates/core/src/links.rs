//! The three link functions of the observation model, their inverses with
//! clamping, and the exact Kullback-Leibler divergence of the white noise
//! experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::spaces::FunctionDescriptor;

/// Link selector: square-root, arcsine-root, and log transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Poisson,
    Bernoulli,
    GaussVar,
}

impl LinkKind {
    pub fn name(&self) -> &'static str {
        match self {
            LinkKind::Poisson => "poisson",
            LinkKind::Bernoulli => "bernoulli",
            LinkKind::GaussVar => "gaussvar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(LinkKind::Poisson),
            "bernoulli" => Ok(LinkKind::Bernoulli),
            "gaussvar" => Ok(LinkKind::GaussVar),
            other => Err(Error::Parse(format!("unknown link '{other}'"))),
        }
    }

    /// Closed domain interval of the signal; the upper end is +inf where open.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            LinkKind::Poisson => (0.0, f64::INFINITY),
            LinkKind::Bernoulli => (0.0, 1.0),
            LinkKind::GaussVar => (0.0, f64::INFINITY),
        }
    }

    /// Points where the derivative of the link is singular.
    pub fn irregular_points(&self) -> &'static [f64] {
        match self {
            LinkKind::Poisson | LinkKind::GaussVar => &[0.0],
            LinkKind::Bernoulli => &[0.0, 1.0],
        }
    }

    /// Whether u is admissible as a signal value (GaussVar requires u > 0).
    pub fn contains(&self, u: f64) -> bool {
        match self {
            LinkKind::Poisson => u >= 0.0,
            LinkKind::Bernoulli => (0.0..=1.0).contains(&u),
            LinkKind::GaussVar => u > 0.0,
        }
    }

    /// h(u): 2 sqrt(u), 2 arcsin(sqrt(u)), or log(u)/sqrt(2).
    pub fn apply(&self, u: f64) -> Result<f64> {
        if !self.contains(u) || !u.is_finite() {
            return Err(Error::Domain {
                value: u,
                reason: format!("outside the {} link domain", self.name()),
            });
        }
        Ok(self.apply_unchecked(u))
    }

    /// h(u) without the domain check; yields NaN/-inf outside the domain.
    pub fn apply_unchecked(&self, u: f64) -> f64 {
        match self {
            LinkKind::Poisson => 2.0 * u.sqrt(),
            LinkKind::Bernoulli => 2.0 * u.sqrt().asin(),
            LinkKind::GaussVar => std::f64::consts::FRAC_1_SQRT_2 * u.ln(),
        }
    }

    /// h^{-1}(y) with clamping to the range of h, so the plug-in inversion
    /// is total: y^2/4 after y |-> max(y,0); sin^2(y/2) after clamping y to
    /// [0, pi]; exp(sqrt(2) y) unclamped.
    pub fn invert(&self, y: f64) -> f64 {
        match self {
            LinkKind::Poisson => {
                let c = y.max(0.0);
                c * c / 4.0
            }
            LinkKind::Bernoulli => {
                let c = y.clamp(0.0, std::f64::consts::PI);
                let s = (0.5 * c).sin();
                s * s
            }
            LinkKind::GaussVar => (std::f64::consts::SQRT_2 * y).exp(),
        }
    }

    /// Kullback-Leibler divergence (n/2) * ||h∘f - h∘g||_2^2 of the two
    /// white-noise measures, by adaptive quadrature.
    ///
    /// For the log link, f or g vanishing on a set of positive measure makes
    /// the divergence infinite; this is detected on a scan grid and reported
    /// as +inf rather than an error.
    pub fn kl_divergence(
        &self,
        f: &FunctionDescriptor,
        g: &FunctionDescriptor,
        n: f64,
        rel_tol: f64,
    ) -> Result<f64> {
        let scan = 4096usize;
        let mut zero_run = 0usize;
        for i in 0..=scan {
            let x = i as f64 / scan as f64;
            for v in [f.evaluate(x), g.evaluate(x)] {
                match self {
                    LinkKind::GaussVar => {
                        if v < 0.0 {
                            return Err(Error::Domain {
                                value: v,
                                reason: format!("negative signal at x = {x} under the log link"),
                            });
                        }
                    }
                    _ => {
                        if !self.contains(v) {
                            return Err(Error::Domain {
                                value: v,
                                reason: format!(
                                    "signal at x = {x} outside the {} domain",
                                    self.name()
                                ),
                            });
                        }
                    }
                }
            }
            if *self == LinkKind::GaussVar && (f.evaluate(x) == 0.0 || g.evaluate(x) == 0.0) {
                zero_run += 1;
                if zero_run >= 2 {
                    return Ok(f64::INFINITY);
                }
            } else {
                zero_run = 0;
            }
        }
        let integral = quad::adaptive(0.0, 1.0, rel_tol, |x| {
            let d = self.apply_unchecked(f.evaluate(x)) - self.apply_unchecked(g.evaluate(x));
            d * d
        })?;
        Ok(0.5 * n * integral)
    }
}
