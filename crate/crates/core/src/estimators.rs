//! Hard wavelet thresholding, plug-in inversion, the bias-corrected
//! square-root-link estimator, and the detector-gated log-link estimator.

use crate::error::{Error, Result};
use crate::links::LinkKind;
use crate::model::Observation;
use crate::wavelet::{CoefficientTree, TreeKind, WaveletBasis};

/// Tuning constants of the estimation pipeline.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    /// Threshold multiplier; must exceed 2 sqrt(2).
    pub tau: f64,
    /// Detector multiplier (log link); must exceed 1.
    pub sigma: f64,
    /// Smoothness input (log link; that estimator is non-adaptive).
    pub beta: f64,
    /// Output grid resolution for the estimate surfaces.
    pub grid_size: usize,
    /// Constant C in the subpolynomial factor M_n = C e^{(3 sigma + 1) sqrt(log n)}.
    pub mn_constant: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            tau: 4.0,
            sigma: 1.5,
            beta: 2.0,
            grid_size: (1 << 12) + 1,
            mn_constant: 1.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 2.0 * std::f64::consts::SQRT_2 {
            return Err(Error::Precondition(format!(
                "tau = {} must exceed 2 sqrt(2) = {:.6}",
                self.tau,
                2.0 * std::f64::consts::SQRT_2
            )));
        }
        if self.sigma <= 1.0 {
            return Err(Error::Precondition(format!(
                "sigma = {} must exceed 1",
                self.sigma
            )));
        }
        if self.beta <= 0.0 {
            return Err(Error::Precondition("beta must be positive".into()));
        }
        Ok(())
    }
}

/// The hard threshold tau sqrt(log n / n) (natural log).
pub fn threshold_value(n: u64, tau: f64) -> f64 {
    tau * ((n as f64).ln() / n as f64).sqrt()
}

/// Keep Y_{j,k} iff |Y_{j,k}| strictly exceeds tau sqrt(log n / n);
/// scaling entries are thresholded with the same rule.
pub fn hard_threshold(obs: &Observation, tau: f64) -> Result<CoefficientTree> {
    if tau <= 2.0 * std::f64::consts::SQRT_2 {
        return Err(Error::Precondition(format!(
            "tau = {tau} must exceed 2 sqrt(2)"
        )));
    }
    let thr = threshold_value(obs.n, tau);
    let mut out = obs.y_tree.clone();
    out.kind = TreeKind::Thresholded;
    for v in out.scaling.iter_mut() {
        if v.abs() <= thr {
            *v = 0.0;
        }
    }
    for block in out.details.iter_mut() {
        for v in block.iter_mut() {
            if v.abs() <= thr {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Reconstruction of the link-scale signal from the thresholded tree,
/// evaluated at arbitrary points.
pub fn estimate_h(
    obs: &Observation,
    basis: &WaveletBasis,
    config: &EstimatorConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    config.validate()?;
    let tree = hard_threshold(obs, config.tau)?;
    Ok(crate::wavelet::evaluate_tree(&tree, basis, xs))
}

/// Plug-in estimate h^{-1}(h_hat) for the square-root and arcsine links.
pub fn plugin_estimate(
    obs: &Observation,
    basis: &WaveletBasis,
    config: &EstimatorConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    if obs.link == LinkKind::GaussVar {
        return Err(Error::Precondition(
            "the log link uses the detector-gated estimator".into(),
        ));
    }
    let h_hat = estimate_h(obs, basis, config, xs)?;
    Ok(h_hat.into_iter().map(|y| obs.link.invert(y)).collect())
}

/// Square-root-link estimate minus the selected-coefficient variance term
/// (1/4n) sum psi_{j,k}^2 over surviving entries, scaling included.
pub fn bias_corrected_poisson(
    obs: &Observation,
    basis: &WaveletBasis,
    config: &EstimatorConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    if obs.link != LinkKind::Poisson {
        return Err(Error::Precondition(
            "the bias correction applies to the square-root link".into(),
        ));
    }
    config.validate()?;
    let tree = hard_threshold(obs, config.tau)?;
    let f_hat = plugin_estimate(obs, basis, config, xs)?;
    let inv4n = 1.0 / (4.0 * obs.n as f64);
    let mut out = Vec::with_capacity(xs.len());
    for (&x, fh) in xs.iter().zip(f_hat) {
        let mut mass = 0.0;
        for (k, &c) in tree.scaling.iter().enumerate() {
            if c != 0.0 {
                let v = basis.scaling_at(k, x);
                mass += v * v;
            }
        }
        for (d, block) in tree.details.iter().enumerate() {
            let j = tree.j0 + d as u32;
            for k in basis.covering_indices(j, x) {
                if block[k] != 0.0 {
                    let v = basis.wavelet_at(j, k, x);
                    mass += v * v;
                }
            }
        }
        out.push(fh - inv4n * mass);
    }
    Ok(out)
}

/// The local averaging process over the n disjoint windows: clean window
/// integral plus the stored window noise. Entries are -inf where the signal
/// vanishes inside the window.
pub fn zn_process(obs: &Observation) -> Result<Vec<f64>> {
    if obs.link != LinkKind::GaussVar {
        return Err(Error::Precondition(
            "the averaging process is defined for the log link".into(),
        ));
    }
    Ok(obs
        .zn_clean
        .iter()
        .zip(&obs.zn_noise)
        .map(|(c, e)| c + e)
        .collect())
}

/// Detector cutoff -2^{-1/2} beta log n + sigma sqrt(2 log n).
pub fn zn_threshold(n: u64, beta: f64, sigma: f64) -> f64 {
    let ln = (n as f64).ln();
    -beta * ln * std::f64::consts::FRAC_1_SQRT_2 + sigma * (2.0 * ln).sqrt()
}

/// Log-link estimate: exp(sqrt(2) h_hat(x)) gated by the window detector;
/// exactly zero where the detector is off.
pub fn gaussvar_estimate(
    obs: &Observation,
    basis: &WaveletBasis,
    config: &EstimatorConfig,
    xs: &[f64],
) -> Result<Vec<f64>> {
    if obs.link != LinkKind::GaussVar {
        return Err(Error::Precondition(
            "the detector-gated estimator applies to the log link".into(),
        ));
    }
    config.validate()?;
    let zn = zn_process(obs)?;
    let cutoff = zn_threshold(obs.n, config.beta, config.sigma);
    let h_hat = estimate_h(obs, basis, config, xs)?;
    let n = obs.n as f64;
    Ok(xs
        .iter()
        .zip(h_hat)
        .map(|(&x, h)| {
            let window = ((x * n).floor() as usize).min(obs.n as usize - 1);
            if zn[window] >= cutoff {
                (std::f64::consts::SQRT_2 * h).exp()
            } else {
                0.0
            }
        })
        .collect())
}

/// Whether every empirical coefficient sits within the threshold band of
/// its clean value (the high-probability event the analysis works on).
pub fn an_event(obs: &Observation, tau: f64) -> bool {
    let thr = threshold_value(obs.n, tau);
    obs.y_tree
        .entries()
        .zip(obs.clean_tree.entries())
        .all(|((_, _, y), (_, _, d))| (y - d).abs() <= thr)
}
