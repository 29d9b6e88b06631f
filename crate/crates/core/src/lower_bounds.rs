//! Constructive two-hypothesis lower-bound machinery: perturbation pairs
//! around a base function, numerical verification of the norm / separation /
//! divergence conditions, and the linear-class counterexample.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::links::LinkKind;
use crate::rates::{rate_lower, RateQuery};
use crate::spaces::{self, fluctuation_constant, mollifier_norms, FunctionDescriptor};

/// Which side of the small/large signal-value split a pair was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseRegime {
    A,
    B,
}

/// A calibrated two-point testing pair.
#[derive(Debug, Clone)]
pub struct HypothesisPair {
    pub f0: FunctionDescriptor,
    pub f1: FunctionDescriptor,
    pub x0: f64,
    pub h_n: f64,
    pub case: CaseRegime,
    pub c0: f64,
    pub eta: f64,
    /// Divergence between the two hypothesis measures, by quadrature.
    pub kl: f64,
    /// |f0(x0) - f1(x0)|.
    pub separation: f64,
    pub rate_at_f0: f64,
    pub rate_at_f1: f64,
    pub warnings: Vec<String>,
}

/// Numeric verification report for the three lower-bound conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub norm_f0: f64,
    pub norm_f1: f64,
    pub r_budget: f64,
    /// Both hypotheses inside the class ball.
    pub cond_i: bool,
    pub separation_ratio: f64,
    pub rate_ratio: f64,
    /// Separation comparable to the local rate at both hypotheses.
    pub cond_ii: bool,
    pub kl: f64,
    /// Divergence within the unit budget.
    pub cond_iii: bool,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.cond_i && self.cond_ii && self.cond_iii
    }
}

const NORM_GRID: usize = 1 << 13;
const KL_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 60;

fn class_norm(desc: &FunctionDescriptor, beta: f64, link: LinkKind) -> Result<f64> {
    spaces::space_norm_for_link(desc, beta, NORM_GRID, link)
}

fn lower_rate_at(link: LinkKind, beta: f64, n: u64, fx: f64) -> Result<f64> {
    let fx = match link {
        LinkKind::Bernoulli => fx.clamp(0.0, 1.0),
        _ => fx.max(0.0),
    };
    Ok(rate_lower(&RateQuery::new(link, beta, n, fx)?))
}

/// Build the proof's perturbation pair around `f_star` at `x0`.
///
/// The bump K = eta K0 is shrunk geometrically until the class-norm budget
/// and the unit divergence budget hold numerically; the bandwidth constant
/// follows the case formulas, with an extra geometric shrink for the
/// small-signal log-link case.
pub fn build_pair(
    link: LinkKind,
    f_star: &FunctionDescriptor,
    x0: f64,
    beta: f64,
    r_budget: f64,
    n: u64,
) -> Result<HypothesisPair> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Precondition(format!("x0 = {x0} outside [0,1]")));
    }
    if n < 8 {
        return Err(Error::Precondition("sample size below 8".into()));
    }
    let norm_star = class_norm(f_star, beta, link)?;
    if norm_star.is_nan() || norm_star >= r_budget {
        return Err(Error::Precondition(format!(
            "class norm {norm_star} of the base function must be strictly below R = {r_budget}"
        )));
    }

    let nf = n as f64;
    let v0 = f_star.evaluate(x0);
    let (case, small_stat) = match link {
        LinkKind::Poisson => {
            let t = nf.powf(-beta / (beta + 1.0));
            (if v0 > t { CaseRegime::A } else { CaseRegime::B }, v0)
        }
        LinkKind::Bernoulli => {
            let m0 = v0.min(1.0 - v0);
            let t = nf.powf(-beta / (beta + 1.0));
            (if m0 > t { CaseRegime::A } else { CaseRegime::B }, m0)
        }
        LinkKind::GaussVar => {
            let t = nf.powf(-beta);
            (if v0 > t { CaseRegime::A } else { CaseRegime::B }, v0)
        }
    };
    let subtract = link == LinkKind::Bernoulli && v0 > 0.5;

    let a_const = fluctuation_constant(beta);
    let (k0_l2sq, k0_l1) = mollifier_norms();
    let r = r_budget;

    let mut eta = 1.0f64;
    let mut warnings: Vec<String> = Vec::new();
    let mut last_failure = String::new();
    for _ in 0..MAX_HALVINGS {
        let k_l2sq = eta * eta * k0_l2sq;
        let k_l1 = eta * k0_l1;
        // Bandwidth constant from the case formulas.
        let mut c0 = match (link, case) {
            (LinkKind::Poisson, CaseRegime::A) => (a_const * r.powf(-1.0 / beta))
                .min((4.0 * r * r * k_l2sq).powf(-1.0 / (2.0 * beta + 1.0))),
            (LinkKind::Poisson, CaseRegime::B) => {
                (a_const * r.powf(-1.0 / beta)).min((2.0 * r * k_l1).powf(-1.0 / (beta + 1.0)))
            }
            (LinkKind::Bernoulli, CaseRegime::A) => (a_const * r.powf(-1.0 / beta))
                .min((8.0 * r * r * k_l2sq).powf(-1.0 / (2.0 * beta + 1.0))),
            (LinkKind::Bernoulli, CaseRegime::B) => {
                (a_const * r.powf(-1.0 / beta)).min((8.0 * r * k_l1).powf(-1.0 / (beta + 1.0)))
            }
            (LinkKind::GaussVar, CaseRegime::A) => (a_const * r.powf(-1.0 / beta))
                .min((r * r * k_l2sq).powf(-1.0 / (2.0 * beta + 1.0))),
            (LinkKind::GaussVar, CaseRegime::B) => a_const * r.powf(-1.0 / beta),
        };

        // The log-link small case shrinks c0 until the divergence target
        // min(n v0^{1/beta}, 1) holds; other cases hold by the formulas.
        let kl_target = if link == LinkKind::GaussVar && case == CaseRegime::B {
            (nf * small_stat.powf(1.0 / beta)).min(1.0)
        } else {
            1.0
        };
        if kl_target <= 0.0 {
            return Err(Error::Precondition(
                "log-link small case needs a strictly positive base value at x0".into(),
            ));
        }

        let mut inner = 0usize;
        loop {
            let h_n = bandwidth(link, case, c0, small_stat, beta, nf);
            if h_n <= 0.0 {
                return Err(Error::Precondition(
                    "degenerate bandwidth; base value at x0 too small for this construction".into(),
                ));
            }
            let x0_eff = x0.clamp(h_n, 1.0 - h_n);
            if x0_eff != x0 && warnings.is_empty() {
                warnings.push(format!(
                    "bump support left [0,1]; query point shifted from {x0} to {x0_eff}"
                ));
            }
            let amplitude = r * h_n.powf(beta) * eta * if subtract { -1.0 } else { 1.0 };
            let bump = FunctionDescriptor::mollifier_bump(x0_eff, h_n, amplitude);
            let f1 = FunctionDescriptor::Sum(vec![f_star.clone(), bump]);

            let range_ok = match link {
                LinkKind::Bernoulli => range_within(&f1, 0.0, 1.0),
                _ => range_within(&f1, 0.0, f64::INFINITY),
            };
            let norm_f1 = if range_ok {
                class_norm(&f1, beta, link)?
            } else {
                f64::INFINITY
            };
            let kl = if range_ok {
                link.kl_divergence(f_star, &f1, nf, KL_TOL)?
            } else {
                f64::INFINITY
            };

            if range_ok && norm_f1 <= r && kl <= kl_target {
                let sep = (f_star.evaluate(x0_eff) - f1.evaluate(x0_eff)).abs();
                let rate0 = lower_rate_at(link, beta, n, f_star.evaluate(x0_eff))?;
                let rate1 = lower_rate_at(link, beta, n, f1.evaluate(x0_eff))?;
                return Ok(HypothesisPair {
                    f0: f_star.clone(),
                    f1,
                    x0: x0_eff,
                    h_n,
                    case,
                    c0,
                    eta,
                    kl,
                    separation: sep,
                    rate_at_f0: rate0,
                    rate_at_f1: rate1,
                    warnings,
                });
            }
            last_failure = format!(
                "eta={eta:.3e} c0={c0:.3e}: range_ok={range_ok} norm={norm_f1:.4} (budget {r}) kl={kl:.4} (target {kl_target:.4})"
            );

            // Inner shrink only for the log-link small case.
            if link == LinkKind::GaussVar
                && case == CaseRegime::B
                && kl > kl_target
                && inner < MAX_HALVINGS
            {
                c0 *= 0.5;
                inner += 1;
                continue;
            }
            break;
        }
        eta *= 0.5;
    }
    Err(Error::Precondition(format!(
        "calibration did not converge; last attempt: {last_failure}"
    )))
}

fn bandwidth(link: LinkKind, case: CaseRegime, c0: f64, small_stat: f64, beta: f64, n: f64) -> f64 {
    match (link, case) {
        (LinkKind::Poisson, CaseRegime::A) | (LinkKind::Bernoulli, CaseRegime::A) => {
            c0 * (small_stat / n).powf(1.0 / (2.0 * beta + 1.0))
        }
        (LinkKind::Poisson, CaseRegime::B) | (LinkKind::Bernoulli, CaseRegime::B) => {
            c0 * n.powf(-1.0 / (beta + 1.0))
        }
        (LinkKind::GaussVar, CaseRegime::A) => {
            c0 * (small_stat * small_stat / n).powf(1.0 / (2.0 * beta + 1.0))
        }
        (LinkKind::GaussVar, CaseRegime::B) => c0 * small_stat.powf(1.0 / beta),
    }
}

fn range_within(f: &FunctionDescriptor, lo: f64, hi: f64) -> bool {
    for i in 0..=2048 {
        let x = i as f64 / 2048.0;
        let v = f.evaluate(x);
        if v < lo - 1e-12 || v > hi + 1e-12 {
            return false;
        }
    }
    true
}

/// Verify the three conditions on a built pair: class-norm membership,
/// separation at the local rate with comparable rates at both hypotheses,
/// and unit divergence budget.
pub fn verify_conditions(
    pair: &HypothesisPair,
    link: LinkKind,
    n: u64,
    r_budget: f64,
    beta: f64,
) -> Result<ConditionReport> {
    let norm_f0 = class_norm(&pair.f0, beta, link)?;
    let norm_f1 = class_norm(&pair.f1, beta, link)?;
    let cond_i = norm_f0 <= r_budget * (1.0 + 1e-9) && norm_f1 <= r_budget * (1.0 + 1e-9);

    let rate0 = lower_rate_at(link, beta, n, pair.f0.evaluate(pair.x0))?;
    let rate1 = lower_rate_at(link, beta, n, pair.f1.evaluate(pair.x0))?;
    let separation_ratio = if rate0 > 0.0 {
        pair.separation / rate0
    } else if pair.separation == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let rate_ratio = if rate0 > 0.0 {
        rate1 / rate0
    } else if rate1 == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let cond_ii = separation_ratio >= 1e-6 && (1.0 / 16.0..=16.0).contains(&rate_ratio);

    let kl = link.kl_divergence(&pair.f0, &pair.f1, n as f64, KL_TOL)?;
    let cond_iii = kl <= 1.0 + 1e-9;

    Ok(ConditionReport {
        norm_f0,
        norm_f1,
        r_budget,
        cond_i,
        separation_ratio,
        rate_ratio,
        cond_ii,
        kl,
        cond_iii,
    })
}

/// The linear-class counterexample: f0(x) = x against f1(x) = x + r_n with
/// r_n = c0 / sqrt(n log n) under the square-root link.
pub fn linear_counterexample(n: u64, c0: f64) -> Result<HypothesisPair> {
    if n < 8 {
        return Err(Error::Precondition("sample size below 8".into()));
    }
    if c0 <= 0.0 {
        return Err(Error::Precondition("c0 must be positive".into()));
    }
    let nf = n as f64;
    let r_n = c0 / (nf * nf.ln()).sqrt();
    let f0 = FunctionDescriptor::linear(1.0, 0.0);
    let f1 = FunctionDescriptor::linear(1.0, r_n);
    let kl = LinkKind::Poisson.kl_divergence(&f0, &f1, nf, KL_TOL)?;
    let rate = (nf * nf.ln()).powf(-0.5);
    Ok(HypothesisPair {
        f0,
        f1,
        x0: 0.0,
        h_n: r_n,
        case: CaseRegime::B,
        c0,
        eta: 1.0,
        kl,
        separation: r_n,
        rate_at_f0: rate,
        rate_at_f1: rate,
        warnings: Vec::new(),
    })
}

/// Closed-form bound 10 n r^2 log(1/r) on the counterexample divergence.
pub fn linear_counterexample_kl_bound(n: u64, c0: f64) -> f64 {
    let nf = n as f64;
    let r_n = c0 / (nf * nf.ln()).sqrt();
    10.0 * nf * r_n * r_n * (1.0 / r_n).ln()
}

/// Base functions exercised by the lower-bound sweeps, per link.
pub fn builtin_base_functions(link: LinkKind) -> Vec<(&'static str, FunctionDescriptor, f64, f64)> {
    // (name, descriptor, beta, x0)
    use FunctionDescriptor as Fd;
    match link {
        LinkKind::Poisson => vec![
            ("constant-half", Fd::Constant(0.5), 2.0, 0.5),
            (
                "sinsq",
                Fd::SmoothPositive(spaces::SmoothKind::SinSq),
                2.0,
                0.3,
            ),
            (
                "flat-bump",
                Fd::power_bump(0.5, 2.0, Fd::Constant(1.0)),
                2.0,
                0.5,
            ),
        ],
        LinkKind::Bernoulli => vec![
            ("constant-third", Fd::Constant(0.3), 2.0, 0.5),
            ("constant-seven-tenths", Fd::Constant(0.7), 2.0, 0.5),
            (
                "flat-bump",
                Fd::power_bump(0.5, 2.0, Fd::Constant(1.0)),
                2.0,
                0.5,
            ),
        ],
        LinkKind::GaussVar => vec![
            ("constant-half", Fd::Constant(0.5), 2.0, 0.5),
            (
                "sinsq",
                Fd::SmoothPositive(spaces::SmoothKind::SinSq),
                2.0,
                0.3,
            ),
            ("constant-tiny", Fd::Constant(9.5e-10), 2.0, 0.5),
        ],
    }
}

/// A class-ball radius with comfortable margin over the measured norm.
pub fn default_budget(desc: &FunctionDescriptor, beta: f64, link: LinkKind) -> Result<f64> {
    Ok(2.0 * class_norm(desc, beta, link)?.max(1.0))
}
