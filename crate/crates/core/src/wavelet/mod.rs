//! Orthonormal wavelet bases on the unit interval: periodized Daubechies
//! families and Haar, the orthogonal analysis/synthesis transform on dyadic
//! grids, exact coefficient quadrature against the cascade representation,
//! and decay profiles of coefficient trees.

mod cascade;
mod filters;

pub use cascade::CascadeTable;
pub use filters::{daubechies_lowpass, highpass_from_lowpass};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// Resolution of the cascade point tables: 2^-8 per unit of support.
const DEFAULT_TABLE_DEPTH: u32 = 8;

/// Wavelet family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    /// Periodized Daubechies with the given number of vanishing moments.
    DaubechiesPeriodized(u32),
}

impl WaveletFamily {
    /// Number of vanishing moments of the family member.
    pub fn vanishing_moments(&self) -> u32 {
        match self {
            WaveletFamily::Haar => 1,
            WaveletFamily::DaubechiesPeriodized(s) => *s,
        }
    }
}

/// An orthonormal wavelet basis of L^2 on the unit interval with levels
/// j0..=jmax plus 2^{j0} scaling functions at the coarse level.
#[derive(Debug, Clone)]
pub struct WaveletBasis {
    pub family: WaveletFamily,
    pub j0: u32,
    pub jmax: u32,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    table: Option<CascadeTable>,
}

impl WaveletBasis {
    pub fn new(family: WaveletFamily, jmax: u32) -> Result<Self> {
        let s = family.vanishing_moments();
        if s == 0 {
            return Err(Error::Config("vanishing moments must be >= 1".into()));
        }
        let j0 = match family {
            WaveletFamily::Haar => 0,
            // Periodization constraint: supports wrap at most once.
            WaveletFamily::DaubechiesPeriodized(s) => ((2 * s) as f64).log2().ceil() as u32,
        };
        if jmax <= j0 {
            return Err(Error::Config(format!(
                "finest level {jmax} must exceed coarse level {j0}"
            )));
        }
        if jmax > 26 {
            return Err(Error::Config(format!("finest level {jmax} exceeds 26")));
        }
        let haar_like = s == 1;
        let lowpass = if haar_like {
            let v = std::f64::consts::FRAC_1_SQRT_2;
            vec![v, v]
        } else {
            filters::daubechies_lowpass(s)?
        };
        let highpass = filters::highpass_from_lowpass(&lowpass);
        let table = if haar_like {
            None
        } else {
            Some(CascadeTable::build(&lowpass, DEFAULT_TABLE_DEPTH))
        };
        Ok(WaveletBasis {
            family,
            j0,
            jmax,
            lowpass,
            highpass,
            table,
        })
    }

    /// Support length of the mother functions in integer units (1 for Haar).
    pub fn support_len(&self) -> usize {
        self.lowpass.len() - 1
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    /// Number of wavelet indices at level j (2^j for periodized bases).
    pub fn level_size(&self, j: u32) -> usize {
        1usize << j
    }

    /// Mother scaling function at u (cascade interpolant; exact for Haar).
    pub fn mother_phi(&self, u: f64) -> f64 {
        match &self.table {
            None => {
                if (0.0..1.0).contains(&u) {
                    1.0
                } else {
                    0.0
                }
            }
            Some(t) => t.eval_phi(u),
        }
    }

    /// Mother wavelet at u (cascade interpolant; exact for Haar).
    pub fn mother_psi(&self, u: f64) -> f64 {
        match &self.table {
            None => {
                if (0.0..0.5).contains(&u) {
                    1.0
                } else if (0.5..1.0).contains(&u) {
                    -1.0
                } else {
                    0.0
                }
            }
            Some(t) => t.eval_psi(u),
        }
    }

    /// Periodized scaling function phi_{j0,k}(x).
    pub fn scaling_at(&self, k: usize, x: f64) -> f64 {
        self.periodized(self.j0, k, x, true)
    }

    /// Periodized wavelet psi_{j,k}(x).
    pub fn wavelet_at(&self, j: u32, k: usize, x: f64) -> f64 {
        self.periodized(j, k, x, false)
    }

    fn periodized(&self, j: u32, k: usize, x: f64, scaling: bool) -> f64 {
        let m = (1u64 << j) as f64;
        let mut w = (m * x - k as f64).rem_euclid(m);
        // A support wider than the period never occurs for j >= j0, but the
        // wrapped copy one period down can still overlap [0, L).
        let l = self.support_len() as f64;
        if w >= l {
            w -= m;
            if w < 0.0 {
                return 0.0;
            }
        }
        let base = if scaling {
            self.mother_phi(w)
        } else {
            self.mother_psi(w)
        };
        m.sqrt() * base
    }

    /// Wavelet indices at level j whose (wrapped) support contains x.
    pub fn covering_indices(&self, j: u32, x: f64) -> impl Iterator<Item = usize> {
        let m = 1i64 << j;
        let u = ((1u64 << j) as f64 * x).floor() as i64;
        let l = self.support_len() as i64;
        (0..l).map(move |d| (u - d).rem_euclid(m) as usize)
    }
}

/// Provenance of the coefficients held in a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    Clean,
    Noisy,
    Thresholded,
}

/// Leveled array of wavelet coefficients: 2^{j0} scaling entries plus one
/// dyadic block per level j0..=jmax.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTree {
    pub j0: u32,
    pub jmax: u32,
    pub scaling: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub kind: TreeKind,
}

impl CoefficientTree {
    pub fn zero(j0: u32, jmax: u32, kind: TreeKind) -> Self {
        let details = (j0..=jmax).map(|j| vec![0.0; 1usize << j]).collect();
        CoefficientTree {
            j0,
            jmax,
            scaling: vec![0.0; 1usize << j0],
            details,
            kind,
        }
    }

    /// Detail block for level j.
    pub fn level(&self, j: u32) -> &[f64] {
        &self.details[(j - self.j0) as usize]
    }

    pub fn level_mut(&mut self, j: u32) -> &mut [f64] {
        &mut self.details[(j - self.j0) as usize]
    }

    /// Number of stored coefficients (scaling plus all detail levels).
    pub fn len(&self) -> usize {
        self.scaling.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterate all entries as (level, k, value); scaling entries carry level = None.
    pub fn entries(&self) -> impl Iterator<Item = (Option<u32>, usize, f64)> + '_ {
        let scaling = self.scaling.iter().enumerate().map(|(k, &v)| (None, k, v));
        let details = self.details.iter().enumerate().flat_map(move |(d, block)| {
            let j = self.j0 + d as u32;
            block.iter().enumerate().map(move |(k, &v)| (Some(j), k, v))
        });
        scaling.chain(details)
    }

    /// Largest absolute entry-wise difference against another tree.
    pub fn sup_distance(&self, other: &CoefficientTree) -> f64 {
        let mut worst = (self.scaling.len() as i64 - other.scaling.len() as i64).abs() as f64;
        if worst > 0.0 {
            return f64::INFINITY;
        }
        for (a, b) in self.scaling.iter().zip(&other.scaling) {
            worst = worst.max((a - b).abs());
        }
        for (da, db) in self.details.iter().zip(&other.details) {
            for (a, b) in da.iter().zip(db) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    fn validate_against(&self, basis: &WaveletBasis) -> Result<()> {
        if self.j0 != basis.j0 || self.jmax > basis.jmax {
            return Err(Error::Config(format!(
                "tree levels [{}, {}] do not fit basis levels [{}, {}]",
                self.j0, self.jmax, basis.j0, basis.jmax
            )));
        }
        if self.scaling.len() != 1usize << self.j0 {
            return Err(Error::Config("scaling block has the wrong length".into()));
        }
        for (d, block) in self.details.iter().enumerate() {
            if block.len() != 1usize << (self.j0 + d as u32) {
                return Err(Error::Config(format!(
                    "detail block at level {} has the wrong length",
                    self.j0 + d as u32
                )));
            }
        }
        Ok(())
    }
}

/// Address of a single basis coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffIndex {
    Scaling(usize),
    Wavelet(u32, usize),
}

fn check_dyadic_grid(n: usize, basis: &WaveletBasis) -> Result<u32> {
    if !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "grid length {n} is not a power of two"
        )));
    }
    let lg = n.trailing_zeros();
    if lg < basis.jmax + 3 {
        return Err(Error::Config(format!(
            "grid length {n} is below the required 2^(jmax+3) = {}",
            1u64 << (basis.jmax + 3)
        )));
    }
    Ok(lg)
}

fn forward_step(a: &[f64], lowpass: &[f64], highpass: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n1 = a.len();
    let half = n1 / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for (m, (&h, &g)) in lowpass.iter().zip(highpass).enumerate() {
            let v = a[(2 * k + m) % n1];
            sa += h * v;
            sd += g * v;
        }
        approx[k] = sa;
        detail[k] = sd;
    }
    (approx, detail)
}

fn inverse_step(approx: &[f64], detail: &[f64], lowpass: &[f64], highpass: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n1 = 2 * half;
    let mut out = vec![0.0; n1];
    for k in 0..half {
        let av = approx[k];
        let dv = detail[k];
        for (m, (&h, &g)) in lowpass.iter().zip(highpass).enumerate() {
            out[(2 * k + m) % n1] += h * av + g * dv;
        }
    }
    out
}

/// Decompose midpoint samples of g into the coefficient tree of the basis.
///
/// The grid must be dyadic with at least 2^{jmax+3} points; the transform is
/// the orthogonal periodized filter bank, so composition with [`synthesize`]
/// reproduces g on the span of the basis exactly.
pub fn analyze(samples: &[f64], basis: &WaveletBasis) -> Result<CoefficientTree> {
    let lg = check_dyadic_grid(samples.len(), basis)?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(
            "grid samples contain a non-finite value".into(),
        ));
    }
    let scale = 1.0 / (samples.len() as f64).sqrt();
    let mut a: Vec<f64> = samples.iter().map(|v| v * scale).collect();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut j = lg;
    while j > basis.j0 {
        let (approx, detail) = forward_step(&a, &basis.lowpass, &basis.highpass);
        a = approx;
        j -= 1;
        if j <= basis.jmax {
            blocks.push(detail);
        }
    }
    blocks.reverse();
    let tree = CoefficientTree {
        j0: basis.j0,
        jmax: basis.jmax,
        scaling: a,
        details: blocks,
        kind: TreeKind::Clean,
    };
    tree.validate_against(basis)?;
    Ok(tree)
}

/// Reconstruct midpoint samples from a coefficient tree: the pointwise sum
/// of coefficient-weighted basis functions on the dyadic grid.
pub fn synthesize(
    tree: &CoefficientTree,
    basis: &WaveletBasis,
    n_points: usize,
) -> Result<Vec<f64>> {
    tree.validate_against(basis)?;
    let lg = check_dyadic_grid(n_points, basis)?;
    let mut a = tree.scaling.clone();
    for block in &tree.details {
        a = inverse_step(&a, block, &basis.lowpass, &basis.highpass);
    }
    let mut j = tree.jmax + 1;
    while j < lg {
        let zeros = vec![0.0; a.len()];
        a = inverse_step(&a, &zeros, &basis.lowpass, &basis.highpass);
        j += 1;
    }
    let scale = (n_points as f64).sqrt();
    Ok(a.into_iter().map(|v| v * scale).collect())
}

/// Midpoint grid x_m = (m + 1/2)/n used by the dyadic transforms.
pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (0..n).map(|m| (m as f64 + 0.5) / n as f64).collect()
}

/// Evaluate the coefficient-weighted basis expansion at arbitrary points.
pub fn evaluate_tree(tree: &CoefficientTree, basis: &WaveletBasis, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let mut acc = 0.0;
            for (k, &c) in tree.scaling.iter().enumerate() {
                if c != 0.0 {
                    acc += c * basis.scaling_at(k, x);
                }
            }
            for (d, block) in tree.details.iter().enumerate() {
                let j = tree.j0 + d as u32;
                for k in basis.covering_indices(j, x) {
                    let c = block[k];
                    if c != 0.0 {
                        acc += c * basis.wavelet_at(j, k, x);
                    }
                }
            }
            acc
        })
        .collect()
}

/// Exact coefficient of an arbitrary integrand against one basis function,
/// by composite Gauss-Legendre over the dyadic cells of the (wrapped)
/// support at the cascade representation's native resolution.
pub fn coeff_exact_fn<F: FnMut(f64) -> f64>(
    mut g: F,
    index: CoeffIndex,
    basis: &WaveletBasis,
    quad_order: usize,
) -> Result<f64> {
    if quad_order < 8 {
        return Err(Error::Config(format!(
            "quadrature order {quad_order} is below the minimum of 8"
        )));
    }
    let (j, k, scaling) = match index {
        CoeffIndex::Scaling(k) => (basis.j0, k, true),
        CoeffIndex::Wavelet(j, k) => {
            if j < basis.j0 || j > basis.jmax {
                return Err(Error::Config(format!(
                    "level {j} outside basis range [{}, {}]",
                    basis.j0, basis.jmax
                )));
            }
            (j, k, false)
        }
    };
    if k >= 1usize << j {
        return Err(Error::Config(format!(
            "index {k} out of range at level {j}"
        )));
    }

    let rule = GaussLegendre::cached(quad_order);
    let scale = (1u64 << j) as f64;
    let base = k as f64 / scale;
    let support = basis.support_len() as f64;

    // Cells follow the piecewise structure of the representation: dyadic
    // refinements of the two half-cells for Haar (endpoint-singular
    // integrands converge under the composite rule), the cascade table
    // cells otherwise.
    let cells_per_unit: usize = match &basis.table {
        None => 16,
        Some(t) => 1usize << t.depth,
    };
    let n_cells = (support * cells_per_unit as f64).round() as usize;
    let cell_width = support / (n_cells as f64 * scale);

    let mut acc = 0.0;
    for c in 0..n_cells {
        let lo_u = c as f64 * support / n_cells as f64;
        let x_lo = base + lo_u / scale;
        for (node, w) in rule.nodes.iter().zip(&rule.weights) {
            let t01 = 0.5 * (node + 1.0);
            let u = lo_u + t01 * support / n_cells as f64;
            let x = (x_lo + t01 * cell_width).rem_euclid(1.0);
            let gv = g(x);
            if !gv.is_finite() {
                return Err(Error::Integrability {
                    location: x,
                    reason: "integrand is not finite inside the wavelet support".into(),
                });
            }
            let bv = if scaling {
                basis.mother_phi(u)
            } else {
                basis.mother_psi(u)
            };
            acc += w * gv * bv;
        }
    }
    Ok(acc * 0.5 * cell_width * scale.sqrt())
}

/// [`coeff_exact_fn`] for a descriptor-backed integrand.
pub fn coeff_exact(
    g: &crate::spaces::FunctionDescriptor,
    index: CoeffIndex,
    basis: &WaveletBasis,
    quad_order: usize,
) -> Result<f64> {
    coeff_exact_fn(|x| g.evaluate(x), index, basis, quad_order)
}

/// Per-level maxima of absolute detail coefficients m_j, j = j0..=jmax.
pub fn decay_profile(tree: &CoefficientTree) -> Result<Vec<f64>> {
    if tree.kind != TreeKind::Clean {
        return Err(Error::Precondition(
            "decay profiles are defined for clean trees".into(),
        ));
    }
    Ok(tree
        .details
        .iter()
        .map(|block| block.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect())
}

/// Per-level maxima restricted to wavelets whose unwrapped support lies in
/// [margin, 1-margin]; periodization makes seam-crossing coefficients decay
/// at the boundary rate for non-periodic signals, so interior maxima are the
/// meaningful decay statistic.
pub fn interior_level_maxima(
    tree: &CoefficientTree,
    basis: &WaveletBasis,
    margin: f64,
) -> Vec<f64> {
    let support = basis.support_len() as f64;
    tree.details
        .iter()
        .enumerate()
        .map(|(d, block)| {
            let j = tree.j0 + d as u32;
            let scale = (1u64 << j) as f64;
            block
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let lo = *k as f64 / scale;
                    let hi = (*k as f64 + support) / scale;
                    lo >= margin && hi <= 1.0 - margin
                })
                .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
        })
        .collect()
}

/// Least-squares slope of log2(values) against the level index, skipping
/// zero entries. Used to estimate coefficient decay exponents.
pub fn fit_log2_slope(levels: &[u32], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(j, v)| (*j as f64, v.log2()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Clean coefficient tree of an arbitrary integrand up to level j_top.
///
/// Haar supports an exact cell-integral recursion; other families project
/// centroid-corrected fine-scale samples through the orthogonal pyramid.
pub fn clean_tree_fn<F: FnMut(f64) -> f64>(
    mut g: F,
    basis: &WaveletBasis,
    j_top: u32,
    quad_order: usize,
) -> Result<CoefficientTree> {
    if j_top < basis.j0 || j_top > basis.jmax {
        return Err(Error::Config(format!(
            "requested top level {j_top} outside basis range [{}, {}]",
            basis.j0, basis.jmax
        )));
    }
    match &basis.table {
        None => {
            // Exact Haar path: Gauss-Legendre cell integrals at level
            // j_top+1, then the binary combine.
            let rule = GaussLegendre::cached(quad_order);
            let fine = 1usize << (j_top + 1);
            let width = 1.0 / fine as f64;
            let mut cells = Vec::with_capacity(fine);
            for c in 0..fine {
                let lo = c as f64 * width;
                let mut acc = 0.0;
                for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                    let x = lo + 0.5 * (node + 1.0) * width;
                    let gv = g(x);
                    if !gv.is_finite() {
                        return Err(Error::Integrability {
                            location: x,
                            reason: "integrand is not finite".into(),
                        });
                    }
                    acc += w * gv;
                }
                cells.push(acc * 0.5 * width);
            }
            let mut tree = CoefficientTree::zero(basis.j0, j_top, TreeKind::Clean);
            let mut j = j_top;
            loop {
                // d_{j,k} = 2^{j/2} (I_{j+1,2k} - I_{j+1,2k+1}) on cell integrals.
                let scale = ((1u64 << j) as f64).sqrt();
                let coarse: Vec<f64> = (0..cells.len() / 2)
                    .map(|k| cells[2 * k] + cells[2 * k + 1])
                    .collect();
                {
                    let block = tree.level_mut(j);
                    for (k, slot) in block.iter_mut().enumerate() {
                        *slot = scale * (cells[2 * k] - cells[2 * k + 1]);
                    }
                }
                cells = coarse;
                if j == basis.j0 {
                    break;
                }
                j -= 1;
            }
            let scale0 = ((1u64 << basis.j0) as f64).sqrt();
            for (k, slot) in tree.scaling.iter_mut().enumerate() {
                *slot = scale0 * cells[k];
            }
            Ok(tree)
        }
        Some(table) => {
            let fine_level = (j_top + 4).min(26);
            let n = 1usize << fine_level;
            let offset = table.phi_centroid();
            let norm = 1.0 / (n as f64).sqrt();
            let mut a = Vec::with_capacity(n);
            for m in 0..n {
                let x = ((m as f64 + offset) / n as f64).rem_euclid(1.0);
                let gv = g(x);
                if !gv.is_finite() {
                    return Err(Error::Integrability {
                        location: x,
                        reason: "integrand is not finite".into(),
                    });
                }
                a.push(gv * norm);
            }
            let mut blocks: Vec<Vec<f64>> = Vec::new();
            let mut j = fine_level;
            while j > basis.j0 {
                let (approx, detail) = forward_step(&a, &basis.lowpass, &basis.highpass);
                a = approx;
                j -= 1;
                if j <= j_top {
                    blocks.push(detail);
                }
            }
            blocks.reverse();
            Ok(CoefficientTree {
                j0: basis.j0,
                jmax: j_top,
                scaling: a,
                details: blocks,
                kind: TreeKind::Clean,
            })
        }
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_tree(j0: u32, jmax: u32) -> impl Strategy<Value = CoefficientTree> {
        let total: usize = (1usize << j0) + (j0..=jmax).map(|j| 1usize << j).sum::<usize>();
        proptest::collection::vec(-10.0f64..10.0, total).prop_map(move |values| {
            let mut tree = CoefficientTree::zero(j0, jmax, TreeKind::Clean);
            let mut it = values.into_iter();
            for s in tree.scaling.iter_mut() {
                *s = it.next().unwrap();
            }
            for block in tree.details.iter_mut() {
                for v in block.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
            tree
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn haar_transform_round_trips_arbitrary_trees(tree in arb_tree(0, 5)) {
            let basis = WaveletBasis::new(WaveletFamily::Haar, 5).unwrap();
            let grid = synthesize(&tree, &basis, 1 << 8).unwrap();
            let back = analyze(&grid, &basis).unwrap();
            prop_assert!(tree.sup_distance(&back) <= 1e-9);
        }

        #[test]
        fn db2_transform_round_trips_arbitrary_trees(tree in arb_tree(2, 5)) {
            let basis = WaveletBasis::new(WaveletFamily::DaubechiesPeriodized(2), 5).unwrap();
            let grid = synthesize(&tree, &basis, 1 << 8).unwrap();
            let back = analyze(&grid, &basis).unwrap();
            prop_assert!(tree.sup_distance(&back) <= 1e-9);
        }

        #[test]
        fn synthesis_is_linear(
            tree_a in arb_tree(0, 4),
            tree_b in arb_tree(0, 4),
            scale in -3.0f64..3.0,
        ) {
            let basis = WaveletBasis::new(WaveletFamily::Haar, 4).unwrap();
            let mut combined = tree_a.clone();
            for (s, o) in combined.scaling.iter_mut().zip(&tree_b.scaling) {
                *s += scale * o;
            }
            for (block, other) in combined.details.iter_mut().zip(&tree_b.details) {
                for (v, o) in block.iter_mut().zip(other) {
                    *v += scale * o;
                }
            }
            let n = 1usize << 7;
            let ga = synthesize(&tree_a, &basis, n).unwrap();
            let gb = synthesize(&tree_b, &basis, n).unwrap();
            let gc = synthesize(&combined, &basis, n).unwrap();
            for ((a, b), c) in ga.iter().zip(&gb).zip(&gc) {
                prop_assert!((a + scale * b - c).abs() <= 1e-9);
            }
        }
    }
}
