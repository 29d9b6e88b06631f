//! Dyadic point tables for scaling and wavelet functions via the cascade
//! algorithm: exact values at integers from the refinement eigenproblem,
//! then successive dyadic refinement through the two-scale relation.

use super::filters::highpass_from_lowpass;

/// Values of phi and psi on the dyadic grid i / 2^depth over [0, 2S-1].
#[derive(Debug, Clone)]
pub struct CascadeTable {
    pub depth: u32,
    pub support_len: usize,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl CascadeTable {
    pub fn build(lowpass: &[f64], depth: u32) -> Self {
        let taps = lowpass.len();
        let support_len = taps - 1;
        let phi_int = integer_values(lowpass);

        // Refine phi from integer spacing down to 2^-depth.
        let mut phi = phi_int;
        let mut level = 0u32;
        while level < depth {
            let step = 1usize << level;
            let n_new = support_len * (step * 2) + 1;
            let mut next = vec![0.0; n_new];
            for (i, slot) in next.iter_mut().enumerate() {
                if i % 2 == 0 {
                    *slot = phi[i / 2];
                } else {
                    // phi(x) = sqrt(2) sum_l h_l phi(2x - l) at x = i / 2^{level+1};
                    // the argument lands on the coarser grid at index i - l 2^level.
                    let mut acc = 0.0;
                    for (l, &h) in lowpass.iter().enumerate() {
                        let idx = i as i64 - (l * step) as i64;
                        if idx >= 0 && (idx as usize) < phi.len() {
                            acc += h * phi[idx as usize];
                        }
                    }
                    *slot = std::f64::consts::SQRT_2 * acc;
                }
            }
            phi = next;
            level += 1;
        }

        // psi at the same grid from phi values one level coarser in argument.
        let g = highpass_from_lowpass(lowpass);
        let step = 1usize << depth;
        let mut psi = vec![0.0; support_len * step + 1];
        for (i, slot) in psi.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (l, &gv) in g.iter().enumerate() {
                // Argument 2x - l at x = i/2^depth has index 2i - l*2^depth.
                let idx = 2 * i as i64 - (l * step) as i64;
                if idx >= 0 && (idx as usize) < phi.len() {
                    acc += gv * phi[idx as usize];
                }
            }
            *slot = std::f64::consts::SQRT_2 * acc;
        }

        CascadeTable {
            depth,
            support_len,
            phi,
            psi,
        }
    }

    /// Piecewise-linear evaluation of phi at u in [0, support_len].
    pub fn eval_phi(&self, u: f64) -> f64 {
        eval_table(&self.phi, self.depth, self.support_len, u)
    }

    /// Piecewise-linear evaluation of psi at u in [0, support_len].
    pub fn eval_psi(&self, u: f64) -> f64 {
        eval_table(&self.psi, self.depth, self.support_len, u)
    }

    /// Centroid of phi, used as the sampling offset in fast projections.
    pub fn phi_centroid(&self) -> f64 {
        let h = (self.support_len as f64) / (self.phi.len() - 1) as f64;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for (i, &v) in self.phi.iter().enumerate() {
            let w = if i == 0 || i == self.phi.len() - 1 {
                0.5
            } else {
                1.0
            };
            let x = i as f64 * h;
            m0 += w * v;
            m1 += w * v * x;
        }
        m1 / m0
    }
}

fn eval_table(table: &[f64], depth: u32, support_len: usize, u: f64) -> f64 {
    if u <= 0.0 || u >= support_len as f64 {
        return 0.0;
    }
    let pos = u * (1u64 << depth) as f64;
    let idx = pos.floor() as usize;
    let frac = pos - idx as f64;
    if idx + 1 >= table.len() {
        return table[table.len() - 1];
    }
    table[idx] + frac * (table[idx + 1] - table[idx])
}

/// Exact values of phi at the integers: the fixed point of the refinement
/// matrix M[m][u] = sqrt(2) h_{2m-u}, normalized to sum to one.
fn integer_values(lowpass: &[f64]) -> Vec<f64> {
    let taps = lowpass.len();
    let support_len = taps - 1;
    if taps == 2 {
        // Haar: phi = indicator of [0,1); the table convention stores the
        // left endpoint value 1 and the right endpoint 0.
        return vec![1.0, 0.0];
    }
    let n = support_len - 1; // interior integers 1..=support_len-1
    let mut a = vec![vec![0.0; n + 1]; n];
    for m in 1..support_len {
        for u in 1..support_len {
            let l = 2 * m as i64 - u as i64;
            if l >= 0 && (l as usize) < taps {
                a[m - 1][u - 1] += std::f64::consts::SQRT_2 * lowpass[l as usize];
            }
        }
        a[m - 1][m - 1] -= 1.0;
    }
    // Replace the last equation with the normalization sum = 1.
    for slot in a[n - 1].iter_mut().take(n) {
        *slot = 1.0;
    }
    a[n - 1][n] = 1.0;
    let sol = solve_dense(&mut a);
    let mut out = vec![0.0; taps];
    out[1..support_len].copy_from_slice(&sol);
    out
}

/// Gaussian elimination with partial pivoting on an augmented system.
fn solve_dense(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        let p = pivot_row[col];
        for (row, target) in a.iter_mut().enumerate() {
            if row != col && target[col] != 0.0 {
                let factor = target[col] / p;
                for (slot, &pv) in target[col..=n].iter_mut().zip(&pivot_row[col..=n]) {
                    *slot -= factor * pv;
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}
