//! Pairwise β-distance matrices and the sample distance covariance and
//! correlation of discretized trajectories.
//!
//! For distance matrices `A = (‖X_k − X_l‖^β)` and `B = (‖Y_k − Y_l‖^β)` the
//! V-statistic is
//!
//! ```text
//! T_n = mean(A∘B) + mean(A)·mean(B) − 2·(1/n) Σ_k rowmean_A(k)·rowmean_B(k)
//! ```
//!
//! evaluated in O(n²) with compensated sums.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{same_partition, weighted_sq_distance, Trajectory};
use crate::sum::{self, NeumaierSum};

/// Largest sample size for which [`u_stat_t`] enumerates index tuples.
pub const U_STAT_ENUMERATION_MAX_N: usize = 12;

const DENOM_REL_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcovParams {
    beta: f64,
}

impl DcovParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 2), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for DcovParams {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

/// Symmetric `n × n` matrix of β-powered step-L² distances, zero diagonal.
///
/// Alongside the entries it keeps the same matrix divided by its largest
/// entry, with the division done before the β power. Scaling all paths by a
/// power of two leaves that copy bit-identical, so [`sample_dcor`] computed
/// from it is exactly scale invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    n: usize,
    beta: f64,
    entries: Vec<f64>,
    unit: Arc<[f64]>,
}

impl DistMatrix {
    /// Wraps a row-major matrix after checking symmetry, a zero diagonal and
    /// nonnegative entries.
    pub fn from_entries(n: usize, beta: f64, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::invalid("distance matrix must be n×n with n >= 1"));
        }
        for k in 0..n {
            if entries[k * n + k] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for l in 0..k {
                let v = entries[k * n + l];
                if !(v >= 0.0 && v.is_finite()) || v != entries[l * n + k] {
                    return Err(Error::invalid(
                        "distance matrix must be symmetric, finite and nonnegative",
                    ));
                }
            }
        }
        let max = entries.iter().copied().fold(0.0, f64::max);
        let unit = if max > 0.0 { entries.iter().map(|v| v / max).collect() } else { entries.clone().into() };
        Ok(Self { n, beta, entries, unit })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.n + l]
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.n..(k + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The matrix divided by its largest entry (all zeros if it is zero).
    pub fn normalized(&self) -> DistMatrix {
        DistMatrix { n: self.n, beta: self.beta, entries: self.unit.to_vec(), unit: self.unit.clone() }
    }

    pub fn row_means(&self) -> Vec<f64> {
        (0..self.n).map(|k| sum::mean(self.row(k))).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        sum::mean(&self.row_means())
    }

    /// Debug dump: a `n,<n>,beta,<beta>` header line, then one CSV row per matrix row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("n,{},beta,{}\n", self.n, self.beta);
        for k in 0..self.n {
            let row: Vec<String> = self.row(k).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// `entry(k, l) = step_l2_distance(paths[k], paths[l])^β`.
///
/// Rows are computed in parallel; each entry is a sequential sum, so the
/// result does not depend on the thread count.
pub fn dist_matrix(paths: &[Trajectory], params: DcovParams) -> Result<DistMatrix> {
    let n = paths.len();
    if n == 0 {
        return Err(Error::invalid("distance matrix of an empty sample"));
    }
    let partition = paths[0].partition();
    if paths.iter().any(|t| !same_partition(t.partition(), partition)) {
        return Err(Error::invalid("all paths must share one partition"));
    }
    let weights = partition.weights();
    let beta = params.beta();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let xk = paths[k].values();
            paths[k + 1..].iter().map(|other| weighted_sq_distance(xk, other.values(), weights)).collect()
        })
        .collect();
    let max = upper.iter().flatten().copied().fold(0.0, f64::max);
    let weight = power(max, beta);
    let mut entries = vec![0.0; n * n];
    let mut unit = vec![0.0; n * n];
    for (k, row) in upper.iter().enumerate() {
        for (offset, &s) in row.iter().enumerate() {
            let l = k + 1 + offset;
            let u = if max > 0.0 { power(s / max, beta) } else { 0.0 };
            let v = if beta == 1.0 { s.sqrt() } else { u * weight };
            entries[k * n + l] = v;
            entries[l * n + k] = v;
            unit[k * n + l] = u;
            unit[l * n + k] = u;
        }
    }
    Ok(DistMatrix { n, beta, entries, unit: unit.into() })
}

/// `s^{β/2}`: the β power of the distance whose square is `s`.
fn power(s: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        s.sqrt()
    } else {
        s.powf(0.5 * beta)
    }
}

fn check_same_size(a: &DistMatrix, b: &DistMatrix) -> Result<()> {
    if a.n != b.n {
        return Err(Error::invalid(format!(
            "distance matrices have sizes {} and {}",
            a.n, b.n
        )));
    }
    Ok(())
}

/// Row means and grand mean of a distance matrix, computed once.
#[derive(Debug, Clone)]
pub(crate) struct Margins {
    pub rows: Vec<f64>,
    pub grand: f64,
}

impl Margins {
    pub fn of(m: &DistMatrix) -> Self {
        let rows = m.row_means();
        let grand = sum::mean(&rows);
        Self { rows, grand }
    }
}

/// V-statistic with the `Y` pairing permuted: `B_π(k, l) = B(π_k, π_l)`.
/// `perm = None` is the identity and gives [`sample_dcov`] bit for bit.
pub(crate) fn dcov_with_margins(
    a: &DistMatrix,
    am: &Margins,
    b: &DistMatrix,
    bm: &Margins,
    perm: Option<&[usize]>,
) -> f64 {
    let n = a.n;
    let nf = n as f64;
    let mut i1 = NeumaierSum::new();
    let mut i2 = NeumaierSum::new();
    for k in 0..n {
        let ak = a.row(k);
        let mut row = NeumaierSum::new();
        match perm {
            None => {
                let bk = b.row(k);
                for l in 0..n {
                    row.add(ak[l] * bk[l]);
                }
                i2.add(am.rows[k] * bm.rows[k]);
            }
            Some(pi) => {
                let bk = b.row(pi[k]);
                for l in 0..n {
                    row.add(ak[l] * bk[pi[l]]);
                }
                i2.add(am.rows[k] * bm.rows[pi[k]]);
            }
        }
        i1.add(row.value());
    }
    let i1 = i1.value() / (nf * nf);
    let i2 = i2.value() / nf;
    let i3 = am.grand * bm.grand;
    i1 + i3 - 2.0 * i2
}

/// Sample distance covariance `T_n = I₁ + I₃ − 2·I₂`.
pub fn sample_dcov(a: &DistMatrix, b: &DistMatrix) -> Result<f64> {
    check_same_size(a, b)?;
    Ok(dcov_with_margins(a, &Margins::of(a), b, &Margins::of(b), None))
}

/// Sample distance correlation, or `Undefined` when one side is degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(v) => Some(v),
            Correlation::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Correlation::Defined(_))
    }
}

/// `T_n(X, Y) / sqrt(T_n(X, X) · T_n(Y, Y))`.
///
/// A denominator factor at or below `1e-14 · mean(A_x) · mean(A_y)` yields
/// [`Correlation::Undefined`].
pub fn sample_dcor(a_x: &DistMatrix, a_y: &DistMatrix) -> Result<Correlation> {
    check_same_size(a_x, a_y)?;
    if a_x.beta != a_y.beta {
        return Err(Error::invalid("distance matrices built with different beta"));
    }
    let (a_x, a_y) = (a_x.normalized(), a_y.normalized());
    let mx = Margins::of(&a_x);
    let my = Margins::of(&a_y);
    let txy = dcov_with_margins(&a_x, &mx, &a_y, &my, None);
    let txx = dcov_with_margins(&a_x, &mx, &a_x, &mx, None);
    let tyy = dcov_with_margins(&a_y, &my, &a_y, &my, None);
    Ok(correlation_from_parts(txy, txx, tyy, mx.grand, my.grand))
}

pub(crate) fn correlation_from_parts(
    txy: f64,
    txx: f64,
    tyy: f64,
    mean_x: f64,
    mean_y: f64,
) -> Correlation {
    let eps = DENOM_REL_EPS * mean_x * mean_y;
    if txx <= eps || tyy <= eps {
        Correlation::Undefined
    } else {
        Correlation::Defined(txy / (txx * tyy).sqrt())
    }
}

/// U-statistic version of [`sample_dcov`]: the kernel averaged over index
/// tuples with four distinct components.
///
/// Enumerates tuples for `n <= 12`, uses the closed form otherwise.
pub fn u_stat_t(a: &DistMatrix, b: &DistMatrix) -> Result<f64> {
    check_same_size(a, b)?;
    if a.n < 4 {
        return Err(Error::invalid("the U-statistic needs n >= 4"));
    }
    if a.n <= U_STAT_ENUMERATION_MAX_N {
        u_stat_t_enumerated(a, b)
    } else {
        u_stat_t_closed_form(a, b)
    }
}

/// Direct average over all `n(n−1)(n−2)(n−3)` distinct tuples; O(n⁴).
pub fn u_stat_t_enumerated(a: &DistMatrix, b: &DistMatrix) -> Result<f64> {
    check_same_size(a, b)?;
    let n = a.n;
    if n < 4 {
        return Err(Error::invalid("the U-statistic needs n >= 4"));
    }
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let aij = a.get(i, j);
            let bij = b.get(i, j);
            for k in (0..n).filter(|&k| k != i && k != j) {
                let bik = b.get(i, k);
                for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                    acc.add(aij * bij + aij * b.get(k, l) - 2.0 * aij * bik);
                }
            }
        }
    }
    let nf = n as f64;
    Ok(acc.value() / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0)))
}

/// Inclusion–exclusion form of the distinct-tuple average; O(n²).
pub fn u_stat_t_closed_form(a: &DistMatrix, b: &DistMatrix) -> Result<f64> {
    check_same_size(a, b)?;
    let n = a.n;
    if n < 4 {
        return Err(Error::invalid("the U-statistic needs n >= 4"));
    }
    let nf = n as f64;
    let mut s_ab = NeumaierSum::new();
    let mut s_a = NeumaierSum::new();
    let mut s_b = NeumaierSum::new();
    let mut s_rr = NeumaierSum::new();
    for k in 0..n {
        let (ak, bk) = (a.row(k), b.row(k));
        let ra = sum::sum(ak.iter().copied());
        let rb = sum::sum(bk.iter().copied());
        s_ab.add(sum::sum(ak.iter().zip(bk).map(|(x, y)| x * y)));
        s_a.add(ra);
        s_b.add(rb);
        s_rr.add(ra * rb);
    }
    let (s_ab, s_a, s_b, s_rr) = (s_ab.value(), s_a.value(), s_b.value(), s_rr.value());
    // Σ over distinct (i,j,k,l) of A_ij B_ij, A_ij B_kl and A_ij B_ik
    let paired = (nf - 2.0) * (nf - 3.0) * s_ab;
    let disjoint = s_a * s_b - 4.0 * s_rr + 2.0 * s_ab;
    let shared = (nf - 3.0) * (s_rr - s_ab);
    let tuples = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
    Ok((paired + disjoint - 2.0 * shared) / tuples)
}

/// `c₀(β) = ∫_ℝ (1 − e^{−s²/2}) / |s|^{1+β/2} ds` by double-exponential quadrature.
///
/// The integral is split at `s = 1`; on `[1, ∞)` the algebraic part
/// integrates to `2/β` and only the Gaussian remainder is integrated
/// numerically (it is below `e^{-800}` past `s = 40`).
pub fn c0_constant(params: DcovParams) -> Result<f64> {
    let beta = params.beta();
    let expo = 1.0 + beta / 2.0;
    let tol = 1e-12;
    let head = quadrature::integrate(
        |s: f64| {
            if s <= 0.0 {
                0.0
            } else {
                -(-s * s / 2.0).exp_m1() / s.powf(expo)
            }
        },
        0.0,
        1.0,
        tol,
    );
    let tail = quadrature::integrate(|s: f64| (-s * s / 2.0).exp() / s.powf(expo), 1.0, 40.0, tol);
    let half = head.integral + 2.0 / beta - tail.integral;
    Ok(2.0 * half)
}
