//! Calibration of the independence test.
//!
//! The observed statistic is `n·T_n`. Under independence it converges to
//! `6·Σ λᵢ(Nᵢ² − 1) + c`, where the `λᵢ` are the eigenvalues of `h₂` and
//! `c = E‖X₁−X₂‖^β·E‖Y₁−Y₂‖^β`. The bootstrap reference is `6·U* + ĉ` with
//! `U* = (1/n)·Σ_{i≠j} h₂(Z*ᵢ, Z*ⱼ)` and `ĉ` the product of grand means.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcov::{dcov_with_margins, dist_matrix, DcovParams, DistMatrix, Margins};
use crate::error::{Error, Result};
use crate::grid::PairedSample;
use crate::kernels::{h2_matrix, CenteredMatrix, H2Matrix, KernelContext};
use crate::rng::RngSpec;
use crate::sum::NeumaierSum;

pub const SCALE_FACTOR: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Resample pairs from the joint empirical law.
    BootstrapPaired,
    /// Resample `X` and `Y` indices independently from the two marginals.
    BootstrapProduct,
    Permutation,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BootstrapPaired, Method::BootstrapProduct, Method::Permutation];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BootstrapPaired => "bootstrap_paired",
            Method::BootstrapProduct => "bootstrap_product",
            Method::Permutation => "permutation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub shift_estimate: f64,
    pub scale_factor: f64,
    /// Set when every `X` path or every `Y` path is the same; the test is
    /// then uninformative and reports `p = 1`.
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_sample: Vec<f64>,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value <= level
    }

    /// Same result without the reference sample, for compact output.
    pub fn summary(&self) -> Self {
        Self { reference_sample: Vec::new(), ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `(1 + #{r ≥ statistic}) / (B + 1)`.
pub fn monte_carlo_p_value(statistic: f64, reference: &[f64]) -> f64 {
    let exceed = reference.iter().filter(|&&r| r >= statistic).count();
    (1 + exceed) as f64 / (reference.len() + 1) as f64
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    if indices.len() != n {
        return Err(Error::invalid(format!("expected {n} indices, got {}", indices.len())));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("index {bad} out of range for n = {n}")));
    }
    Ok(())
}

fn counts(n: usize, indices: &[usize]) -> Vec<(usize, f64)> {
    let mut c = vec![0usize; n];
    for &i in indices {
        c[i] += 1;
    }
    c.into_iter()
        .enumerate()
        .filter(|&(_, k)| k > 0)
        .map(|(i, k)| (i, k as f64))
        .collect()
}

/// `(1/n)·Σ_{i≠j} H2(indices[i], indices[j])`.
pub fn u_boot(h2: &H2Matrix, indices: &[usize]) -> Result<f64> {
    check_indices(h2.n(), indices)?;
    Ok(u_boot_unchecked(h2, indices))
}

fn u_boot_unchecked(h2: &H2Matrix, indices: &[usize]) -> f64 {
    // Σ_{i≠j} H(idx_i, idx_j) = Σ_{k,l} c_k c_l H(k,l) − Σ_k c_k H(k,k)
    let c = counts(h2.n(), indices);
    let mut total = NeumaierSum::new();
    for &(k, ck) in &c {
        let row = h2.row(k);
        let mut inner = NeumaierSum::new();
        for &(l, cl) in &c {
            inner.add(cl * row[l]);
        }
        total.add(ck * inner.value() - ck * row[k]);
    }
    total.value() / indices.len() as f64
}

/// `(1/n)·Σ_{k≠l} (1/6)·Ã(ix_k, ix_l)·B̃(iy_k, iy_l)`.
pub fn u_boot_product(a: &CenteredMatrix, b: &CenteredMatrix, ix: &[usize], iy: &[usize]) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!("centered matrices have sizes {} and {}", a.n(), b.n())));
    }
    check_indices(a.n(), ix)?;
    check_indices(b.n(), iy)?;
    Ok(u_boot_product_unchecked(a, b, ix, iy))
}

fn u_boot_product_unchecked(a: &CenteredMatrix, b: &CenteredMatrix, ix: &[usize], iy: &[usize]) -> f64 {
    let n = ix.len();
    let mut total = NeumaierSum::new();
    for k in 0..n {
        let ar = a.row(ix[k]);
        let br = b.row(iy[k]);
        let mut inner = NeumaierSum::new();
        for l in 0..n {
            if l != k {
                inner.add(ar[ix[l]] * br[iy[l]]);
            }
        }
        total.add(inner.value());
    }
    total.value() / (6.0 * n as f64)
}

fn draw_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn check_sizes(n: usize, b: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::invalid(format!("need at least 4 pairs, got {n}")));
    }
    if b == 0 {
        return Err(Error::invalid("number of replicates B must be positive"));
    }
    Ok(())
}

fn matrices(sample: &PairedSample, params: DcovParams) -> Result<(DistMatrix, DistMatrix)> {
    Ok((dist_matrix(sample.x(), params)?, dist_matrix(sample.y(), params)?))
}

fn null_from_matrices(a: DistMatrix, b: DistMatrix, reps: usize, rng: &RngSpec, method: Method) -> Result<Vec<f64>> {
    let n = a.n();
    match method {
        Method::BootstrapPaired => {
            let h2 = h2_matrix(&KernelContext::new(a, b)?)?;
            Ok((1..=reps as u64)
                .into_par_iter()
                .map(|r| u_boot_unchecked(&h2, &draw_indices(n, &mut rng.stream(r))))
                .collect())
        }
        Method::BootstrapProduct => {
            let (ac, bc) = (CenteredMatrix::new(&a), CenteredMatrix::new(&b));
            Ok((1..=reps as u64)
                .into_par_iter()
                .map(|r| {
                    let mut s = rng.stream(r);
                    let ix = draw_indices(n, &mut s);
                    let iy = draw_indices(n, &mut s);
                    u_boot_product_unchecked(&ac, &bc, &ix, &iy)
                })
                .collect())
        }
        Method::Permutation => Err(Error::invalid("permutation has no bootstrap null; use permutation_test")),
    }
}

/// `B` bootstrap replicates of `U*`; replicate `b` uses stream `b` of `rng`.
pub fn bootstrap_null(
    sample: &PairedSample,
    params: DcovParams,
    reps: usize,
    rng: &RngSpec,
    method: Method,
) -> Result<Vec<f64>> {
    check_sizes(sample.len(), reps)?;
    let (a, b) = matrices(sample, params)?;
    null_from_matrices(a, b, reps, rng, method)
}

fn is_constant(m: &DistMatrix) -> bool {
    m.entries().iter().all(|&v| v == 0.0)
}

fn degenerate_result(reps: usize, rng: &RngSpec, method: Method, scale_factor: f64) -> TestResult {
    TestResult {
        statistic: 0.0,
        p_value: 1.0,
        method,
        b: reps,
        seed: rng.master_seed(),
        shift_estimate: 0.0,
        scale_factor,
        degenerate: true,
        reference_sample: vec![0.0; reps],
    }
}

/// Bootstrap test of independence, or the permutation test for
/// [`Method::Permutation`].
pub fn independence_test(
    sample: &PairedSample,
    params: DcovParams,
    reps: usize,
    rng: &RngSpec,
    method: Method,
) -> Result<TestResult> {
    if method == Method::Permutation {
        return permutation_test(sample, params, reps, rng);
    }
    check_sizes(sample.len(), reps)?;
    let (a, b) = matrices(sample, params)?;
    if is_constant(&a) || is_constant(&b) {
        return Ok(degenerate_result(reps, rng, method, SCALE_FACTOR));
    }
    let n = a.n() as f64;
    let (am, bm) = (Margins::of(&a), Margins::of(&b));
    let statistic = n * dcov_with_margins(&a, &am, &b, &bm, None);
    let shift = am.grand * bm.grand;
    let reference: Vec<f64> = null_from_matrices(a, b, reps, rng, method)?
        .into_iter()
        .map(|u| SCALE_FACTOR * u + shift)
        .collect();
    Ok(TestResult {
        statistic,
        p_value: monte_carlo_p_value(statistic, &reference),
        method,
        b: reps,
        seed: rng.master_seed(),
        shift_estimate: shift,
        scale_factor: SCALE_FACTOR,
        degenerate: false,
        reference_sample: reference,
    })
}

/// Permutation test: reference `b` is `n·T_n` with the `Y` labels shuffled
/// by a uniform permutation drawn from stream `b`.
pub fn permutation_test(sample: &PairedSample, params: DcovParams, reps: usize, rng: &RngSpec) -> Result<TestResult> {
    check_sizes(sample.len(), reps)?;
    let (a, b) = matrices(sample, params)?;
    if is_constant(&a) || is_constant(&b) {
        return Ok(degenerate_result(reps, rng, Method::Permutation, 1.0));
    }
    let n = a.n();
    let (am, bm) = (Margins::of(&a), Margins::of(&b));
    let statistic = n as f64 * dcov_with_margins(&a, &am, &b, &bm, None);
    let reference: Vec<f64> = (1..=reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut pi: Vec<usize> = (0..n).collect();
            pi.shuffle(&mut rng.stream(r));
            n as f64 * dcov_with_margins(&a, &am, &b, &bm, Some(&pi))
        })
        .collect();
    Ok(TestResult {
        statistic,
        p_value: monte_carlo_p_value(statistic, &reference),
        method: Method::Permutation,
        b: reps,
        seed: rng.master_seed(),
        shift_estimate: 0.0,
        scale_factor: 1.0,
        degenerate: false,
        reference_sample: reference,
    })
}
