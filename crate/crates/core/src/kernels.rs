//! The order-4 kernel behind the sample distance covariance, its
//! symmetrization, and the second-order Hoeffding projection used by the
//! bootstrap.
//!
//! With `a_kl = ‖x_k − x_l‖^β` and `b_kl = ‖y_k − y_l‖^β`,
//!
//! ```text
//! f(z1, z2, z3, z4) = a12·b12 + a12·b34 − 2·a12·b13
//! h(z1, z2, z3, z4) = (1/24) Σ_{σ ∈ S4} f(z_σ1, z_σ2, z_σ3, z_σ4)
//! ```
//!
//! and the V-statistic of `f` (or `h`) over all `n⁴` index tuples is the
//! sample distance covariance.
//!
//! # Projection against the empirical law
//!
//! Let `g(a, b) = E h(z_a, z_b, Z, Z′)` with `Z, Z′` drawn with replacement
//! from the sample. The 24 permutations place `z_a, z_b` in each ordered pair
//! of slots twice; averaging `f` over the free slots gives, up to terms that
//! depend on `a` alone, on `b` alone or on neither,
//!
//! ```text
//! 6·g(a, b) ≃ A_ab·B_ab + A_ab·m_B + m_A·B_ab
//!           + 2·(r_A(a)·r_B(b) + r_A(b)·r_B(a))
//!           − A_ab·(r_B(a) + r_B(b)) − B_ab·(r_A(a) + r_A(b))
//!           − (C_ab + C_ba)
//! ```
//!
//! where `r` are row means, `m` grand means and `C_ab = mean_k A_ak·B_bk`.
//! The projection `h₂(a, b) = g(a, b) − g₁(a) − g₁(b) + θ` is the double
//! centering of `g`, which removes the additive terms, so `h₂` is the double
//! centering of the right-hand side above.

use rayon::prelude::*;

use crate::dcov::{DistMatrix, Margins};
use crate::error::{Error, Result};
use crate::sum::{self, NeumaierSum};

/// Distance matrices of one paired sample plus the aggregates the kernels need.
#[derive(Debug, Clone)]
pub struct KernelContext {
    a: DistMatrix,
    b: DistMatrix,
    a_margins: Margins,
    b_margins: Margins,
    /// `cross[a·n + b] = mean_j A(a, j)·B(b, j)`
    cross: Vec<f64>,
}

impl KernelContext {
    pub fn new(a: DistMatrix, b: DistMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::invalid(format!(
                "distance matrices have sizes {} and {}",
                a.n(),
                b.n()
            )));
        }
        let n = a.n();
        let a_margins = Margins::of(&a);
        let b_margins = Margins::of(&b);
        let nf = n as f64;
        let cross: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let ai = a.row(i);
                let b = &b;
                (0..n).map(move |j| {
                    let bj = b.row(j);
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += ai[k] * bj[k];
                    }
                    acc / nf
                })
            })
            .collect();
        Ok(Self { a, b, a_margins, b_margins, cross })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &DistMatrix {
        &self.a
    }

    pub fn b(&self) -> &DistMatrix {
        &self.b
    }

    pub fn a_row_means(&self) -> &[f64] {
        &self.a_margins.rows
    }

    pub fn b_row_means(&self) -> &[f64] {
        &self.b_margins.rows
    }

    pub fn a_grand_mean(&self) -> f64 {
        self.a_margins.grand
    }

    pub fn b_grand_mean(&self) -> f64 {
        self.b_margins.grand
    }

    /// `mean_j A(i, j)·B(k, j)`
    pub fn cross_moment(&self, i: usize, k: usize) -> f64 {
        self.cross[i * self.n() + k]
    }

    fn check(&self, idx: [usize; 4]) -> Result<()> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!(
                "kernel index {bad} out of range for n = {}",
                self.n()
            )));
        }
        Ok(())
    }

    #[inline]
    fn f_unchecked(&self, [i1, i2, i3, i4]: [usize; 4]) -> f64 {
        let a12 = self.a.get(i1, i2);
        a12 * self.b.get(i1, i2) + a12 * self.b.get(i3, i4) - 2.0 * a12 * self.b.get(i1, i3)
    }
}

/// All 24 orderings of four slots.
const PERMUTATIONS: [[usize; 4]; 24] = {
    let mut out = [[0; 4]; 24];
    let mut idx = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let mut c = 0;
            while c < 4 {
                if a != b && a != c && b != c {
                    let d = 6 - a - b - c;
                    out[idx] = [a, b, c, d];
                    idx += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

/// `f(z_i1, z_i2, z_i3, z_i4) = a12·b12 + a12·b34 − 2·a12·b13`
pub fn kernel_f(ctx: &KernelContext, i1: usize, i2: usize, i3: usize, i4: usize) -> Result<f64> {
    ctx.check([i1, i2, i3, i4])?;
    Ok(ctx.f_unchecked([i1, i2, i3, i4]))
}

/// Symmetrized kernel: the mean of [`kernel_f`] over the 24 argument orders.
pub fn kernel_h(ctx: &KernelContext, i1: usize, i2: usize, i3: usize, i4: usize) -> Result<f64> {
    let idx = [i1, i2, i3, i4];
    ctx.check(idx)?;
    let total = sum::sum(
        PERMUTATIONS
            .iter()
            .map(|p| ctx.f_unchecked([idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]])),
    );
    Ok(total / 24.0)
}

/// Symmetric `n × n` matrix of `h₂` values indexed by sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct H2Matrix {
    n: usize,
    entries: Vec<f64>,
}

impl H2Matrix {
    /// Row-major `n × n` matrix; must be symmetric with finite entries.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        for a in 0..n {
            for b in 0..n {
                let v = entries[a * n + b];
                if !v.is_finite() || v != entries[b * n + a] {
                    return Err(Error::invalid(format!("entry ({a}, {b}) is not finite and symmetric")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.n + b]
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.n..(a + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_means(&self) -> Vec<f64> {
        (0..self.n).map(|a| sum::mean(self.row(a))).collect()
    }

    pub fn trace(&self) -> f64 {
        sum::sum((0..self.n).map(|a| self.get(a, a)))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fills a symmetric matrix from its upper triangle, computed row-parallel.
fn symmetric_from_upper(n: usize, entry: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| (a..n).map(|b| entry(a, b)).collect())
        .collect();
    let mut out = vec![0.0; n * n];
    for (a, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let b = a + offset;
            out[a * n + b] = v;
            out[b * n + a] = v;
        }
    }
    out
}

/// Double centering of a symmetric matrix: `M(a,b) − r(a) − r(b) + m`.
fn double_center(n: usize, m: &[f64]) -> Vec<f64> {
    let rows: Vec<f64> = (0..n).map(|a| sum::mean(&m[a * n..(a + 1) * n])).collect();
    let grand = sum::mean(&rows);
    symmetric_from_upper(n, |a, b| m[a * n + b] - rows[a] - rows[b] + grand)
}

/// Hoeffding projection `h₂(z_a, z_b; F_n)` of the symmetrized kernel against
/// the paired empirical law, for every pair of sample points. O(n³) for the
/// cross moments (cached in the context), O(n²) afterwards.
pub fn h2_matrix(ctx: &KernelContext) -> Result<H2Matrix> {
    let n = ctx.n();
    if n < 2 {
        return Err(Error::invalid("h2 needs n >= 2"));
    }
    let (ra, rb) = (ctx.a_row_means(), ctx.b_row_means());
    let (ma, mb) = (ctx.a_grand_mean(), ctx.b_grand_mean());
    let g = symmetric_from_upper(n, |i, k| {
        let aik = ctx.a.get(i, k);
        let bik = ctx.b.get(i, k);
        let mut acc = NeumaierSum::new();
        acc.add(aik * bik);
        acc.add(aik * mb);
        acc.add(ma * bik);
        acc.add(2.0 * (ra[i] * rb[k] + ra[k] * rb[i]));
        acc.add(-aik * (rb[i] + rb[k]));
        acc.add(-bik * (ra[i] + ra[k]));
        acc.add(-(ctx.cross_moment(i, k) + ctx.cross_moment(k, i)));
        acc.value() / 6.0
    });
    Ok(H2Matrix { n, entries: double_center(n, &g) })
}

/// Double-centered distance matrix `Ã(a,b) = A(a,b) + m_A − r_A(a) − r_A(b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CenteredMatrix {
    pub fn new(m: &DistMatrix) -> Self {
        Self { n: m.n(), entries: double_center(m.n(), m.entries()) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.n + b]
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.n..(a + 1) * self.n]
    }
}

/// `h₂` when the reference law is the product of the two empirical marginals:
/// `(1/6)·Ã(a,b)·B̃(a,b)`.
pub fn h2_product_law(a: &DistMatrix, b: &DistMatrix) -> Result<H2Matrix> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!(
            "distance matrices have sizes {} and {}",
            a.n(),
            b.n()
        )));
    }
    if a.n() < 2 {
        return Err(Error::invalid("h2 needs n >= 2"));
    }
    let (ca, cb) = (CenteredMatrix::new(a), CenteredMatrix::new(b));
    let entries = ca.entries.iter().zip(&cb.entries).map(|(x, y)| x * y / 6.0).collect();
    Ok(H2Matrix { n: a.n(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcov::sample_dcov;

    fn dm(n: usize, f: impl Fn(usize, usize) -> f64) -> DistMatrix {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    e[i * n + j] = f(i.min(j), i.max(j));
                }
            }
        }
        DistMatrix::from_entries(n, 1.0, e).unwrap()
    }

    fn scalar_ctx(x: &[f64], y: &[f64]) -> KernelContext {
        let a = dm(x.len(), |i, j| (x[i] - x[j]).abs());
        let b = dm(y.len(), |i, j| (y[i] - y[j]).abs());
        KernelContext::new(a, b).unwrap()
    }

    #[test]
    fn permutation_table_is_complete() {
        let mut seen = PERMUTATIONS.to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn f_on_hand_built_sample() {
        // x = (0, 1, 3, 6), y = (0, 2, 2, 5)
        let ctx = scalar_ctx(&[0.0, 1.0, 3.0, 6.0], &[0.0, 2.0, 2.0, 5.0]);
        // a12 = 1, b12 = 2, b34 = 3, b13 = 2 → 2 + 3 − 4
        assert_eq!(kernel_f(&ctx, 0, 1, 2, 3).unwrap(), 1.0);
        // a(3,0) = 6, b(3,0) = 5, b(1,2) = 0, b(3,1) = 3 → 30 + 0 − 36
        assert_eq!(kernel_f(&ctx, 3, 0, 1, 2).unwrap(), -6.0);
        assert_eq!(kernel_f(&ctx, 2, 2, 2, 2).unwrap(), 0.0);
        assert_eq!(kernel_h(&ctx, 1, 1, 1, 1).unwrap(), 0.0);
        assert!(kernel_f(&ctx, 0, 1, 2, 4).is_err());
        assert!(kernel_h(&ctx, 4, 1, 2, 3).is_err());
    }

    #[test]
    fn h_is_symmetric_in_its_arguments() {
        let ctx = scalar_ctx(&[0.3, -1.0, 2.5, 0.9, 1.4], &[1.0, 0.2, -0.7, 3.3, 0.0]);
        let base = [4, 0, 2, 1];
        let h0 = kernel_h(&ctx, base[0], base[1], base[2], base[3]).unwrap();
        for p in PERMUTATIONS {
            let h = kernel_h(&ctx, base[p[0]], base[p[1]], base[p[2]], base[p[3]]).unwrap();
            assert!((h - h0).abs() < 1e-14);
        }
    }

    #[test]
    fn context_aggregates_match_recomputation() {
        let ctx = scalar_ctx(&[0.3, -1.0, 2.5, 0.9, 1.4, 7.0], &[1.0, 0.2, -0.7, 3.3, 0.0, 2.0]);
        let n = ctx.n();
        for i in 0..n {
            let ra: f64 = (0..n).map(|j| ctx.a().get(i, j)).sum::<f64>() / n as f64;
            assert!((ra - ctx.a_row_means()[i]).abs() < 1e-12);
            for k in 0..n {
                let c: f64 =
                    (0..n).map(|j| ctx.a().get(i, j) * ctx.b().get(k, j)).sum::<f64>() / n as f64;
                assert!((c - ctx.cross_moment(i, k)).abs() < 1e-12);
            }
        }
        assert!((ctx.a_grand_mean() - ctx.a().grand_mean()).abs() < 1e-12);
    }

    #[test]
    fn h2_requires_two_points() {
        let ctx = scalar_ctx(&[1.0], &[2.0]);
        assert!(h2_matrix(&ctx).is_err());
        let a = dm(1, |_, _| 0.0);
        assert!(h2_product_law(&a, &a).is_err());
    }

    #[test]
    fn h2_rows_are_centered_and_symmetric() {
        let ctx = scalar_ctx(
            &[0.3, -1.0, 2.5, 0.9, 1.4, 7.0, -3.0],
            &[1.0, 0.2, -0.7, 3.3, 0.0, 2.0, 0.5],
        );
        let h2 = h2_matrix(&ctx).unwrap();
        let scale = h2.max_abs();
        for (a, m) in h2.row_means().iter().enumerate() {
            assert!(m.abs() <= 1e-10 * scale, "row {a} mean {m}");
            for b in 0..h2.n() {
                assert_eq!(h2.get(a, b), h2.get(b, a));
            }
        }
    }

    #[test]
    fn n2_projection_by_hand() {
        // n = 2, A = [[0, s], [s, 0]], B = [[0, t], [t, 0]]: 6g = [[0, st], [st, 0]],
        // so h2 = (st/12)·[[−1, 1], [1, −1]].
        let ctx = scalar_ctx(&[0.0, 2.0], &[0.0, 3.0]);
        let h2 = h2_matrix(&ctx).unwrap();
        let (s, t) = (2.0_f64, 3.0_f64);
        assert!((h2.get(0, 0) + s * t / 12.0).abs() < 1e-14, "{}", h2.get(0, 0));
        assert!((h2.get(0, 1) - s * t / 12.0).abs() < 1e-14);
        assert!((h2.get(1, 1) + s * t / 12.0).abs() < 1e-14);
    }

    #[test]
    fn product_law_examples() {
        let x = [0.3_f64, -1.0, 2.5, 0.9, 1.4];
        let a = dm(5, |i, j| (x[i] - x[j]).abs());
        let flat = dm(5, |_, _| 0.0);
        let h2 = h2_product_law(&a, &flat).unwrap();
        assert!(h2.entries().iter().all(|&v| v == 0.0));

        let ca = CenteredMatrix::new(&a);
        for i in 0..5 {
            assert!(sum::mean(ca.row(i)).abs() < 1e-14);
        }

        let y = [1.0_f64, 0.2, -0.7, 3.3, 0.0];
        let b = dm(5, |i, j| (y[i] - y[j]).abs());
        let h2 = h2_product_law(&a, &b).unwrap();
        let mean6 = 6.0 * sum::mean(h2.entries());
        assert!((mean6 - sample_dcov(&a, &b).unwrap()).abs() < 1e-13);
    }
}
