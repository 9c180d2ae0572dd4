//! The order-4 kernel, its second Hoeffding projection and the gap between
//! the V- and U-statistics.

use fdcov::dcov::{dist_matrix, sample_dcov, u_stat_t, DcovParams};
use fdcov::kernels::{h2_matrix, h2_product_law, kernel_h, KernelContext};
use fdcov::rng::RngSpec;
use fdcov::simulate::{simulate_pair, ProcessPair};

fn main() -> Result<(), fdcov::error::Error> {
    let sample = simulate_pair(&ProcessPair::Fbm { hurst: 0.5, rho: 0.0 }, 60, 50, &RngSpec::new(3))?;
    let params = DcovParams::default();
    let a = dist_matrix(sample.x(), params)?;
    let b = dist_matrix(sample.y(), params)?;

    let t = sample_dcov(&a, &b)?;
    let u = u_stat_t(&a, &b)?;
    let shift = a.grand_mean() * b.grand_mean();
    println!("T_n = {t:.6}, U_n = {u:.6}");
    println!("n (T_n - U_n) = {:.4}, grand mean product = {shift:.4}", 60.0 * (t - u));

    let ctx = KernelContext::new(a.clone(), b.clone())?;
    println!("h(0, 1, 2, 3) = {:.6}", kernel_h(&ctx, 0, 1, 2, 3)?);

    let paired = h2_matrix(&ctx)?;
    let product = h2_product_law(&a, &b)?;
    let worst_row = paired.row_means().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("H2 paired: trace {:.4}, largest |row mean| {worst_row:.2e}", paired.trace());
    println!("H2 product law: trace {:.4}", product.trace());
    Ok(())
}
