//! Distance correlation of fractional Brownian motion pairs as the
//! correlation between the driving motions grows.

use fdcov::dcov::{dist_matrix, sample_dcor, sample_dcov, DcovParams};
use fdcov::rng::RngSpec;
use fdcov::simulate::{simulate_pair, ProcessPair};

fn main() -> Result<(), fdcov::error::Error> {
    let params = DcovParams::new(1.0)?;
    println!("{:>6} {:>6} {:>12} {:>8}", "H", "rho", "T_n", "R_n");
    for hurst in [0.25, 0.5, 0.75] {
        for rho in [0.0, 0.25, 0.5, 0.9] {
            let sample = simulate_pair(&ProcessPair::Fbm { hurst, rho }, 200, 100, &RngSpec::new(42))?;
            let a = dist_matrix(sample.x(), params)?;
            let b = dist_matrix(sample.y(), params)?;
            let t = sample_dcov(&a, &b)?;
            let r = sample_dcor(&a, &b)?.value().unwrap_or(f64::NAN);
            println!("{hurst:>6} {rho:>6} {t:>12.6} {r:>8.4}");
        }
    }
    Ok(())
}
