//! The normalizing constant `c₀(β)` over a range of β.

use fdcov::dcov::{c0_constant, DcovParams};

fn main() -> Result<(), fdcov::error::Error> {
    println!("{:>5} {:>14}", "beta", "c0");
    for k in 1..=9 {
        let beta = 0.2 * k as f64;
        println!("{beta:>5.1} {:>14.10}", c0_constant(DcovParams::new(beta)?)?);
    }
    Ok(())
}
