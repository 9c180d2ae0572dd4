//! Draws paired samples from every process family and round-trips one of
//! them through the trajectory CSV format.

use fdcov::io::{read_pair, write_pair};
use fdcov::rng::RngSpec;
use fdcov::simulate::{simulate_pair, ParetoShockSpec, ProcessPair, ShockModel, StableSpec};

fn main() -> Result<(), fdcov::error::Error> {
    let stable = StableSpec::new(1.5, 0.0, 0.0, 1.0)?;
    let processes = [
        ProcessPair::Fbm { hurst: 0.75, rho: 0.5 },
        ProcessPair::Gbm { mu: 0.0, sigma: 1.0 },
        ProcessPair::Stable(stable),
        ProcessPair::GbmStable { mu: 0.0, sigma: 1.0, stable },
        ProcessPair::ParetoShock(ParetoShockSpec::new(1.5, ShockModel::JointShock, 0.0)?),
        ProcessPair::ParetoShock(ParetoShockSpec::new(1.5, ShockModel::SeparateShocks, 0.5)?),
    ];
    for process in &processes {
        let sample = simulate_pair(process, 500, 100, &RngSpec::new(5))?;
        let ends: Vec<f64> = sample.x().iter().map(|t| *t.values().last().unwrap()).collect();
        let mut sorted = ends.clone();
        sorted.sort_by(f64::total_cmp);
        println!(
            "{:<16} param {:<6} X(1): median {:>8.4}, 1% {:>9.4}, 99% {:>9.4}",
            process.family(),
            process.param().map_or("-".into(), |v| v.to_string()),
            sorted[250],
            sorted[5],
            sorted[494]
        );
    }

    let sample = simulate_pair(&processes[0], 3, 8, &RngSpec::new(1))?;
    let mut csv = Vec::new();
    write_pair(&mut csv, &sample)?;
    print!("{}", String::from_utf8_lossy(&csv));
    let back = read_pair(csv.as_slice())?;
    assert_eq!(back.x()[0].values(), sample.x()[0].values());
    Ok(())
}
