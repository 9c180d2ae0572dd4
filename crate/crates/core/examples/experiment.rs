//! A reduced run of the `fig1_top` experiment: medians of `R_n` for
//! independent fBM pairs, written as result rows.

use std::collections::BTreeMap;

use fdcov::harness::{run_experiment, write_rows, ExperimentId, ExperimentSpec};

fn main() -> Result<(), fdcov::error::Error> {
    let spec = ExperimentSpec {
        replications: 50,
        ..ExperimentSpec::defaults(ExperimentId::Fig1Top)
    };
    let rows = run_experiment(&spec, 4)?;

    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        let h = row.param.map_or("-".into(), |v| v.to_string());
        groups.entry((h, row.n)).or_default().push(row.value);
    }
    for ((h, n), mut values) in groups {
        values.sort_by(f64::total_cmp);
        println!("H {h:<5} n {n:<4} median R_n {:.4}", values[values.len() / 2]);
    }

    let path = std::env::temp_dir().join("fdcov_fig1_top.csv");
    write_rows(std::fs::File::create(&path)?, &rows)?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}
