//! Monte Carlo experiments `fig1_top` through `fig5` and their CSV result rows.
//!
//! Each experiment expands into parameter combinations. Every replicate of
//! every combination draws a fresh paired sample from its own random stream,
//! keyed by `(seed, experiment, combination, replicate)`, and reports one or
//! more statistics as [`ResultRow`]s. Rows come back ordered by combination
//! then replicate, whatever the thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bootstrap::{independence_test, Method};
use crate::dcov::{dcov_with_margins, dist_matrix, sample_dcor, Correlation, DcovParams, Margins};
use crate::error::{Error, Result};
use crate::grid::PairedSample;
use crate::io::format_float;
use crate::rng::RngSpec;
use crate::simulate::{simulate_pair, ParetoShockSpec, ProcessPair, ShockModel, StableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Fig1Top,
    Fig1Bottom,
    Fig2,
    Fig3,
    Fig4Top,
    Fig4Bottom,
    Fig5,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Fig1Top,
        ExperimentId::Fig1Bottom,
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Fig4Top,
        ExperimentId::Fig4Bottom,
        ExperimentId::Fig5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig1Top => "fig1_top",
            ExperimentId::Fig1Bottom => "fig1_bottom",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4Top => "fig4_top",
            ExperimentId::Fig4Bottom => "fig4_bottom",
            ExperimentId::Fig5 => "fig5",
        }
    }

    fn stream_key(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment id '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Rn,
    NRn,
    BootstrapRef,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Rn => "R_n",
            Statistic::NRn => "nR_n",
            Statistic::BootstrapRef => "bootstrap_ref",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Settings of one experiment. Fields an experiment does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub n_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub hurst: Vec<f64>,
    pub rho: f64,
    pub alpha: Vec<f64>,
    pub replications: usize,
    pub beta: f64,
    pub seed: u64,
    /// Bootstrap replicates per combination (fig5).
    pub bootstrap_b: usize,
    pub gbm_mu: f64,
    pub gbm_sigma: f64,
    pub stable: StableSpec,
    /// Stable panel of fig3: `n`, grid sizes and replications.
    pub stable_n: usize,
    pub stable_p_values: Vec<usize>,
    pub stable_replications: usize,
}

impl ExperimentSpec {
    pub fn defaults(id: ExperimentId) -> Self {
        let base = Self {
            id,
            n_values: vec![100, 200, 300],
            p_values: vec![100],
            hurst: vec![0.25, 0.5, 0.75],
            rho: 0.0,
            alpha: vec![0.5, 1.0, 1.5],
            replications: 500,
            beta: 1.0,
            seed: 1,
            bootstrap_b: 200,
            gbm_mu: 1.0,
            gbm_sigma: 0.7,
            stable: StableSpec { alpha: 1.8, beta_skew: 0.3, mu: 0.0, sigma: 1.0 },
            stable_n: 100,
            stable_p_values: vec![100, 500, 1000],
            stable_replications: 500,
        };
        match id {
            ExperimentId::Fig1Top => Self { n_values: vec![100, 200, 300, 400], ..base },
            ExperimentId::Fig1Bottom => Self { rho: 0.5, replications: 300, ..base },
            ExperimentId::Fig2 | ExperimentId::Fig4Top => base,
            ExperimentId::Fig3 => Self { p_values: vec![100, 1000], replications: 300, ..base },
            ExperimentId::Fig4Bottom => Self { rho: 0.5, ..base },
            ExperimentId::Fig5 => Self { n_values: vec![100, 300], ..base },
        }
    }

    pub fn params(&self) -> Result<DcovParams> {
        DcovParams::new(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n_values.is_empty() || self.p_values.is_empty() {
            return Err(Error::invalid("n and p lists must be non-empty"));
        }
        if self.n_values.iter().chain(&self.p_values).any(|&v| v == 0) {
            return Err(Error::invalid("n and p values must be positive"));
        }
        if self.id == ExperimentId::Fig5 {
            if self.bootstrap_b == 0 {
                return Err(Error::invalid("bootstrap B must be positive"));
            }
            if self.n_values.iter().any(|&n| n < 4) {
                return Err(Error::invalid("bootstrap needs n >= 4"));
            }
        }
        if self.id == ExperimentId::Fig3 && (self.stable_replications == 0 || self.stable_n == 0) {
            return Err(Error::invalid("stable panel needs positive n and replications"));
        }
        for c in self.combinations()? {
            c.process.validate()?;
        }
        Ok(())
    }

    /// Parameter combinations in output order.
    pub fn combinations(&self) -> Result<Vec<Combination>> {
        let mut processes = Vec::new();
        let mut out = Vec::new();
        let grid = |processes: &[ProcessPair], ns: &[usize], ps: &[usize], reps: usize, out: &mut Vec<Combination>| {
            for process in processes {
                for &p in ps {
                    for &n in ns {
                        out.push(Combination { index: out.len(), process: *process, n, p, replications: reps });
                    }
                }
            }
        };
        match self.id {
            ExperimentId::Fig1Top | ExperimentId::Fig1Bottom | ExperimentId::Fig5 => {
                processes.extend(self.hurst.iter().map(|&hurst| ProcessPair::Fbm { hurst, rho: self.rho }));
            }
            ExperimentId::Fig2 => {
                processes.push(ProcessPair::Gbm { mu: self.gbm_mu, sigma: self.gbm_sigma });
                processes.push(ProcessPair::Stable(self.stable));
                processes.push(ProcessPair::GbmStable { mu: self.gbm_mu, sigma: self.gbm_sigma, stable: self.stable });
            }
            ExperimentId::Fig3 => {
                grid(&[ProcessPair::Fbm { hurst: 0.5, rho: 0.0 }], &self.n_values, &self.p_values, self.replications, &mut out);
                grid(
                    &[ProcessPair::Stable(self.stable)],
                    &[self.stable_n],
                    &self.stable_p_values,
                    self.stable_replications,
                    &mut out,
                );
                return Ok(out);
            }
            ExperimentId::Fig4Top | ExperimentId::Fig4Bottom => {
                let model = if self.id == ExperimentId::Fig4Top {
                    ShockModel::JointShock
                } else {
                    ShockModel::SeparateShocks
                };
                for &alpha in &self.alpha {
                    processes.push(ProcessPair::ParetoShock(ParetoShockSpec::new(alpha, model, self.rho)?));
                }
            }
        }
        grid(&processes, &self.n_values, &self.p_values, self.replications, &mut out);
        Ok(out)
    }

    /// Exact number of rows [`run_experiment`] returns.
    pub fn row_count(&self) -> Result<usize> {
        let extra = if self.id == ExperimentId::Fig5 { self.bootstrap_b } else { 0 };
        Ok(self.combinations()?.iter().map(|c| c.replications + extra).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub index: usize,
    pub process: ProcessPair,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentId,
    pub combination: usize,
    pub replicate: usize,
    pub n: usize,
    pub p: usize,
    pub family: &'static str,
    pub param: Option<f64>,
    pub rho: f64,
    pub statistic: Statistic,
    pub value: f64,
}

pub const RESULT_HEADER: [&str; 10] =
    ["experiment", "combination", "replicate", "n", "p", "family", "param", "rho", "statistic", "value"];

impl ResultRow {
    fn new(c: &Combination, experiment: ExperimentId, replicate: usize, statistic: Statistic, value: f64) -> Self {
        Self {
            experiment,
            combination: c.index,
            replicate,
            n: c.n,
            p: c.p,
            family: c.process.family(),
            param: c.process.param(),
            rho: c.process.rho(),
            statistic,
            value,
        }
    }

    pub fn record(&self) -> [String; 10] {
        [
            self.experiment.to_string(),
            self.combination.to_string(),
            self.replicate.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.family.to_string(),
            self.param.map(format_float).unwrap_or_default(),
            format_float(self.rho),
            self.statistic.to_string(),
            format_float(self.value),
        ]
    }
}

pub fn write_rows<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Random streams of one replicate: pair `k` of the sample uses stream `k`.
pub fn replicate_rng(spec: &ExperimentSpec, combination: usize, replicate: usize) -> RngSpec {
    RngSpec::new(spec.seed)
        .child(spec.id.stream_key())
        .child(combination as u64)
        .child(replicate as u64)
}

fn bootstrap_rng(spec: &ExperimentSpec, combination: usize) -> RngSpec {
    RngSpec::new(spec.seed).child(spec.id.stream_key()).child(combination as u64).child(u64::MAX)
}

fn correlation_value(c: Correlation) -> f64 {
    c.value().unwrap_or(f64::NAN)
}

struct Dcor {
    txx: f64,
    tyy: f64,
    r: Correlation,
}

fn dcor_parts(sample: &PairedSample, params: DcovParams) -> Result<Dcor> {
    let a = dist_matrix(sample.x(), params)?;
    let b = dist_matrix(sample.y(), params)?;
    let (am, bm) = (Margins::of(&a), Margins::of(&b));
    let txx = dcov_with_margins(&a, &am, &a, &am, None);
    let tyy = dcov_with_margins(&b, &bm, &b, &bm, None);
    let r = sample_dcor(&a, &b)?;
    Ok(Dcor { txx, tyy, r })
}

fn replicate_rows(spec: &ExperimentSpec, params: DcovParams, c: &Combination, replicate: usize) -> Result<ResultRow> {
    let sample = simulate_pair(&c.process, c.n, c.p, &replicate_rng(spec, c.index, replicate))?;
    let d = dcor_parts(&sample, params)?;
    let r = correlation_value(d.r);
    Ok(if spec.id == ExperimentId::Fig5 {
        ResultRow::new(c, spec.id, replicate, Statistic::NRn, c.n as f64 * r)
    } else {
        ResultRow::new(c, spec.id, replicate, Statistic::Rn, r)
    })
}

/// Bootstrap reference of `n·R_n` from one sample: the reference values of
/// `n·T_n` divided by `(T_xx·T_yy)^{1/2}` of that sample.
fn bootstrap_rows(spec: &ExperimentSpec, params: DcovParams, c: &Combination) -> Result<Vec<ResultRow>> {
    let rng = bootstrap_rng(spec, c.index);
    let sample = simulate_pair(&c.process, c.n, c.p, &rng.child(0))?;
    let d = dcor_parts(&sample, params)?;
    let norm = (d.txx * d.tyy).sqrt();
    let test = independence_test(&sample, params, spec.bootstrap_b, &rng.child(1), Method::BootstrapPaired)?;
    Ok(test
        .reference_sample
        .iter()
        .enumerate()
        .map(|(b, v)| ResultRow::new(c, spec.id, b, Statistic::BootstrapRef, v / norm))
        .collect())
}

fn tagged<T>(combination: usize, replicate: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Experiment { combination, replicate, source: Box::new(e) })
}

/// Runs every combination and replicate on a pool of `threads` workers.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let params = spec.params()?;
    let combos = spec.combinations()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(|| {
        let mut rows = Vec::with_capacity(spec.row_count()?);
        for c in &combos {
            let mc: Vec<ResultRow> = (0..c.replications)
                .into_par_iter()
                .map(|r| tagged(c.index, r, replicate_rows(spec, params, c, r)))
                .collect::<Result<_>>()?;
            rows.extend(mc);
            if spec.id == ExperimentId::Fig5 {
                rows.extend(tagged(c.index, 0, bootstrap_rows(spec, params, c))?);
            }
        }
        Ok(rows)
    })
}

/// Per-experiment overrides read from a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOverrides {
    pub n: Option<Vec<usize>>,
    pub p: Option<Vec<usize>>,
    pub hurst: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    #[serde(rename = "B")]
    pub bootstrap_b: Option<usize>,
    pub gbm_mu: Option<f64>,
    pub gbm_sigma: Option<f64>,
    pub stable_alpha: Option<f64>,
    pub stable_beta: Option<f64>,
    pub stable_mu: Option<f64>,
    pub stable_sigma: Option<f64>,
    pub stable_n: Option<usize>,
    pub stable_p: Option<Vec<usize>>,
    pub stable_reps: Option<usize>,
}

impl SpecOverrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) {
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = &self.$src { $dst = v.clone(); })*
            };
        }
        set! {
            n => spec.n_values,
            p => spec.p_values,
            hurst => spec.hurst,
            rho => spec.rho,
            alpha => spec.alpha,
            reps => spec.replications,
            beta => spec.beta,
            seed => spec.seed,
            bootstrap_b => spec.bootstrap_b,
            gbm_mu => spec.gbm_mu,
            gbm_sigma => spec.gbm_sigma,
            stable_alpha => spec.stable.alpha,
            stable_beta => spec.stable.beta_skew,
            stable_mu => spec.stable.mu,
            stable_sigma => spec.stable.sigma,
            stable_n => spec.stable_n,
            stable_p => spec.stable_p_values,
            stable_reps => spec.stable_replications,
        }
    }
}

/// Process section of a config file, used by `simulate`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub process: Option<String>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub seed: Option<u64>,
    pub hurst: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub stable_alpha: Option<f64>,
    pub stable_beta: Option<f64>,
    pub stable_mu: Option<f64>,
    pub stable_sigma: Option<f64>,
}

impl SimulateConfig {
    pub fn process_pair(&self) -> Result<ProcessPair> {
        let stable = StableSpec::new(
            self.stable_alpha.unwrap_or(1.8),
            self.stable_beta.unwrap_or(0.3),
            self.stable_mu.unwrap_or(0.0),
            self.stable_sigma.unwrap_or(1.0),
        );
        let (mu, sigma) = (self.mu.unwrap_or(1.0), self.sigma.unwrap_or(0.7));
        let rho = self.rho.unwrap_or(0.0);
        let alpha = self.alpha.unwrap_or(1.0);
        let pair = match self.process.as_deref().unwrap_or("fbm") {
            "fbm" => ProcessPair::Fbm { hurst: self.hurst.unwrap_or(0.5), rho },
            "bm" => ProcessPair::Fbm { hurst: 0.5, rho },
            "gbm" => ProcessPair::Gbm { mu, sigma },
            "stable" => ProcessPair::Stable(stable?),
            "gbm-stable" => ProcessPair::GbmStable { mu, sigma, stable: stable? },
            "pareto-joint" => ProcessPair::ParetoShock(ParetoShockSpec::new(alpha, ShockModel::JointShock, rho)?),
            "pareto-separate" => {
                ProcessPair::ParetoShock(ParetoShockSpec::new(alpha, ShockModel::SeparateShocks, rho)?)
            }
            other => return Err(Error::Config(format!("unknown process '{other}'"))),
        };
        pair.validate()?;
        Ok(pair)
    }
}

/// Config file: TOML with one optional section per experiment id and an
/// optional `[simulate]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub simulate: Option<SimulateConfig>,
    pub fig1_top: Option<SpecOverrides>,
    pub fig1_bottom: Option<SpecOverrides>,
    pub fig2: Option<SpecOverrides>,
    pub fig3: Option<SpecOverrides>,
    pub fig4_top: Option<SpecOverrides>,
    pub fig4_bottom: Option<SpecOverrides>,
    pub fig5: Option<SpecOverrides>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::in_file(path)(e.into()))?;
        Self::parse(&text).map_err(Error::in_file(path))
    }

    pub fn overrides(&self, id: ExperimentId) -> Option<&SpecOverrides> {
        match id {
            ExperimentId::Fig1Top => self.fig1_top.as_ref(),
            ExperimentId::Fig1Bottom => self.fig1_bottom.as_ref(),
            ExperimentId::Fig2 => self.fig2.as_ref(),
            ExperimentId::Fig3 => self.fig3.as_ref(),
            ExperimentId::Fig4Top => self.fig4_top.as_ref(),
            ExperimentId::Fig4Bottom => self.fig4_bottom.as_ref(),
            ExperimentId::Fig5 => self.fig5.as_ref(),
        }
    }

    /// Defaults for `id` with this file's overrides applied.
    pub fn spec(&self, id: ExperimentId) -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(id);
        if let Some(o) = self.overrides(id) {
            o.apply(&mut spec);
        }
        spec
    }
}
