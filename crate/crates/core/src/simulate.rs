//! Path generators for the process families of the simulation study:
//! correlated fractional Brownian motion pairs, Brownian and geometric
//! Brownian motion, α-stable Lévy motion and Pareto-shocked Brownian pairs.
//!
//! All generators observe paths at `t_1, ..., t_p` of the uniform partition
//! and consume randomness from the caller's stream in a fixed order.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{uniform_partition, PairedSample, Partition, Trajectory};
use crate::rng::RngSpec;

const JITTER_REL: f64 = 1e-12;
const MAX_JITTER_ESCALATIONS: usize = 3;

/// Two fBMs with common Hurst index and `cov(X(s), Y(t)) = ρ·C_H(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmPairSpec {
    pub hurst: f64,
    pub rho: f64,
    pub p: usize,
}

impl FbmPairSpec {
    pub fn new(hurst: f64, rho: f64, p: usize) -> Result<Self> {
        let spec = Self { hurst, rho, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::invalid(format!("Hurst index must lie in (0, 1), got {}", self.hurst)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {}", self.rho)));
        }
        if self.p == 0 {
            return Err(Error::invalid("grid size p must be positive"));
        }
        Ok(())
    }
}

/// fBM covariance `½(s^{2H} + t^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
}

/// Factor of the fBM covariance on one uniform grid.
///
/// The joint `2p × 2p` covariance of a pair is `[[1, ρ], [ρ, 1]] ⊗ C_H`, so
/// its lower Cholesky factor is `[[1, 0], [ρ, √(1−ρ²)]] ⊗ L` with `L` the
/// factor of `C_H`. Only `L` is stored; it serves every `ρ`.
#[derive(Debug)]
pub struct FbmSampler {
    hurst: f64,
    partition: Arc<Partition>,
    /// Row-major lower triangle, `None` for `H = 1/2` where `L` is `p^{-1/2}`
    /// times the lower all-ones matrix and is applied as a cumulative sum.
    factor: Option<Vec<f64>>,
    jitter: f64,
}

impl FbmSampler {
    pub fn new(hurst: f64, p: usize) -> Result<Self> {
        FbmPairSpec::new(hurst, 0.0, p)?;
        let partition = Arc::new(uniform_partition(p)?);
        if hurst == 0.5 {
            return Ok(Self { hurst, partition, factor: None, jitter: 0.0 });
        }
        let times = partition.observation_times();
        let cov = DMatrix::from_fn(p, p, |i, j| fbm_covariance(hurst, times[i], times[j]));
        let base = JITTER_REL * cov.trace() / p as f64;
        let mut jitter = 0.0;
        for attempt in 0..=MAX_JITTER_ESCALATIONS {
            if attempt > 0 {
                jitter = base * 100f64.powi(attempt as i32 - 1);
            }
            let mut m = cov.clone();
            for i in 0..p {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = m.cholesky() {
                let l = chol.l();
                let mut factor = Vec::with_capacity(p * (p + 1) / 2);
                for i in 0..p {
                    for j in 0..=i {
                        factor.push(l[(i, j)]);
                    }
                }
                return Ok(Self { hurst, partition, factor: Some(factor), jitter });
            }
        }
        Err(Error::Factorization { attempts: MAX_JITTER_ESCALATIONS + 1, jitter })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    /// Diagonal jitter that made the factorization succeed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn apply_factor(&self, z: &[f64]) -> Vec<f64> {
        let p = z.len();
        match &self.factor {
            None => {
                let scale = (1.0 / p as f64).sqrt();
                let mut level = 0.0;
                z.iter()
                    .map(|v| {
                        level += scale * v;
                        level
                    })
                    .collect()
            }
            Some(l) => {
                let mut out = Vec::with_capacity(p);
                let mut offset = 0;
                for i in 0..p {
                    let row = &l[offset..offset + i + 1];
                    out.push(row.iter().zip(z).map(|(a, b)| a * b).sum());
                    offset += i + 1;
                }
                out
            }
        }
    }

    fn normals<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.partition.len()).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// One fBM path.
    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let z = self.normals(rng);
        Trajectory::new(self.partition.clone(), self.apply_factor(&z)).expect("finite gaussian path")
    }

    /// One draw of the correlated pair.
    pub fn pair<R: Rng + ?Sized>(&self, rho: f64, rng: &mut R) -> Result<(Trajectory, Trajectory)> {
        if !(rho.abs() <= 1.0) {
            return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {rho}")));
        }
        let z1 = self.normals(rng);
        let z2 = self.normals(rng);
        let c = (1.0 - rho * rho).max(0.0).sqrt();
        let mixed: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| rho * a + c * b).collect();
        let x = self.apply_factor(&z1);
        let y = self.apply_factor(&mixed);
        Ok((
            Trajectory::new(self.partition.clone(), x)?,
            Trajectory::new(self.partition.clone(), y)?,
        ))
    }
}

/// Factorizations shared across callers, keyed by `(H, p)`.
#[derive(Debug, Default)]
pub struct SamplerCache {
    inner: RwLock<HashMap<(u64, usize), Arc<FbmSampler>>>,
}

impl SamplerCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, hurst: f64, p: usize) -> Result<Arc<FbmSampler>> {
        let key = (hurst.to_bits(), p);
        if let Some(s) = self.inner.read().expect("sampler cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let sampler = Arc::new(FbmSampler::new(hurst, p)?);
        let mut map = self.inner.write().expect("sampler cache poisoned");
        Ok(map.entry(key).or_insert(sampler).clone())
    }
}

fn global_cache() -> &'static SamplerCache {
    static CACHE: OnceLock<SamplerCache> = OnceLock::new();
    CACHE.get_or_init(SamplerCache::new)
}

/// One draw of a correlated fBM pair, using a process-wide factor cache.
pub fn fbm_pair<R: Rng + ?Sized>(spec: &FbmPairSpec, rng: &mut R) -> Result<(Trajectory, Trajectory)> {
    spec.validate()?;
    global_cache().get(spec.hurst, spec.p)?.pair(spec.rho, rng)
}

fn brownian_values<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let scale = (1.0 / p as f64).sqrt();
    let mut level = 0.0;
    (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            level += scale * z;
            level
        })
        .collect()
}

/// Standard Brownian motion from iid `N(0, 1/p)` increments.
pub fn brownian_path<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<Trajectory> {
    let partition = Arc::new(uniform_partition(p)?);
    Trajectory::new(partition, brownian_values(p, rng))
}

/// `exp((μ − σ²/2)·t + σ·B(t))`.
pub fn gbm_path<R: Rng + ?Sized>(mu: f64, sigma: f64, p: usize, rng: &mut R) -> Result<Trajectory> {
    check_gbm(mu, sigma)?;
    let partition = Arc::new(uniform_partition(p)?);
    let b = brownian_values(p, rng);
    let drift = mu - sigma * sigma / 2.0;
    let values = partition
        .observation_times()
        .iter()
        .zip(&b)
        .map(|(t, w)| (drift * t + sigma * w).exp())
        .collect();
    Trajectory::new(partition, values)
}

/// Stable law `S_α(σ, β, μ)` in the Samorodnitsky–Taqqu parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpec {
    pub alpha: f64,
    pub beta_skew: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, beta_skew: f64, mu: f64, sigma: f64) -> Result<Self> {
        let spec = Self { alpha, beta_skew, mu, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(format!("stability index must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.beta_skew.abs() <= 1.0) {
            return Err(Error::invalid(format!("skewness must lie in [-1, 1], got {}", self.beta_skew)));
        }
        if !(self.sigma > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("stable law needs sigma > 0 and a finite shift"));
        }
        Ok(())
    }

    /// Characteristic function `E exp(iθX)` as `(re, im)`.
    pub fn characteristic_function(&self, theta: f64) -> (f64, f64) {
        let Self { alpha, beta_skew: beta, mu, sigma } = *self;
        let abs_t = theta.abs();
        let sign = theta.signum();
        let (modulus_log, phase) = if alpha == 1.0 {
            let log_term = if abs_t > 0.0 { abs_t.ln() } else { 0.0 };
            (
                -sigma * abs_t,
                -sigma * abs_t * beta * (2.0 / PI) * sign * log_term + mu * theta,
            )
        } else {
            let s = (sigma * abs_t).powf(alpha);
            (-s, s * beta * sign * (PI * alpha / 2.0).tan() + mu * theta)
        };
        let r = modulus_log.exp();
        (r * phase.cos(), r * phase.sin())
    }
}

/// Chambers–Mallows–Stuck draw from `S_α(σ, β, μ)`.
pub fn stable_variate<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    let w: f64 = Exp1.sample(rng);
    let v = PI * (u - 0.5);
    let StableSpec { alpha, beta_skew: beta, mu, sigma } = *spec;
    if alpha == 1.0 {
        let shifted = FRAC_PI_2 + beta * v;
        let x = (2.0 / PI) * (shifted * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / shifted).ln());
        sigma * x + (2.0 / PI) * beta * sigma * sigma.ln() + mu
    } else {
        let t = beta * (PI * alpha / 2.0).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
        let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
            * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        sigma * x + mu
    }
}

/// Law of one increment of the Lévy motion over a step of length `1/p`:
/// scale `σ·(1/p)^{1/α}`, shift `μ/p`.
pub fn stable_increment_spec(spec: &StableSpec, p: usize) -> StableSpec {
    let dt = 1.0 / p as f64;
    StableSpec {
        alpha: spec.alpha,
        beta_skew: spec.beta_skew,
        mu: spec.mu * dt,
        sigma: spec.sigma * dt.powf(1.0 / spec.alpha),
    }
}

/// α-stable Lévy motion: cumulative sum of iid stable increments.
pub fn stable_levy_path<R: Rng + ?Sized>(spec: &StableSpec, p: usize, rng: &mut R) -> Result<Trajectory> {
    spec.validate()?;
    let partition = Arc::new(uniform_partition(p)?);
    let inc = stable_increment_spec(spec, p);
    let mut level = 0.0;
    let values = (0..p)
        .map(|_| {
            level += stable_variate(&inc, rng);
            level
        })
        .collect();
    Trajectory::new(partition, values)
}

/// Pareto(α) on `(0, ∞)` with density `α(1 + x)^{−(α+1)}`, by inverse CDF.
pub fn pareto_from_uniform(alpha: f64, u: f64) -> f64 {
    (1.0 - u).powf(-1.0 / alpha) - 1.0
}

pub fn pareto_variate<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    pareto_from_uniform(alpha, rng.random::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShockModel {
    /// `(X, Y) = A^{1/2}·(B₁, B₂)` with independent Brownian motions.
    JointShock,
    /// `(X, Y) = (A₁^{1/2}·B₁, A₂^{1/2}·B₂)` with `corr(B₁, B₂) = ρ`.
    SeparateShocks,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoShockSpec {
    pub alpha: f64,
    pub model: ShockModel,
    pub rho: f64,
}

impl ParetoShockSpec {
    pub fn new(alpha: f64, model: ShockModel, rho: f64) -> Result<Self> {
        let spec = Self { alpha, model, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("Pareto tail index must be positive, got {}", self.alpha)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

pub fn pareto_shock_pair<R: Rng + ?Sized>(
    spec: &ParetoShockSpec,
    p: usize,
    rng: &mut R,
) -> Result<(Trajectory, Trajectory)> {
    spec.validate()?;
    let partition = Arc::new(uniform_partition(p)?);
    let (ax, ay, b1, b2) = match spec.model {
        ShockModel::JointShock => {
            let a = pareto_variate(spec.alpha, rng);
            let b1 = brownian_values(p, rng);
            let b2 = brownian_values(p, rng);
            (a, a, b1, b2)
        }
        ShockModel::SeparateShocks => {
            let a1 = pareto_variate(spec.alpha, rng);
            let a2 = pareto_variate(spec.alpha, rng);
            let b1 = brownian_values(p, rng);
            let w = brownian_values(p, rng);
            let c = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
            let b2 = b1.iter().zip(&w).map(|(x, e)| spec.rho * x + c * e).collect();
            (a1, a2, b1, b2)
        }
    };
    let (sx, sy) = (ax.sqrt(), ay.sqrt());
    Ok((
        Trajectory::new(partition.clone(), b1.iter().map(|v| sx * v).collect())?,
        Trajectory::new(partition, b2.iter().map(|v| sy * v).collect())?,
    ))
}

/// A joint law for `(X, Y)` from which paired samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessPair {
    Fbm { hurst: f64, rho: f64 },
    /// Independent geometric Brownian motions.
    Gbm { mu: f64, sigma: f64 },
    /// Independent stable Lévy motions.
    Stable(StableSpec),
    /// Geometric Brownian motion `X` independent of stable Lévy motion `Y`.
    GbmStable { mu: f64, sigma: f64, stable: StableSpec },
    ParetoShock(ParetoShockSpec),
}

impl ProcessPair {
    pub fn family(&self) -> &'static str {
        match self {
            ProcessPair::Fbm { .. } => "fbm",
            ProcessPair::Gbm { .. } => "gbm",
            ProcessPair::Stable(_) => "stable",
            ProcessPair::GbmStable { .. } => "gbm-stable",
            ProcessPair::ParetoShock(s) => match s.model {
                ShockModel::JointShock => "pareto-joint",
                ShockModel::SeparateShocks => "pareto-separate",
            },
        }
    }

    /// Hurst index or tail index, where the family has one.
    pub fn param(&self) -> Option<f64> {
        match self {
            ProcessPair::Fbm { hurst, .. } => Some(*hurst),
            ProcessPair::Stable(s) => Some(s.alpha),
            ProcessPair::GbmStable { stable, .. } => Some(stable.alpha),
            ProcessPair::ParetoShock(s) => Some(s.alpha),
            ProcessPair::Gbm { .. } => None,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            ProcessPair::Fbm { rho, .. } => *rho,
            ProcessPair::ParetoShock(s) if s.model == ShockModel::SeparateShocks => s.rho,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessPair::Fbm { hurst, rho } => FbmPairSpec::new(*hurst, *rho, 1).map(|_| ()),
            ProcessPair::Gbm { mu, sigma } => check_gbm(*mu, *sigma),
            ProcessPair::Stable(s) => s.validate(),
            ProcessPair::GbmStable { mu, sigma, stable } => {
                check_gbm(*mu, *sigma)?;
                stable.validate()
            }
            ProcessPair::ParetoShock(s) => s.validate(),
        }
    }

    /// One draw of `(X, Y)` on the uniform grid with `p` points.
    pub fn draw<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<(Trajectory, Trajectory)> {
        match self {
            ProcessPair::Fbm { hurst, rho } => fbm_pair(&FbmPairSpec::new(*hurst, *rho, p)?, rng),
            ProcessPair::Gbm { mu, sigma } => Ok((gbm_path(*mu, *sigma, p, rng)?, gbm_path(*mu, *sigma, p, rng)?)),
            ProcessPair::Stable(s) => Ok((stable_levy_path(s, p, rng)?, stable_levy_path(s, p, rng)?)),
            ProcessPair::GbmStable { mu, sigma, stable } => {
                Ok((gbm_path(*mu, *sigma, p, rng)?, stable_levy_path(stable, p, rng)?))
            }
            ProcessPair::ParetoShock(s) => pareto_shock_pair(s, p, rng),
        }
    }
}

fn check_gbm(mu: f64, sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("GBM needs finite drift and sigma > 0, got ({mu}, {sigma})")));
    }
    Ok(())
}

/// `n` iid pairs; pair `k` is drawn from stream `k` of `rng`.
pub fn simulate_pair(process: &ProcessPair, n: usize, p: usize, rng: &RngSpec) -> Result<PairedSample> {
    process.validate()?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = process.draw(p, &mut rng.stream(k as u64))?;
        x.push(a);
        y.push(b);
    }
    PairedSample::new(x, y)
}
