//! Partitions of `[0, 1]`, discretized trajectories and the weighted
//! step-function L² geometry.
//!
//! A trajectory stores `Z(t_1), ..., Z(t_p)`; the value at `t_0 = 0` is never
//! read by any statistic. Its step-function interpolant is
//! `Z^(p)(t) = Z(t_i)` on `(t_{i-1}, t_i]`, so the L² distance between two
//! interpolants is the Euclidean distance between the weighted vectors
//! `(|Δ_i|^{1/2} Z(t_i))_i`.

use std::sync::Arc;

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Grid `0 = t_0 < t_1 < ... < t_p = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
    weights: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a partition needs at least the points 0 and 1"));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::invalid("a partition must start at 0 and end at 1"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("partition points must be finite"));
        }
        let weights: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::invalid("partition points must be strictly increasing"));
        }
        let total: f64 = crate::sum::sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("interval weights sum to {total}, not 1")));
        }
        let mesh = weights.iter().copied().fold(0.0, f64::max);
        Ok(Self { points, weights, mesh })
    }

    /// Number of intervals `p`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All grid points `t_0..=t_p`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Right endpoints `t_1..=t_p`, the locations where trajectories are observed.
    pub fn observation_times(&self) -> &[f64] {
        &self.points[1..]
    }

    /// Interval lengths `|Δ_i| = t_i - t_{i-1}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }
}

/// Equidistant partition with mesh `1/p`.
pub fn uniform_partition(p: usize) -> Result<Partition> {
    if p == 0 {
        return Err(Error::invalid("uniform partition needs p >= 1"));
    }
    let mut points: Vec<f64> = (0..=p).map(|i| i as f64 / p as f64).collect();
    points[p] = 1.0;
    Partition::new(points)
}

/// Values of one path at `t_1, ..., t_p`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    partition: Arc<Partition>,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::invalid(format!(
                "trajectory has {} values but the partition has {} intervals",
                values.len(),
                partition.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("trajectory value {i} is not finite")));
        }
        Ok(Self { partition, values })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same partition, values multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.partition.clone(), self.values.iter().map(|v| c * v).collect())
    }

    pub fn same_grid(&self, other: &Trajectory) -> bool {
        same_partition(&self.partition, &other.partition)
    }
}

pub(crate) fn same_partition(a: &Arc<Partition>, b: &Arc<Partition>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// `(|Δ_i|^{1/2} Z(t_i))_i`
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    pub coords: Vec<f64>,
}

impl WeightedVector {
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &WeightedVector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn embed(traj: &Trajectory) -> WeightedVector {
    WeightedVector {
        coords: traj
            .values
            .iter()
            .zip(traj.partition.weights())
            .map(|(v, w)| w.sqrt() * v)
            .collect(),
    }
}

#[inline]
pub(crate) fn weighted_sq_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((x, y), w) in a.iter().zip(b).zip(weights) {
        let d = x - y;
        acc += d * d * w;
    }
    acc
}

/// L² distance of the step-function interpolants of two trajectories.
pub fn step_l2_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::invalid("trajectories live on different partitions"));
    }
    Ok(weighted_sq_distance(&a.values, &b.values, a.partition.weights()).sqrt())
}

/// `n` index-aligned pairs `(X_i, Y_i)` on one shared partition.
#[derive(Debug, Clone)]
pub struct PairedSample {
    partition: Arc<Partition>,
    x: Vec<Trajectory>,
    y: Vec<Trajectory>,
}

impl PairedSample {
    pub fn new(x: Vec<Trajectory>, y: Vec<Trajectory>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("a paired sample needs at least one pair"));
        }
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} X paths but {} Y paths",
                x.len(),
                y.len()
            )));
        }
        let partition = x[0].partition.clone();
        if x.iter().chain(&y).any(|t| !same_partition(&t.partition, &partition)) {
            return Err(Error::invalid("all paths of a paired sample must share one partition"));
        }
        Ok(Self { partition, x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn x(&self) -> &[Trajectory] {
        &self.x
    }

    pub fn y(&self) -> &[Trajectory] {
        &self.y
    }

    /// Both components multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let x = self.x.iter().map(|t| t.scaled(c)).collect::<Result<_>>()?;
        let y = self.y.iter().map(|t| t.scaled(c)).collect::<Result<_>>()?;
        Self::new(x, y)
    }

    /// Pairs reordered jointly: pair `i` of the result is pair `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() || order.iter().any(|&i| i >= self.len()) {
            return Err(Error::invalid("permutation does not match the sample size"));
        }
        let x = order.iter().map(|&i| self.x[i].clone()).collect();
        let y = order.iter().map(|&i| self.y[i].clone()).collect();
        Self::new(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(p: &Arc<Partition>, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::new(p.clone(), p.observation_times().iter().map(|&t| f(t)).collect()).unwrap()
    }

    #[test]
    fn uniform_partitions() {
        assert!(matches!(uniform_partition(0), Err(Error::InvalidArgument(_))));
        assert_eq!(uniform_partition(1).unwrap().points(), &[0.0, 1.0]);
        let p4 = uniform_partition(4).unwrap();
        assert_eq!(p4.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p4.mesh(), 0.25);
        let p100 = uniform_partition(100).unwrap();
        assert!((p100.mesh() - 0.01).abs() < 1e-15);
        assert!((p100.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_partitions() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.1, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.7, 0.3, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.3, 0.9]).is_err());
        assert!(Partition::new(vec![0.0, 0.1, 0.35, 1.0]).is_ok());
    }

    #[test]
    fn rejects_non_finite_values() {
        let p = Arc::new(uniform_partition(3).unwrap());
        assert!(Trajectory::new(p.clone(), vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(Trajectory::new(p.clone(), vec![0.0, f64::INFINITY, 1.0]).is_err());
        assert!(Trajectory::new(p, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn embedding_examples() {
        let p = Arc::new(uniform_partition(4).unwrap());
        assert_eq!(embed(&traj(&p, |_| 0.0)).coords, vec![0.0; 4]);
        assert_eq!(embed(&traj(&p, |_| 1.0)).coords, vec![0.5; 4]);

        let p = 7;
        let part = Arc::new(uniform_partition(p).unwrap());
        let e = embed(&traj(&part, |t| t));
        for (i, c) in e.coords.iter().enumerate() {
            let expected = ((i + 1) as f64 / p as f64) / (p as f64).sqrt();
            assert!((c - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn embedding_norm_matches_weighted_sum() {
        let p = Arc::new(Partition::new(vec![0.0, 0.1, 0.45, 0.5, 1.0]).unwrap());
        let t = Trajectory::new(p.clone(), vec![1.5, -2.0, 0.25, 3.0]).unwrap();
        let direct: f64 = t.values().iter().zip(p.weights()).map(|(v, w)| v * v * w).sum();
        assert!((embed(&t).norm().powi(2) - direct).abs() < 1e-14);
    }

    #[test]
    fn distance_examples() {
        let p = Arc::new(uniform_partition(4).unwrap());
        let a = traj(&p, |t| t * t - 3.0);
        assert_eq!(step_l2_distance(&a, &a).unwrap(), 0.0);

        let odd = Arc::new(Partition::new(vec![0.0, 0.2, 0.3, 1.0]).unwrap());
        let one = traj(&odd, |_| 1.0);
        let zero = traj(&odd, |_| 0.0);
        assert!((step_l2_distance(&one, &zero).unwrap() - 1.0).abs() < 1e-15);

        let p100 = Arc::new(uniform_partition(100).unwrap());
        let d = step_l2_distance(&traj(&p100, |t| t), &traj(&p100, |_| 0.0)).unwrap();
        let pf = 100.0_f64;
        let closed = ((pf + 1.0) * (2.0 * pf + 1.0) / (6.0 * pf * pf)).sqrt();
        assert!((d - closed).abs() < 1e-14);
        assert!((d - 0.581678).abs() < 1e-6);
    }

    #[test]
    fn distance_rejects_mismatched_partitions() {
        let a = traj(&Arc::new(uniform_partition(4).unwrap()), |t| t);
        let b = traj(&Arc::new(uniform_partition(5).unwrap()), |t| t);
        assert!(step_l2_distance(&a, &b).is_err());
        // equal points on distinct allocations are the same grid
        let c = traj(&Arc::new(uniform_partition(4).unwrap()), |t| t);
        assert!(step_l2_distance(&a, &c).is_ok());
    }

    #[test]
    fn riemann_sums_converge_at_first_order() {
        // ∫_0^1 (t^2 + t)^2 dt = 31/30
        let exact = 31.0 / 30.0;
        let mut errs = Vec::new();
        for p in [10, 100, 1000] {
            let part = Arc::new(uniform_partition(p).unwrap());
            let d = step_l2_distance(&traj(&part, |t| t * t), &traj(&part, |t| -t)).unwrap();
            errs.push((d * d - exact).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 5.0 && ratio < 20.0, "ratio {ratio}");
        }
    }

    #[test]
    fn paired_sample_validation() {
        let p = Arc::new(uniform_partition(3).unwrap());
        let q = Arc::new(uniform_partition(4).unwrap());
        let a = traj(&p, |t| t);
        assert!(PairedSample::new(vec![], vec![]).is_err());
        assert!(PairedSample::new(vec![a.clone()], vec![]).is_err());
        assert!(PairedSample::new(vec![a.clone()], vec![traj(&q, |t| t)]).is_err());
        let s = PairedSample::new(vec![a.clone(), a.clone()], vec![a.clone(), a]).unwrap();
        assert_eq!(s.len(), 2);
    }
}
