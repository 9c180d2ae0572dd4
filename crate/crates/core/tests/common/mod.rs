//! Brute-force oracles shared by the integration and acceptance tests.
//!
//! Everything here works from raw distance matrices with literal sums over
//! index tuples and shares no code path with the library's evaluators.

#![allow(dead_code)]

use std::sync::Arc;

use fdcov::dcov::DistMatrix;
use fdcov::grid::{Partition, Trajectory};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_paths(rng: &mut ChaCha8Rng, part: &Arc<Partition>, n: usize, scale: f64) -> Vec<Trajectory> {
    (0..n)
        .map(|_| {
            let mut level = 0.0;
            let values = (0..part.len())
                .map(|_| {
                    level += scale * (rng.random::<f64>() - 0.5);
                    level
                })
                .collect();
            Trajectory::new(part.clone(), values).unwrap()
        })
        .collect()
}

pub fn raw(m: &DistMatrix) -> Vec<Vec<f64>> {
    (0..m.n()).map(|k| (0..m.n()).map(|l| m.get(k, l)).collect()).collect()
}

/// Literal triple sums I₁ + I₃ − 2·I₂.
pub fn naive_dcov(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let nf = n as f64;
    let mut i1 = 0.0;
    let mut sa = 0.0;
    let mut sb = 0.0;
    let mut i2 = 0.0;
    for k in 0..n {
        for l in 0..n {
            i1 += a[k][l] * b[k][l];
            sa += a[k][l];
            sb += b[k][l];
            for m in 0..n {
                i2 += a[k][l] * b[k][m];
            }
        }
    }
    i1 / (nf * nf) + (sa / (nf * nf)) * (sb / (nf * nf)) - 2.0 * i2 / (nf * nf * nf)
}

pub fn f_raw(a: &[Vec<f64>], b: &[Vec<f64>], i: [usize; 4]) -> f64 {
    a[i[0]][i[1]] * b[i[0]][i[1]] + a[i[0]][i[1]] * b[i[2]][i[3]]
        - 2.0 * a[i[0]][i[1]] * b[i[0]][i[2]]
}

pub fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut s = [a, b, c, d];
                    s.sort();
                    if s == [0, 1, 2, 3] {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

pub fn h_raw(a: &[Vec<f64>], b: &[Vec<f64>], z: [usize; 4], perms: &[[usize; 4]]) -> f64 {
    perms
        .iter()
        .map(|p| f_raw(a, b, [z[p[0]], z[p[1]], z[p[2]], z[p[3]]]))
        .sum::<f64>()
        / 24.0
}

/// h₂(a, b) = E h(a, b, Z, Z′) − E h(a, Z, Z′, Z″) − E h(Z, b, Z′, Z″) + E h(Z, Z′, Z″, Z‴)
/// with every expectation an average over all index tuples.
pub fn brute_h2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let nf = n as f64;
    let perms = permutations4();
    let mut g2 = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += h_raw(a, b, [x, y, k, l], &perms);
                }
            }
            g2[x][y] = s / (nf * nf);
        }
    }
    let mut g1 = vec![0.0; n];
    for x in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    s += h_raw(a, b, [x, k, l, m], &perms);
                }
            }
        }
        g1[x] = s / (nf * nf * nf);
    }
    let mut theta = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    theta += h_raw(a, b, [i, j, k, l], &perms);
                }
            }
        }
    }
    theta /= nf.powi(4);
    // E h(Z, y, Z′, Z″) = g1(y) by symmetry of h
    (0..n)
        .map(|x| (0..n).map(|y| g2[x][y] - g1[x] - g1[y] + theta).collect())
        .collect()
}

pub fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
}
