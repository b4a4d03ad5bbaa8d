//! Genotype edit distance, novelty and population diversity.
//!
//! Arm parameters are min-max normalized to `[0, 1]` by their ranges (angles
//! linearly, without wraparound; the spin bit as-is). The distance between two
//! drones is the minimum total Euclidean cost over all arm bijections.

use crate::metrics::assignment::{assignment_cost, hungarian};
use crate::morphology::{Genotype, Param, MOTORS, PARAMS_PER_ARM};

pub fn normalized_arms(g: &Genotype) -> [[f64; PARAMS_PER_ARM]; MOTORS] {
    g.arms.map(|a| {
        Param::ALL.map(|p| {
            let v = a.get(p);
            match p {
                Param::Spin => v,
                _ => {
                    let (lo, hi) = p.range();
                    (v - lo) / (hi - lo)
                }
            }
        })
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cost_matrix(a: &Genotype, e: &Genotype) -> Vec<Vec<f64>> {
    let na = normalized_arms(a);
    let ne = normalized_arms(e);
    na.iter()
        .map(|ai| ne.iter().map(|ej| euclid(ai, ej)).collect())
        .collect()
}

pub fn edit_distance(a: &Genotype, e: &Genotype) -> f64 {
    let c = cost_matrix(a, e);
    assignment_cost(&c, &hungarian(&c))
}

/// All pairwise distances, symmetric with a zero diagonal.
pub fn distance_matrix(pop: &[Genotype]) -> Vec<Vec<f64>> {
    let n = pop.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = edit_distance(&pop[i], &pop[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Novelty of every member: `(1/μ) Σ_j D(A, E_j) / D_max`, the self term
/// included. Zero for every member when `D_max = 0`.
pub fn novelties(pop: &[Genotype]) -> Vec<f64> {
    let d = distance_matrix(pop);
    novelties_from_matrix(&d)
}

pub fn novelties_from_matrix(d: &[Vec<f64>]) -> Vec<f64> {
    let n = d.len();
    let d_max = d.iter().flatten().fold(0.0f64, |m, &x| m.max(x));
    if n == 0 || d_max <= 0.0 {
        return vec![0.0; n];
    }
    d.iter()
        .map(|row| row.iter().map(|x| x / d_max).sum::<f64>() / n as f64)
        .collect()
}

/// Novelty of `a` against `pop`, normalized by the largest pairwise distance
/// within `pop`.
pub fn novelty(a: &Genotype, pop: &[Genotype]) -> f64 {
    let d_max = distance_matrix(pop)
        .iter()
        .flatten()
        .fold(0.0f64, |m, &x| m.max(x));
    if pop.is_empty() || d_max <= 0.0 {
        return 0.0;
    }
    pop.iter().map(|e| edit_distance(a, e) / d_max).sum::<f64>() / pop.len() as f64
}

pub fn diversity(pop: &[Genotype]) -> f64 {
    let n = novelties(pop);
    if n.is_empty() {
        0.0
    } else {
        n.iter().sum::<f64>() / n.len() as f64
    }
}
