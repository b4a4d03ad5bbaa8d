//! Morphological symmetry scores: mean nearest-neighbour residual of the
//! motor positions after a reflection. Zero means the reflected set lands on
//! the original.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryScores {
    pub ces: f64,
    pub bis: f64,
}

fn reflection_score(points: &[Vector3<f64>], reflect: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let total: f64 = points
        .iter()
        .map(|p| {
            let r = reflect(p);
            points
                .iter()
                .map(|q| (r - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / points.len() as f64
}

/// Central symmetry through the origin.
pub fn central_symmetry(points: &[Vector3<f64>]) -> f64 {
    reflection_score(points, |p| -p)
}

/// Bilateral symmetry across the yz-plane.
pub fn bilateral_symmetry(points: &[Vector3<f64>]) -> f64 {
    reflection_score(points, |p| Vector3::new(-p.x, p.y, p.z))
}

pub fn symmetry_scores(points: &[Vector3<f64>]) -> SymmetryScores {
    SymmetryScores {
        ces: central_symmetry(points),
        bis: bilateral_symmetry(points),
    }
}
