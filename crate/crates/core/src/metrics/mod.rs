//! Analysis metrics: genotype distances and diversity, body symmetry and
//! learning-curve descriptors.

pub mod assignment;
pub mod distance;
pub mod learning;
pub mod symmetry;

pub use assignment::{assignment_cost, hungarian};
pub use distance::{diversity, edit_distance, novelties, novelty};
pub use learning::{
    burn_in, convergence, descriptors, descriptors_from_smoothed, smooth_median, volatility,
    DescriptorError, LearningDescriptors,
};
pub use symmetry::{bilateral_symmetry, central_symmetry, symmetry_scores, SymmetryScores};

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
