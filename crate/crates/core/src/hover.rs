//! Static-hover feasibility.
//!
//! Seeks the least-norm control `u` with `‖B_F u‖ = g`, `B_M u = 0` and
//! `lo ≤ u ≤ hi`.
//!
//! Feasibility is decided on the polytope `P = {u : lo ≤ u ≤ hi, B_M u = 0}`.
//! `‖B_F u‖` is convex, so its maximum over `P` sits at a vertex; if that is
//! below `g` no control hovers. Otherwise a segment between a low-force and a
//! high-force point of `P` crosses `‖B_F u‖ = g` and gives a feasible force
//! direction.
//!
//! The cost is then minimized over the direction `d` of the specific force:
//! from those crossing directions and an icosphere grid, followed by compass
//! refinement around the best one. For a fixed `d` the problem
//! `min ‖u‖² s.t. [B_F; B_M] u = (g d, 0), lo ≤ u ≤ hi` is a strictly convex
//! QP in six variables, solved exactly by enumerating the 3⁶ assignments of
//! each variable to {lower, upper, free}. The optimum has one such active set
//! and is the least-norm solution of the equality system over its free
//! variables.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{Phenotype, MOTORS};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const MAX_CROSSING_SEEDS: usize = 24;
const MAX_REFINE_ITERATIONS: usize = 200;

type Control = SVector<f64, MOTORS>;
type Allocation = SMatrix<f64, 6, MOTORS>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoverError {
    #[error("control bounds invalid: {0}")]
    BadBounds(String),
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lower: [f64; MOTORS],
    pub upper: [f64; MOTORS],
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self::uniform(0.0, 1.0)
    }
}

impl ControlBounds {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            lower: [lo; MOTORS],
            upper: [hi; MOTORS],
        }
    }

    fn validate(&self) -> Result<(), HoverError> {
        for i in 0..MOTORS {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return Err(HoverError::BadBounds(format!(
                    "motor {i}: need 0 ≤ lower ≤ upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverResult {
    pub feasible: bool,
    /// Best control found; zeros when infeasible.
    pub u_hat: [f64; MOTORS],
    /// `u_hat · u_hat`.
    pub cost: f64,
    /// Unit direction of `B_F u_hat` in the body frame.
    pub force_direction: [f64; 3],
}

impl HoverResult {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            u_hat: [0.0; MOTORS],
            cost: 0.0,
            force_direction: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct HoverSearch {
    /// Icosphere subdivision level; 2 gives 162 directions.
    pub subdivisions: usize,
    pub refinement_passes: usize,
    /// Compass search stops once the step angle falls below this, rad.
    pub min_step: f64,
}

impl Default for HoverSearch {
    fn default() -> Self {
        Self {
            subdivisions: 2,
            refinement_passes: 2,
            min_step: 1e-7,
        }
    }
}

/// Hover test with the default direction grid and gravity 9.81 m/s².
pub fn check_static_hover(
    ph: &Phenotype,
    bounds: &ControlBounds,
    tol: f64,
) -> Result<HoverResult, HoverError> {
    check_static_hover_with(ph, bounds, tol, 9.81, &HoverSearch::default())
}

pub fn check_static_hover_with(
    ph: &Phenotype,
    bounds: &ControlBounds,
    tol: f64,
    g: f64,
    search: &HoverSearch,
) -> Result<HoverResult, HoverError> {
    bounds.validate()?;
    if !(tol > 0.0) {
        return Err(HoverError::BadTolerance);
    }
    let solver = DirectionSolver::new(ph, bounds, g, tol);

    let points = solver.polytope_points();
    let force = |u: &Control| (ph.force_effectiveness * u).norm();
    let Some(high) = points.iter().map(force).reduce(f64::max) else {
        return Ok(HoverResult::infeasible());
    };
    if high < g - tol {
        return Ok(HoverResult::infeasible());
    }

    let mut seeds = icosphere(search.subdivisions);
    if let Some(low) = points.iter().min_by(|a, b| force(a).total_cmp(&force(b))) {
        let f_low = ph.force_effectiveness * low;
        let mut high: Vec<&Control> = points.iter().filter(|p| force(p) >= g).collect();
        high.sort_by(|a, b| force(b).total_cmp(&force(a)));
        high.dedup_by(|a, b| (**a - **b).amax() < 1e-9);
        for p in high.into_iter().take(MAX_CROSSING_SEEDS) {
            // ‖f_low + s (f_p − f_low)‖ = g for s ∈ [0, 1]
            let dir = ph.force_effectiveness * p - f_low;
            let (a, b, c) = (dir.norm_squared(), 2.0 * f_low.dot(&dir), f_low.norm_squared() - g * g);
            if a == 0.0 || c > 0.0 {
                continue;
            }
            let s = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
            let f = f_low + s * dir;
            if f.norm() > 0.0 {
                seeds.push(f.normalize());
            }
        }
    }

    let mut best: Option<(Vector3<f64>, Control, f64)> = None;
    for d in seeds {
        if let Some((u, c)) = solver.solve(&d) {
            if best.as_ref().is_none_or(|b| c < b.2) {
                best = Some((d, u, c));
            }
        }
    }
    let Some(mut best) = best else {
        return Ok(HoverResult::infeasible());
    };

    let grid_step = 0.5 * (1.1071487177940904 / 2f64.powi(search.subdivisions as i32));
    for pass in 0..search.refinement_passes {
        let mut step = grid_step / 4f64.powi(pass as i32);
        let mut iterations = 0;
        while step > search.min_step && iterations < MAX_REFINE_ITERATIONS {
            iterations += 1;
            let mut improved = false;
            for cand in compass(&best.0, step) {
                if let Some((u, c)) = solver.solve(&cand) {
                    if c < best.2 - 1e-12 * (1.0 + best.2) {
                        best = (cand, u, c);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }

    let (d, u, _) = best;
    let u_hat: [f64; MOTORS] = u.into();
    Ok(HoverResult {
        feasible: true,
        u_hat,
        cost: u.dot(&u),
        force_direction: [d.x, d.y, d.z],
    })
}

/// Residuals of a candidate control checked by direct substitution:
/// `(| ‖B_F u‖ − g |, ‖B_M u‖∞, worst bound violation)`.
pub fn hover_residuals(ph: &Phenotype, bounds: &ControlBounds, u: &[f64; MOTORS], g: f64) -> (f64, f64, f64) {
    let u = Control::from_column_slice(u);
    let f = ph.force_effectiveness * u;
    let m = ph.moment_effectiveness * u;
    let mut bound = 0.0f64;
    for i in 0..MOTORS {
        bound = bound
            .max(bounds.lower[i] - u[i])
            .max(u[i] - bounds.upper[i]);
    }
    ((f.norm() - g).abs(), m.amax(), bound)
}

/// Free columns of a sub-system with its pseudo-inverse scattered into the
/// rows of those columns (rows of fixed variables are zero).
struct ActiveSet<const R: usize> {
    free: Vec<usize>,
    fixed: Vec<usize>,
    pinv: SMatrix<f64, MOTORS, R>,
}

impl<const R: usize> ActiveSet<R> {
    fn new(mask: usize, system: &SMatrix<f64, R, MOTORS>) -> Self {
        let free: Vec<usize> = (0..MOTORS).filter(|i| mask >> i & 1 == 1).collect();
        let fixed: Vec<usize> = (0..MOTORS).filter(|i| mask >> i & 1 == 0).collect();
        let mut pinv = SMatrix::<f64, MOTORS, R>::zeros();
        if !free.is_empty() {
            let scale = system.amax().max(1.0);
            let mut sub = DMatrix::zeros(R, free.len());
            for (c, &i) in free.iter().enumerate() {
                sub.set_column(c, &system.column(i));
            }
            let p = sub.pseudo_inverse(1e-12 * scale).expect("svd of a finite matrix");
            for (c, &i) in free.iter().enumerate() {
                pinv.row_mut(i).copy_from(&p.row(c));
            }
        }
        Self { free, fixed, pinv }
    }

    /// Fixed variables at the bounds selected by `pattern`, free ones from
    /// the least-norm solution of `A u = target`; `None` when a free value
    /// leaves its bounds.
    fn candidate(
        &self,
        pattern: usize,
        system: &SMatrix<f64, R, MOTORS>,
        target: &SVector<f64, R>,
        bounds: &ControlBounds,
    ) -> Option<Control> {
        let mut u = Control::zeros();
        for (k, &i) in self.fixed.iter().enumerate() {
            u[i] = if pattern >> k & 1 == 1 {
                bounds.upper[i]
            } else {
                bounds.lower[i]
            };
        }
        let sol = self.pinv * (target - system * u);
        for &i in &self.free {
            let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
            if sol[i] < lo - 1e-12 || sol[i] > hi + 1e-12 {
                return None;
            }
            u[i] = sol[i].clamp(lo, hi);
        }
        Some(u)
    }
}

struct DirectionSolver {
    alloc: Allocation,
    moment: SMatrix<f64, 3, MOTORS>,
    /// Pseudo-inverses of `B_M` restricted to at most three free columns.
    moment_sets: Vec<ActiveSet<3>>,
    bounds: ControlBounds,
    g: f64,
    tol: f64,
    sets: Vec<ActiveSet<6>>,
}

impl DirectionSolver {
    fn new(ph: &Phenotype, bounds: &ControlBounds, g: f64, tol: f64) -> Self {
        let mut alloc = Allocation::zeros();
        alloc.fixed_view_mut::<3, MOTORS>(0, 0).copy_from(&ph.force_effectiveness);
        alloc.fixed_view_mut::<3, MOTORS>(3, 0).copy_from(&ph.moment_effectiveness);
        let sets = (0..1usize << MOTORS).map(|mask| ActiveSet::new(mask, &alloc)).collect();
        let moment = ph.moment_effectiveness;
        let moment_sets = (0..1usize << MOTORS)
            .filter(|mask: &usize| mask.count_ones() <= 3)
            .map(|mask| ActiveSet::new(mask, &moment))
            .collect();
        Self {
            alloc,
            moment,
            moment_sets,
            bounds: bounds.clone(),
            g,
            tol,
            sets,
        }
    }

    /// Points of `{lo ≤ u ≤ hi, B_M u = 0}` with at least three coordinates
    /// at a bound. Every vertex of that polytope is among them.
    fn polytope_points(&self) -> Vec<Control> {
        let zero = SVector::<f64, 3>::zeros();
        let mut out = Vec::new();
        for set in &self.moment_sets {
            for pattern in 0..1usize << set.fixed.len() {
                if let Some(u) = set.candidate(pattern, &self.moment, &zero, &self.bounds) {
                    if (self.moment * u).amax() <= self.tol {
                        out.push(u);
                    }
                }
            }
        }
        out
    }

    /// Exact least-norm control producing specific force `g d` and zero
    /// moment, or `None` if no bounded control does.
    fn solve(&self, d: &Vector3<f64>) -> Option<(Control, f64)> {
        let mut target = SVector::<f64, 6>::zeros();
        target.fixed_rows_mut::<3>(0).copy_from(&(self.g * d));
        let mut best: Option<(Control, f64)> = None;
        for set in &self.sets {
            for pattern in 0..1usize << set.fixed.len() {
                let Some(u) = set.candidate(pattern, &self.alloc, &target, &self.bounds) else {
                    continue;
                };
                let residual = self.alloc * u - target;
                let force_err = ((self.alloc.fixed_rows::<3>(0) * u).norm() - self.g).abs();
                let moment_err = residual.fixed_rows::<3>(3).amax();
                if force_err > self.tol || moment_err > self.tol {
                    continue;
                }
                // the direction itself must be met, not just the magnitude
                if residual.fixed_rows::<3>(0).norm() > self.tol {
                    continue;
                }
                let cost = u.dot(&u);
                if best.as_ref().is_none_or(|b| cost < b.1) {
                    best = Some((u, cost));
                }
            }
        }
        best
    }
}

fn compass(d: &Vector3<f64>, step: f64) -> Vec<Vector3<f64>> {
    let helper = if d.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    let (s, c) = step.sin_cos();
    let mut out = Vec::with_capacity(8);
    for k in 0..8 {
        let a = k as f64 * std::f64::consts::FRAC_PI_4;
        let t = a.cos() * e1 + a.sin() * e2;
        out.push((c * d + s * t).normalize());
    }
    out
}

/// Unit directions of a pole-aligned icosahedron subdivided `levels` times;
/// `+z` is always a vertex.
pub fn icosphere(levels: usize) -> Vec<Vector3<f64>> {
    let mut verts: Vec<Vector3<f64>> = Vec::new();
    verts.push(Vector3::z());
    let ring_z = 1.0 / 5f64.sqrt();
    let ring_r = 2.0 / 5f64.sqrt();
    for k in 0..5 {
        let a = k as f64 * std::f64::consts::TAU / 5.0;
        verts.push(Vector3::new(ring_r * a.cos(), ring_r * a.sin(), ring_z));
    }
    for k in 0..5 {
        let a = (k as f64 + 0.5) * std::f64::consts::TAU / 5.0;
        verts.push(Vector3::new(ring_r * a.cos(), ring_r * a.sin(), -ring_z));
    }
    verts.push(-Vector3::z());

    let mut faces: Vec<[usize; 3]> = Vec::new();
    for k in 0..5 {
        let u0 = 1 + k;
        let u1 = 1 + (k + 1) % 5;
        let l0 = 6 + k;
        let l1 = 6 + (k + 1) % 5;
        faces.push([0, u0, u1]);
        faces.push([u0, l0, u1]);
        faces.push([u1, l0, l1]);
        faces.push([11, l1, l0]);
    }

    for _ in 0..levels {
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}
