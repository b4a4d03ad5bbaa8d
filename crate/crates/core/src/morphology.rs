//! Hexacopter genotypes: six arms of six parameters each, decoding into a
//! physical body, point mutation and rotor-separation repair.
//!
//! Arm geometry: a motor sits at the arm tip,
//! `l * (cos θa cos ψa, cos θa sin ψa, sin θa)`.
//! Motor thrust axis: `(sin θm cos ψm, sin θm sin ψm, cos θm)`, i.e. `θm` tilts
//! the axis away from body +z towards the heading `ψm`. Both motor angles are
//! in the body frame, so `(ψm, θm) = (·, 0)` always thrusts along +z.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::PhysicalConstants;

pub const MOTORS: usize = 6;
pub const PARAMS_PER_ARM: usize = 6;

pub const ARM_LENGTH_MIN: f64 = 0.09;
pub const ARM_LENGTH_MAX: f64 = 0.4;

pub const GENOTYPE_SCHEMA: &str = "hexevo.genotype";
pub const GENOTYPE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorphologyError {
    #[error("rotor overlaps persist after {iterations} repair iterations ({overlaps} pairs)")]
    RepairFailed { iterations: usize, overlaps: usize },
    #[error("invalid genotype: {0}")]
    Invalid(String),
    #[error("genotype record: {0}")]
    Record(String),
}

/// The six per-arm parameters, in genotype column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Length,
    ArmPolar,
    ArmAzimuth,
    MotorPolar,
    MotorAzimuth,
    Spin,
}

impl Param {
    pub const ALL: [Param; PARAMS_PER_ARM] = [
        Param::Length,
        Param::ArmPolar,
        Param::ArmAzimuth,
        Param::MotorPolar,
        Param::MotorAzimuth,
        Param::Spin,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Parameter range used for sampling and min-max normalization.
    pub fn range(self) -> (f64, f64) {
        match self {
            Param::Length => (ARM_LENGTH_MIN, ARM_LENGTH_MAX),
            Param::ArmPolar | Param::MotorPolar => (0.0, TAU),
            Param::ArmAzimuth | Param::MotorAzimuth => (-PI, PI),
            Param::Spin => (0.0, 1.0),
        }
    }
}

/// Wraps into `[0, 2π)`.
pub fn wrap_polar(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps into `[-π, π)`.
pub fn wrap_azimuth(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU);
    let w = if w >= TAU { 0.0 } else { w };
    w - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGene {
    /// Arm length, m.
    pub l: f64,
    pub psi_a: f64,
    pub theta_a: f64,
    pub psi_m: f64,
    pub theta_m: f64,
    /// Spin direction, 0 or 1.
    pub dir: u8,
}

impl ArmGene {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Length => self.l,
            Param::ArmPolar => self.psi_a,
            Param::ArmAzimuth => self.theta_a,
            Param::MotorPolar => self.psi_m,
            Param::MotorAzimuth => self.theta_m,
            Param::Spin => f64::from(self.dir),
        }
    }

    pub fn as_array(&self) -> [f64; PARAMS_PER_ARM] {
        Param::ALL.map(|p| self.get(p))
    }

    pub fn motor_position(&self) -> Vector3<f64> {
        let (sa, ca) = self.theta_a.sin_cos();
        let (sp, cp) = self.psi_a.sin_cos();
        self.l * Vector3::new(ca * cp, ca * sp, sa)
    }

    pub fn motor_axis(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_m.sin_cos();
        let (sp, cp) = self.psi_m.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    pub fn spin_sign(&self) -> f64 {
        if self.dir == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Re-encodes a Cartesian motor position into `(l, ψa, θa)`, clipping `l`.
    fn set_position(&mut self, p: &Vector3<f64>) {
        let r = p.norm();
        if r < 1e-12 {
            self.l = ARM_LENGTH_MIN;
            return;
        }
        self.l = r.clamp(ARM_LENGTH_MIN, ARM_LENGTH_MAX);
        self.psi_a = wrap_polar(p.y.atan2(p.x));
        self.theta_a = (p.z / r).clamp(-1.0, 1.0).asin();
    }

    fn check(&self, arm: usize) -> Result<(), MorphologyError> {
        let bad = |what: &str, v: f64| {
            Err(MorphologyError::Invalid(format!("arm {arm}: {what} = {v} out of range")))
        };
        if !(ARM_LENGTH_MIN..=ARM_LENGTH_MAX).contains(&self.l) {
            return bad("l", self.l);
        }
        for (name, v) in [("psi_a", self.psi_a), ("psi_m", self.psi_m)] {
            if !(0.0..TAU).contains(&v) {
                return bad(name, v);
            }
        }
        for (name, v) in [("theta_a", self.theta_a), ("theta_m", self.theta_m)] {
            if !(-PI..=PI).contains(&v) {
                return bad(name, v);
            }
        }
        if self.dir > 1 {
            return bad("dir", f64::from(self.dir));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    pub arms: [ArmGene; MOTORS],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenotypeRecord {
    schema: String,
    version: u32,
    arms: Vec<ArmGene>,
}

impl Genotype {
    /// Six equal arms in the body plane, 60° apart, upright motors with
    /// alternating spin.
    pub fn regular_hexacopter() -> Self {
        Self::regular_with_length(0.2)
    }

    pub fn regular_with_length(l: f64) -> Self {
        let arms = std::array::from_fn(|i| ArmGene {
            l,
            psi_a: i as f64 * PI / 3.0,
            theta_a: 0.0,
            psi_m: 0.0,
            theta_m: 0.0,
            dir: (i % 2) as u8,
        });
        Self { arms }
    }

    pub fn validate(&self) -> Result<(), MorphologyError> {
        for (i, a) in self.arms.iter().enumerate() {
            a.check(i)?;
        }
        Ok(())
    }

    pub fn motor_positions(&self) -> [Vector3<f64>; MOTORS] {
        self.arms.map(|a| a.motor_position())
    }

    /// Serializes to the versioned JSON record.
    pub fn to_record(&self) -> String {
        let rec = GenotypeRecord {
            schema: GENOTYPE_SCHEMA.into(),
            version: GENOTYPE_VERSION,
            arms: self.arms.to_vec(),
        };
        serde_json::to_string_pretty(&rec).expect("genotype serializes")
    }

    pub fn from_record(text: &str) -> Result<Self, MorphologyError> {
        let rec: GenotypeRecord =
            serde_json::from_str(text).map_err(|e| MorphologyError::Record(e.to_string()))?;
        if rec.schema != GENOTYPE_SCHEMA {
            return Err(MorphologyError::Record(format!("unknown schema {:?}", rec.schema)));
        }
        if rec.version != GENOTYPE_VERSION {
            return Err(MorphologyError::Record(format!(
                "unsupported version {}",
                rec.version
            )));
        }
        let arms: [ArmGene; MOTORS] = rec.arms.try_into().map_err(|v: Vec<ArmGene>| {
            MorphologyError::Record(format!("expected {MOTORS} arms, found {}", v.len()))
        })?;
        let g = Genotype { arms };
        g.validate()?;
        Ok(g)
    }
}

impl Serialize for Genotype {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GenotypeRecord {
            schema: GENOTYPE_SCHEMA.into(),
            version: GENOTYPE_VERSION,
            arms: self.arms.to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rec = GenotypeRecord::deserialize(d)?;
        if rec.schema != GENOTYPE_SCHEMA || rec.version != GENOTYPE_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported genotype record {}/{}",
                rec.schema, rec.version
            )));
        }
        let n = rec.arms.len();
        let arms: [ArmGene; MOTORS] = rec
            .arms
            .try_into()
            .map_err(|_| D::Error::custom(format!("expected {MOTORS} arms, found {n}")))?;
        let g = Genotype { arms };
        g.validate().map_err(D::Error::custom)?;
        Ok(g)
    }
}

/// Decoded body: geometry, mass properties and effectiveness matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    pub motor_positions: [Vector3<f64>; MOTORS],
    pub motor_axes: [Vector3<f64>; MOTORS],
    pub spin: [f64; MOTORS],
    pub total_mass: f64,
    pub inertia: Matrix3<f64>,
    /// Specific force per unit `ω²`, m/s².
    pub force_effectiveness: SMatrix<f64, 3, MOTORS>,
    /// Specific moment per unit `ω²`, rad/s².
    pub moment_effectiveness: SMatrix<f64, 3, MOTORS>,
}

fn point_inertia(mass: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose())
}

pub fn decode(g: &Genotype, phys: &PhysicalConstants) -> Phenotype {
    let motor_positions = g.arms.map(|a| a.motor_position());
    let motor_axes = g.arms.map(|a| a.motor_axis());
    let spin = g.arms.map(|a| a.spin_sign());
    let total_mass = phys.total_mass();

    let hub = 0.4 * phys.hub_mass * phys.hub_radius * phys.hub_radius;
    let mut inertia = Matrix3::identity() * hub;
    for p in &motor_positions {
        inertia += point_inertia(phys.motor_mass, p);
    }
    let inertia_inv = inertia
        .try_inverse()
        .expect("inertia with a solid hub is invertible");

    let mut force_effectiveness = SMatrix::<f64, 3, MOTORS>::zeros();
    let mut moment_effectiveness = SMatrix::<f64, 3, MOTORS>::zeros();
    for i in 0..MOTORS {
        let thrust = phys.motor_thrust * motor_axes[i];
        force_effectiveness.set_column(i, &(thrust / total_mass));
        let torque =
            motor_positions[i].cross(&thrust) + spin[i] * phys.motor_torque * motor_axes[i];
        moment_effectiveness.set_column(i, &(inertia_inv * torque));
    }
    Phenotype {
        motor_positions,
        motor_axes,
        spin,
        total_mass,
        inertia,
        force_effectiveness,
        moment_effectiveness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    /// Selection probability per parameter, genotype column order.
    pub param_probs: [f64; PARAMS_PER_ARM],
    /// Gaussian scale per parameter; the spin entry is unused.
    pub sigmas: [f64; PARAMS_PER_ARM],
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            param_probs: [0.19, 0.19, 0.19, 0.19, 0.19, 0.05],
            sigmas: [0.1, 0.2, 0.2, 0.2, 0.2, 0.0],
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.param_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err("mutation.param_probs must be non-negative".into());
        }
        let total: f64 = self.param_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("mutation.param_probs must sum to 1, got {total}"));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err("mutation.sigmas must be non-negative".into());
        }
        Ok(())
    }
}

/// The gene slot chosen by a mutation and its value before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationSite {
    pub arm: usize,
    pub param: Param,
    pub before: f64,
    pub after: f64,
}

/// Chooses an arm uniformly and a parameter from `cfg.param_probs`.
pub fn sample_site<R: Rng + ?Sized>(cfg: &MutationConfig, rng: &mut R) -> (usize, Param) {
    let arm = rng.random_range(0..MOTORS);
    let dist = WeightedIndex::new(cfg.param_probs).expect("validated probabilities");
    (arm, Param::ALL[dist.sample(rng)])
}

/// Perturbs one slot: Gaussian noise then clip (length) or wrap (angles);
/// the spin bit flips.
pub fn perturb<R: Rng + ?Sized>(
    g: &Genotype,
    arm: usize,
    param: Param,
    cfg: &MutationConfig,
    rng: &mut R,
) -> (Genotype, MutationSite) {
    let mut out = g.clone();
    let a = &mut out.arms[arm];
    let before = a.get(param);
    let mut noise = || {
        let sigma = cfg.sigmas[param.index()];
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    };
    match param {
        Param::Length => a.l = (a.l + noise()).clamp(ARM_LENGTH_MIN, ARM_LENGTH_MAX),
        Param::ArmPolar => a.psi_a = wrap_polar(a.psi_a + noise()),
        Param::MotorPolar => a.psi_m = wrap_polar(a.psi_m + noise()),
        Param::ArmAzimuth => a.theta_a = wrap_azimuth(a.theta_a + noise()),
        Param::MotorAzimuth => a.theta_m = wrap_azimuth(a.theta_m + noise()),
        Param::Spin => a.dir = 1 - a.dir,
    }
    let after = a.get(param);
    (
        out,
        MutationSite {
            arm,
            param,
            before,
            after,
        },
    )
}

/// Point mutation followed by repair; also reports the mutated slot.
pub fn mutate_traced<R: Rng + ?Sized>(
    g: &Genotype,
    cfg: &MutationConfig,
    phys: &PhysicalConstants,
    rng: &mut R,
) -> Result<(Genotype, MutationSite), MorphologyError> {
    let (arm, param) = sample_site(cfg, rng);
    let (mutant, site) = perturb(g, arm, param, cfg, rng);
    Ok((repair(&mutant, phys)?, site))
}

pub fn mutate<R: Rng + ?Sized>(
    g: &Genotype,
    cfg: &MutationConfig,
    phys: &PhysicalConstants,
    rng: &mut R,
) -> Result<Genotype, MorphologyError> {
    mutate_traced(g, cfg, phys, rng).map(|(g, _)| g)
}

/// Axis-aligned rotor boxes `D × D × 2H` strictly intersect.
pub fn boxes_overlap(a: &Vector3<f64>, b: &Vector3<f64>, phys: &PhysicalConstants) -> bool {
    let d = b - a;
    d.x.abs() < phys.rotor_diameter
        && d.y.abs() < phys.rotor_diameter
        && d.z.abs() < 2.0 * phys.rotor_height
}

pub fn overlapping_pairs(g: &Genotype, phys: &PhysicalConstants) -> Vec<(usize, usize)> {
    let p = g.motor_positions();
    let mut pairs = Vec::new();
    for i in 0..MOTORS {
        for j in i + 1..MOTORS {
            if boxes_overlap(&p[i], &p[j], phys) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Pushes overlapping rotors apart by `repair_step` along the line joining
/// them until no bounding boxes intersect. Only displaced arms are
/// re-encoded, so a collision-free genotype is returned unchanged.
pub fn repair(g: &Genotype, phys: &PhysicalConstants) -> Result<Genotype, MorphologyError> {
    let mut out = g.clone();
    for _ in 0..phys.repair_max_iter {
        let pairs = overlapping_pairs(&out, phys);
        if pairs.is_empty() {
            return Ok(out);
        }
        let pos = out.motor_positions();
        let mut moved = pos;
        let mut touched = [false; MOTORS];
        for (i, j) in pairs {
            let d = separation_direction(&pos[i], &pos[j]);
            moved[i] -= phys.repair_step * d;
            moved[j] += phys.repair_step * d;
            touched[i] = true;
            touched[j] = true;
        }
        for i in (0..MOTORS).filter(|&i| touched[i]) {
            out.arms[i].set_position(&moved[i]);
        }
    }
    let overlaps = overlapping_pairs(&out, phys).len();
    if overlaps == 0 {
        Ok(out)
    } else {
        Err(MorphologyError::RepairFailed {
            iterations: phys.repair_max_iter,
            overlaps,
        })
    }
}

// Unit vector from `a` to `b`; coincident motors separate tangentially.
fn separation_direction(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let d = b - a;
    let n = d.norm();
    if n > 1e-9 {
        return d / n;
    }
    let heading = a.y.atan2(a.x);
    Vector3::new(-heading.sin(), heading.cos(), 0.0)
}

/// Every parameter drawn uniformly over its range, without repair.
pub fn sample_unrepaired<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
    let arms = std::array::from_fn(|_| ArmGene {
        l: rng.random_range(ARM_LENGTH_MIN..=ARM_LENGTH_MAX),
        psi_a: rng.random_range(0.0..TAU),
        theta_a: rng.random_range(-PI..PI),
        psi_m: rng.random_range(0.0..TAU),
        theta_m: rng.random_range(-PI..PI),
        dir: rng.random_range(0..=1u8),
    });
    Genotype { arms }
}

/// Uniform random genotype, repaired; layouts that cannot be repaired are
/// redrawn.
pub fn random_genotype<R: Rng + ?Sized>(rng: &mut R, phys: &PhysicalConstants) -> Genotype {
    loop {
        if let Ok(g) = repair(&sample_unrepaired(rng), phys) {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phys() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn regular_hexacopter_effectiveness() {
        let p = phys();
        let ph = decode(&Genotype::regular_hexacopter(), &p);
        let kf_over_m = p.motor_thrust / p.total_mass();
        for i in 0..MOTORS {
            let c = ph.force_effectiveness.column(i);
            assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
            assert!((c[2] - kf_over_m).abs() < 1e-14);
        }
        let sum: Vector3<f64> = (0..MOTORS)
            .map(|i| ph.moment_effectiveness.column(i).into_owned())
            .sum();
        assert!(sum.x.abs() < 1e-12 && sum.y.abs() < 1e-12);
        assert!(sum.z.abs() < 1e-12);
    }

    #[test]
    fn single_arm_moment_arm() {
        // r = (0.3, 0, 0), f = kf·z: r × f = (0, -0.3 kf, 0)
        let p = phys();
        let mut g = Genotype::regular_hexacopter();
        g.arms[0] = ArmGene {
            l: 0.3,
            psi_a: 0.0,
            theta_a: 0.0,
            psi_m: 0.0,
            theta_m: 0.0,
            dir: 1,
        };
        let ph = decode(&g, &p);
        let raw = ph.inertia * ph.moment_effectiveness.column(0);
        let expected = Vector3::new(0.0, -0.3 * p.motor_thrust, p.motor_torque);
        assert!((raw - expected).norm() < 1e-12, "{raw:?}");
    }

    #[test]
    fn inertia_symmetric_positive_definite_for_collinear_layout() {
        let p = phys();
        let mut g = Genotype::regular_hexacopter();
        for (i, a) in g.arms.iter_mut().enumerate() {
            a.psi_a = if i % 2 == 0 { 0.0 } else { PI };
            a.l = 0.09 + 0.1 * (i / 2) as f64;
        }
        let ph = decode(&g, &p);
        assert_eq!(ph.inertia, ph.inertia.transpose());
        assert!(ph.inertia.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn spin_flip_touches_only_that_slot() {
        let p = phys();
        let g = Genotype::regular_hexacopter();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, site) = perturb(&g, 2, Param::Spin, &MutationConfig::default(), &mut rng);
        assert_eq!(g.arms[2].dir, 0);
        assert_eq!(m.arms[2].dir, 1);
        assert_eq!(site.before, 0.0);
        assert_eq!(site.after, 1.0);
        let changed = (0..MOTORS)
            .flat_map(|i| Param::ALL.map(|q| (i, q)))
            .filter(|&(i, q)| g.arms[i].get(q) != m.arms[i].get(q))
            .count();
        assert_eq!(changed, 1);
        let _ = p;
    }

    #[test]
    fn length_mutation_is_clipped() {
        let mut g = Genotype::regular_hexacopter();
        g.arms[0].l = 0.39;
        // sigma = 10 makes |ε| ≥ 0.01 upward overwhelmingly likely; find a
        // seed with positive noise and check the clip.
        let cfg = MutationConfig {
            sigmas: [10.0, 0.2, 0.2, 0.2, 0.2, 0.0],
            ..MutationConfig::default()
        };
        let mut clipped = false;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, _) = perturb(&g, 0, Param::Length, &cfg, &mut rng);
            assert!((ARM_LENGTH_MIN..=ARM_LENGTH_MAX).contains(&m.arms[0].l));
            clipped |= m.arms[0].l == ARM_LENGTH_MAX;
        }
        assert!(clipped);
    }

    #[test]
    fn wrapping_stays_in_domain() {
        assert_eq!(wrap_polar(TAU), 0.0);
        assert_eq!(wrap_polar(-1e-18), 0.0);
        assert!((wrap_polar(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(wrap_azimuth(PI), -PI);
        assert!((wrap_azimuth(PI + 0.25) - (-PI + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn repair_leaves_valid_layout_untouched() {
        let g = Genotype::regular_with_length(0.3);
        assert!(overlapping_pairs(&g, &phys()).is_empty());
        assert_eq!(repair(&g, &phys()).unwrap(), g);
    }

    #[test]
    fn baseline_neighbours_overlap_as_boxes() {
        // adjacent motors sit 0.1 m apart in x and 0.17 m in y
        let pairs = overlapping_pairs(&Genotype::regular_hexacopter(), &phys());
        assert_eq!(pairs.len(), 4);
    }

    #[test]
    fn repair_separates_coincident_motors() {
        let p = phys();
        let mut g = Genotype::regular_hexacopter();
        g.arms[1] = ArmGene { dir: 1, ..g.arms[0] };
        let r = repair(&g, &p).unwrap();
        let a = r.arms[0].motor_position();
        let b = r.arms[1].motor_position();
        let d = b - a;
        assert!(
            d.x.abs() >= p.rotor_diameter
                || d.y.abs() >= p.rotor_diameter
                || d.z.abs() >= 2.0 * p.rotor_height
        );
        assert!(overlapping_pairs(&r, &p).is_empty());
        assert_eq!(repair(&r, &p).unwrap(), r);
    }

    #[test]
    fn repair_failure_is_reported() {
        let p = PhysicalConstants {
            repair_max_iter: 1,
            ..phys()
        };
        let mut g = Genotype::regular_hexacopter();
        g.arms[1] = g.arms[0];
        assert!(matches!(
            repair(&g, &p),
            Err(MorphologyError::RepairFailed { .. })
        ));
    }

    #[test]
    fn random_genotypes_are_in_bounds_and_collision_free() {
        let p = phys();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let g = random_genotype(&mut rng, &p);
            g.validate().unwrap();
            assert!(overlapping_pairs(&g, &p).is_empty());
        }
    }

    #[test]
    fn unrepaired_length_mean_is_range_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1000;
        let mean = (0..n)
            .map(|_| sample_unrepaired(&mut rng).arms[0].l)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.245).abs() < 0.01, "{mean}");
    }

    #[test]
    fn record_rejects_wrong_arm_count_and_version() {
        let g = Genotype::regular_hexacopter();
        let text = g.to_record();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["arms"].as_array_mut().unwrap().pop();
        assert!(Genotype::from_record(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["version"] = 9.into();
        assert!(Genotype::from_record(&v.to_string()).is_err());
    }

    fn arb_genotype() -> impl Strategy<Value = Genotype> {
        any::<u64>().prop_map(|s| sample_unrepaired(&mut ChaCha8Rng::seed_from_u64(s)))
    }

    proptest! {
        #[test]
        fn record_round_trip_is_lossless(g in arb_genotype()) {
            let back = Genotype::from_record(&g.to_record()).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn decode_is_deterministic_with_unit_axes(g in arb_genotype()) {
            let p = phys();
            let a = decode(&g, &p);
            let b = decode(&g, &p);
            prop_assert_eq!(&a, &b);
            let kf_over_m = p.motor_thrust / p.total_mass();
            for i in 0..MOTORS {
                prop_assert!((a.motor_axes[i].norm() - 1.0).abs() < 1e-12);
                let n = a.force_effectiveness.column(i).norm();
                prop_assert!((n - kf_over_m).abs() < 1e-12);
            }
            prop_assert!(a.inertia.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
        }

        #[test]
        fn mutation_preserves_bounds(g in arb_genotype(), seed in any::<u64>()) {
            let p = phys();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Ok(g) = repair(&g, &p) {
                if let Ok(m) = mutate(&g, &MutationConfig::default(), &p, &mut rng) {
                    m.validate().unwrap();
                    prop_assert!(overlapping_pairs(&m, &p).is_empty());
                }
            }
        }
    }
}
