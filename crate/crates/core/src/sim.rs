//! Rigid-body multirotor dynamics integrated with a forward-Euler step.
//!
//! Inertial frame is z-up; gravity acts along `(0, 0, -1)`. Euler angles are
//! stored as `(roll, pitch, yaw)` and composed in ZYX order, so the body to
//! inertial rotation is `Rz(yaw) * Ry(pitch) * Rx(roll)`.
//!
//! Angular acceleration is exactly `B_M * omega^2`: gyroscopic coupling is not
//! modelled.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{Phenotype, MOTORS};

/// Smallest admissible distance of pitch from `±π/2`.
pub const GIMBAL_MARGIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("pitch {pitch} is within the gimbal-lock margin of ±π/2")]
    GimbalLock { pitch: f64 },
    #[error("non-finite state after integration")]
    NonFiniteState,
}

/// Physical constants shared by decoding, repair and integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Propeller time constant, s.
    pub tau: f64,
    /// Integration step, s.
    pub dt: f64,
    pub hub_mass: f64,
    /// Radius of the solid sphere used for the hub's own inertia, m.
    pub hub_radius: f64,
    pub motor_mass: f64,
    /// Thrust of one motor at full normalized speed, N.
    pub motor_thrust: f64,
    /// Reactive torque of one motor at full normalized speed, N·m.
    pub motor_torque: f64,
    /// Propeller diameter, the bounding-box width and depth, m.
    pub rotor_diameter: f64,
    /// Propeller height; bounding boxes are twice this tall, m.
    pub rotor_height: f64,
    /// Repair displacement per iteration, m.
    pub repair_step: f64,
    pub repair_max_iter: usize,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let g = 9.81;
        let hub_mass = 0.5;
        let motor_mass = 0.1;
        let total = hub_mass + MOTORS as f64 * motor_mass;
        // thrust-to-weight 2 for the regular six-arm layout
        let motor_thrust = 2.0 * total * g / MOTORS as f64;
        Self {
            g,
            tau: 0.01,
            dt: 0.01,
            hub_mass,
            hub_radius: 0.05,
            motor_mass,
            motor_thrust,
            motor_torque: 0.01 * motor_thrust,
            rotor_diameter: 0.20,
            rotor_height: 0.05,
            repair_step: 0.01,
            repair_max_iter: 1000,
        }
    }
}

impl PhysicalConstants {
    pub fn total_mass(&self) -> f64 {
        self.hub_mass + MOTORS as f64 * self.motor_mass
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("g", self.g),
            ("tau", self.tau),
            ("dt", self.dt),
            ("hub_mass", self.hub_mass),
            ("motor_mass", self.motor_mass),
            ("motor_thrust", self.motor_thrust),
            ("rotor_diameter", self.rotor_diameter),
            ("rotor_height", self.rotor_height),
            ("repair_step", self.repair_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("physics.{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.hub_radius.is_finite() && self.hub_radius >= 0.0) {
            return Err("physics.hub_radius must be non-negative".into());
        }
        if !self.motor_torque.is_finite() {
            return Err("physics.motor_torque must be finite".into());
        }
        if self.repair_max_iter == 0 {
            return Err("physics.repair_max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// `(roll, pitch, yaw)`.
    pub attitude: Vector3<f64>,
    /// Body angular rates.
    pub body_rates: Vector3<f64>,
    /// Normalized propeller speeds in `[0, 1]`.
    pub rotor_speeds: [f64; MOTORS],
}

impl Default for DroneState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: Vector3::zeros(),
            body_rates: Vector3::zeros(),
            rotor_speeds: [0.0; MOTORS],
        }
    }
}

impl DroneState {
    pub fn at(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.attitude.iter().all(|x| x.is_finite())
            && self.body_rates.iter().all(|x| x.is_finite())
            && self.rotor_speeds.iter().all(|x| x.is_finite())
    }
}

/// Body to inertial rotation for ZYX Euler angles `(roll, pitch, yaw)`.
pub fn rotation_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = attitude[0].sin_cos();
    let (sp, cp) = attitude[1].sin_cos();
    let (sy, cy) = attitude[2].sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Maps body rates to Euler-angle rates for the ZYX convention.
pub fn euler_rate_matrix(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, SimError> {
    let pitch = attitude[1];
    if !(pitch.abs() < std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN) {
        return Err(SimError::GimbalLock { pitch });
    }
    let (sr, cr) = attitude[0].sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let tp = sp / cp;
    Ok(Matrix3::new(
        1.0,
        sr * tp,
        cr * tp,
        0.0,
        cr,
        -sr,
        0.0,
        sr / cp,
        cr / cp,
    ))
}

/// Advances the state by one forward-Euler step of `phys.dt`.
///
/// Every derivative is evaluated at the incoming state. Commands are clamped
/// to `[0, 1]` and so are the integrated rotor speeds.
pub fn step(
    state: &DroneState,
    command: &[f64; MOTORS],
    phenotype: &Phenotype,
    phys: &PhysicalConstants,
) -> Result<DroneState, SimError> {
    let dt = phys.dt;
    let q = euler_rate_matrix(&state.attitude)?;
    let r = rotation_matrix(&state.attitude);

    let mut u = nalgebra::SVector::<f64, MOTORS>::zeros();
    for (ui, w) in u.iter_mut().zip(state.rotor_speeds.iter()) {
        *ui = w * w;
    }
    let force = phenotype.force_effectiveness * u;
    let moment = phenotype.moment_effectiveness * u;
    let gravity = Vector3::new(0.0, 0.0, -phys.g);

    let mut rotor_speeds = [0.0; MOTORS];
    for (i, w) in rotor_speeds.iter_mut().enumerate() {
        let wc = command[i].clamp(0.0, 1.0);
        let cur = state.rotor_speeds[i];
        *w = (cur + dt / phys.tau * (wc - cur)).clamp(0.0, 1.0);
    }

    let next = DroneState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity + (gravity + r * force) * dt,
        attitude: state.attitude + q * state.body_rates * dt,
        body_rates: state.body_rates + moment * dt,
        rotor_speeds,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SimError::NonFiniteState)
    }
}

/// Writes a trajectory as CSV with one row per state: `t, p, v, attitude,
/// body rates, rotor speeds`.
pub fn write_trajectory<W: Write>(
    out: W,
    dt: f64,
    states: &[DroneState],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for prefix in ["p", "v", "theta", "omega_body"] {
        for axis in ["x", "y", "z"] {
            header.push(format!("{prefix}_{axis}"));
        }
    }
    for i in 0..MOTORS {
        header.push(format!("rotor_{i}"));
    }
    w.write_record(&header)?;
    for (k, s) in states.iter().enumerate() {
        let mut row = Vec::with_capacity(header.len());
        row.push((k as f64 * dt).to_string());
        for v in [&s.position, &s.velocity, &s.attitude, &s.body_rates] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        row.extend(s.rotor_speeds.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
