//! Gate tracks, the navigation environment and fitness evaluation.
//!
//! Each gate carries a heading (`yaw`) and defines a frame: rotate the world
//! by `-yaw` about z and translate to the gate center. Observations are
//! expressed in the frame of the current target gate.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{Phenotype, MOTORS};
use crate::sim::{self, DroneState, PhysicalConstants};

pub const OBS_DIM: usize = 16;
/// Fixed evaluation horizon, s.
pub const EVALUATION_SECONDS: f64 = 12.0;
pub const DEFAULT_PASS_RADIUS: f64 = 0.3;
/// The episode terminates once the drone is farther than this from the origin, m.
pub const ESCAPE_RADIUS: f64 = 50.0;
pub const SPIN_PENALTY: f64 = 0.001;

pub type Observation = [f64; OBS_DIM];
pub type Action = [f64; MOTORS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("bad track parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub center: [f64; 3],
    pub yaw: f64,
}

impl Gate {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    fn to_local(self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), -self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Circle,
    Slalom,
    Shuttlerun,
    Figure8,
}

/// Track geometry in structured-config form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrackSpec {
    Circle {
        #[serde(default = "default_circle_radius")]
        radius: f64,
        #[serde(default = "default_circle_gates")]
        gates: usize,
        #[serde(default = "default_pass_radius")]
        pass_radius: f64,
    },
    Slalom {
        #[serde(default = "default_slalom_width")]
        width: f64,
        #[serde(default = "default_slalom_spacing")]
        spacing: f64,
        #[serde(default = "default_slalom_gates")]
        gates_per_direction: usize,
        #[serde(default = "default_pass_radius")]
        pass_radius: f64,
    },
    Shuttlerun {
        #[serde(default = "default_shuttle_length")]
        length: f64,
        #[serde(default = "default_pass_radius")]
        pass_radius: f64,
    },
    Figure8 {
        #[serde(default = "default_circle_radius")]
        lobe_radius: f64,
        #[serde(default = "default_figure8_gates")]
        gates: usize,
        #[serde(default = "default_pass_radius")]
        pass_radius: f64,
    },
}

fn default_circle_radius() -> f64 {
    2.0
}
fn default_circle_gates() -> usize {
    8
}
fn default_pass_radius() -> f64 {
    DEFAULT_PASS_RADIUS
}
fn default_slalom_width() -> f64 {
    1.0
}
fn default_slalom_spacing() -> f64 {
    2.0
}
fn default_slalom_gates() -> usize {
    5
}
fn default_shuttle_length() -> f64 {
    4.0
}
fn default_figure8_gates() -> usize {
    12
}

impl TrackSpec {
    pub fn default_for(kind: TrackKind) -> Self {
        let pass_radius = DEFAULT_PASS_RADIUS;
        match kind {
            TrackKind::Circle => TrackSpec::Circle {
                radius: 2.0,
                gates: 8,
                pass_radius,
            },
            TrackKind::Slalom => TrackSpec::Slalom {
                width: 1.0,
                spacing: 2.0,
                gates_per_direction: 5,
                pass_radius,
            },
            TrackKind::Shuttlerun => TrackSpec::Shuttlerun {
                length: 4.0,
                pass_radius,
            },
            TrackKind::Figure8 => TrackSpec::Figure8 {
                lobe_radius: 2.0,
                gates: 12,
                pass_radius,
            },
        }
    }

    pub fn kind(&self) -> TrackKind {
        match self {
            TrackSpec::Circle { .. } => TrackKind::Circle,
            TrackSpec::Slalom { .. } => TrackKind::Slalom,
            TrackSpec::Shuttlerun { .. } => TrackKind::Shuttlerun,
            TrackSpec::Figure8 { .. } => TrackKind::Figure8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub kind: TrackKind,
    /// Visited in order, wrapping around.
    pub gates: Vec<Gate>,
    pub pass_radius: f64,
}

fn positive(name: &str, v: f64) -> Result<f64, TaskError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(TaskError::BadParams(format!("{name} must be positive, got {v}")))
    }
}

fn gate(x: f64, y: f64, yaw: f64) -> Gate {
    Gate {
        center: [x, y, 0.0],
        yaw,
    }
}

pub fn make_track(spec: &TrackSpec) -> Result<Track, TaskError> {
    let (kind, gates, pass_radius) = match *spec {
        TrackSpec::Circle {
            radius,
            gates,
            pass_radius,
        } => {
            let r = positive("radius", radius)?;
            if gates < 2 {
                return Err(TaskError::BadParams("circle needs at least 2 gates".into()));
            }
            let g = (0..gates)
                .map(|k| {
                    let a = TAU * k as f64 / gates as f64;
                    gate(r * a.cos(), r * a.sin(), a + PI / 2.0)
                })
                .collect();
            (TrackKind::Circle, g, pass_radius)
        }
        TrackSpec::Slalom {
            width,
            spacing,
            gates_per_direction,
            pass_radius,
        } => {
            let w = positive("width", width)?;
            let d = positive("spacing", spacing)?;
            let n = gates_per_direction;
            if n < 1 {
                return Err(TaskError::BadParams("slalom needs gates_per_direction ≥ 1".into()));
            }
            let side = |k: usize| if k.is_multiple_of(2) { w } else { -w };
            let mut g: Vec<Gate> = (0..n)
                .map(|k| gate(side(k), k as f64 * d, PI / 2.0))
                .collect();
            g.extend(
                (0..n)
                    .rev()
                    .map(|k| gate(-side(k), k as f64 * d, -PI / 2.0)),
            );
            (TrackKind::Slalom, g, pass_radius)
        }
        TrackSpec::Shuttlerun {
            length,
            pass_radius,
        } => {
            let l = positive("length", length)?;
            let g = vec![gate(0.0, -l / 2.0, PI / 2.0), gate(0.0, l / 2.0, -PI / 2.0)];
            (TrackKind::Shuttlerun, g, pass_radius)
        }
        TrackSpec::Figure8 {
            lobe_radius,
            gates,
            pass_radius,
        } => {
            let r = positive("lobe_radius", lobe_radius)?;
            if gates < 4 || gates % 2 != 0 {
                return Err(TaskError::BadParams(
                    "figure8 needs an even gate count of at least 4".into(),
                ));
            }
            let half = gates / 2;
            // Right lobe centered (r, 0) anticlockwise, then left lobe
            // centered (-r, 0) clockwise; both pass the origin heading -y.
            let mut g: Vec<Gate> = (0..half)
                .map(|k| {
                    let a = PI + TAU * (k as f64 + 0.5) / half as f64;
                    gate(r + r * a.cos(), r * a.sin(), a + PI / 2.0)
                })
                .collect();
            g.extend((0..half).map(|k| {
                let a = -TAU * (k as f64 + 0.5) / half as f64;
                gate(-r + r * a.cos(), r * a.sin(), a - PI / 2.0)
            }));
            (TrackKind::Figure8, g, pass_radius)
        }
    };
    positive("pass_radius", pass_radius)?;
    Ok(Track {
        kind,
        gates,
        pass_radius,
    })
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w < -PI {
        w + TAU
    } else {
        w
    }
}

/// Standard start: level, at rest, one meter behind gate 0 along its heading.
pub fn start_state(track: &Track) -> DroneState {
    let g0 = &track.gates[0];
    let back = Vector3::new(g0.yaw.cos(), g0.yaw.sin(), 0.0);
    DroneState::at(g0.center() - back)
}

/// 16-vector: position relative to the target (3), velocity (3) both in the
/// target-gate frame, Euler angles (3), body rates (3), then the following
/// gate's position (3) and relative yaw (1) in the target-gate frame.
pub fn observe(track: &Track, target: usize, state: &DroneState) -> Observation {
    let tg = &track.gates[target];
    let next = &track.gates[(target + 1) % track.gates.len()];
    let to_local = tg.to_local();
    let rel = to_local * (state.position - tg.center());
    let vel = to_local * state.velocity;
    let next_rel = to_local * (next.center() - tg.center());
    let mut o = [0.0; OBS_DIM];
    o[0..3].copy_from_slice(rel.as_slice());
    o[3..6].copy_from_slice(vel.as_slice());
    o[6..9].copy_from_slice(state.attitude.as_slice());
    o[9..12].copy_from_slice(state.body_rates.as_slice());
    o[12..15].copy_from_slice(next_rel.as_slice());
    o[15] = wrap_angle(next.yaw - tg.yaw);
    o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Running,
    /// Time limit reached; the value of the final state may be bootstrapped.
    Truncated,
    /// Escaped the arena or the simulation failed.
    Terminated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub status: StepStatus,
    pub passed_gate: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.status != StepStatus::Running
    }
}

#[derive(Debug, Clone)]
pub struct TaskEnv {
    pub track: Track,
    pub phenotype: Phenotype,
    pub phys: PhysicalConstants,
    pub state: DroneState,
    pub target: usize,
    pub waypoints_passed: u32,
    pub steps: usize,
    pub max_steps: usize,
    /// Distance to the target after the previous step, m.
    pub prev_distance: f64,
    /// Times at which a full gate cycle was completed, s.
    pub lap_completions: Vec<f64>,
    pub episode_return: f64,
}

impl TaskEnv {
    pub fn new(track: Track, phenotype: Phenotype, phys: PhysicalConstants, max_steps: usize) -> Self {
        let state = start_state(&track);
        let prev_distance = (state.position - track.gates[0].center()).norm();
        Self {
            track,
            phenotype,
            phys,
            state,
            target: 0,
            waypoints_passed: 0,
            steps: 0,
            max_steps,
            prev_distance,
            lap_completions: Vec::new(),
            episode_return: 0.0,
        }
    }

    /// Steps for the fixed evaluation horizon at `phys.dt`.
    pub fn evaluation_steps(phys: &PhysicalConstants) -> usize {
        (EVALUATION_SECONDS / phys.dt).round() as usize
    }

    pub fn reset(&mut self) -> Observation {
        self.state = start_state(&self.track);
        self.target = 0;
        self.waypoints_passed = 0;
        self.steps = 0;
        self.prev_distance = self.distance_to_target();
        self.lap_completions.clear();
        self.episode_return = 0.0;
        self.observe()
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.phys.dt
    }

    pub fn observe(&self) -> Observation {
        observe(&self.track, self.target, &self.state)
    }

    pub fn distance_to_target(&self) -> f64 {
        (self.state.position - self.track.gates[self.target].center()).norm()
    }

    /// Applies `action` as rotor-speed commands for one step.
    ///
    /// The reward is measured against the gate that was targeted before the
    /// step, so a gate switch never shows up as a jump in distance.
    pub fn step(&mut self, action: &Action) -> StepResult {
        self.steps += 1;
        let next = match sim::step(&self.state, action, &self.phenotype, &self.phys) {
            Ok(s) => s,
            Err(_) => {
                return StepResult {
                    observation: self.observe(),
                    reward: 0.0,
                    status: StepStatus::Terminated,
                    passed_gate: false,
                }
            }
        };
        self.state = next;
        let distance = self.distance_to_target();
        let reward = reward(self.prev_distance, distance, self.state.body_rates.norm());
        self.episode_return += reward;

        let mut passed_gate = false;
        if distance < self.track.pass_radius {
            passed_gate = true;
            self.waypoints_passed += 1;
            self.target = (self.target + 1) % self.track.gates.len();
            if (self.waypoints_passed as usize).is_multiple_of(self.track.gates.len()) {
                self.lap_completions.push(self.time());
            }
            self.prev_distance = self.distance_to_target();
        } else {
            self.prev_distance = distance;
        }

        let status = if self.state.position.norm() > ESCAPE_RADIUS {
            StepStatus::Terminated
        } else if self.steps >= self.max_steps {
            StepStatus::Truncated
        } else {
            StepStatus::Running
        };
        StepResult {
            observation: self.observe(),
            reward,
            status,
            passed_gate,
        }
    }
}

/// Progress towards the gate minus a body-rate penalty.
pub fn reward(prev_distance: f64, distance: f64, body_rate_norm: f64) -> f64 {
    (prev_distance - distance) - SPIN_PENALTY * body_rate_norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub waypoints: u32,
    /// Mean lap duration, taking the episode start as the first lap boundary;
    /// absent when no full lap was completed.
    pub avg_lap_time: Option<f64>,
    pub episode_return: f64,
    pub steps: usize,
}

/// Runs the environment for its horizon, asking `pilot` for each command.
/// The pilot sees the environment mutably so scripted agents can intervene.
pub fn rollout<F>(env: &mut TaskEnv, mut pilot: F) -> FitnessReport
where
    F: FnMut(&mut TaskEnv, &Observation) -> Action,
{
    let mut obs = env.reset();
    loop {
        let action = pilot(env, &obs);
        let r = env.step(&action);
        obs = r.observation;
        if r.done() {
            break;
        }
    }
    let avg_lap_time = env
        .lap_completions
        .last()
        .map(|last| last / env.lap_completions.len() as f64);
    FitnessReport {
        waypoints: env.waypoints_passed,
        avg_lap_time,
        episode_return: env.episode_return,
        steps: env.steps,
    }
}

/// Number of waypoints passed in a 12 s rollout driven by `controller`.
pub fn evaluate_fitness<C>(
    phenotype: &Phenotype,
    mut controller: C,
    track: &Track,
    phys: &PhysicalConstants,
) -> FitnessReport
where
    C: FnMut(&Observation) -> Action,
{
    let steps = TaskEnv::evaluation_steps(phys);
    let mut env = TaskEnv::new(track.clone(), phenotype.clone(), phys.clone(), steps);
    rollout(&mut env, |_, obs| controller(obs))
}
