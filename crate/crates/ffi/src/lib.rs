//! C interface to hexevo.
//!
//! Every fallible function returns a `HexevoStatus`; on failure a message is
//! kept per thread and read with `hexevo_last_error`. Handles are opaque and
//! released with their `_free` function. Physical constants are the library
//! defaults.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hexevo::hover::{check_static_hover, ControlBounds};
use hexevo::metrics::{self, edit_distance, symmetry_scores};
use hexevo::morphology::{self, decode, Genotype, MutationConfig, Phenotype, MOTORS, PARAMS_PER_ARM};
use hexevo::sim::{self, DroneState, PhysicalConstants};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HexevoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    BufferTooSmall = 4,
    Simulation = 5,
    Internal = 6,
}

/// Opaque genotype.
pub struct HexevoGenotype(Genotype);

/// Opaque decoded body.
pub struct HexevoPhenotype(Phenotype);

/// Rigid-body state, world frame, ZYX Euler angles.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HexevoState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub attitude: [f64; 3],
    pub body_rates: [f64; 3],
    pub rotor_speeds: [f64; 6],
}

/// Learning-curve descriptors; `speed` is NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HexevoDescriptors {
    pub t_b: u64,
    pub t_c: u64,
    pub speed: f64,
    pub r_max: f64,
    pub volatility: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).expect("no interior nul")));
}

fn fail(status: HexevoStatus, msg: impl Into<String>) -> HexevoStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> HexevoStatus>(f: F) -> HexevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HexevoStatus::Internal, "panic inside hexevo"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(HexevoStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

fn boxed<T>(out: *mut *mut T, v: T) -> HexevoStatus {
    unsafe { *out = Box::into_raw(Box::new(v)) };
    HexevoStatus::Ok
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn hexevo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hexevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The regular hexacopter.
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_baseline(out: *mut *mut HexevoGenotype) -> HexevoStatus {
    guard(|| {
        non_null!(out);
        boxed(out, HexevoGenotype(Genotype::regular_hexacopter()))
    })
}

/// Random repaired genotype drawn from `seed`.
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_random(seed: u64, out: *mut *mut HexevoGenotype) -> HexevoStatus {
    guard(|| {
        non_null!(out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = morphology::random_genotype(&mut rng, &PhysicalConstants::default());
        boxed(out, HexevoGenotype(g))
    })
}

/// Parses a genotype record (JSON, NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_from_json(json: *const c_char, out: *mut *mut HexevoGenotype) -> HexevoStatus {
    guard(|| {
        non_null!(json, out);
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(HexevoStatus::Parse, e.to_string()),
        };
        match Genotype::from_record(text) {
            Ok(g) => boxed(out, HexevoGenotype(g)),
            Err(e) => fail(HexevoStatus::Parse, e.to_string()),
        }
    })
}

/// Writes the genotype record into `buf` with a terminating NUL. `needed`
/// receives the size including the NUL; when `len` is smaller nothing is
/// written and `BufferTooSmall` returned. `buf` may be null to query.
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_to_json(
    g: *const HexevoGenotype,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> HexevoStatus {
    guard(|| {
        non_null!(g, needed);
        let text = (*g).0.to_record();
        let n = text.len() + 1;
        *needed = n;
        if buf.is_null() || len < n {
            return fail(HexevoStatus::BufferTooSmall, format!("need {n} bytes"));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
        *buf.add(text.len()) = 0;
        HexevoStatus::Ok
    })
}

/// The six parameters of one arm: length, arm polar, arm azimuth, motor
/// polar, motor azimuth, spin.
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_arm(g: *const HexevoGenotype, arm: usize, out: *mut f64) -> HexevoStatus {
    guard(|| {
        non_null!(g, out);
        if arm >= MOTORS {
            return fail(HexevoStatus::InvalidArgument, format!("arm {arm} out of range"));
        }
        let a = (*g).0.arms[arm].as_array();
        ptr::copy_nonoverlapping(a.as_ptr(), out, PARAMS_PER_ARM);
        HexevoStatus::Ok
    })
}

/// One point mutation followed by repair, drawn from `seed`.
#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_mutate(
    g: *const HexevoGenotype,
    seed: u64,
    out: *mut *mut HexevoGenotype,
) -> HexevoStatus {
    guard(|| {
        non_null!(g, out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match morphology::mutate(&(*g).0, &MutationConfig::default(), &PhysicalConstants::default(), &mut rng) {
            Ok(m) => boxed(out, HexevoGenotype(m)),
            Err(e) => fail(HexevoStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn hexevo_genotype_free(g: *mut HexevoGenotype) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Minimum-cost arm matching distance between two genotypes.
#[no_mangle]
pub unsafe extern "C" fn hexevo_edit_distance(
    a: *const HexevoGenotype,
    b: *const HexevoGenotype,
    out: *mut f64,
) -> HexevoStatus {
    guard(|| {
        non_null!(a, b, out);
        *out = edit_distance(&(*a).0, &(*b).0);
        HexevoStatus::Ok
    })
}

/// Central and bilateral symmetry residuals of the motor layout.
#[no_mangle]
pub unsafe extern "C" fn hexevo_symmetry(g: *const HexevoGenotype, ces: *mut f64, bis: *mut f64) -> HexevoStatus {
    guard(|| {
        non_null!(g, ces, bis);
        let s = symmetry_scores(&(*g).0.motor_positions());
        *ces = s.ces;
        *bis = s.bis;
        HexevoStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn hexevo_phenotype_decode(g: *const HexevoGenotype, out: *mut *mut HexevoPhenotype) -> HexevoStatus {
    guard(|| {
        non_null!(g, out);
        boxed(out, HexevoPhenotype(decode(&(*g).0, &PhysicalConstants::default())))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hexevo_phenotype_free(p: *mut HexevoPhenotype) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Force and moment effectiveness, each 3×6 row-major (18 doubles).
#[no_mangle]
pub unsafe extern "C" fn hexevo_phenotype_effectiveness(
    p: *const HexevoPhenotype,
    force: *mut f64,
    moment: *mut f64,
) -> HexevoStatus {
    guard(|| {
        non_null!(p, force, moment);
        let ph = &(*p).0;
        for r in 0..3 {
            for c in 0..MOTORS {
                *force.add(r * MOTORS + c) = ph.force_effectiveness[(r, c)];
                *moment.add(r * MOTORS + c) = ph.moment_effectiveness[(r, c)];
            }
        }
        HexevoStatus::Ok
    })
}

/// Total mass and the 3×3 inertia tensor, row-major.
#[no_mangle]
pub unsafe extern "C" fn hexevo_phenotype_mass(p: *const HexevoPhenotype, mass: *mut f64, inertia: *mut f64) -> HexevoStatus {
    guard(|| {
        non_null!(p, mass, inertia);
        let ph = &(*p).0;
        *mass = ph.total_mass;
        for r in 0..3 {
            for c in 0..3 {
                *inertia.add(r * 3 + c) = ph.inertia[(r, c)];
            }
        }
        HexevoStatus::Ok
    })
}

/// Static hover test with commands in [0, 1]. `u_hat` (6 doubles) receives
/// the minimum-effort hover command, zeros when infeasible.
#[no_mangle]
pub unsafe extern "C" fn hexevo_hover_check(
    p: *const HexevoPhenotype,
    tolerance: f64,
    feasible: *mut bool,
    u_hat: *mut f64,
) -> HexevoStatus {
    guard(|| {
        non_null!(p, feasible, u_hat);
        match check_static_hover(&(*p).0, &ControlBounds::default(), tolerance) {
            Ok(r) => {
                *feasible = r.feasible;
                ptr::copy_nonoverlapping(r.u_hat.as_ptr(), u_hat, MOTORS);
                HexevoStatus::Ok
            }
            Err(e) => fail(HexevoStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Advances `state` in place by one step under `command` (6 doubles).
#[no_mangle]
pub unsafe extern "C" fn hexevo_sim_step(
    p: *const HexevoPhenotype,
    state: *mut HexevoState,
    command: *const f64,
) -> HexevoStatus {
    guard(|| {
        non_null!(p, state, command);
        let s = &mut *state;
        let cur = DroneState {
            position: Vector3::from(s.position),
            velocity: Vector3::from(s.velocity),
            attitude: Vector3::from(s.attitude),
            body_rates: Vector3::from(s.body_rates),
            rotor_speeds: s.rotor_speeds,
        };
        let mut u = [0.0; MOTORS];
        ptr::copy_nonoverlapping(command, u.as_mut_ptr(), MOTORS);
        match sim::step(&cur, &u, &(*p).0, &PhysicalConstants::default()) {
            Ok(n) => {
                s.position = n.position.into();
                s.velocity = n.velocity.into();
                s.attitude = n.attitude.into();
                s.body_rates = n.body_rates.into();
                s.rotor_speeds = n.rotor_speeds;
                HexevoStatus::Ok
            }
            Err(e) => fail(HexevoStatus::Simulation, e.to_string()),
        }
    })
}

/// Descriptors of `n` episode rewards smoothed with a median window.
#[no_mangle]
pub unsafe extern "C" fn hexevo_learning_descriptors(
    rewards: *const f64,
    n: usize,
    window: usize,
    out: *mut HexevoDescriptors,
) -> HexevoStatus {
    guard(|| {
        non_null!(rewards, out);
        let r = std::slice::from_raw_parts(rewards, n);
        let d = match metrics::smooth_median(r, window).and_then(|s| metrics::descriptors_from_smoothed(&s)) {
            Ok(d) => d,
            Err(e) => return fail(HexevoStatus::InvalidArgument, e.to_string()),
        };
        *out = HexevoDescriptors {
            t_b: d.t_b as u64,
            t_c: d.t_c as u64,
            speed: d.speed.unwrap_or(f64::NAN),
            r_max: d.r_max,
            volatility: d.volatility,
        };
        HexevoStatus::Ok
    })
}
