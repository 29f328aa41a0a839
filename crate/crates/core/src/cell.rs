//! Hybrid-automaton model of a single cardiac cell.
//!
//! The action potential is carried by three piecewise-continuous variables
//! `v_x`, `v_y`, `v_z`. The automaton has four locations; in each one the
//! variables follow linear flows whose rate coefficients come from a 4x3
//! table in [`CellParams`]. The membrane potential is the composition
//! `v = v_x - v_y + v_z` (all voltages offset so that rest is 0 mV).
//!
//! Three presets are provided:
//!
//! - `Uoa` — the stabilised model: the repolarisation-rate function `f(θ)`
//!   also scales the `v_x` flow in the plateau location, and `f(θ)` is
//!   capped so that a minimum action potential duration exists.
//! - `StonyBrook2008` — the uncapped baseline; action potentials shorten
//!   towards zero under fast pacing.
//! - `OxfordVxOnly` — a single-variable reduction (`v_y`, `v_z` discarded)
//!   with its own rate table; reproduces the two-level restitution of the
//!   reduced model it stands in for.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// θ above which the capped `f(θ)` saturates.
pub const F_THETA_CAP_THRESHOLD: f64 = 0.04;

/// Default saturation value, `f(0.04)` rounded as published.
pub const F_THETA_CAP_DEFAULT: f64 = 4.0395;

/// Overshoot attenuation: the upstroke target is `v_o - OVERSHOOT_SLOPE * sqrt(θ)`.
pub const OVERSHOOT_SLOPE: f64 = 80.1;

#[derive(Debug, Error, PartialEq)]
pub enum CellError {
    #[error("theta {0} outside [0, 1]")]
    ThetaOutOfRange(f64),
}

/// Automaton location. The discriminants are stable and used in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Location {
    /// q0 — resting and final repolarisation.
    #[default]
    Resting = 0,
    /// q1 — stimulated.
    Stimulated = 1,
    /// q2 — upstroke.
    Upstroke = 2,
    /// q3 — plateau and early repolarisation.
    Plateau = 3,
}

impl Location {
    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVariant {
    Uoa,
    StonyBrook2008,
    OxfordVxOnly,
}

/// All coefficients and constants for one cell.
///
/// `alpha[l][v]` is the rate coefficient for location `l` (0..=3) and
/// variable `v` (0 = x, 1 = y, 2 = z), in 1/ms. The `beta` coefficients
/// scale the external voltage drive in the stimulated location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub alpha: [[f64; 3]; 4],
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    /// Resting-exit threshold V_R (mV). Also the θ normalisation voltage.
    pub v_r: f64,
    /// Depolarisation threshold V_T (mV).
    pub v_t: f64,
    /// Overshoot constant V_O (mV).
    pub v_o: f64,
    /// Saturation value of f(θ) when the cap is enabled.
    pub f_cap: f64,
    pub f_cap_enabled: bool,
    /// Include f(θ) in the plateau flow of v_x.
    pub q3_f_theta_enabled: bool,
    pub variant: CellVariant,
}

/// Rate table shared by the `Uoa` and `StonyBrook2008` presets.
const ALPHA_TABLE: [[f64; 3]; 4] = [
    // x        y        z
    [-0.0087, -0.1909, -0.1904], // q0
    [-0.0236, -0.0455, -0.0129], // q1
    [-0.0069, 0.0759, 6.8265],   // q2
    [-0.0332, 0.0280, 0.0020],   // q3
];

impl CellParams {
    /// Constants for the selected preset.
    pub fn preset(variant: CellVariant) -> Self {
        match variant {
            CellVariant::Uoa => Self {
                alpha: ALPHA_TABLE,
                beta_x: 0.7772,
                beta_y: 0.0589,
                beta_z: 0.2766,
                v_r: 30.0,
                v_t: 44.5,
                v_o: 131.1,
                f_cap: F_THETA_CAP_DEFAULT,
                f_cap_enabled: true,
                q3_f_theta_enabled: true,
                variant,
            },
            CellVariant::StonyBrook2008 => Self {
                f_cap_enabled: false,
                q3_f_theta_enabled: false,
                variant,
                ..Self::preset(CellVariant::Uoa)
            },
            // Single-variable reduction. The y/z rows are unused (flows are
            // discarded); the x row is retuned so that a lone variable can
            // still produce an upstroke (positive q2 rate) and the published
            // two-level restitution: APD ~9 ms for short diastolic intervals,
            // ~98 ms for long ones, switching near 51 ms.
            CellVariant::OxfordVxOnly => Self {
                alpha: [
                    [-0.52, 0.0, 0.0],
                    [-0.0236, 0.0, 0.0],
                    [6.8265, 0.0, 0.0],
                    [-0.0236, 0.0, 0.0],
                ],
                beta_x: 0.7772,
                beta_y: 0.0,
                beta_z: 0.0,
                v_r: 5.0,
                v_t: 44.5,
                v_o: 131.1,
                f_cap: 10.9,
                f_cap_enabled: true,
                q3_f_theta_enabled: true,
                variant,
            },
        }
    }
}

/// Continuous and discrete state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub location: Location,
    pub v_x: f64,
    pub v_y: f64,
    pub v_z: f64,
    /// Rest-recovery measure captured when leaving the resting location,
    /// clamped to [0, 1].
    pub theta: f64,
    /// Upstroke exit level, set on entering the upstroke location.
    pub overshoot_target: f64,
    pub last_q2_entry_ms: f64,
    pub last_q0_entry_ms: f64,
}

impl Default for CellState {
    fn default() -> Self {
        Self {
            location: Location::Resting,
            v_x: 0.0,
            v_y: 0.0,
            v_z: 0.0,
            theta: 0.0,
            overshoot_target: f64::INFINITY,
            last_q2_entry_ms: f64::NEG_INFINITY,
            last_q0_entry_ms: 0.0,
        }
    }
}

impl CellState {
    pub fn vars(&self) -> [f64; 3] {
        [self.v_x, self.v_y, self.v_z]
    }

    pub fn set_vars(&mut self, v: [f64; 3]) {
        self.v_x = v[0];
        self.v_y = v[1];
        self.v_z = v[2];
    }
}

/// Repolarisation-rate function of the rest-recovery measure θ.
///
/// Uncapped this is `0.29 e^{62.89 θ} + 0.70 e^{-10.99 θ}`; with the cap
/// enabled it saturates at `params.f_cap` for θ ≥ 0.04.
pub fn f_theta(theta: f64, params: &CellParams) -> Result<f64, CellError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(CellError::ThetaOutOfRange(theta));
    }
    Ok(f_theta_unchecked(theta, params))
}

pub(crate) fn f_theta_unchecked(theta: f64, params: &CellParams) -> f64 {
    if params.f_cap_enabled && theta >= F_THETA_CAP_THRESHOLD {
        params.f_cap
    } else {
        0.29 * (62.89 * theta).exp() + 0.70 * (-10.99 * theta).exp()
    }
}

/// Rest-recovery measure: the membrane potential normalised by V_R.
/// Values outside [0, 1] clamp (the potential can dip slightly below zero
/// while the fast components settle).
pub fn compute_theta(v: f64, params: &CellParams) -> f64 {
    (v / params.v_r).clamp(0.0, 1.0)
}

/// Membrane potential composition: `v_x - v_y + v_z`.
///
/// `v_y` carries the repolarising contribution and enters negatively, so a
/// larger plateau rate for `v_y` shortens the action potential. The
/// single-variable preset returns `v_x` alone.
pub fn membrane_potential(state: &CellState, params: &CellParams) -> f64 {
    match params.variant {
        CellVariant::OxfordVxOnly => state.v_x,
        _ => state.v_x - state.v_y + state.v_z,
    }
}

/// Time-derivatives of `(v_x, v_y, v_z)` in the current location.
///
/// The external drive `v_in` only enters the stimulated location, scaled by
/// the β coefficients. In the plateau location the `v_y` flow is scaled by
/// f(θ); the `v_x` flow is scaled too when `q3_f_theta_enabled` is set.
pub fn cell_flow(state: &CellState, v_in: f64, params: &CellParams) -> [f64; 3] {
    let l = state.location as usize;
    let a = &params.alpha[l];
    let mut d = [a[0] * state.v_x, a[1] * state.v_y, a[2] * state.v_z];
    match state.location {
        Location::Stimulated => {
            d[0] += params.beta_x * v_in;
            d[1] += params.beta_y * v_in;
            d[2] += params.beta_z * v_in;
        }
        Location::Plateau => {
            let f = f_theta_unchecked(state.theta, params);
            d[1] *= f;
            if params.q3_f_theta_enabled {
                d[0] *= f;
            }
        }
        _ => {}
    }
    if params.variant == CellVariant::OxfordVxOnly {
        d[1] = 0.0;
        d[2] = 0.0;
    }
    d
}

/// Applies at most one enabled discrete transition, in fixed priority order:
/// q0→q1, q1→q0, q1→q2, q2→q3, q3→q0. Called once per integration step,
/// after the continuous update.
pub fn cell_discrete_step(state: &mut CellState, v_in: f64, params: &CellParams, now_ms: f64) {
    let v = membrane_potential(state, params);
    match state.location {
        Location::Resting => {
            if v_in > 0.0 {
                // θ is captured from the exit values of the variables.
                state.theta = compute_theta(v, params);
                state.location = Location::Stimulated;
            }
        }
        Location::Stimulated => {
            if v_in <= 0.0 && v < params.v_t {
                state.location = Location::Resting;
            } else if v >= params.v_t {
                state.overshoot_target = params.v_o - OVERSHOOT_SLOPE * state.theta.sqrt();
                state.location = Location::Upstroke;
                state.last_q2_entry_ms = now_ms;
            }
        }
        Location::Upstroke => {
            if v >= state.overshoot_target {
                state.location = Location::Plateau;
            }
        }
        Location::Plateau => {
            if v < params.v_r {
                state.location = Location::Resting;
                state.last_q0_entry_ms = now_ms;
            }
        }
    }
}
