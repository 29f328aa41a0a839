//! Timed-automaton model of one bidirectional conduction path.
//!
//! A path connects cells `i` and `j`. Its job is to decide which action
//! potentials may propagate, to make colliding propagations annihilate, and
//! to relay the delayed source waveform at the destination once the
//! conduction time has elapsed. One arbitration automaton serves both
//! directions; each direction additionally has a relay (a flag plus a ring
//! buffer that reproduces the source membrane potential after the
//! conduction delay).
//!
//! A propagation from `i` fails when the destination enters its upstroke
//! during the conduction time (collision), or when a recent propagation
//! from `j` entered the path but failed to excite `i` (partial
//! propagation): the tissue the path stands for is then still refractory.
//! Partials are remembered per direction, with a refractory window that
//! defaults to the source cell's last action potential duration.

use serde::{Deserialize, Serialize};

use crate::cell::Location;

/// Fallback refractory window (ms) used before the source cell has
/// completed a measurable beat.
pub const DEFAULT_REFRACTORY_MS: f64 = 130.0;

fn one() -> f64 {
    1.0
}

fn default_delta_ignore() -> f64 {
    5.0
}

/// Per-path parameters. Directional fields are named `_ij` for the i→j
/// direction and `_ji` for j→i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Conduction times (ms).
    pub delta_ij: f64,
    pub delta_ji: f64,
    /// Post-relay window during which the destination's upstroke is ignored
    /// by the arbitrator (ms).
    #[serde(default = "default_delta_ignore")]
    pub delta_ignore_i: f64,
    #[serde(default = "default_delta_ignore")]
    pub delta_ignore_j: f64,
    /// Cross-sectional areas (mm^2).
    #[serde(default = "one")]
    pub gamma_ij: f64,
    #[serde(default = "one")]
    pub gamma_ji: f64,
    /// Electrical conductivities (mS/mm).
    #[serde(default = "one")]
    pub sigma_ij: f64,
    #[serde(default = "one")]
    pub sigma_ji: f64,
    /// Unidirectional conduction block: the relay in that direction never
    /// delivers voltage (the propagation still occupies the path and counts
    /// as partial).
    #[serde(default)]
    pub block_ij: bool,
    #[serde(default)]
    pub block_ji: bool,
    /// Refractory window after a partial propagation. `None` uses the
    /// source cell's last measured action potential duration.
    #[serde(default)]
    pub refractory_window_ms: Option<f64>,
    /// Gains for the delayed-sum baseline coupling.
    #[serde(default = "one")]
    pub oxford_gain_ij: f64,
    #[serde(default = "one")]
    pub oxford_gain_ji: f64,
}

impl PathParams {
    /// Symmetric path with conduction time `delta_ms` in both directions.
    pub fn symmetric(delta_ms: f64) -> Self {
        Self {
            delta_ij: delta_ms,
            delta_ji: delta_ms,
            delta_ignore_i: default_delta_ignore(),
            delta_ignore_j: default_delta_ignore(),
            gamma_ij: 1.0,
            gamma_ji: 1.0,
            sigma_ij: 1.0,
            sigma_ji: 1.0,
            block_ij: false,
            block_ji: false,
            refractory_window_ms: None,
            oxford_gain_ij: 1.0,
            oxford_gain_ji: 1.0,
        }
    }
}

/// Transport delay line of (membrane potential, location) samples.
///
/// Depth is fixed at construction; `sample` returns the value pushed
/// exactly `depth` steps earlier. Depth 0 degenerates to the identity.
/// Pre-filled with resting samples so the warm-up output is quiescent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBuffer {
    samples: Vec<(f64, Location)>,
    head: usize,
    latest: (f64, Location),
}

impl DelayBuffer {
    pub fn new(depth: usize) -> Self {
        Self {
            samples: vec![(0.0, Location::Resting); depth],
            head: 0,
            latest: (0.0, Location::Resting),
        }
    }

    /// Number of grid steps realising a delay of `delta_ms`, rounded to the
    /// nearest integer multiple of `dt_ms`.
    pub fn steps_for_delay(delta_ms: f64, dt_ms: f64) -> usize {
        (delta_ms / dt_ms).round() as usize
    }

    pub fn depth(&self) -> usize {
        self.samples.len()
    }

    /// The sample recorded `depth` pushes ago.
    pub fn sample(&self) -> (f64, Location) {
        if self.samples.is_empty() {
            self.latest
        } else {
            self.samples[self.head]
        }
    }

    pub fn push(&mut self, potential: f64, location: Location) {
        self.latest = (potential, location);
        if !self.samples.is_empty() {
            self.samples[self.head] = (potential, location);
            self.head = (self.head + 1) % self.samples.len();
        }
    }
}

/// Arbitration automaton locations. `DirectionI`/`DirectionJ` are urgent:
/// they resolve within the step that enters them and never persist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TaLocation {
    #[default]
    Idle,
    DirectionI,
    DirectionJ,
    WaitI,
    WaitJ,
    RelayI,
    RelayJ,
    Annihilate,
}

/// Direction memory of the last launched propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LastDir {
    #[default]
    None,
    FromI,
    FromJ,
}

/// What the path sees of one endpoint cell at the current step.
#[derive(Debug, Clone, Copy)]
pub struct CellObs {
    pub potential: f64,
    pub location: Location,
    /// The cell entered its upstroke location during this step.
    pub entered_q2: bool,
    /// Duration of the cell's last completed action potential, if any.
    pub last_apd_ms: Option<f64>,
}

/// Start events emitted by one arbitration step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathEvents {
    pub start_i: bool,
    pub start_j: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub ta_location: TaLocation,
    /// Time spent in the current arbitration location (ms).
    pub clock_ms: f64,
    pub last: LastDir,
    pub relay_active_i_at_j: bool,
    pub relay_active_j_at_i: bool,
    relay_i_captured: bool,
    relay_j_captured: bool,
    relay_i_started_ms: f64,
    relay_j_started_ms: f64,
    /// When the last partial i→j (resp. j→i) propagation entered the path.
    /// The tissue the path stands for is refractory for one source action
    /// potential duration from that moment.
    partial_from_i_ms: Option<f64>,
    partial_from_j_ms: Option<f64>,
    pub delay_buffer_ij: DelayBuffer,
    pub delay_buffer_ji: DelayBuffer,
}

impl PathState {
    pub fn new(params: &PathParams, dt_ms: f64) -> Self {
        Self {
            ta_location: TaLocation::Idle,
            clock_ms: 0.0,
            last: LastDir::None,
            relay_active_i_at_j: false,
            relay_active_j_at_i: false,
            relay_i_captured: false,
            relay_j_captured: false,
            relay_i_started_ms: 0.0,
            relay_j_started_ms: 0.0,
            partial_from_i_ms: None,
            partial_from_j_ms: None,
            delay_buffer_ij: DelayBuffer::new(DelayBuffer::steps_for_delay(params.delta_ij, dt_ms)),
            delay_buffer_ji: DelayBuffer::new(DelayBuffer::steps_for_delay(params.delta_ji, dt_ms)),
        }
    }

    /// i's waveform as seen by cell j: the delayed source potential while
    /// the relay runs, the destination's own potential otherwise (zero
    /// coupling contribution).
    pub fn relay_v_out_at_j(
        &self,
        delayed_i: f64,
        dest_potential: f64,
        params: &PathParams,
    ) -> f64 {
        if self.relay_active_i_at_j && !params.block_ij {
            delayed_i
        } else {
            dest_potential
        }
    }

    pub fn relay_v_out_at_i(
        &self,
        delayed_j: f64,
        dest_potential: f64,
        params: &PathParams,
    ) -> f64 {
        if self.relay_active_j_at_i && !params.block_ji {
            delayed_j
        } else {
            dest_potential
        }
    }

    fn window(refractory: Option<f64>, source_apd: Option<f64>) -> f64 {
        refractory.unwrap_or_else(|| source_apd.unwrap_or(DEFAULT_REFRACTORY_MS))
    }

    fn partial_recent(partial_ms: Option<f64>, now_ms: f64, window_ms: f64) -> bool {
        matches!(partial_ms, Some(t) if now_ms - t < window_ms)
    }

    /// One arbitration step. Called once per engine step, after the cells'
    /// discrete update, with the delayed samples drawn at step start.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        obs_i: &CellObs,
        obs_j: &CellObs,
        delayed_i: (f64, Location),
        delayed_j: (f64, Location),
        params: &PathParams,
        now_ms: f64,
        dt_ms: f64,
    ) -> PathEvents {
        let mut events = PathEvents::default();
        self.clock_ms += dt_ms;

        match self.ta_location {
            TaLocation::Idle | TaLocation::DirectionI | TaLocation::DirectionJ => {
                let collision = (obs_i.entered_q2
                    && (obs_j.entered_q2 || obs_j.location == Location::Upstroke))
                    || (obs_j.entered_q2 && obs_i.location == Location::Upstroke);
                if collision {
                    self.ta_location = TaLocation::Annihilate;
                    self.last = LastDir::None;
                } else if obs_i.entered_q2 {
                    // direction_i, resolved urgently: annihilate if the
                    // opposite relay still occupies the path or a recent
                    // partial from j left it refractory.
                    let win = Self::window(params.refractory_window_ms, obs_j.last_apd_ms);
                    if self.relay_active_j_at_i
                        || (self.last == LastDir::FromJ
                            && Self::partial_recent(self.partial_from_j_ms, now_ms, win))
                    {
                        self.ta_location = TaLocation::Annihilate;
                    } else {
                        self.ta_location = TaLocation::WaitI;
                        self.clock_ms = 0.0;
                    }
                } else if obs_j.entered_q2 {
                    let win = Self::window(params.refractory_window_ms, obs_i.last_apd_ms);
                    if self.relay_active_i_at_j
                        || (self.last == LastDir::FromI
                            && Self::partial_recent(self.partial_from_i_ms, now_ms, win))
                    {
                        self.ta_location = TaLocation::Annihilate;
                    } else {
                        self.ta_location = TaLocation::WaitJ;
                        self.clock_ms = 0.0;
                    }
                }
            }
            TaLocation::WaitI => {
                if self.clock_ms >= params.delta_ij {
                    self.clock_ms = 0.0;
                    self.last = LastDir::FromI;
                    if matches!(obs_j.location, Location::Upstroke | Location::Plateau) {
                        // the wavefront meets refractory membrane and dies
                        // at the boundary: a partial propagation
                        self.partial_from_i_ms = Some(now_ms);
                        self.ta_location = TaLocation::Idle;
                    } else {
                        self.ta_location = TaLocation::RelayI;
                        self.relay_active_i_at_j = true;
                        self.relay_i_captured = false;
                        self.relay_i_started_ms = now_ms;
                        events.start_i = true;
                    }
                } else if obs_j.entered_q2 {
                    // destination fired during the conduction time
                    self.ta_location = TaLocation::Annihilate;
                    self.last = LastDir::None;
                }
            }
            TaLocation::WaitJ => {
                if self.clock_ms >= params.delta_ji {
                    self.clock_ms = 0.0;
                    self.last = LastDir::FromJ;
                    if matches!(obs_i.location, Location::Upstroke | Location::Plateau) {
                        self.partial_from_j_ms = Some(now_ms);
                        self.ta_location = TaLocation::Idle;
                    } else {
                        self.ta_location = TaLocation::RelayJ;
                        self.relay_active_j_at_i = true;
                        self.relay_j_captured = false;
                        self.relay_j_started_ms = now_ms;
                        events.start_j = true;
                    }
                } else if obs_i.entered_q2 {
                    self.ta_location = TaLocation::Annihilate;
                    self.last = LastDir::None;
                }
            }
            TaLocation::RelayI => {
                if self.clock_ms >= params.delta_ignore_j {
                    self.ta_location = TaLocation::Idle;
                }
            }
            TaLocation::RelayJ => {
                if self.clock_ms >= params.delta_ignore_i {
                    self.ta_location = TaLocation::Idle;
                }
            }
            TaLocation::Annihilate => {
                if obs_i.location != Location::Upstroke && obs_j.location != Location::Upstroke {
                    self.ta_location = TaLocation::Idle;
                }
            }
        }

        // Relay upkeep, after arbitration so that a same-step upstroke of
        // the destination still sees the relay as occupying the path. An
        // open relay stops when the destination has depolarised, when the
        // delayed source waveform reaches its resting phase, or when the
        // arbitrator annihilates (colliding waves extinguish each other). A
        // blocked relay delivers nothing and can only end as a partial.
        let annihilating = self.ta_location == TaLocation::Annihilate;
        if self.relay_active_i_at_j {
            if obs_j.entered_q2 && !params.block_ij {
                self.relay_i_captured = true;
                self.relay_active_i_at_j = false;
            } else if delayed_i.1 == Location::Resting || annihilating {
                self.relay_active_i_at_j = false;
                if !self.relay_i_captured {
                    self.partial_from_i_ms = Some(self.relay_i_started_ms);
                }
            }
        }
        if self.relay_active_j_at_i {
            if obs_i.entered_q2 && !params.block_ji {
                self.relay_j_captured = true;
                self.relay_active_j_at_i = false;
            } else if delayed_j.1 == Location::Resting || annihilating {
                self.relay_active_j_at_i = false;
                if !self.relay_j_captured {
                    self.partial_from_j_ms = Some(self.relay_j_started_ms);
                }
            }
        }
        events
    }
}

/// Reaction-diffusion voltage induced at cell k by its neighbours:
/// `Σ Γ_ik σ_ik / (A_m C_m) (v_out_i - v_k)`.
///
/// `neighbors` holds `(gamma, sigma, v_out)` triples. Empty list yields 0.
pub fn coupling_h_k(neighbors: &[(f64, f64, f64)], v_k: f64, a_m: f64, c_m: f64) -> f64 {
    neighbors
        .iter()
        .map(|&(gamma, sigma, v_out)| gamma * sigma / (a_m * c_m) * (v_out - v_k))
        .sum()
}

/// Delayed-sum baseline coupling: `Σ v_i(t - δ_ki) a_ki - v_k d_k`.
///
/// Always on — no arbitration — which is exactly the defect it is kept
/// around to demonstrate: a pair of coupled cells re-excite each other
/// indefinitely.
pub fn coupling_g_k_oxford(neighbors: &[(f64, f64)], v_k: f64, d_k: f64) -> f64 {
    let s: f64 = neighbors
        .iter()
        .map(|&(delayed_v, gain)| delayed_v * gain)
        .sum();
    s - v_k * d_k
}
