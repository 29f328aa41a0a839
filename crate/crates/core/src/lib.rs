//! Deterministic simulator of the cardiac conduction system.
//!
//! The heart is modelled as a sparse network of cardiac cells connected by
//! conduction paths:
//!
//! - [`cell`] — a hybrid automaton per cell: four locations (resting,
//!   stimulated, upstroke, plateau) with linear flows per location and
//!   guarded discrete transitions. Three selectable presets.
//! - [`path`] — a timed automaton per path that arbitrates which action
//!   potentials may propagate, detects collisions/annihilation, and relays
//!   the delayed source waveform to the destination. Includes both coupling
//!   functions (reaction-diffusion and the delayed-gain baseline).
//! - [`network`] — assembles cells and paths into a heart topology, applies
//!   per-region tuning and scenario transforms.
//! - [`engine`] — the fixed-step simulation loop, trace recording, beat
//!   measurement and the restitution experiment driver.
//!
//! Everything is a plain value and every step function is pure: two runs
//! with identical inputs produce bit-identical traces.
//!
//! ```
//! use heartsim::engine::{activation_report, simulate, SimSettings};
//! use heartsim::network::avnrt_four_cell_demo;
//!
//! let ring = avnrt_four_cell_demo();
//! let mut settings = SimSettings::with_duration(120.0);
//! settings.record_decimation = 20;
//! let trace = simulate(&ring, &settings).unwrap();
//! let first_beat = &activation_report(&trace)[0];
//! assert_eq!(first_beat.node_id, "C1");
//! assert_eq!(first_beat.q2_entry_count, 1);
//! ```

pub mod cell;
pub mod engine;
pub mod network;
pub mod path;

pub use cell::{CellParams, CellState, CellVariant, Location};
pub use engine::{Integrator, SimSettings, Trace};
pub use network::{HeartConfig, Scenario, ScenarioName};
pub use path::{PathParams, PathState};

/// FNV-1a over a byte string; used to fingerprint configs in trace metadata
/// and run manifests. Stable across platforms.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
