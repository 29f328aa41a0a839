//! Fixed-step simulation loop, trace recording and experiment drivers.
//!
//! Each step, in order: sample the delay buffers, form every cell's input
//! voltage (relay outputs through the coupling function, or the delayed-sum
//! baseline, plus scheduled stimuli), integrate the continuous flows with
//! inputs frozen at step start, apply at most one discrete transition per
//! cell, step the path automata, push the new samples into the delay
//! buffers, record. The loop is single-threaded and allocation-free after
//! setup; identical inputs give bit-identical traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{
    cell_discrete_step, cell_flow, membrane_potential, CellParams, CellState, Location,
};
use crate::network::{
    has_errors, validate_config, CouplingMode, HeartConfig, Stimulus, DEFAULT_STIMULUS_MS,
    DEFAULT_STIMULUS_MV, SA_FIRST_STIMULUS_MS,
};
use crate::path::{CellObs, PathParams, PathState, TaLocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt_ms: f64,
    pub duration_ms: f64,
    /// Keep every Nth sample. Applies to recording only, never to dynamics.
    pub record_decimation: usize,
    pub integrator: Integrator,
    /// Also record the arbitration-automaton location of every path.
    #[serde(default)]
    pub record_path_ta: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt_ms: 0.0005,
            duration_ms: 1000.0,
            record_decimation: 1,
            integrator: Integrator::Rk4,
            record_path_ta: false,
        }
    }
}

impl SimSettings {
    pub fn with_duration(duration_ms: f64) -> Self {
        Self {
            duration_ms,
            ..Self::default()
        }
    }
}

/// Time-indexed record of a run. Series are stored per node; all share the
/// same uniformly spaced time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub node_ids: Vec<String>,
    pub times_ms: Vec<f64>,
    /// potentials[node][sample], mV.
    pub potentials: Vec<Vec<f64>>,
    /// locations[node][sample], automaton location discriminant 0..=3.
    pub locations: Vec<Vec<u8>>,
    /// Optional arbitration locations: (path label, series).
    pub path_ta: Option<Vec<(String, Vec<u8>)>>,
    pub config_hash: u64,
    pub settings: SimSettings,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("non-finite state at step {step} (t = {time_ms} ms) in node {node}")]
    NonFinite {
        step: usize,
        time_ms: f64,
        node: String,
    },
    #[error("restitution produced no capture at any cycle length: {0}")]
    NoCapture(String),
}

// ---------------------------------------------------------------------------
// Integrators
// ---------------------------------------------------------------------------

/// One classical 4th-order Runge-Kutta step with frozen inputs.
pub fn rk4_step<F>(vars: [f64; 3], dt: f64, flow: F) -> [f64; 3]
where
    F: Fn(&[f64; 3]) -> [f64; 3],
{
    let k1 = flow(&vars);
    let k2 = flow(&add(vars, scale(k1, dt / 2.0)));
    let k3 = flow(&add(vars, scale(k2, dt / 2.0)));
    let k4 = flow(&add(vars, scale(k3, dt)));
    let mut out = vars;
    for i in 0..3 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

pub fn euler_step<F>(vars: [f64; 3], dt: f64, flow: F) -> [f64; 3]
where
    F: Fn(&[f64; 3]) -> [f64; 3],
{
    add(vars, scale(flow(&vars), dt))
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Advances one cell's continuous variables by `dt` with `v_in` held
/// constant across the step.
pub fn integrate_step(
    state: &mut CellState,
    v_in: f64,
    params: &CellParams,
    dt: f64,
    integrator: Integrator,
) {
    let frozen = *state;
    let flow = |vars: &[f64; 3]| {
        let mut probe = frozen;
        probe.set_vars(*vars);
        cell_flow(&probe, v_in, params)
    };
    let next = match integrator {
        Integrator::Rk4 => rk4_step(state.vars(), dt, flow),
        Integrator::Euler => euler_step(state.vars(), dt, flow),
    };
    state.set_vars(next);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Online action-potential-duration tracker: upstroke entry to the fall
/// below 10% of the running beat peak. Feeds the paths' refractory windows.
#[derive(Debug, Clone, Copy, Default)]
struct BeatMonitor {
    active: bool,
    start_ms: f64,
    peak_mv: f64,
    last_apd_ms: Option<f64>,
}

impl BeatMonitor {
    fn on_step(&mut self, entered_q2: bool, v: f64, now_ms: f64) {
        if entered_q2 {
            self.active = true;
            self.start_ms = now_ms;
            self.peak_mv = v;
            return;
        }
        if self.active {
            self.peak_mv = self.peak_mv.max(v);
            if v < APD_THRESHOLD_FRAC * self.peak_mv {
                self.last_apd_ms = Some(now_ms - self.start_ms);
                self.active = false;
            }
        }
    }
}

/// Fraction of the beat peak at which an action potential is considered
/// over and the diastolic interval begins.
pub const APD_THRESHOLD_FRAC: f64 = 0.10;

struct PathRuntime {
    i: usize,
    j: usize,
    params: PathParams,
    state: PathState,
    label: String,
}

fn ta_code(loc: TaLocation) -> u8 {
    match loc {
        TaLocation::Idle => 0,
        TaLocation::DirectionI => 1,
        TaLocation::DirectionJ => 2,
        TaLocation::WaitI => 3,
        TaLocation::WaitJ => 4,
        TaLocation::RelayI => 5,
        TaLocation::RelayJ => 6,
        TaLocation::Annihilate => 7,
    }
}

/// Runs the coupled system and records a trace. Deterministic: cells and
/// paths are stepped in config order with a fixed summation order.
pub fn simulate(config: &HeartConfig, settings: &SimSettings) -> Result<Trace, EngineError> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(settings.dt_ms) || !positive(settings.duration_ms) {
        return Err(EngineError::Validation(vec![format!(
            "dt_ms and duration_ms must be positive (got {}, {})",
            settings.dt_ms, settings.duration_ms
        )]));
    }
    let diags = validate_config(config, Some(settings.dt_ms));
    if has_errors(&diags) {
        return Err(EngineError::Validation(
            diags.into_iter().map(|d| d.message).collect(),
        ));
    }

    let n = config.nodes.len();
    let cell_params: Vec<CellParams> = config
        .nodes
        .iter()
        .map(|node| node.cell_overrides.apply(config.default_variant))
        .collect();
    let mut cells: Vec<CellState> = vec![CellState::default(); n];
    let mut monitors: Vec<BeatMonitor> = vec![BeatMonitor::default(); n];

    let mut paths: Vec<PathRuntime> = config
        .paths
        .iter()
        .map(|spec| PathRuntime {
            i: config.node_index(&spec.from).unwrap(),
            j: config.node_index(&spec.to).unwrap(),
            params: spec.params,
            state: PathState::new(&spec.params, settings.dt_ms),
            label: format!("{}-{}", spec.from, spec.to),
        })
        .collect();

    // Stimulus schedule: explicit entries plus SA auto-pacing.
    let mut stimuli: Vec<(usize, f64, f64, f64)> = Vec::new();
    for s in &config.stimuli {
        stimuli.push((
            config.node_index(&s.node_id).unwrap(),
            s.time_ms,
            s.duration_ms,
            s.amplitude_mv,
        ));
    }
    if let Some(cycle) = config.sa_cycle_ms {
        let sa = config.node_index("SA").unwrap();
        let mut t = SA_FIRST_STIMULUS_MS;
        while t < settings.duration_ms {
            stimuli.push((sa, t, DEFAULT_STIMULUS_MS, DEFAULT_STIMULUS_MV));
            t += cycle;
        }
    }
    stimuli.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let dt = settings.dt_ms;
    let steps = (settings.duration_ms / dt).round() as usize;
    let decim = settings.record_decimation.max(1);
    let samples = steps.div_ceil(decim);

    let config_hash = config.fingerprint();
    let mut trace = Trace {
        node_ids: config.nodes.iter().map(|n| n.id.clone()).collect(),
        times_ms: Vec::with_capacity(samples),
        potentials: vec![Vec::with_capacity(samples); n],
        locations: vec![Vec::with_capacity(samples); n],
        path_ta: settings.record_path_ta.then(|| {
            paths
                .iter()
                .map(|p| (p.label.clone(), Vec::with_capacity(samples)))
                .collect()
        }),
        config_hash,
        settings: settings.clone(),
    };

    let mut v_in = vec![0.0_f64; n];
    let mut potentials = vec![0.0_f64; n];
    let mut entered_q2 = vec![false; n];
    let mut delayed = vec![((0.0, Location::Resting), (0.0, Location::Resting)); paths.len()];
    let inv_amcm = 1.0 / (config.a_m * config.c_m);

    for step in 0..steps {
        let now = step as f64 * dt;

        for k in 0..n {
            potentials[k] = membrane_potential(&cells[k], &cell_params[k]);
        }

        if step % decim == 0 {
            trace.times_ms.push(now);
            for k in 0..n {
                trace.potentials[k].push(potentials[k]);
                trace.locations[k].push(cells[k].location.as_u8());
            }
            if let Some(ta) = trace.path_ta.as_mut() {
                for (p, (_, series)) in paths.iter().zip(ta.iter_mut()) {
                    series.push(ta_code(p.state.ta_location));
                }
            }
        }

        // (1) sample delay buffers
        for (p, d) in paths.iter().zip(delayed.iter_mut()) {
            *d = (
                p.state.delay_buffer_ij.sample(),
                p.state.delay_buffer_ji.sample(),
            );
        }

        // (2) coupling + stimuli -> v_in
        v_in.iter_mut().for_each(|v| *v = 0.0);
        match config.coupling_mode {
            CouplingMode::UoaHK => {
                for (p, d) in paths.iter().zip(delayed.iter()) {
                    let (delayed_ij, delayed_ji) = *d;
                    let out_at_j =
                        p.state
                            .relay_v_out_at_j(delayed_ij.0, potentials[p.j], &p.params);
                    v_in[p.j] += p.params.gamma_ij
                        * p.params.sigma_ij
                        * inv_amcm
                        * (out_at_j - potentials[p.j]);
                    let out_at_i =
                        p.state
                            .relay_v_out_at_i(delayed_ji.0, potentials[p.i], &p.params);
                    v_in[p.i] += p.params.gamma_ji
                        * p.params.sigma_ji
                        * inv_amcm
                        * (out_at_i - potentials[p.i]);
                }
            }
            CouplingMode::OxfordGK => {
                for (p, d) in paths.iter().zip(delayed.iter()) {
                    let (delayed_ij, delayed_ji) = *d;
                    v_in[p.j] += delayed_ij.0 * p.params.oxford_gain_ij;
                    v_in[p.i] += delayed_ji.0 * p.params.oxford_gain_ji;
                }
                for k in 0..n {
                    v_in[k] -= config.nodes[k].oxford_d * potentials[k];
                }
            }
        }
        for &(node, t0, dur, amp) in &stimuli {
            if now >= t0 && now < t0 + dur {
                v_in[node] += amp;
            }
        }

        // (3) integrate flows, (4) discrete transitions
        for k in 0..n {
            integrate_step(
                &mut cells[k],
                v_in[k],
                &cell_params[k],
                dt,
                settings.integrator,
            );
            if !(cells[k].v_x.is_finite() && cells[k].v_y.is_finite() && cells[k].v_z.is_finite()) {
                return Err(EngineError::NonFinite {
                    step,
                    time_ms: now,
                    node: config.nodes[k].id.clone(),
                });
            }
            let before = cells[k].location;
            cell_discrete_step(&mut cells[k], v_in[k], &cell_params[k], now);
            entered_q2[k] = cells[k].location == Location::Upstroke && before != Location::Upstroke;
            let v = membrane_potential(&cells[k], &cell_params[k]);
            monitors[k].on_step(entered_q2[k], v, now);
        }

        // (5) path automata
        for (p, d) in paths.iter_mut().zip(delayed.iter()) {
            let obs_i = CellObs {
                potential: membrane_potential(&cells[p.i], &cell_params[p.i]),
                location: cells[p.i].location,
                entered_q2: entered_q2[p.i],
                last_apd_ms: monitors[p.i].last_apd_ms,
            };
            let obs_j = CellObs {
                potential: membrane_potential(&cells[p.j], &cell_params[p.j]),
                location: cells[p.j].location,
                entered_q2: entered_q2[p.j],
                last_apd_ms: monitors[p.j].last_apd_ms,
            };
            p.state.step(&obs_i, &obs_j, d.0, d.1, &p.params, now, dt);
        }

        // (6) push fresh samples
        for p in paths.iter_mut() {
            let vi = membrane_potential(&cells[p.i], &cell_params[p.i]);
            let vj = membrane_potential(&cells[p.j], &cell_params[p.j]);
            p.state.delay_buffer_ij.push(vi, cells[p.i].location);
            p.state.delay_buffer_ji.push(vj, cells[p.j].location);
        }
    }

    Ok(trace)
}

// ---------------------------------------------------------------------------
// Beat measurement
// ---------------------------------------------------------------------------

/// One segmented action potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beat {
    pub t_up_ms: f64,
    pub peak_mv: f64,
    /// When the potential fell below the threshold fraction of the peak.
    pub t_fall_ms: Option<f64>,
    pub apd_ms: Option<f64>,
    /// Interval from the fall to the next beat's upstroke.
    pub di_ms: Option<f64>,
}

/// Segments a single-node series into beats. A beat starts at each entry
/// into the upstroke location and ends (for duration purposes) when the
/// potential falls below `threshold_frac` of the running beat peak.
pub fn segment_beats(
    times_ms: &[f64],
    potentials: &[f64],
    locations: &[u8],
    threshold_frac: f64,
) -> Vec<Beat> {
    let upstroke = Location::Upstroke.as_u8();
    let mut beats: Vec<Beat> = Vec::new();
    let mut prev_loc = None::<u8>;
    for idx in 0..times_ms.len() {
        let entering = locations[idx] == upstroke && prev_loc != Some(upstroke);
        prev_loc = Some(locations[idx]);
        if entering {
            if let Some(last) = beats.last_mut() {
                if let Some(fall) = last.t_fall_ms {
                    last.di_ms = Some(times_ms[idx] - fall);
                }
            }
            beats.push(Beat {
                t_up_ms: times_ms[idx],
                peak_mv: potentials[idx],
                t_fall_ms: None,
                apd_ms: None,
                di_ms: None,
            });
            continue;
        }
        if let Some(beat) = beats.last_mut() {
            if beat.t_fall_ms.is_none() {
                beat.peak_mv = beat.peak_mv.max(potentials[idx]);
                if potentials[idx] < threshold_frac * beat.peak_mv {
                    beat.t_fall_ms = Some(times_ms[idx]);
                    beat.apd_ms = Some(times_ms[idx] - beat.t_up_ms);
                }
            }
        }
    }
    beats
}

/// (APD, DI) pairs for every beat with both quantities defined.
pub fn measure_apd_di(
    times_ms: &[f64],
    potentials: &[f64],
    locations: &[u8],
    threshold_frac: f64,
) -> Vec<(f64, f64)> {
    segment_beats(times_ms, potentials, locations, threshold_frac)
        .iter()
        .filter_map(|b| Some((b.apd_ms?, b.di_ms?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Restitution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RestitutionProtocol {
    /// Pair the last diastolic interval with the following beat's duration
    /// (beats 9 and 10 of a 10-beat train when every stimulus captures).
    #[default]
    SteadyState,
    /// Pair the first diastolic interval with the second beat's duration;
    /// the workaround for presets whose beats never settle.
    FirstBeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestitutionPoint {
    pub bcl_ms: f64,
    pub di_ms: f64,
    pub apd_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RestitutionResult {
    pub points: Vec<RestitutionPoint>,
    /// Cycle lengths that produced no usable pair, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// Stimulus train amplitude/width used by the restitution driver.
pub const RESTITUTION_STIM_MV: f64 = 100.0;
pub const RESTITUTION_STIM_MS: f64 = 2.0;

/// Paces an isolated cell at each cycle length and measures the restitution
/// pairing. Stimuli that fail to capture simply produce fewer beats; cycle
/// lengths without a usable pair are reported in `skipped`.
pub fn restitution_curve(
    params: &CellParams,
    bcl_list: &[f64],
    beats_per_bcl: usize,
    protocol: RestitutionProtocol,
) -> Result<RestitutionResult, EngineError> {
    let mut result = RestitutionResult::default();
    for &bcl in bcl_list {
        let config = single_cell_config(params, bcl, beats_per_bcl);
        let settings = SimSettings {
            duration_ms: 10.0 + bcl * beats_per_bcl as f64 + 500.0,
            record_decimation: 4,
            ..SimSettings::default()
        };
        let trace = simulate(&config, &settings)?;
        let beats = segment_beats(
            &trace.times_ms,
            &trace.potentials[0],
            &trace.locations[0],
            APD_THRESHOLD_FRAC,
        );
        let pair = match protocol {
            RestitutionProtocol::SteadyState => beats
                .len()
                .checked_sub(2)
                .and_then(|k| Some((beats[k].di_ms?, beats[k + 1].apd_ms?))),
            RestitutionProtocol::FirstBeat => {
                if beats.len() >= 2 {
                    beats[0].di_ms.zip(beats[1].apd_ms)
                } else {
                    None
                }
            }
        };
        match pair {
            Some((di, apd)) => result.points.push(RestitutionPoint {
                bcl_ms: bcl,
                di_ms: di,
                apd_ms: apd,
            }),
            None => result.skipped.push((
                bcl,
                format!("{} captured beat(s); need two consecutive", beats.len()),
            )),
        }
    }
    if result.points.is_empty() {
        return Err(EngineError::NoCapture(format!(
            "all {} cycle lengths skipped",
            result.skipped.len()
        )));
    }
    Ok(result)
}

/// One isolated cell paced with a finite stimulus train.
pub fn single_cell_config(params: &CellParams, bcl_ms: f64, beats: usize) -> HeartConfig {
    use crate::network::{CellOverrides, NodeSpec, Region, SCHEMA_VERSION};
    HeartConfig {
        schema_version: SCHEMA_VERSION,
        name: "single-cell".to_string(),
        coupling_mode: CouplingMode::UoaHK,
        a_m: 1.0,
        c_m: 1.0,
        default_variant: params.variant,
        sa_cycle_ms: None,
        nodes: vec![NodeSpec {
            id: "CELL".to_string(),
            region: Region::Atrial,
            cell_overrides: CellOverrides {
                variant: Some(params.variant),
                alpha: Some(params.alpha),
                beta_x: Some(params.beta_x),
                beta_y: Some(params.beta_y),
                beta_z: Some(params.beta_z),
                v_r: Some(params.v_r),
                v_t: Some(params.v_t),
                v_o: Some(params.v_o),
                f_cap: Some(params.f_cap),
                f_cap_enabled: Some(params.f_cap_enabled),
                q3_f_theta_enabled: Some(params.q3_f_theta_enabled),
                alpha3_y: None,
            },
            oxford_d: 0.0,
        }],
        paths: Vec::new(),
        stimuli: (0..beats)
            .map(|k| Stimulus {
                node_id: "CELL".to_string(),
                time_ms: 10.0 + k as f64 * bcl_ms,
                amplitude_mv: RESTITUTION_STIM_MV,
                duration_ms: RESTITUTION_STIM_MS,
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Reports and CSV rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRow {
    pub node_id: String,
    pub first_q2_entry_ms: Option<f64>,
    pub q2_entry_count: usize,
}

/// Per-node first depolarisation time and depolarisation count.
pub fn activation_report(trace: &Trace) -> Vec<ActivationRow> {
    let upstroke = Location::Upstroke.as_u8();
    trace
        .node_ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let locs = &trace.locations[k];
            let mut first = None;
            let mut count = 0;
            let mut prev = None::<u8>;
            for (idx, &loc) in locs.iter().enumerate() {
                if loc == upstroke && prev != Some(upstroke) {
                    count += 1;
                    if first.is_none() {
                        first = Some(trace.times_ms[idx]);
                    }
                }
                prev = Some(loc);
            }
            ActivationRow {
                node_id: id.clone(),
                first_q2_entry_ms: first,
                q2_entry_count: count,
            }
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

impl Trace {
    /// `time_ms,<node>,...` rows; fixed six-decimal formatting, LF endings.
    pub fn voltage_csv(&self) -> String {
        let mut out = String::from("time_ms");
        for id in &self.node_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for s in 0..self.times_ms.len() {
            out.push_str(&fmt(self.times_ms[s]));
            for k in 0..self.node_ids.len() {
                out.push(',');
                out.push_str(&fmt(self.potentials[k][s]));
            }
            out.push('\n');
        }
        out
    }

    /// Automaton locations as small integers, same shape as the voltage CSV.
    pub fn location_csv(&self) -> String {
        let mut out = String::from("time_ms");
        for id in &self.node_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for s in 0..self.times_ms.len() {
            out.push_str(&fmt(self.times_ms[s]));
            for k in 0..self.node_ids.len() {
                out.push(',');
                out.push_str(&self.locations[k][s].to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn activation_csv(rows: &[ActivationRow]) -> String {
    let mut out = String::from("node_id,first_q2_entry_ms,q2_entry_count\n");
    for r in rows {
        out.push_str(&r.node_id);
        out.push(',');
        if let Some(t) = r.first_q2_entry_ms {
            out.push_str(&fmt(t));
        }
        out.push(',');
        out.push_str(&r.q2_entry_count.to_string());
        out.push('\n');
    }
    out
}

pub fn restitution_csv(result: &RestitutionResult) -> String {
    let mut out = String::from("bcl_ms,di_ms,apd_ms\n");
    for p in &result.points {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(p.bcl_ms),
            fmt(p.di_ms),
            fmt(p.apd_ms)
        ));
    }
    out
}
