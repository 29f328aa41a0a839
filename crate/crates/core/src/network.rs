//! Heart topologies: nodes, paths, stimuli and scenario transforms.
//!
//! A [`HeartConfig`] is a plain serialisable value. The shipped default
//! heart (33 nodes, 34 bidirectional paths) lives in `data/default_heart.json`
//! and is embedded at compile time; users can substitute their own file with
//! the same schema. Scenarios are pure transformations of a config.

use serde::{Deserialize, Serialize};

use crate::cell::{CellParams, CellVariant};
use crate::path::PathParams;

/// Config file schema version, written into files and manifests.
pub const SCHEMA_VERSION: u32 = 1;

/// Default stimulus shape used for pacing and scenario stimuli.
pub const DEFAULT_STIMULUS_MV: f64 = 100.0;
pub const DEFAULT_STIMULUS_MS: f64 = 2.0;

/// First firing time of the sinoatrial node when auto-pacing is on.
pub const SA_FIRST_STIMULUS_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Atrial,
    Av,
    Ventricular,
    Purkinje,
}

/// Partial overrides applied on top of a cell preset. Only set fields
/// replace the preset values; `alpha3_y` is a shorthand for the plateau
/// rate of `v_y`, the main action-potential-duration tuning knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CellOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<CellVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[[f64; 3]; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha3_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_cap_enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q3_f_theta_enabled: Option<bool>,
}

impl CellOverrides {
    pub fn apply(&self, default_variant: CellVariant) -> CellParams {
        let mut p = CellParams::preset(self.variant.unwrap_or(default_variant));
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if let Some(a3y) = self.alpha3_y {
            p.alpha[3][1] = a3y;
        }
        if let Some(v) = self.beta_x {
            p.beta_x = v;
        }
        if let Some(v) = self.beta_y {
            p.beta_y = v;
        }
        if let Some(v) = self.beta_z {
            p.beta_z = v;
        }
        if let Some(v) = self.v_r {
            p.v_r = v;
        }
        if let Some(v) = self.v_t {
            p.v_t = v;
        }
        if let Some(v) = self.v_o {
            p.v_o = v;
        }
        if let Some(v) = self.f_cap {
            p.f_cap = v;
        }
        if let Some(v) = self.f_cap_enabled {
            p.f_cap_enabled = v;
        }
        if let Some(v) = self.q3_f_theta_enabled {
            p.q3_f_theta_enabled = v;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub region: Region,
    #[serde(default)]
    pub cell_overrides: CellOverrides,
    /// Self-attenuation coefficient for the delayed-sum baseline coupling.
    #[serde(default)]
    pub oxford_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub params: PathParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub node_id: String,
    pub time_ms: f64,
    pub amplitude_mv: f64,
    pub duration_ms: f64,
}

impl Stimulus {
    pub fn pulse(node_id: &str, time_ms: f64) -> Self {
        Self {
            node_id: node_id.to_string(),
            time_ms,
            amplitude_mv: DEFAULT_STIMULUS_MV,
            duration_ms: DEFAULT_STIMULUS_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Reaction-diffusion coupling fed by the path relays.
    UoaHK,
    /// Always-on delayed-gain baseline, bypassing the path automata.
    OxfordGK,
}

fn default_am() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartConfig {
    pub schema_version: u32,
    pub name: String,
    pub coupling_mode: CouplingMode,
    /// Membrane surface-to-volume ratio (1/mm) and specific capacitance
    /// (uF/mm^2), global constants of the reaction-diffusion coupling.
    #[serde(default = "default_am")]
    pub a_m: f64,
    #[serde(default = "default_am")]
    pub c_m: f64,
    /// Preset used for nodes without a variant override.
    pub default_variant: CellVariant,
    /// Auto-pacing period of the SA node; when set, the SA node is
    /// stimulated at 10 ms and every cycle after.
    #[serde(default)]
    pub sa_cycle_ms: Option<f64>,
    pub nodes: Vec<NodeSpec>,
    pub paths: Vec<PathSpec>,
    #[serde(default)]
    pub stimuli: Vec<Stimulus>,
}

impl HeartConfig {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn fingerprint(&self) -> u64 {
        crate::fingerprint(self.canonical_json().as_bytes())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The shipped 33-node conduction system. Parsed from the embedded data
/// file; see `data/default_heart.json` for the editable source.
pub fn default_heart() -> HeartConfig {
    HeartConfig::from_json(include_str!("../data/default_heart.json"))
        .expect("embedded default heart parses")
}

/// Minimal fast/slow dual-pathway ring: four cells, four paths. The fast
/// branch (via C2) conducts quickly but repolarises slowly; the slow branch
/// (via C3) the converse. Stimulating C1 at 10 and 260 ms produces two
/// clean beats; an early second stimulus (e.g. 160 ms) starts sustained
/// re-entry around the ring.
pub fn avnrt_four_cell_demo() -> HeartConfig {
    let fast = PathParams::symmetric(20.0);
    let slow = PathParams::symmetric(75.0);
    HeartConfig {
        schema_version: SCHEMA_VERSION,
        name: "avnrt-four-cell".to_string(),
        coupling_mode: CouplingMode::UoaHK,
        a_m: 1.0,
        c_m: 1.0,
        default_variant: CellVariant::Uoa,
        sa_cycle_ms: None,
        nodes: vec![
            NodeSpec {
                id: "C1".into(),
                region: Region::Atrial,
                cell_overrides: CellOverrides::default(),
                oxford_d: 0.0,
            },
            NodeSpec {
                id: "C2".into(),
                region: Region::Av,
                cell_overrides: CellOverrides {
                    alpha3_y: Some(0.022),
                    ..CellOverrides::default()
                },
                oxford_d: 0.0,
            },
            NodeSpec {
                id: "C3".into(),
                region: Region::Av,
                cell_overrides: CellOverrides {
                    alpha3_y: Some(0.036),
                    ..CellOverrides::default()
                },
                oxford_d: 0.0,
            },
            NodeSpec {
                id: "C4".into(),
                region: Region::Ventricular,
                cell_overrides: CellOverrides::default(),
                oxford_d: 0.0,
            },
        ],
        paths: vec![
            PathSpec {
                from: "C1".into(),
                to: "C2".into(),
                params: fast,
            },
            PathSpec {
                from: "C2".into(),
                to: "C4".into(),
                params: fast,
            },
            PathSpec {
                from: "C1".into(),
                to: "C3".into(),
                params: slow,
            },
            PathSpec {
                from: "C3".into(),
                to: "C4".into(),
                params: slow,
            },
        ],
        stimuli: vec![Stimulus::pulse("C1", 10.0), Stimulus::pulse("C1", 260.0)],
    }
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Normal,
    HeartBlock,
    BundleBranchBlockRight,
    BundleBranchBlockLeft,
    LongQt,
    VaConduction,
    Wpw,
    Avnrt,
    Bradycardia,
    Tachycardia,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 10] = [
        ScenarioName::Normal,
        ScenarioName::HeartBlock,
        ScenarioName::BundleBranchBlockRight,
        ScenarioName::BundleBranchBlockLeft,
        ScenarioName::LongQt,
        ScenarioName::VaConduction,
        ScenarioName::Wpw,
        ScenarioName::Avnrt,
        ScenarioName::Bradycardia,
        ScenarioName::Tachycardia,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Normal => "normal",
            ScenarioName::HeartBlock => "heart_block",
            ScenarioName::BundleBranchBlockRight => "bundle_branch_block_right",
            ScenarioName::BundleBranchBlockLeft => "bundle_branch_block_left",
            ScenarioName::LongQt => "long_qt",
            ScenarioName::VaConduction => "va_conduction",
            ScenarioName::Wpw => "wpw",
            ScenarioName::Avnrt => "avnrt",
            ScenarioName::Bradycardia => "bradycardia",
            ScenarioName::Tachycardia => "tachycardia",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|n| n.as_str() == s)
    }

    pub fn description(&self) -> &'static str {
        match self {
            ScenarioName::Normal => "single SA beat propagating through the whole system",
            ScenarioName::HeartBlock => {
                "atrial drive into the AV node weakened and slowed; beats do not reach the ventricles"
            }
            ScenarioName::BundleBranchBlockRight => {
                "right bundle branch weakened and slowed; right ventricle activates late"
            }
            ScenarioName::BundleBranchBlockLeft => {
                "left bundle branch weakened and slowed; left ventricle activates late"
            }
            ScenarioName::LongQt => {
                "ventricular repolarisation slowed; ventricular action potentials lengthen"
            }
            ScenarioName::VaConduction => {
                "ventricular stimulus conducts retrogradely into the atria"
            }
            ScenarioName::Wpw => {
                "accessory atrium-to-ventricle pathway pre-excites the left ventricle"
            }
            ScenarioName::Avnrt => {
                "early second SA beat starts re-entry around the AV fast/slow pathways"
            }
            ScenarioName::Bradycardia => "slow SA auto-pacing",
            ScenarioName::Tachycardia => "fast SA auto-pacing",
        }
    }
}

/// Magnitudes used by the scenario transforms. The directions of the
/// changes are fixed; the sizes are tunable with these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// Conductivity factor applied to atrial inputs of the AV node.
    pub block_sigma_factor: f64,
    /// Conduction-time factor applied around the AV node.
    pub block_delta_factor: f64,
    /// Conductivity factor at the blocked bundle branch entry.
    pub bbb_sigma_factor: f64,
    /// Conduction-time factor along the blocked branch.
    pub bbb_delta_factor: f64,
    /// Factor on the ventricular plateau v_y rate (< 1 lengthens APD).
    pub long_qt_alpha3y_factor: f64,
    pub wpw_from: String,
    pub wpw_to: String,
    pub wpw_delta_ms: f64,
    pub va_node: String,
    pub avnrt_stimulus_times_ms: [f64; 2],
    pub bradycardia_cycle_ms: f64,
    pub tachycardia_cycle_ms: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            block_sigma_factor: 0.002,
            block_delta_factor: 2.0,
            bbb_sigma_factor: 0.5,
            bbb_delta_factor: 3.0,
            long_qt_alpha3y_factor: 0.5,
            wpw_from: "LA4".to_string(),
            wpw_to: "LV3".to_string(),
            wpw_delta_ms: 25.0,
            va_node: "RV1".to_string(),
            avnrt_stimulus_times_ms: [10.0, 220.0],
            bradycardia_cycle_ms: 1200.0,
            tachycardia_cycle_ms: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    #[serde(default)]
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn named(name: ScenarioName) -> Self {
        Self {
            name,
            params: ScenarioParams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario references unknown node {0}")]
    UnknownNode(String),
}

fn effective_alpha3_y(node: &NodeSpec, default_variant: CellVariant) -> f64 {
    node.cell_overrides.apply(default_variant).alpha[3][1]
}

/// Pure transformation of a config into the scenario's variant of it.
/// Same inputs produce an identical (byte-identical when serialised) output.
pub fn apply_scenario(
    config: &HeartConfig,
    scenario: &Scenario,
) -> Result<HeartConfig, ScenarioError> {
    let mut out = config.clone();
    let p = &scenario.params;
    match scenario.name {
        ScenarioName::Normal => {}
        ScenarioName::HeartBlock => {
            for path in &mut out.paths {
                if path.to == "AV" {
                    path.params.sigma_ij *= p.block_sigma_factor;
                    path.params.delta_ij *= p.block_delta_factor;
                    path.params.delta_ji *= p.block_delta_factor;
                }
                if path.from == "AV" {
                    path.params.delta_ij *= p.block_delta_factor;
                    path.params.delta_ji *= p.block_delta_factor;
                }
            }
        }
        ScenarioName::BundleBranchBlockRight | ScenarioName::BundleBranchBlockLeft => {
            let branch = if scenario.name == ScenarioName::BundleBranchBlockRight {
                "RBB"
            } else {
                "LBB"
            };
            for path in &mut out.paths {
                let touches_branch = path.from.starts_with(branch) || path.to.starts_with(branch);
                if touches_branch {
                    path.params.delta_ij *= p.bbb_delta_factor;
                    path.params.delta_ji *= p.bbb_delta_factor;
                }
                if path.from == "BH" && path.to.starts_with(branch) {
                    path.params.sigma_ij *= p.bbb_sigma_factor;
                }
            }
        }
        ScenarioName::LongQt => {
            for node in &mut out.nodes {
                if node.region == Region::Ventricular {
                    let current = effective_alpha3_y(node, out.default_variant);
                    node.cell_overrides.alpha3_y = Some(current * p.long_qt_alpha3y_factor);
                }
            }
        }
        ScenarioName::VaConduction => {
            if config.node_index(&p.va_node).is_none() {
                return Err(ScenarioError::UnknownNode(p.va_node.clone()));
            }
            out.stimuli = vec![Stimulus::pulse(&p.va_node, 10.0)];
            out.sa_cycle_ms = None;
        }
        ScenarioName::Wpw => {
            if config.node_index(&p.wpw_from).is_none() {
                return Err(ScenarioError::UnknownNode(p.wpw_from.clone()));
            }
            if config.node_index(&p.wpw_to).is_none() {
                return Err(ScenarioError::UnknownNode(p.wpw_to.clone()));
            }
            out.paths.push(PathSpec {
                from: p.wpw_from.clone(),
                to: p.wpw_to.clone(),
                params: PathParams::symmetric(p.wpw_delta_ms),
            });
        }
        ScenarioName::Avnrt => {
            out.stimuli = p
                .avnrt_stimulus_times_ms
                .iter()
                .map(|&t| Stimulus::pulse("SA", t))
                .collect();
            out.sa_cycle_ms = None;
        }
        ScenarioName::Bradycardia => {
            out.sa_cycle_ms = Some(p.bradycardia_cycle_ms);
            out.stimuli.retain(|s| s.node_id != "SA");
        }
        ScenarioName::Tachycardia => {
            out.sa_cycle_ms = Some(p.tachycardia_cycle_ms);
            out.stimuli.retain(|s| s.node_id != "SA");
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }
}

/// Conduction times at or beyond this hint probably violate the model's
/// assumption that an action potential outlasts its conduction time.
pub const DELTA_APD_HINT_MS: f64 = 120.0;

/// Structural checks. Errors make a config unrunnable; warnings flag
/// questionable parameters and grid-rounding effects (when `dt_ms` given).
pub fn validate_config(config: &HeartConfig, dt_ms: Option<f64>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if config.schema_version != SCHEMA_VERSION {
        out.push(Diagnostic::error(format!(
            "schema_version {} unsupported (this build reads {})",
            config.schema_version, SCHEMA_VERSION
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for node in &config.nodes {
        if !seen.insert(node.id.as_str()) {
            out.push(Diagnostic::error(format!("duplicate node id {}", node.id)));
        }
    }
    if config.a_m <= 0.0 || config.c_m <= 0.0 {
        out.push(Diagnostic::error(
            "a_m and c_m must be positive".to_string(),
        ));
    }
    for (k, path) in config.paths.iter().enumerate() {
        let label = format!("path[{k}] {}-{}", path.from, path.to);
        for end in [&path.from, &path.to] {
            if config.node_index(end).is_none() {
                out.push(Diagnostic::error(format!(
                    "{label}: unknown endpoint {end}"
                )));
            }
        }
        let pp = &path.params;
        for (name, v) in [
            ("delta_ij", pp.delta_ij),
            ("delta_ji", pp.delta_ji),
            ("gamma_ij", pp.gamma_ij),
            ("gamma_ji", pp.gamma_ji),
            ("sigma_ij", pp.sigma_ij),
            ("sigma_ji", pp.sigma_ji),
        ] {
            if v <= 0.0 {
                out.push(Diagnostic::error(format!(
                    "{label}: {name} must be positive"
                )));
            }
        }
        for (name, v) in [("delta_ij", pp.delta_ij), ("delta_ji", pp.delta_ji)] {
            if v >= DELTA_APD_HINT_MS {
                out.push(Diagnostic::warning(format!(
                    "{label}: {name} = {v} ms is long relative to typical action \
                     potential durations; propagation may not outlast conduction"
                )));
            }
            if let Some(dt) = dt_ms {
                let steps = (v / dt).round();
                let realised = steps * dt;
                if (realised - v).abs() > 1e-12 {
                    out.push(Diagnostic::warning(format!(
                        "{label}: {name} = {v} ms rounds to {realised} ms on the {dt} ms grid"
                    )));
                }
            }
        }
    }
    for stim in &config.stimuli {
        if config.node_index(&stim.node_id).is_none() {
            out.push(Diagnostic::error(format!(
                "stimulus references unknown node {}",
                stim.node_id
            )));
        }
        if stim.time_ms < 0.0 {
            out.push(Diagnostic::error(format!(
                "stimulus on {} has negative time",
                stim.node_id
            )));
        }
        if stim.amplitude_mv <= 0.0 {
            out.push(Diagnostic::error(format!(
                "stimulus on {} has non-positive amplitude",
                stim.node_id
            )));
        }
    }
    if let Some(cycle) = config.sa_cycle_ms {
        if cycle <= 0.0 {
            out.push(Diagnostic::error(
                "sa_cycle_ms must be positive".to_string(),
            ));
        }
        if config.node_index("SA").is_none() {
            out.push(Diagnostic::error(
                "sa_cycle_ms set but no SA node exists".to_string(),
            ));
        }
    }
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
