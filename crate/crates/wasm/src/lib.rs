//! Browser bindings for the interactive demo page (`www/`).
//!
//! Three operations, each returning JSON for the page to plot:
//! pace a single cell and return its membrane potential, sweep a
//! restitution curve, and run the four-cell dual-pathway ring with a
//! movable second stimulus to show the onset of re-entry.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use heartsim::cell::{CellParams, CellVariant, Location};
use heartsim::engine::{
    restitution_curve, simulate, single_cell_config, RestitutionProtocol, SimSettings, Trace,
};
use heartsim::network::avnrt_four_cell_demo;

fn parse_variant(preset: &str) -> Result<CellVariant, String> {
    match preset {
        "uoa" => Ok(CellVariant::Uoa),
        "stony_brook" => Ok(CellVariant::StonyBrook2008),
        "oxford" => Ok(CellVariant::OxfordVxOnly),
        other => Err(format!("unknown preset {other}")),
    }
}

#[derive(Serialize)]
struct Series {
    times_ms: Vec<f64>,
    potentials_mv: Vec<f64>,
}

#[derive(Serialize)]
struct CellTrace {
    series: Series,
    upstroke_times_ms: Vec<f64>,
}

fn upstrokes(trace: &Trace, node: usize) -> Vec<f64> {
    let up = Location::Upstroke.as_u8();
    let mut out = Vec::new();
    let mut prev = None;
    for (idx, &l) in trace.locations[node].iter().enumerate() {
        if l == up && prev != Some(up) {
            out.push(trace.times_ms[idx]);
        }
        prev = Some(l);
    }
    out
}

fn err_json(message: &str) -> String {
    format!("{{\"error\":{}}}", serde_json::to_string(message).unwrap())
}

/// Membrane potential of one paced cell. `preset` is `uoa`,
/// `stony_brook` or `oxford`; the cell is stimulated every `bcl_ms`
/// starting at 10 ms for `beats` beats.
#[wasm_bindgen]
pub fn cell_trace_json(preset: &str, bcl_ms: f64, beats: u32) -> String {
    let variant = match parse_variant(preset) {
        Ok(v) => v,
        Err(e) => return err_json(&e),
    };
    let beats = beats.clamp(1, 30) as usize;
    let bcl_ms = bcl_ms.clamp(50.0, 2000.0);
    let params = CellParams::preset(variant);
    let config = single_cell_config(&params, bcl_ms, beats);
    let settings = SimSettings {
        duration_ms: 10.0 + bcl_ms * beats as f64 + 400.0,
        record_decimation: 400, // 0.2 ms plot resolution
        ..SimSettings::default()
    };
    match simulate(&config, &settings) {
        Ok(trace) => serde_json::to_string(&CellTrace {
            upstroke_times_ms: upstrokes(&trace, 0),
            series: Series {
                times_ms: trace.times_ms.clone(),
                potentials_mv: trace.potentials[0].clone(),
            },
        })
        .unwrap(),
        Err(e) => err_json(&e.to_string()),
    }
}

#[derive(Serialize)]
struct RestitutionJson {
    points: Vec<(f64, f64)>, // (di, apd)
    skipped: Vec<f64>,
}

/// Restitution curve of a preset over a range of cycle lengths.
#[wasm_bindgen]
pub fn restitution_json(preset: &str, bcl_start: f64, bcl_end: f64, bcl_step: f64) -> String {
    let variant = match parse_variant(preset) {
        Ok(v) => v,
        Err(e) => return err_json(&e),
    };
    if bcl_step <= 0.0 || bcl_end < bcl_start {
        return err_json("empty cycle-length range");
    }
    let mut bcls = Vec::new();
    let mut bcl = bcl_start.max(50.0);
    while bcl <= bcl_end.min(2000.0) + 1e-9 && bcls.len() < 120 {
        bcls.push(bcl);
        bcl += bcl_step;
    }
    let params = CellParams::preset(variant);
    let protocol = match variant {
        CellVariant::StonyBrook2008 => RestitutionProtocol::FirstBeat,
        _ => RestitutionProtocol::SteadyState,
    };
    match restitution_curve(&params, &bcls, 10, protocol) {
        Ok(r) => {
            let mut points: Vec<(f64, f64)> =
                r.points.iter().map(|p| (p.di_ms, p.apd_ms)).collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            serde_json::to_string(&RestitutionJson {
                points,
                skipped: r.skipped.iter().map(|s| s.0).collect(),
            })
            .unwrap()
        }
        Err(e) => err_json(&e.to_string()),
    }
}

#[derive(Serialize)]
struct RingJson {
    node_ids: Vec<String>,
    times_ms: Vec<f64>,
    potentials_mv: Vec<Vec<f64>>,
    upstroke_counts: Vec<usize>,
    reentry: bool,
}

/// The four-cell dual-pathway ring stimulated at 10 ms and again at
/// `second_stimulus_ms`. Late second beats conduct normally; early ones
/// start sustained re-entry.
#[wasm_bindgen]
pub fn four_cell_demo_json(second_stimulus_ms: f64) -> String {
    let mut config = avnrt_four_cell_demo();
    config.stimuli[1].time_ms = second_stimulus_ms.clamp(100.0, 600.0);
    let settings = SimSettings {
        duration_ms: 1500.0,
        record_decimation: 400,
        ..SimSettings::default()
    };
    match simulate(&config, &settings) {
        Ok(trace) => {
            let counts: Vec<usize> = (0..4).map(|k| upstrokes(&trace, k).len()).collect();
            serde_json::to_string(&RingJson {
                node_ids: trace.node_ids.clone(),
                times_ms: trace.times_ms.clone(),
                potentials_mv: trace.potentials.clone(),
                reentry: counts.iter().all(|&c| c >= 4),
                upstroke_counts: counts,
            })
            .unwrap()
        }
        Err(e) => err_json(&e.to_string()),
    }
}
