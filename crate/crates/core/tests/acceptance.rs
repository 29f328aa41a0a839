//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them).
//!
//! Criteria at a glance:
//!  1. f(θ) point values
//!  2. pacing stability (stabilised preset) vs shortening (baseline preset)
//!  3. restitution floor of the stabilised preset
//!  4. restitution shapes (two-level single-variable curve; monotone
//!     stabilised curve)
//!  5. two-cell full/partial propagation timeline under a one-way block
//!  6. collision annihilation over a grid of stimulus offsets
//!  7. delayed-sum baseline feedback defect
//!  8. four-cell re-entry demo
//!  9. whole-heart scenarios (normal order, total block, long QT)
//! 10. determinism and grid-refinement stability
//! 11. wall-clock budget for 1 s of the 33-node heart

use heartsim::cell::{f_theta, CellParams, CellVariant, Location};
use heartsim::engine::{
    activation_report, restitution_curve, segment_beats, simulate, single_cell_config,
    RestitutionProtocol, SimSettings, Trace, APD_THRESHOLD_FRAC,
};
use heartsim::network::{
    apply_scenario, avnrt_four_cell_demo, default_heart, CouplingMode, HeartConfig, NodeSpec,
    PathSpec, Region, Scenario, ScenarioName, Stimulus, SCHEMA_VERSION,
};
use heartsim::path::PathParams;

fn settings(duration_ms: f64, decimation: usize) -> SimSettings {
    SimSettings {
        duration_ms,
        record_decimation: decimation,
        ..SimSettings::default()
    }
}

fn two_cell_config(delta_ms: f64, block_ji: bool) -> HeartConfig {
    HeartConfig {
        schema_version: SCHEMA_VERSION,
        name: "two-cell".into(),
        coupling_mode: CouplingMode::UoaHK,
        a_m: 1.0,
        c_m: 1.0,
        default_variant: CellVariant::Uoa,
        sa_cycle_ms: None,
        nodes: vec![
            NodeSpec {
                id: "I".into(),
                region: Region::Atrial,
                cell_overrides: Default::default(),
                oxford_d: 0.0,
            },
            NodeSpec {
                id: "J".into(),
                region: Region::Atrial,
                cell_overrides: Default::default(),
                oxford_d: 0.0,
            },
        ],
        paths: vec![PathSpec {
            from: "I".into(),
            to: "J".into(),
            params: PathParams {
                block_ji,
                ..PathParams::symmetric(delta_ms)
            },
        }],
        stimuli: vec![],
    }
}

fn upstroke_times(trace: &Trace, node: usize) -> Vec<f64> {
    let up = Location::Upstroke.as_u8();
    let locs = &trace.locations[node];
    let mut out = Vec::new();
    let mut prev = None;
    for (idx, &l) in locs.iter().enumerate() {
        if l == up && prev != Some(up) {
            out.push(trace.times_ms[idx]);
        }
        prev = Some(l);
    }
    out
}

/// Duration from each upstroke entry to the following return to rest
/// (plateau duration), indexed by pacing window. `None` when the stimulus
/// failed to capture.
fn plateau_by_window(trace: &Trace, node: usize, stim_times: &[f64]) -> Vec<Option<f64>> {
    let up = Location::Upstroke.as_u8();
    let rest = Location::Resting.as_u8();
    let locs = &trace.locations[node];
    let times = &trace.times_ms;
    let mut events: Vec<(f64, f64)> = Vec::new(); // (t_up, plateau)
    let mut prev = locs[0];
    let mut t_up = None;
    for idx in 1..times.len() {
        if locs[idx] == up && prev != up {
            t_up = Some(times[idx]);
        }
        if locs[idx] == rest && prev != rest {
            if let Some(t0) = t_up.take() {
                events.push((t0, times[idx] - t0));
            }
        }
        prev = locs[idx];
    }
    stim_times
        .iter()
        .enumerate()
        .map(|(k, &t0)| {
            let t1 = stim_times.get(k + 1).copied().unwrap_or(f64::INFINITY);
            events
                .iter()
                .find(|(t, _)| *t >= t0 && *t < t1)
                .map(|(_, d)| *d)
        })
        .collect()
}

#[test]
fn acceptance_01_f_theta_points() {
    let uoa = CellParams::preset(CellVariant::Uoa);
    let baseline = CellParams::preset(CellVariant::StonyBrook2008);

    let expr_at_cap = f_theta(0.04, &baseline).unwrap();
    assert!(
        (expr_at_cap - 4.0395).abs() < 1e-3,
        "f(0.04) = {expr_at_cap}, want 4.0395 ± 1e-3"
    );
    let capped = f_theta(0.04, &uoa).unwrap();
    assert_eq!(capped, 4.0395);

    let f1 = f_theta(1.0, &baseline).unwrap();
    let rel = (f1 - 5.96e26).abs() / 5.96e26;
    assert!(rel < 0.01, "uncapped f(1) = {f1:e}, want 5.96e26 ± 1%");
    assert_eq!(f_theta(1.0, &uoa).unwrap(), 4.0395);

    println!(
        "ACCEPTANCE 1 (f(theta) points): PASS — f(0.04)={expr_at_cap:.5}, uncapped f(1)={f1:.3e} ({:.2}% off), capped f(1)=4.0395",
        rel * 100.0
    );
}

#[test]
fn acceptance_02_pacing_stability_vs_shortening() {
    // 20 beats at 200 ms intervals for both presets.
    let beats = 20;
    let stim_times: Vec<f64> = (0..beats).map(|k| 10.0 + 200.0 * k as f64).collect();

    // Stabilised preset: the ten-percent-of-peak durations settle.
    let uoa = CellParams::preset(CellVariant::Uoa);
    let config = single_cell_config(&uoa, 200.0, beats);
    let trace = simulate(&config, &settings(10.0 + 200.0 * beats as f64 + 400.0, 4)).unwrap();
    let beats_uoa = segment_beats(
        &trace.times_ms,
        &trace.potentials[0],
        &trace.locations[0],
        APD_THRESHOLD_FRAC,
    );
    assert_eq!(
        beats_uoa.len(),
        beats,
        "stabilised preset captures every beat"
    );
    let apd19 = beats_uoa[18].apd_ms.unwrap();
    let apd20 = beats_uoa[19].apd_ms.unwrap();
    assert!(
        (apd20 - apd19).abs() < 1.0,
        "|APD_20 - APD_19| = {} >= 1 ms",
        (apd20 - apd19).abs()
    );

    // Baseline preset: durations shorten towards zero. Once the plateau
    // collapses below the threshold-crossing tail, the ten-percent measure
    // stops tracking the action potential, so the shortening is asserted on
    // the plateau duration (upstroke entry to return to rest), one beat per
    // pacing window.
    let sb = CellParams::preset(CellVariant::StonyBrook2008);
    let config = single_cell_config(&sb, 200.0, beats);
    let trace = simulate(&config, &settings(10.0 + 200.0 * beats as f64 + 400.0, 1)).unwrap();
    let durations = plateau_by_window(&trace, 0, &stim_times);
    let measured: Vec<(usize, f64)> = durations
        .iter()
        .enumerate()
        .take(10)
        .filter_map(|(k, d)| d.map(|d| (k + 1, d)))
        .collect();
    assert!(
        measured.len() >= 8,
        "baseline captured too few of the first ten beats: {measured:?}"
    );
    for w in measured.windows(2) {
        assert!(
            w[1].1 < w[0].1,
            "baseline durations not strictly decreasing: beat {} = {:.3} then beat {} = {:.3}",
            w[0].0,
            w[0].1,
            w[1].0,
            w[1].1
        );
    }
    let last = measured.last().unwrap().1;
    assert!(last < 5.0, "baseline did not shorten towards zero: {last}");

    println!(
        "ACCEPTANCE 2 (stability vs shortening): PASS — stabilised APD_19={apd19:.3}, APD_20={apd20:.3}; baseline plateau durations {:?}",
        measured.iter().map(|(_, d)| (d * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
}

#[test]
fn acceptance_03_apd_floor() {
    let uoa = CellParams::preset(CellVariant::Uoa);
    let bcls: Vec<f64> = (2..=20).map(|k| k as f64 * 50.0).collect();
    let r = restitution_curve(&uoa, &bcls, 10, RestitutionProtocol::SteadyState).unwrap();
    assert!(!r.points.is_empty());
    let min = r
        .points
        .iter()
        .map(|p| p.apd_ms)
        .fold(f64::INFINITY, f64::min);
    assert!(min >= 30.0, "restitution floor {min} < 30 ms");
    println!(
        "ACCEPTANCE 3 (APD floor): PASS — minimum APD over cycle lengths 100..1000 is {min:.3} ms (>= 30)"
    );
}

#[test]
fn acceptance_04_restitution_shapes() {
    // Single-variable preset: two flat levels split near DI = 51 ms.
    let ox = CellParams::preset(CellVariant::OxfordVxOnly);
    let mut bcls: Vec<f64> = (68..=80).map(|k| k as f64 * 2.0).collect(); // 136..160
    bcls.extend((33..=60).map(|k| k as f64 * 5.0)); // 165..300
    bcls.extend((7..=20).map(|k| k as f64 * 50.0)); // 350..1000
    let r = restitution_curve(&ox, &bcls, 10, RestitutionProtocol::SteadyState).unwrap();
    let mut short = 0;
    let mut long = 0;
    for p in &r.points {
        if p.di_ms < 46.0 {
            assert!(
                (p.apd_ms - 9.0).abs() <= 3.0,
                "short branch point ({:.1}, {:.1}) outside 9 ± 3",
                p.di_ms,
                p.apd_ms
            );
            short += 1;
        } else if p.di_ms > 56.0 {
            assert!(
                (p.apd_ms - 98.0).abs() <= 3.0,
                "long branch point ({:.1}, {:.1}) outside 98 ± 3",
                p.di_ms,
                p.apd_ms
            );
            long += 1;
        } // 46..56: the split window (51 ± 5), unconstrained
    }
    assert!(
        short >= 2,
        "need at least two short-branch points, got {short}"
    );
    assert!(
        long >= 5,
        "need at least five long-branch points, got {long}"
    );

    // Stabilised preset: non-decreasing within a 2 ms band.
    let uoa = CellParams::preset(CellVariant::Uoa);
    let bcls: Vec<f64> = (2..=20).map(|k| k as f64 * 50.0).collect();
    let ru = restitution_curve(&uoa, &bcls, 10, RestitutionProtocol::SteadyState).unwrap();
    let mut pts = ru.points.clone();
    pts.sort_by(|a, b| a.di_ms.total_cmp(&b.di_ms));
    for w in pts.windows(2) {
        assert!(
            w[1].apd_ms >= w[0].apd_ms - 2.0,
            "stabilised curve decreasing beyond tolerance: ({:.1},{:.1}) then ({:.1},{:.1})",
            w[0].di_ms,
            w[0].apd_ms,
            w[1].di_ms,
            w[1].apd_ms
        );
    }
    println!(
        "ACCEPTANCE 4 (restitution shapes): PASS — two-level curve with {short} short / {long} long points; stabilised curve monotone over {} points",
        pts.len()
    );
}

#[test]
fn acceptance_05_two_cell_block_timeline() {
    // One-way block j->i, conduction time 30 ms. Stimuli: i at 10, j at
    // 260, i at 360 (swallowed by the partial propagation), i at 710
    // (conducts again).
    let mut config = two_cell_config(30.0, true);
    config.stimuli = vec![
        Stimulus::pulse("I", 10.0),
        Stimulus::pulse("J", 260.0),
        Stimulus::pulse("I", 360.0),
        Stimulus::pulse("I", 710.0),
    ];
    let trace = simulate(&config, &settings(1000.0, 4)).unwrap();
    let ups_i = upstroke_times(&trace, 0);
    let ups_j = upstroke_times(&trace, 1);

    assert_eq!(
        ups_i.len(),
        3,
        "cell i fires on each of its stimuli: {ups_i:?}"
    );
    assert_eq!(
        ups_j.len(),
        3,
        "cell j: captured beat + own beat + late capture: {ups_j:?}"
    );

    let first_relay = ups_j[0];
    assert!(
        (first_relay - 40.0).abs() <= 2.0,
        "first propagation arrives at {first_relay:.2}, want 40 ± 2"
    );
    assert!(
        (ups_j[1] - 260.0).abs() <= 2.0,
        "j's own beat at {:.2}",
        ups_j[1]
    );
    // j's 260 beat must not reach i
    assert!(
        ups_i
            .iter()
            .all(|&t| (t - 10.0).abs() < 2.0 || (t - 360.0).abs() < 2.0 || (t - 710.0).abs() < 2.0),
        "cell i fired outside its own stimuli: {ups_i:?}"
    );
    // i's 360 beat must not reach j; i's 710 beat must
    assert!(
        !ups_j.iter().any(|&t| (262.0..730.0).contains(&t)),
        "the 360 ms propagation should have been annihilated: {ups_j:?}"
    );
    assert!(
        (ups_j[2] - 740.0).abs() <= 2.0,
        "the 710 ms propagation should arrive near 740: {:.2}",
        ups_j[2]
    );
    println!(
        "ACCEPTANCE 5 (two-cell block timeline): PASS — i upstrokes {:?}, j upstrokes {:?}",
        ups_i
            .iter()
            .map(|t| (t * 100.0).round() / 100.0)
            .collect::<Vec<_>>(),
        ups_j
            .iter()
            .map(|t| (t * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
}

#[test]
fn acceptance_06_collision_annihilation() {
    // Opposing stimuli with offsets 0..=25 ms on a 30 ms path: no relay in
    // either direction, each cell fires exactly once.
    for off in 0..=25 {
        let mut config = two_cell_config(30.0, false);
        config.stimuli = vec![
            Stimulus::pulse("I", 10.0),
            Stimulus::pulse("J", 10.0 + off as f64),
        ];
        let s = SimSettings {
            duration_ms: 300.0,
            record_decimation: 10,
            record_path_ta: true,
            ..SimSettings::default()
        };
        let trace = simulate(&config, &s).unwrap();
        assert_eq!(upstroke_times(&trace, 0).len(), 1, "offset {off}: cell i");
        assert_eq!(upstroke_times(&trace, 1).len(), 1, "offset {off}: cell j");
        let ta = &trace.path_ta.as_ref().unwrap()[0].1;
        assert!(
            ta.iter().all(|&code| code != 5 && code != 6),
            "offset {off}: a relay started"
        );
    }
    println!(
        "ACCEPTANCE 6 (collision annihilation): PASS — zero relay events across offsets 0..=25 ms"
    );
}

#[test]
fn acceptance_07_delayed_sum_feedback_defect() {
    // Baseline coupling, two cells, 90 ms delay, one stimulus: the delayed
    // sum keeps re-exciting both cells.
    let mut config = two_cell_config(90.0, false);
    config.coupling_mode = CouplingMode::OxfordGK;
    config.default_variant = CellVariant::OxfordVxOnly;
    config.stimuli = vec![Stimulus::pulse("I", 10.0)];
    let trace = simulate(&config, &settings(1000.0, 10)).unwrap();
    let n_i = upstroke_times(&trace, 0).len();
    let n_j = upstroke_times(&trace, 1).len();
    assert!(n_i >= 3, "cell i produced only {n_i} action potentials");
    assert!(n_j >= 3, "cell j produced only {n_j} action potentials");
    println!(
        "ACCEPTANCE 7 (delayed-sum feedback defect): PASS — {n_i} and {n_j} action potentials from a single stimulus"
    );
}

#[test]
fn acceptance_08_four_cell_reentry() {
    // Late second stimulus: two clean beats everywhere.
    let demo = avnrt_four_cell_demo();
    let trace = simulate(&demo, &settings(1500.0, 20)).unwrap();
    let counts: Vec<usize> = (0..4).map(|k| upstroke_times(&trace, k).len()).collect();
    assert_eq!(
        counts,
        vec![2, 2, 2, 2],
        "stimuli at 10/260 give two beats each"
    );

    // Early second stimulus: sustained re-entry around the ring.
    let mut early = avnrt_four_cell_demo();
    early.stimuli[1].time_ms = 160.0;
    let trace = simulate(&early, &settings(1500.0, 20)).unwrap();
    let early_counts: Vec<usize> = (0..4).map(|k| upstroke_times(&trace, k).len()).collect();
    for (k, &c) in early_counts.iter().enumerate() {
        assert!(
            c >= 4,
            "stimuli at 10/160: ring cell {} fired only {c} times",
            trace.node_ids[k]
        );
    }
    println!(
        "ACCEPTANCE 8 (four-cell re-entry): PASS — normal counts {counts:?}, early-stimulus counts {early_counts:?}"
    );
}

#[test]
fn acceptance_09_whole_heart_scenarios() {
    let base = default_heart();

    // Normal cycle: every node exactly once, in conduction order.
    let trace = simulate(&base, &settings(1000.0, 20)).unwrap();
    let report = activation_report(&trace);
    assert!(report.iter().all(|r| r.q2_entry_count == 1), "{report:?}");
    let first = |id: &str| {
        report
            .iter()
            .find(|r| r.node_id == id)
            .and_then(|r| r.first_q2_entry_ms)
            .unwrap()
    };
    let sa = first("SA");
    let atrial_ids: Vec<&str> = base
        .nodes
        .iter()
        .filter(|n| n.region == Region::Atrial && n.id != "SA")
        .map(|n| n.id.as_str())
        .collect();
    let atrial_max = atrial_ids.iter().map(|id| first(id)).fold(0.0, f64::max);
    let atrial_min = atrial_ids
        .iter()
        .map(|id| first(id))
        .fold(f64::INFINITY, f64::min);
    let av = first("AV");
    let branch_ids = ["RBB1", "RBB2", "RBB3", "LBB1", "LBB2", "LBB3"];
    let branch_min = branch_ids
        .iter()
        .map(|id| first(id))
        .fold(f64::INFINITY, f64::min);
    let branch_max = branch_ids.iter().map(|id| first(id)).fold(0.0, f64::max);
    let apex_min = first("RVA").min(first("LVA"));
    assert!(sa < atrial_min, "SA first");
    assert!(atrial_max < av, "atria before the AV node");
    assert!(av < branch_min, "AV before the bundle branches");
    assert!(branch_max < apex_min, "branches before the apexes");

    // Heart block: no ventricular depolarisations at all.
    let block = apply_scenario(&base, &Scenario::named(ScenarioName::HeartBlock)).unwrap();
    let trace_b = simulate(&block, &settings(1000.0, 20)).unwrap();
    let vent_total: usize = activation_report(&trace_b)
        .iter()
        .filter(|r| {
            base.nodes
                .iter()
                .any(|n| n.id == r.node_id && n.region == Region::Ventricular)
        })
        .map(|r| r.q2_entry_count)
        .sum();
    assert_eq!(vent_total, 0, "heart block must stop all ventricular beats");

    // Long QT: ventricular action potentials lengthen.
    let apd_of = |trace: &Trace, id: &str| {
        let k = trace.node_ids.iter().position(|n| n == id).unwrap();
        segment_beats(
            &trace.times_ms,
            &trace.potentials[k],
            &trace.locations[k],
            APD_THRESHOLD_FRAC,
        )[0]
        .apd_ms
        .unwrap()
    };
    let lqt = apply_scenario(&base, &Scenario::named(ScenarioName::LongQt)).unwrap();
    let trace_l = simulate(&lqt, &settings(1200.0, 20)).unwrap();
    let normal_apd = apd_of(&trace, "RV2");
    let lqt_apd = apd_of(&trace_l, "RV2");
    assert!(
        lqt_apd > normal_apd,
        "long QT RV2 APD {lqt_apd} not greater than normal {normal_apd}"
    );

    println!(
        "ACCEPTANCE 9 (whole heart): PASS — normal order SA {sa:.1} < atria [{atrial_min:.1},{atrial_max:.1}] < AV {av:.1} < branches [{branch_min:.1},{branch_max:.1}] < apexes {apex_min:.1}; block ventricular beats 0; long-QT RV2 APD {lqt_apd:.1} > {normal_apd:.1}"
    );
}

#[test]
fn acceptance_10_determinism_and_grid_refinement() {
    let base = default_heart();

    // Bit-identical traces (and therefore CSV bytes) across repeated runs.
    let s = settings(400.0, 20);
    let a = simulate(&base, &s).unwrap();
    let b = simulate(&base, &s).unwrap();
    assert_eq!(
        a.voltage_csv(),
        b.voltage_csv(),
        "voltage CSV differs between runs"
    );
    assert_eq!(
        a.location_csv(),
        b.location_csv(),
        "location CSV differs between runs"
    );

    // Halving dt moves no first-activation time by 1 ms or more.
    let s_half = SimSettings {
        dt_ms: 0.00025,
        record_decimation: 40,
        ..settings(400.0, 20)
    };
    let fine = simulate(&base, &s_half).unwrap();
    let coarse_report = activation_report(&a);
    let fine_report = activation_report(&fine);
    let mut worst = 0.0_f64;
    for (c, f) in coarse_report.iter().zip(fine_report.iter()) {
        let tc = c.first_q2_entry_ms.expect("all nodes activate");
        let tf = f.first_q2_entry_ms.expect("all nodes activate");
        worst = worst.max((tc - tf).abs());
    }
    assert!(worst < 1.0, "dt halving moved an activation by {worst} ms");
    println!(
        "ACCEPTANCE 10 (determinism & grid refinement): PASS — identical CSV bytes; max activation shift {worst:.4} ms"
    );
}

#[test]
fn acceptance_11_performance_budget() {
    let base = default_heart();
    let s = settings(1000.0, 100); // 2e6 steps at the default 0.0005 ms
    let t0 = std::time::Instant::now();
    let trace = simulate(&base, &s).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    assert_eq!(trace.times_ms.len(), 20_000);
    assert!(
        wall < 120.0,
        "1 s of the 33-node heart took {wall:.1} s (budget 120 s)"
    );
    println!(
        "ACCEPTANCE 11 (performance): PASS — 1 s of 33 nodes at dt=0.0005 ms in {wall:.2} s wall clock"
    );
}
