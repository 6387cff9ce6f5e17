//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use preheat::cycle_io::{synth_cycle, SynthSpec};
use preheat::model::{current_from, defaults, step_back_sample, step_sample};
use preheat::oracle::{bang_off_structure, compare, solve_dp, Comparison, DpGrid};
use preheat::{
    energy_report, plan_preheat, verify_balances, DriveCycle, Error, State, Targets, Trajectory,
    VehicleParams,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP_SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn preset_cycle() -> DriveCycle {
    synth_cycle(&SynthSpec::default()).unwrap()
}

fn start() -> State {
    State::new(defaults::SOC0, defaults::TB0_C)
}

fn targets() -> Targets {
    Targets {
        soc: defaults::SOC_TARGET,
        tb: defaults::TB_TARGET_C,
    }
}

/// Preset plus the seeded cycles, each solved by both planners.
struct Runs {
    preset: Comparison,
    preset_dp_time: Duration,
    seeded: Vec<(u64, Result<Comparison, Error>)>,
    elapsed: Duration,
}

fn run_all(p: &VehicleParams) -> Runs {
    let t0 = Instant::now();
    let preset =
        compare(p, &preset_cycle(), start(), targets(), DpGrid::default()).expect("preset solves");
    let preset_dp_time = t0.elapsed();
    let seeded = GAP_SEEDS
        .map(|seed| {
            let c = synth_cycle(&SynthSpec {
                seed,
                ..SynthSpec::default()
            })
            .unwrap();
            (seed, compare(p, &c, start(), targets(), DpGrid::default()))
        })
        .collect();
    Runs {
        preset,
        preset_dp_time,
        seeded,
        elapsed: t0.elapsed(),
    }
}

fn balance_closure(p: &VehicleParams, runs: &Runs) -> Outcome {
    let mut trajs: Vec<(String, &Trajectory, DriveCycle)> = vec![
        (
            "preset heuristic".into(),
            &runs.preset.plan.trajectory,
            preset_cycle(),
        ),
        (
            "preset dp".into(),
            &runs.preset.dp.trajectory,
            preset_cycle(),
        ),
    ];
    for (seed, r) in &runs.seeded {
        if let Ok(cmp) = r {
            let c = synth_cycle(&SynthSpec {
                seed: *seed,
                ..SynthSpec::default()
            })
            .unwrap();
            trajs.push((
                format!("seed {seed} heuristic"),
                &cmp.plan.trajectory,
                c.clone(),
            ));
            trajs.push((format!("seed {seed} dp"), &cmp.dp.trajectory, c));
        }
    }
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (name, t, c) in &trajs {
        let b = verify_balances(t, p, c).unwrap();
        worst = worst.max(b.electrical_rel).max(b.thermal_rel);
        if !b.closes(1e-9) {
            bad.push(name.clone());
        }
    }
    let took = t0.elapsed();
    outcome(
        bad.is_empty() && took < Duration::from_secs(1),
        format!(
            "{} trajectories, worst residual {worst:.2e}, {:.1} ms{}",
            trajs.len(),
            took.as_secs_f64() * 1e3,
            if bad.is_empty() {
                String::new()
            } else {
                format!(", open: {bad:?}")
            }
        ),
    )
}

fn current_solve() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut feasible = 0;
    let mut missed_errors = 0;
    for _ in 0..10_000 {
        let uoc = rng.random_range(250.0..450.0);
        let r = rng.random_range(0.005..0.5);
        let p_max = uoc * uoc / (4.0 * r);
        let frac: f64 = rng.random_range(-3.0..1.5);
        let p = frac * p_max;
        if frac <= 1.0 {
            feasible += 1;
            let i = current_from(uoc, r, p).unwrap();
            let rel = (uoc * i - r * i * i - p).abs() / p.abs().max(1.0);
            worst = worst.max(rel);
        } else if !matches!(current_from(uoc, r, p), Err(Error::PowerInfeasible { .. })) {
            missed_errors += 1;
        }
    }
    let took = t0.elapsed();
    outcome(
        worst <= 1e-9 && missed_errors == 0 && took < Duration::from_secs(1),
        format!(
            "{feasible} feasible triples, worst back-substitution {worst:.2e}, \
             {} infeasible with {missed_errors} unflagged, {:.1} ms",
            10_000 - feasible,
            took.as_secs_f64() * 1e3
        ),
    )
}

fn bang_off(p: &VehicleParams) -> Outcome {
    let c = preset_cycle();
    let t0 = Instant::now();
    let dp = solve_dp(p, &c, start(), targets(), DpGrid::default()).unwrap();
    let took = t0.elapsed();
    let shape = bang_off_structure(p, &c, &dp.trajectory.controls, 1.0);
    let detail = match &shape {
        Some(b) => format!(
            "switch at sample {}, transition {:?} W, grid 61x81x5 in {:.2} s",
            b.switch_index,
            b.transition_level_w.map(|w| w.round()),
            took.as_secs_f64()
        ),
        None => format!("control is not off-then-max: {:?}", dp.trajectory.controls),
    };
    outcome(
        shape.is_some_and(|b| b.switch_index < c.steps()) && took < Duration::from_secs(60),
        detail,
    )
}

fn optimality_gap(runs: &Runs) -> Outcome {
    let mut worst = runs.preset.gap.total_delta_rel;
    let mut failures = Vec::new();
    if worst > 0.005 {
        failures.push("preset".to_string());
    }
    for (seed, r) in &runs.seeded {
        match r {
            Ok(cmp) => {
                worst = worst.max(cmp.gap.total_delta_rel);
                if cmp.gap.total_delta_rel > 0.005 || !cmp.plan.feasible {
                    failures.push(format!("seed {seed}: {:.4}", cmp.gap.total_delta_rel));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    outcome(
        failures.is_empty() && runs.elapsed < Duration::from_secs(30 * 60),
        format!(
            "preset {:+.3}%, worst over {} cycles {:+.3}%, {:.1} s{}",
            100.0 * runs.preset.gap.total_delta_rel,
            runs.seeded.len() + 1,
            100.0 * worst,
            runs.elapsed.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failing: {failures:?}")
            }
        ),
    )
}

fn terminal_satisfaction(runs: &Runs) -> Outcome {
    let tb_f = targets().tb;
    let band = |t: &Trajectory| {
        let tb = t.terminal().tb;
        tb >= tb_f - 0.5 && tb <= tb_f + 1.5
    };
    let mut misses = Vec::new();
    let mut plans = vec![("preset", &runs.preset.plan)];
    plans.extend(
        runs.seeded
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().map(|c| ("seeded", &c.plan))),
    );
    for (name, plan) in &plans {
        if plan.feasible && !band(&plan.trajectory) {
            misses.push(format!("{name} {:.2}", plan.trajectory.terminal().tb));
        }
    }
    let pre = &runs.preset;
    let end = pre.plan.trajectory.terminal();
    let delta = pre.gap.switch_delta_samples;
    outcome(
        misses.is_empty() && delta.abs() <= 2 && pre.plan.feasible,
        format!(
            "preset ends at tb {:.2} C soc {:.4}, dp ends at tb {:.2} C soc {:.4}, \
             switch {} vs {} ({delta:+} samples){}",
            end.tb,
            end.soc,
            pre.dp.trajectory.terminal().tb,
            pre.dp.trajectory.terminal().soc,
            pre.gap.heuristic_switch_index,
            pre.gap.oracle_switch_index,
            if misses.is_empty() {
                String::new()
            } else {
                format!(", outside band: {misses:?}")
            }
        ),
    )
}

fn magnitude_anchor(p: &VehicleParams, runs: &Runs) -> Outcome {
    let plan = &runs.preset.plan;
    let r = energy_report(&plan.trajectory, p, &preset_cycle()).unwrap();
    let anchors = [
        ("joule", r.joule_heating_wh, 345.1),
        ("ed", r.ed_heating_wh, 1504.0),
        ("hvch", r.hvch_battery_heating_wh, 2038.9),
        ("leakage", r.ambient_leakage_wh, -525.8),
        ("total", r.total_battery_wh, 23889.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, got, anchor) in anchors {
        let ratio = got / anchor;
        pass &= (0.5..=2.0).contains(&ratio);
        parts.push(format!("{name} {got:.0} Wh (x{ratio:.2})"));
    }
    let minutes = plan.switch_time_s / 60.0;
    pass &= (15.0..=45.0).contains(&minutes);
    parts.push(format!("preheat {minutes:.1} min"));
    outcome(pass, parts.join(", "))
}

fn backward_consistency(p: &VehicleParams, runs: &Runs) -> Outcome {
    let c = preset_cycle();
    let traj = &runs.preset.plan.trajectory;
    let miss = |dt: f64| {
        let mut worst = (0.0f64, 0.0f64);
        for k in 0..c.steps() {
            let s = traj.states[k];
            let u = traj.controls[k];
            let (next, _) = step_sample(p, s, u, c.sample(k), dt).unwrap();
            let (back, _) = step_back_sample(p, next, u, c.sample(k), dt).unwrap();
            worst.0 = worst.0.max((back.soc - s.soc).abs());
            worst.1 = worst.1.max((back.tb - s.tb).abs());
        }
        worst
    };
    let m = [miss(30.0), miss(3.0), miss(0.3)];
    let ratios = [
        m[0].0 / m[1].0,
        m[1].0 / m[2].0,
        m[0].1 / m[1].1,
        m[1].1 / m[2].1,
    ];
    outcome(
        ratios.iter().all(|r| (50.0..=200.0).contains(r)),
        format!(
            "tb miss {:.2e} / {:.2e} / {:.2e} K (ratios {:.1}, {:.1}), \
             soc miss {:.2e} / {:.2e} / {:.2e} (ratios {:.1}, {:.1})",
            m[0].1,
            m[1].1,
            m[2].1,
            ratios[2],
            ratios[3],
            m[0].0,
            m[1].0,
            m[2].0,
            ratios[0],
            ratios[1]
        ),
    )
}

fn performance(p: &VehicleParams, runs: &Runs) -> Outcome {
    let c = preset_cycle();
    let reps = 200;
    let mut best = Duration::MAX;
    for _ in 0..reps {
        let t0 = Instant::now();
        let plan = plan_preheat(p, &c, start(), targets()).unwrap();
        best = best.min(t0.elapsed());
        std::hint::black_box(plan);
    }
    let plan_time = best;
    // The preset comparison time includes one plan; it is negligible next to the DP.
    let dp_time = runs.preset_dp_time;
    let speedup = dp_time.as_secs_f64() / plan_time.as_secs_f64();
    outcome(
        plan_time <= Duration::from_millis(10) && speedup >= 1000.0,
        format!(
            "plan {:.3} ms (best of {reps}), dp {:.2} s, speedup {speedup:.0}x",
            plan_time.as_secs_f64() * 1e3,
            dp_time.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let p = defaults::vehicle_params();
    let runs = run_all(&p);
    let results = [
        ("1 balance closure", balance_closure(&p, &runs)),
        ("2 current solve", current_solve()),
        ("3 bang-off structure", bang_off(&p)),
        ("4 optimality gap", optimality_gap(&runs)),
        ("5 terminal satisfaction", terminal_satisfaction(&runs)),
        ("6 magnitude anchor", magnitude_anchor(&p, &runs)),
        (
            "7 backward-step consistency",
            backward_consistency(&p, &runs),
        ),
        ("8 performance", performance(&p, &runs)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
