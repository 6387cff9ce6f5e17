use preheat::cycle_io::{synth_cycle, SynthSpec};
use preheat::heuristic::{bang_schedule, TERMINAL_TB_TOLERANCE_K};
use preheat::model::{current_from, defaults, step_back_sample, step_sample};
use preheat::oracle::{solve_dp, DpGrid};
use preheat::{
    energy_report, plan_preheat, simulate, verify_balances, Error, Origin, State, Targets,
};
use proptest::prelude::*;

fn cycle(seed: u64) -> preheat::DriveCycle {
    synth_cycle(&SynthSpec {
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

proptest! {
    #[test]
    fn current_back_substitutes(uoc in 200.0f64..500.0, r in 0.005f64..0.5, frac in -1.0f64..1.0) {
        let p_max = uoc * uoc / (4.0 * r);
        let p = frac * p_max;
        let i = current_from(uoc, r, p).unwrap();
        let back = uoc * i - r * i * i;
        prop_assert!((back - p).abs() <= 1e-9 * p.abs().max(1.0));
        prop_assert_eq!(i.signum() == p.signum() || p == 0.0, true);
    }

    #[test]
    fn negative_discriminant_is_power_infeasible(uoc in 200.0f64..500.0, r in 0.005f64..0.5, over in 1.0001f64..10.0) {
        let p = over * uoc * uoc / (4.0 * r);
        let infeasible = matches!(current_from(uoc, r, p), Err(Error::PowerInfeasible { .. }));
        prop_assert!(infeasible);
    }

    #[test]
    fn resistance_decreases_with_temperature(a in -40.0f64..80.0, d in 0.01f64..50.0) {
        let p = defaults::vehicle_params();
        prop_assert!(p.internal_resistance(a).unwrap() > p.internal_resistance(a + d).unwrap());
    }

    #[test]
    fn joule_heat_is_even(i in -500.0f64..500.0, tb in -30.0f64..55.0) {
        let p = defaults::vehicle_params();
        let s = State::new(0.5, tb);
        let q = p.joule_heat(s, i).unwrap();
        prop_assert!(q >= 0.0);
        prop_assert_eq!(q, p.joule_heat(s, -i).unwrap());
    }

    #[test]
    fn ocv_increases_with_soc(a in 0.0f64..0.99, d in 0.001f64..0.01) {
        let p = defaults::vehicle_params();
        let b = (a + d).min(1.0);
        prop_assert!(p.open_circuit_voltage(b).unwrap() > p.open_circuit_voltage(a).unwrap());
    }

    #[test]
    fn power_limits_bracket_zero(soc in -0.5f64..1.5, tb in -60.0f64..90.0) {
        let p = defaults::vehicle_params();
        let (chg, dchg) = p.power_limits(State::new(soc, tb));
        prop_assert!(chg <= 0.0 && dchg >= 0.0);
        prop_assert!(dchg <= defaults::P_DCHG_PEAK_W && chg >= defaults::P_CHG_PEAK_W);
    }

    #[test]
    fn step_keeps_power_identity(seed in 0u64..50, k in 0usize..120, soc in 0.2f64..0.95, tb in -20.0f64..40.0, frac in 0.0f64..1.0) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let u = frac * c.hvch_headroom(&p, k);
        let (_, b) = step_sample(&p, State::new(soc, tb), u, c.sample(k), c.dt()).unwrap();
        prop_assert_eq!(b.p_battery, b.p_terminal + b.q_joule);
    }

    #[test]
    fn backward_step_nearly_inverts_forward(seed in 0u64..50, k in 0usize..120, soc in 0.2f64..0.95, tb in -20.0f64..40.0) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let s = State::new(soc, tb);
        let u = c.hvch_headroom(&p, k);
        let miss = |dt: f64| {
            let (next, _) = step_sample(&p, s, u, c.sample(k), dt).unwrap();
            let (back, _) = step_back_sample(&p, next, u, c.sample(k), dt).unwrap();
            ((back.tb - s.tb).abs(), (back.soc - s.soc).abs())
        };
        let (tb_full, soc_full) = miss(c.dt());
        let (tb_tenth, soc_tenth) = miss(c.dt() / 10.0);
        prop_assert!(tb_full < 0.05 && soc_full < 1e-4, "{} {}", tb_full, soc_full);
        // Second order in dt: a tenth of the step leaves well under a tenth of the miss.
        prop_assert!(tb_tenth <= 0.05 * tb_full + 1e-12, "{} {}", tb_tenth, tb_full);
        prop_assert!(soc_tenth <= 0.05 * soc_full + 1e-15, "{} {}", soc_tenth, soc_full);
    }

    #[test]
    fn random_schedules_balance(seed in 0u64..200, levels in prop::collection::vec(0.0f64..1.0, 120)) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let u: Vec<f64> = levels.iter().enumerate().map(|(k, f)| f * c.hvch_headroom(&p, k)).collect();
        let t = simulate(&p, &c, State::new(0.9, -7.0), &u, Origin::Forward).unwrap();
        let b = verify_balances(&t, &p, &c).unwrap();
        prop_assert!(b.closes(1e-9), "{:?}", b);
        let r = energy_report(&t, &p, &c).unwrap();
        prop_assert!(r.identity_residual().abs() <= 1e-6 * r.total_battery_wh.abs());
        prop_assert!(r.ed_heating_wh >= 0.0 && r.hvch_battery_heating_wh >= 0.0 && r.hvch_cabin_wh >= 0.0);
        if t.states.iter().all(|s| s.tb >= -7.0) {
            prop_assert!(r.ambient_leakage_wh <= 0.0);
        }
    }

    #[test]
    fn reports_add_over_splits(seed in 0u64..200, m in 1usize..119) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let t = simulate(&p, &c, State::new(0.9, -7.0), &bang_schedule(&p, &c, 60), Origin::Spliced).unwrap();
        let (a, b) = t.split_at(m).unwrap();
        let whole = energy_report(&t, &p, &c).unwrap();
        let sum = energy_report(&a, &p, &c).unwrap() + energy_report(&b, &p, &c).unwrap();
        for ((_, x), (_, y)) in sum.rows().iter().zip(whole.rows()) {
            prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn synthetic_cycles_hit_their_mean(seed in any::<u64>(), mean in 5.0f64..30.0) {
        let c = synth_cycle(&SynthSpec { seed, mean_prop_kw: mean, ..SynthSpec::default() }).unwrap();
        let n = c.steps();
        let avg = c.samples()[..n].iter().map(|s| s.p_prop_w).sum::<f64>() / n as f64 / 1000.0;
        prop_assert!((avg - mean).abs() <= 0.02 * mean);
        prop_assert!(c.samples().iter().any(|s| s.p_prop_w < 0.0));
    }

    #[test]
    fn feasible_plans_land_in_the_terminal_band(seed in 0u64..500, tb_f in 10.0f64..30.0, tb0 in -15.0f64..0.0) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let plan = plan_preheat(&p, &c, State::new(0.9, tb0), Targets { soc: 0.6, tb: tb_f }).unwrap();
        prop_assert!(plan.splice_index <= c.steps());
        prop_assert_eq!(plan.switch_time_s, (c.steps() - plan.splice_index) as f64 * c.dt());
        if plan.feasible && plan.splice_index < c.steps() {
            let end = plan.trajectory.terminal().tb;
            prop_assert!(end >= tb_f - TERMINAL_TB_TOLERANCE_K && end <= tb_f + 1.5, "{}", end);
        }
        prop_assert_eq!(&plan.trajectory.controls, &bang_schedule(&p, &c, plan.splice_index));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn oracle_never_loses_by_more_than_half_a_percent(
        seed in 0u64..10_000,
        tb_f in 15.0f64..30.0,
        soc_f in 0.5f64..0.62,
        tb0 in -12.0f64..-2.0,
    ) {
        let p = defaults::vehicle_params();
        let c = cycle(seed);
        let start = State::new(0.9, tb0);
        let targets = Targets { soc: soc_f, tb: tb_f };
        let plan = plan_preheat(&p, &c, start, targets).unwrap();
        prop_assume!(plan.feasible && plan.diagnostics.soc_target_met);
        let dp = match solve_dp(&p, &c, start, targets, DpGrid::default()) {
            Err(Error::InfeasibleProblem(_)) => return Err(TestCaseError::reject("infeasible")),
            other => other.unwrap(),
        };
        let h = energy_report(&plan.trajectory, &p, &c).unwrap().total_battery_wh;
        prop_assert!(dp.cost_wh <= h + 0.005 * h, "dp {} heuristic {}", dp.cost_wh, h);
    }
}
