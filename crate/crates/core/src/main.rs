use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use preheat::config::{load_config, Config};
use preheat::cycle_io::{load_cycle, save_cycle, synth_cycle, SynthSpec};
use preheat::heuristic::{bang_schedule, forward_rollout, plan_preheat};
use preheat::oracle::{compare, solve_dp, GapReport};
use preheat::report::{
    save_comparison_csv, save_trajectory_csv, write_json, CycleSource, DpSummary, EnergySummary,
    PlanSummary, RunManifest, MANIFEST_FILE,
};
use preheat::{simulate, DriveCycle, Error, Origin, Result};

const LOG_ENV: &str = "PREHEAT_LOG";

/// Battery preheat planning for a cold drive to a fast charger.
#[derive(Parser, Debug)]
#[command(name = "preheat", version)]
struct Cli {
    /// TOML configuration file; shipped defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll a cycle forward under a fixed heater schedule (off by default).
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// CSV with a `p_hvch_batt_w` column, one row per step.
        #[arg(long, conflicts_with = "switch_step")]
        schedule: Option<PathBuf>,
        /// Heat at full headroom from this step on.
        #[arg(long)]
        switch_step: Option<usize>,
    },
    /// Plan the heater switch-on time with the sweep planner.
    Plan {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        targets: TargetArgs,
    },
    /// Solve the preheat problem by dynamic programming.
    Dp {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        targets: TargetArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run both planners and report the gap.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        targets: TargetArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Write a synthetic drive cycle.
    SynthCycle {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3600.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 30.0)]
        dt_s: f64,
        #[arg(long, default_value_t = 17.5)]
        mean_prop_kw: f64,
        #[arg(long, default_value_t = 0.5)]
        variability: f64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Drive cycle CSV; a synthetic cycle is used when omitted.
    #[arg(long)]
    cycle: Option<PathBuf>,
    /// Seed of the synthetic cycle.
    #[arg(long, conflicts_with = "cycle")]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TargetArgs {
    /// Arrival battery temperature, celsius.
    #[arg(long)]
    target_temp: Option<f64>,
    /// Arrival state of charge.
    #[arg(long)]
    target_soc: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid size as `n_soc,n_tb,n_u`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize, usize)>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected n_soc,n_tb,n_u, got '{s}'"));
    };
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}"));
    Ok((n(a)?, n(b)?, n(c)?))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleProblem(_) => 3,
        Error::GridTooCoarse(_)
        | Error::PowerInfeasible { .. }
        | Error::Integrity(_)
        | Error::NoCrossing { .. } => 4,
        Error::Domain(_)
        | Error::Invalid(_)
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::Io { .. } => 2,
    }
}

/// Loaded inputs shared by the run commands.
struct Run {
    config: Config,
    cycle: DriveCycle,
    source: CycleSource,
    seed: Option<u64>,
    out: PathBuf,
}

impl Run {
    fn open(
        config_path: Option<&Path>,
        args: &RunArgs,
        targets: Option<&TargetArgs>,
    ) -> Result<Run> {
        let mut config = match config_path {
            Some(p) => load_config(p)?,
            None => Config::default(),
        };
        if let Some(t) = targets {
            if let Some(tb) = t.target_temp {
                config.scenario.tb_target_c = tb;
            }
            if let Some(soc) = t.target_soc {
                config.scenario.soc_target = soc;
            }
        }
        let (cycle, source, seed) = match &args.cycle {
            Some(p) => (
                load_cycle(p, &config.cycle_defaults)?,
                CycleSource::File(p.clone()),
                None,
            ),
            None => {
                let spec = SynthSpec {
                    seed: args.seed.unwrap_or(SynthSpec::default().seed),
                    defaults: config.cycle_defaults,
                    ..SynthSpec::default()
                };
                (
                    synth_cycle(&spec)?,
                    CycleSource::Synth(spec),
                    Some(spec.seed),
                )
            }
        };
        cycle.check_against(&config.vehicle)?;
        fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        info!("cycle with {} steps of {} s", cycle.steps(), cycle.dt());
        Ok(Run {
            config,
            cycle,
            source,
            seed,
            out: args.out.clone(),
        })
    }

    fn manifest(&self, command: &str, config_path: Option<&Path>) -> Result<()> {
        let m = RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config_path: config_path.map(Path::to_path_buf),
            config: self.config.clone(),
            cycle: self.source.clone(),
            output_dir: self.out.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
        };
        write_json(&self.out.join(MANIFEST_FILE), &m)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Deserialize)]
struct ScheduleRow {
    p_hvch_batt_w: f64,
}

fn read_schedule(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    rdr.deserialize::<ScheduleRow>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|r| r.p_hvch_batt_w).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn set_grid(config: &mut Config, grid: &GridArgs) {
    if let Some((s, t, u)) = grid.grid {
        config.dp.n_soc = s;
        config.dp.n_tb = t;
        config.dp.n_u = u;
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Simulate {
            run,
            schedule,
            switch_step,
        } => {
            let r = Run::open(cfg, run, None)?;
            r.manifest("simulate", cfg)?;
            let (p, c, s) = (&r.config.vehicle, &r.cycle, &r.config.scenario);
            let traj = match (schedule, switch_step) {
                (Some(path), _) => {
                    simulate(p, c, s.initial(), &read_schedule(path)?, Origin::Forward)?
                }
                (None, Some(k)) => {
                    simulate(p, c, s.initial(), &bang_schedule(p, c, *k), Origin::Forward)?
                }
                (None, None) => forward_rollout(p, c, s.initial())?,
            };
            save_trajectory_csv(&traj, &r.path("trajectory.csv"))?;
            write_json(&r.path("energy.json"), &EnergySummary::of(&traj, p, c)?)?;
        }
        Command::Plan { run, targets } => {
            let r = Run::open(cfg, run, Some(targets))?;
            r.manifest("plan", cfg)?;
            let (p, c, s) = (&r.config.vehicle, &r.cycle, &r.config.scenario);
            let plan = plan_preheat(p, c, s.initial(), s.targets())?;
            info!(
                "switch at step {} ({} s of heating), feasible={}",
                plan.splice_index, plan.switch_time_s, plan.feasible
            );
            save_trajectory_csv(&plan.trajectory, &r.path("trajectory.csv"))?;
            write_json(&r.path("plan.json"), &PlanSummary::of(&plan, p, c)?)?;
        }
        Command::Dp { run, targets, grid } => {
            let mut r = Run::open(cfg, run, Some(targets))?;
            set_grid(&mut r.config, grid);
            r.manifest("dp", cfg)?;
            let (p, c, s) = (&r.config.vehicle, &r.cycle, &r.config.scenario);
            let dp = solve_dp(p, c, s.initial(), s.targets(), r.config.dp)?;
            info!("dp cost {:.1} Wh", dp.cost_wh);
            save_trajectory_csv(&dp.trajectory, &r.path("trajectory.csv"))?;
            write_json(&r.path("dp.json"), &DpSummary::of(&dp, p, c)?)?;
        }
        Command::Compare { run, targets, grid } => {
            let mut r = Run::open(cfg, run, Some(targets))?;
            set_grid(&mut r.config, grid);
            r.manifest("compare", cfg)?;
            let (p, c, s) = (&r.config.vehicle, &r.cycle, &r.config.scenario);
            let cmp = compare(p, c, s.initial(), s.targets(), r.config.dp)?;
            let gap: &GapReport = &cmp.gap;
            info!(
                "heuristic {:.1} Wh, dp {:.1} Wh, delta {:.3}%",
                gap.heuristic.total_battery_wh,
                gap.oracle.total_battery_wh,
                100.0 * gap.total_delta_rel
            );
            write_json(&r.path("plan.json"), &PlanSummary::of(&cmp.plan, p, c)?)?;
            write_json(&r.path("dp.json"), &DpSummary::of(&cmp.dp, p, c)?)?;
            write_json(&r.path("gap.json"), gap)?;
            save_comparison_csv(
                ("heuristic", &cmp.plan.trajectory),
                ("dp", &cmp.dp.trajectory),
                &r.path("comparison.csv"),
            )?;
            print!("{gap}");
        }
        Command::SynthCycle {
            out,
            seed,
            duration_s,
            dt_s,
            mean_prop_kw,
            variability,
        } => {
            let config = match cfg {
                Some(p) => load_config(p)?,
                None => Config::default(),
            };
            let spec = SynthSpec {
                duration_s: *duration_s,
                dt_s: *dt_s,
                mean_prop_kw: *mean_prop_kw,
                variability: *variability,
                seed: *seed,
                defaults: config.cycle_defaults,
            };
            let cycle = synth_cycle(&spec)?;
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let m = RunManifest {
                command: "synth-cycle".into(),
                argv: std::env::args().collect(),
                config_path: cfg.map(Path::to_path_buf),
                config,
                cycle: CycleSource::Synth(spec),
                output_dir: out.clone(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed: Some(*seed),
            };
            write_json(&out.join(MANIFEST_FILE), &m)?;
            save_cycle(&cycle, out.join("cycle.csv"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let body = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
