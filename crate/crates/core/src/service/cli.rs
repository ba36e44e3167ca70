//! `crosswarn` command line.
//!
//! Exit codes: 0 success, 1 a deployment gate failed (`suite` only),
//! 2 usage error or unknown scenario, 3 unreadable or invalid config,
//! 4 any other runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::AppState;
use crate::calibration::{
    bundle_adjust_with, coarse_initialization, compare_models, synthesize_frames, write_trace_jsonl, BoardSpec,
    SolverOptions,
};
use crate::config::{bundled_config_path, CalibrationFile, LoadedConfig};
use crate::decision::{Rule, State};
use crate::eval::{
    ablation_loc_error, evaluate, gt_sensitivity_grid, latency_sweep, optimize_params, placement_grid,
    placement_heights, placement_pitches, prepare_suite, run_scenario, warning_budget, DeOptions, ParamBounds, Preset,
    RunConfig,
};
use crate::geometry::{GroundLut, Projection};
use crate::scenario::Suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATES_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "crosswarn", version, about = "Pedestrian-cyclist collision warning testbench")]
pub struct Cli {
    /// Deployment config (YAML). `CONFIG_SECTION__KEY=value` environment
    /// variables override individual keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Calibration JSON used for every camera instead of the configured ones.
    #[arg(long, global = true)]
    pub calibration: Option<PathBuf>,
    /// Scenario directory containing `manifest.json`.
    #[arg(long, global = true)]
    pub suite_dir: Option<PathBuf>,
    /// Overrides the sensing seed (and the optimizer and calibration seeds).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the Monte Carlo trial count.
    #[arg(long, global = true)]
    pub trials: Option<u32>,
    /// Where to write the machine-readable result.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate against synthetic checkerboard views of the configured camera.
    Calibrate(CalibrateArgs),
    /// Build the ground lookup table for the primary camera.
    Lut,
    /// Run one scenario and write its audit trail.
    Run {
        scenario: String,
        /// Stochastic trial to replay.
        #[arg(long, default_value_t = 0)]
        trial: u32,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate the whole suite and check the deployment gates.
    Suite {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Latency 0 to 15 frames against predictor orders.
    SweepLatency {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        orders: Vec<u8>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mount height and pitch grid of stochastic sensitivity.
    GridPlacement {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Differential-evolution search of the pipeline parameters.
    Optimize {
        #[arg(long, default_value_t = 32)]
        population: usize,
        #[arg(long, default_value_t = 150)]
        generations: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// The same run with and without localization error.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// One-at-a-time perturbation of the ground-truth thresholds.
    GtGrid {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Serve the JSON endpoint.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 42)]
    pub frames: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_px: f64,
    #[arg(long, default_value = "equidistant")]
    pub projection: Projection,
    /// Also fit every other lens model and report their RMS.
    #[arg(long)]
    pub compare: bool,
}

/// Run settings shared by the evaluation verbs; unset flags keep the config.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Named parameter set replacing the configured pipeline parameters.
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long)]
    pub latency: Option<usize>,
    #[arg(long)]
    pub stochastic: bool,
    #[arg(long)]
    pub no_loc_error: bool,
    #[arg(long)]
    pub dropout_scale: Option<f64>,
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(r) = self.rule {
            cfg.rule = r;
        }
        if let Some(p) = self.preset {
            cfg.params = p.params();
        }
        if let Some(o) = self.order {
            cfg.predictor_order = o;
        }
        if let Some(l) = self.latency {
            cfg.sensor.latency_frames = l;
        }
        if self.stochastic {
            cfg.sensor.stochastic = true;
        }
        if self.no_loc_error {
            cfg.sensor.apply_loc_error = false;
        }
        if let Some(d) = self.dropout_scale {
            cfg.sensor.dropout_scale = d;
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

struct Context {
    loaded: LoadedConfig,
    suite_dir: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<u32>,
    out: Option<PathBuf>,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let path = cli.config.clone().unwrap_or_else(bundled_config_path);
        let loaded = LoadedConfig::load_with(&path, std::env::vars(), cli.calibration.as_deref())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Context { loaded, suite_dir: cli.suite_dir.clone(), seed: cli.seed, trials: cli.trials, out: cli.out.clone() })
    }

    fn suite(&self) -> Result<Suite, CliError> {
        let s = match &self.suite_dir {
            Some(dir) => Suite::load(dir),
            None => Suite::bundled(),
        };
        s.map_err(|e| CliError::Config(e.to_string()))
    }

    fn run_config(&self, args: &RunArgs) -> Result<RunConfig, CliError> {
        let mut cfg = self.loaded.run_config().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = self.seed {
            cfg.sensor.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        args.apply(&mut cfg);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn write_json(&self, value: &impl Serialize) -> Result<(), CliError> {
        let Some(path) = &self.out else { return Ok(()) };
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(runtime)?;
        writeln!(w).and_then(|_| w.flush()).map_err(runtime)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{:.1}%", 100.0 * v))
}

/// Parses `args` (program name first), runs the verb and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let ctx = Context::load(cli)?;
    match &cli.command {
        Command::Calibrate(a) => calibrate(&ctx, a),
        Command::Lut => lut(&ctx),
        Command::Run { scenario, trial, run } => run_one(&ctx, scenario, *trial, run),
        Command::Suite { run } => suite(&ctx, run),
        Command::SweepLatency { orders, run } => sweep_latency(&ctx, orders, run),
        Command::GridPlacement { run } => grid_placement(&ctx, run),
        Command::Optimize { population, generations, run } => optimize(&ctx, *population, *generations, run),
        Command::Ablate { run } => ablate(&ctx, run),
        Command::GtGrid { run } => gt_grid(&ctx, run),
        Command::Serve { host, port } => serve(&ctx, host.clone(), *port),
    }
}

fn calibrate(ctx: &Context, a: &CalibrateArgs) -> Result<i32, CliError> {
    let cfg = ctx.run_config(&RunArgs::default())?;
    let truth = cfg.sensor.primary().model.clone();
    let seed = ctx.seed.unwrap_or(0);
    let frames = synthesize_frames(&truth, a.frames, &BoardSpec::default(), a.noise_px, seed).map_err(runtime)?;
    let init = coarse_initialization(truth.crop_size, 200.0);
    let opts = SolverOptions::default();
    let res = bundle_adjust_with(&frames, a.projection, init, &opts).map_err(runtime)?;
    let k = res.intrinsics;
    println!("{} frames, {} px noise, seed {seed}", frames.len(), a.noise_px);
    println!("projection {}  rms {:.3} px (initial {:.1} px)", res.projection, res.rms_reprojection_px, res.initial_rms_px);
    println!("focal {:.2} px (truth {:.2})  centre ({:.2}, {:.2}) (truth ({:.2}, {:.2}))",
        k.focal_px, truth.focal_px, k.cx, k.cy, truth.optical_center[0], truth.optical_center[1]);
    if a.compare {
        for (p, rms) in compare_models(&frames, init, &opts) {
            println!("  {p:<14} rms {rms:.3} px");
        }
    }
    if let Some(dir) = &ctx.out {
        std::fs::create_dir_all(dir).map_err(runtime)?;
        let file = CalibrationFile {
            version: format!("{}-synthetic-{}f-seed{seed}", res.projection, frames.len()),
            projection: res.projection,
            focal_px: k.focal_px,
            optical_center: [k.cx, k.cy],
            crop_size: truth.crop_size,
            fov_deg: truth.fov_deg,
            rms_reprojection_px: Some(res.rms_reprojection_px),
        };
        let mut w = create(&dir.join("calibration.json"))?;
        serde_json::to_writer_pretty(&mut w, &file).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        write_trace_jsonl(&res.trace, create(&dir.join("trace.jsonl"))?).map_err(runtime)?;
        println!("wrote {}", dir.display());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LutStats {
    width: usize,
    height: usize,
    valid_pixels: usize,
    max_range_m: f64,
    build_seconds: f64,
}

fn lut(ctx: &Context) -> Result<i32, CliError> {
    let cfg = ctx.run_config(&RunArgs::default())?;
    let start = Instant::now();
    let lut = GroundLut::build(&cfg.sensor.primary().model);
    let stats = LutStats {
        width: lut.width(),
        height: lut.height(),
        valid_pixels: lut.valid_count(),
        max_range_m: lut.max_range(),
        build_seconds: start.elapsed().as_secs_f64(),
    };
    println!(
        "{}x{} LUT, {} valid pixels ({:.1}%), max range {:.1} m, built in {:.2} s",
        stats.width,
        stats.height,
        stats.valid_pixels,
        100.0 * stats.valid_pixels as f64 / (stats.width * stats.height) as f64,
        stats.max_range_m,
        stats.build_seconds
    );
    ctx.write_json(&stats)?;
    Ok(EXIT_OK)
}

fn run_one(ctx: &Context, id: &str, trial: u32, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let s = suite.get(id).map_err(|_| CliError::Usage(format!("unknown scenario {id}")))?;
    let cfg = ctx.run_config(args)?;
    let run = run_scenario(s, &cfg, trial).map_err(runtime)?;
    let states = run.states();
    let count = |st: State| states.iter().filter(|&&x| x == st).count();
    println!("{} ({}), {} frames, trial {trial}", s.id, s.name, states.len());
    println!(
        "IDLE {}  SAFE {}  WARNING {}  ALERT {}",
        count(State::Idle),
        count(State::Safe),
        count(State::Warning),
        count(State::Alert)
    );
    match states.iter().position(|&x| x == State::Alert) {
        Some(f) => println!("first ALERT at frame {f} ({:.2} s)", s.time_of(f)),
        None => println!("no ALERT"),
    }
    if let Some(b) = warning_budget(&states, &run.labels(), s.fps) {
        println!("warning budget {b:.2} s");
    }
    if let Some(path) = &ctx.out {
        let mut w = create(path)?;
        run.write_audit(&mut w, &ctx.loaded.provenance(), cfg.sensor.seed).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }
    Ok(EXIT_OK)
}

fn suite(ctx: &Context, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    let report = evaluate(&suite, &cfg, &ctx.loaded.provenance()).map_err(runtime)?;
    print!("{}", report.summary());
    ctx.write_json(&report)?;
    Ok(if report.gate_pass { EXIT_OK } else { EXIT_GATES_FAILED })
}

fn sweep_latency(ctx: &Context, orders: &[u8], args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    if let Some(o) = orders.iter().find(|&&o| o > 2) {
        return Err(CliError::Usage(format!("predictor order {o} not in 0..=2")));
    }
    let cells = latency_sweep(&suite, &cfg, orders).map_err(runtime)?;
    println!("{:>7} {:>5} {:>8} {:>8} {:>8} {:>9} {:>6}", "ms", "order", "sens", "spec", "sev_fn", "budget", "gates");
    for c in &cells {
        println!(
            "{:>7.0} {:>5} {:>8} {:>8} {:>8} {:>9} {:>6}",
            c.latency_ms,
            c.predictor_order,
            pct(c.metrics.sensitivity),
            pct(c.metrics.specificity),
            pct(c.metrics.sev_fn),
            c.mean_warning_budget_s.map_or("-".into(), |b| format!("{b:.2} s")),
            if c.gate_pass { "pass" } else { "fail" }
        );
    }
    ctx.write_json(&cells)?;
    Ok(EXIT_OK)
}

fn grid_placement(ctx: &Context, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    let trials = ctx.trials.unwrap_or(20);
    let pitches = placement_pitches();
    let cells = placement_grid(&suite, &cfg, &placement_heights(), &pitches, trials).map_err(runtime)?;
    print!("{:>6}", "h \\ p");
    for p in &pitches {
        print!(" {p:>6.0}");
    }
    println!();
    for row in cells.chunks(pitches.len()) {
        print!("{:>6.1}", row[0].height_m);
        for c in row {
            let v = if c.blind { "blind".into() } else { c.sensitivity.map_or("-".into(), |s| format!("{:.1}", 100.0 * s)) };
            print!(" {v:>6}");
        }
        println!();
    }
    if let Some(best) = cells.iter().filter(|c| !c.blind).max_by(|a, b| a.sensitivity.partial_cmp(&b.sensitivity).unwrap()) {
        println!("best: {:.1} m, {:.0} deg, sensitivity {}", best.height_m, best.pitch_deg, pct(best.sensitivity));
    }
    ctx.write_json(&cells)?;
    Ok(EXIT_OK)
}

fn optimize(ctx: &Context, population: usize, generations: usize, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    let prepared = prepare_suite(&suite, &cfg).map_err(runtime)?;
    let opts = DeOptions { population, generations, seed: ctx.seed.unwrap_or(0), ..DeOptions::default() };
    let res = optimize_params(&prepared, &cfg.decision(), &ParamBounds::default(), &opts).map_err(CliError::Usage)?;
    let p = res.params;
    println!(
        "N {}  d [{:.2}, {:.2}]  delta {:.3}  k {}",
        p.n_memory, p.d_min, p.d_max, p.delta_min, p.k_lookback
    );
    println!(
        "objective {:.4}  sensitivity {}  specificity {}  sev_fn {}  fatigue {}  budget {}  gates {}",
        res.objective,
        pct(res.metrics.sensitivity),
        pct(res.metrics.specificity),
        pct(res.metrics.sev_fn),
        pct(res.metrics.fatigue),
        res.mean_warning_budget_s.map_or("-".into(), |b| format!("{b:.2} s")),
        if res.gate_pass { "pass" } else { "fail" }
    );
    ctx.write_json(&res)?;
    Ok(EXIT_OK)
}

fn ablate(ctx: &Context, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    let ab = ablation_loc_error(&suite, &cfg, &ctx.loaded.provenance()).map_err(runtime)?;
    for (name, r) in [("without loc error", &ab.without_loc_error), ("with loc error", &ab.with_loc_error)] {
        println!(
            "{name:<18} sensitivity {}  specificity {}  sev_fn {}  fatigue {}",
            pct(r.metrics.sensitivity),
            pct(r.metrics.specificity),
            pct(r.metrics.sev_fn),
            pct(r.metrics.fatigue)
        );
    }
    ctx.write_json(&ab)?;
    Ok(EXIT_OK)
}

fn gt_grid(ctx: &Context, args: &RunArgs) -> Result<i32, CliError> {
    let suite = ctx.suite()?;
    let cfg = ctx.run_config(args)?;
    let grid = gt_sensitivity_grid(&suite, &cfg).map_err(runtime)?;
    println!("headline sensitivity {}  sev_fn {}", pct(grid.headline.sensitivity), pct(grid.headline.sev_fn));
    for c in &grid.cells {
        println!(
            "{:<16} {:>4}{} sensitivity {:>7}  sev_fn {:>7}  change {}",
            c.parameter,
            c.value,
            if c.is_default { "*" } else { " " },
            pct(c.sensitivity),
            pct(c.sev_fn),
            c.delta_sensitivity_pp.map_or("-".into(), |d| format!("{d:+.2} pp"))
        );
    }
    ctx.write_json(&grid)?;
    Ok(EXIT_OK)
}

fn serve(ctx: &Context, host: Option<String>, port: Option<u16>) -> Result<i32, CliError> {
    let state = AppState::new(ctx.loaded.clone(), ctx.suite()?).map_err(|e| CliError::Config(e.to_string()))?;
    let host = host.unwrap_or_else(|| ctx.loaded.config.server.host.clone());
    let port = port.unwrap_or(ctx.loaded.config.server.port);
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(super::http::serve(state, &host, port)).map_err(runtime)?;
    Ok(EXIT_OK)
}
