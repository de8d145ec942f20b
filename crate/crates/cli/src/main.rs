use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dfloc_core::energy::total_energy;
use dfloc_core::fingerprint::{load_fingerprint, save_fingerprint, CalibrationSession};
use dfloc_core::graphcut::{brute_force_map, build_cut_graph, min_cut};
use dfloc_core::harness::{
    calibrate, export_heatmap, load_estimates, load_maps, save_estimates, save_maps, track, EvalReport,
};
use dfloc_core::random::{random_instance, InstanceSpec};
use dfloc_core::simulator::{generate_calibration, generate_training_truth, walking_scenario, TestbedConfig};
use dfloc_core::trace::{load_ground_truth, load_trace, save_ground_truth, save_trace};
use dfloc_core::types::{Grid, ModelParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRID_FILE: &str = "grid.cfg";
const TRAINING_FILE: &str = "training_truth.txt";

#[derive(Parser)]
#[command(name = "dfloc", version, about = "Device-free multi-entity WLAN localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate calibration sessions, training truth and a test trace.
    Simulate {
        /// Testbed config (`key=value` lines); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// People walking in the test trace.
        #[arg(long, default_value_t = 1)]
        entities: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a fingerprint from a sessions directory written by `simulate`.
    Calibrate {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model parameter overrides, e.g. `--params beta=0.5 w=13`.
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
    },
    /// Run the online tracker over a raw trace.
    Track {
        #[arg(long)]
        fp: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-frame environment maps.
        #[arg(long)]
        maps: Option<PathBuf>,
        /// Overrides applied over the parameters stored in the fingerprint.
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
    },
    /// Score estimates against ground truth.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Grid file: `width`, `height`, `grid_nx`, `grid_ny` as `key=value` lines.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Locations)]
        mode: Mode,
        #[arg(long)]
        report: PathBuf,
    },
    /// Per-location activation counts over a window of maps, as CSV.
    Heatmap {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// First map of the window (0-based).
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// One past the last map of the window; end of file when omitted.
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check min-cut against brute force on random instances.
    Verify {
        #[arg(long, required = true)]
        oracle: bool,
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 12)]
        max_n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Zones,
    Locations,
}

fn session_path(dir: &Path, location: usize) -> PathBuf {
    dir.join(format!("loc_{location:04}.txt"))
}

fn grid_text(grid: &Grid) -> String {
    format!(
        "width={}\nheight={}\ngrid_nx={}\ngrid_ny={}\n",
        grid.width(),
        grid.height(),
        grid.nx(),
        grid.ny()
    )
}

fn load_grid(path: &Path) -> Result<Grid> {
    let cfg = TestbedConfig::load(path).with_context(|| format!("reading grid {}", path.display()))?;
    Ok(cfg.grid()?)
}

fn apply_overrides(params: &mut ModelParams, overrides: &[String]) -> Result<()> {
    for kv in overrides {
        params.apply_override(kv).with_context(|| format!("parameter {kv:?}"))?;
    }
    params.validate()?;
    Ok(())
}

fn simulate(config: Option<&Path>, out: &Path, entities: usize, seed: Option<u64>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => TestbedConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => TestbedConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let grid = cfg.grid()?;
    let sessions_dir = out.join("sessions");
    fs::create_dir_all(&sessions_dir).with_context(|| format!("creating {}", sessions_dir.display()))?;
    cfg.save(out.join("testbed.cfg"))?;
    fs::write(out.join(GRID_FILE), grid_text(&grid))?;
    fs::write(sessions_dir.join(GRID_FILE), grid_text(&grid))?;
    for s in generate_calibration(&cfg)? {
        save_trace(&s.frames, session_path(&sessions_dir, s.location))?;
    }
    save_ground_truth(&generate_training_truth(&cfg)?, sessions_dir.join(TRAINING_FILE))?;
    let (frames, truth) = walking_scenario(&cfg, entities)?;
    save_trace(&frames, out.join("test_trace.txt"))?;
    save_ground_truth(&truth, out.join("test_truth.txt"))?;
    println!(
        "wrote {} calibration sessions and a {}-frame trace with {entities} entities to {}",
        grid.len(),
        frames.len(),
        out.display()
    );
    Ok(())
}

fn calibrate_cmd(dir: &Path, out: &Path, overrides: &[String]) -> Result<()> {
    let grid = load_grid(&dir.join(GRID_FILE))?;
    let sessions = (0..grid.len())
        .map(|location| {
            let path = session_path(dir, location);
            let frames = load_trace(&path).with_context(|| format!("reading session {}", path.display()))?;
            Ok(CalibrationSession { location, frames })
        })
        .collect::<Result<Vec<_>>>()?;
    let training_path = dir.join(TRAINING_FILE);
    let training = if training_path.exists() {
        Some(load_ground_truth(&training_path).with_context(|| format!("reading {}", training_path.display()))?)
    } else {
        None
    };
    let mut params = ModelParams::default();
    apply_overrides(&mut params, overrides)?;
    let fp = calibrate(&sessions, &grid, training.as_deref(), &params)?;
    save_fingerprint(&fp, out)?;
    println!(
        "fingerprint: {} locations, {} streams, temporal prior {}",
        fp.len(),
        fp.streams().len(),
        if training.is_some() { "learned" } else { "uninformative" }
    );
    Ok(())
}

fn track_cmd(fp_path: &Path, trace: &Path, out: &Path, maps: Option<&Path>, overrides: &[String]) -> Result<()> {
    let fp = load_fingerprint(fp_path).with_context(|| format!("reading fingerprint {}", fp_path.display()))?;
    let frames = load_trace(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let mut params = fp.params().clone();
    apply_overrides(&mut params, overrides)?;
    let result = track(&fp, &frames, &params)?;
    save_estimates(&result.estimates, out)?;
    if let Some(m) = maps {
        save_maps(&result.maps, m)?;
    }
    let total: f64 = result.runtime_ms.iter().sum();
    println!("tracked {} frames in {total:.1} ms", frames.len());
    Ok(())
}

fn evaluate(est: &Path, truth: &Path, grid: &Path, mode: Mode, report: &Path) -> Result<()> {
    let estimates = load_estimates(est).with_context(|| format!("reading estimates {}", est.display()))?;
    let truths = load_ground_truth(truth).with_context(|| format!("reading truth {}", truth.display()))?;
    let grid = load_grid(grid)?;
    let r = EvalReport::build(&estimates, &truths, &grid, grid.center(), Vec::new())?;
    r.save(report)?;
    let summary = match mode {
        Mode::Zones => &r.zones,
        Mode::Locations => &r.locations,
    };
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "{} frames, median error {} m, mean error {} m, count within one {}",
        r.frames,
        fmt(summary.median),
        fmt(summary.mean),
        fmt(r.count_within_one)
    );
    Ok(())
}

fn heatmap(maps: &Path, grid: &Path, from: usize, to: Option<usize>, out: &Path) -> Result<()> {
    let maps = load_maps(maps).with_context(|| format!("reading maps {}", maps.display()))?;
    let grid = load_grid(grid)?;
    let to = to.unwrap_or(maps.len());
    if from > to || to > maps.len() {
        bail!("window {from}..{to} outside the {} maps", maps.len());
    }
    export_heatmap(&maps[from..to], &grid, out)?;
    Ok(())
}

fn verify(instances: usize, max_n: usize, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    for _ in 0..instances {
        let spec = InstanceSpec::random_shape(&mut rng, max_n);
        let inst = random_instance(&mut rng, &spec)?;
        let (fp, p) = (&inst.fingerprint, &inst.params);
        let g = build_cut_graph(&inst.evidence, &inst.prev, &inst.prev_prev, fp, p)?;
        let cut = total_energy(&min_cut(&g), &inst.evidence, &inst.prev, &inst.prev_prev, fp, p)?;
        let brute = brute_force_map(&inst.evidence, &inst.prev, &inst.prev_prev, fp, p)?;
        let best = total_energy(&brute, &inst.evidence, &inst.prev, &inst.prev_prev, fp, p)?;
        let gap = (cut - best).abs();
        worst = worst.max(gap);
        if gap > 1e-9 {
            mismatches += 1;
        }
    }
    println!("{instances} instances, {mismatches} mismatches, max energy gap {worst:.3e}");
    Ok(mismatches == 0)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            entities,
            seed,
        } => simulate(config.as_deref(), &out, entities, seed)?,
        Command::Calibrate { sessions, out, params } => calibrate_cmd(&sessions, &out, &params)?,
        Command::Track {
            fp,
            trace,
            out,
            maps,
            params,
        } => track_cmd(&fp, &trace, &out, maps.as_deref(), &params)?,
        Command::Evaluate {
            est,
            truth,
            grid,
            mode,
            report,
        } => evaluate(&est, &truth, &grid, mode, &report)?,
        Command::Heatmap {
            maps,
            grid,
            from,
            to,
            out,
        } => heatmap(&maps, &grid, from, to, &out)?,
        Command::Verify {
            oracle: _,
            instances,
            max_n,
            seed,
        } => return verify(instances, max_n, seed),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
