use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use usf_core::bench::{self, ClippingConfig, CurveConfig, RunInfo, SeparationConfig};
use usf_core::forward::{make_tof_scene, SceneSpec};
use usf_core::front_end::modular_decompose;
use usf_core::kernels::{approximation_error_bound, derivative_sup_bound, favard_constant, kernel_sup};
use usf_core::spectral::finite_difference;
use usf_core::{
    acquire, io, itersis_recover, recover_exact, synthesize, AcquisitionConfig, ItersisConfig, KernelModel,
    ResidueModel, SpikeTrain, Theorem1Params, UsfError,
};

#[derive(Parser)]
#[command(name = "usf", version, about = "Spike recovery from modulo-folded samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Theorem1,
    Itersis,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene through a kernel and acquire it; writes g.csv, y.csv (+ y.json) and truth.json.
    Simulate(Common),
    /// Recover spikes from a folded-signal CSV.
    Recover {
        #[arg(long, value_enum)]
        method: Method,
        /// Folded samples `n,y` with a JSON sidecar next to it.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        /// Theorem1Params or ItersisConfig JSON, depending on the method.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the initialization seed (itersis only).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Bits x dynamic-range Monte Carlo curve.
    BenchCurve(BenchArgs),
    /// Delay-gap error versus object separation.
    BenchSeparation(BenchArgs),
    /// Single clipped-versus-folded comparison.
    BenchClipping(Common),
    /// Favard constant, truncation bound and derivative bounds of a kernel.
    KernelInfo {
        #[arg(long)]
        kernel: PathBuf,
        /// Observation window; defaults to twice the kernel support.
        #[arg(long)]
        window: Option<f64>,
        /// Number of retained Fourier coefficients.
        #[arg(long, default_value_t = 8)]
        bins: usize,
    },
}

#[derive(Deserialize, Serialize)]
struct SimulateConfig {
    kernel: KernelModel,
    #[serde(default)]
    spikes: Option<SpikeTrain>,
    #[serde(default)]
    scene: Option<SceneSpec>,
    step_s: f64,
    samples: usize,
    acquisition: AcquisitionConfig,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn simulate(args: &Common) -> usf_core::Result<()> {
    let mut cfg: SimulateConfig = io::read_json(&args.config)?;
    if let Some(s) = args.seed {
        cfg.acquisition.seed = s;
    }
    let truth = match (&cfg.spikes, &cfg.scene) {
        (Some(s), None) => s.clone(),
        (None, Some(scene)) => make_tof_scene(scene)?,
        _ => return Err(UsfError::InvalidInput("give exactly one of `spikes` or `scene`".into())),
    };
    let g = synthesize(&truth, &cfg.kernel, cfg.step_s, cfg.samples)?;
    let y = acquire(&g.values, cfg.step_s, &cfg.acquisition)?;
    let (_, residue) = modular_decompose(&g.values, cfg.acquisition.lambda);
    std::fs::create_dir_all(&args.out)?;
    io::write_sampled(&args.out.join("g.csv"), &g)?;
    io::write_folded(&args.out.join("y.csv"), &y)?;
    io::write_json(&args.out.join("truth.json"), &truth)?;
    io::write_json(&args.out.join("residue.json"), &ResidueModel::from_sequence(&finite_difference(&residue, 1)?))?;
    io::write_json(&args.out.join("kernel.json"), &cfg.kernel)?;
    println!("wrote {} samples to {}", cfg.samples, args.out.display());
    Ok(())
}

fn recover(
    method: Method,
    input: &Path,
    kernel: &Path,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> usf_core::Result<()> {
    let y = io::read_folded(input)?;
    let kernel: KernelModel = io::read_json(kernel)?;
    std::fs::create_dir_all(out)?;
    match method {
        Method::Theorem1 => {
            let p: Theorem1Params = io::read_json(config)?;
            let spikes = recover_exact(&y, &kernel, &p)?;
            io::write_json(&out.join("spikes.json"), &spikes)?;
        }
        Method::Itersis => {
            let mut cfg: ItersisConfig = io::read_json(config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = bench::with_pool(threads, || itersis_recover(&y, &kernel, &cfg))??;
            io::write_json(&out.join("spikes.json"), &res.spikes)?;
            io::write_json(&out.join("residue.json"), &res.residue)?;
            io::write_diagnostics(&out.join("diagnostics.csv"), &res.trace)?;
            println!(
                "{} iterations, converged: {}, best iteration {}",
                res.trace.len(),
                res.converged,
                res.best_iteration
            );
        }
    }
    println!("wrote results to {}", out.display());
    Ok(())
}

fn finish(out: &Path, stem: &str, report: &bench::ExperimentReport, started: f64, threads: Option<usize>) -> usf_core::Result<()> {
    bench::write_report(out, stem, report)?;
    let info = RunInfo {
        started_unix_s: started,
        finished_unix_s: now(),
        threads: threads.unwrap_or_else(rayon::current_num_threads),
        config_digest: report.meta.config_digest.clone(),
    };
    io::write_json(&out.join(format!("{stem}_run_info.json")), &info)?;
    println!("wrote {0}.json and {0}.csv to {1}", stem, out.display());
    Ok(())
}

fn kernel_info(path: &Path, window: Option<f64>, bins: usize) -> usf_core::Result<()> {
    let kernel: KernelModel = io::read_json(path)?;
    let window = window.unwrap_or(2.0 * kernel.support_width());
    let l = kernel.order();
    let derivative_bounds: Vec<(usize, f64)> =
        (1..=l).map(|h| derivative_sup_bound(&kernel, h).map(|b| (h, b))).collect::<Result<_, _>>()?;
    let info = serde_json::json!({
        "order": l,
        "gamma": kernel.gamma(),
        "support": kernel.support(),
        "favard_constant": favard_constant(l),
        "sup_norm": kernel_sup(&kernel),
        "window": window,
        "bins": bins,
        "truncation_mse_bound": if l > 0 { Some(approximation_error_bound(&kernel, window, bins)?) } else { None },
        "derivative_sup_bounds": derivative_bounds.iter().map(|(h, b)| serde_json::json!({"h": h, "bound": b})).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(())
}

fn run(cli: Cli) -> usf_core::Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Recover { method, input, kernel, config, out, seed, threads } => {
            recover(method, &input, &kernel, &config, &out, seed, threads)
        }
        Command::BenchCurve(a) => {
            let started = now();
            let mut cfg: CurveConfig = io::read_json(&a.common.config)?;
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.trials = a.trials.unwrap_or(cfg.trials);
            let report = bench::run_curve(&cfg, a.threads)?;
            finish(&a.common.out, "curve", &report, started, a.threads)
        }
        Command::BenchSeparation(a) => {
            let started = now();
            let mut cfg: SeparationConfig = io::read_json(&a.common.config)?;
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.trials = a.trials.unwrap_or(cfg.trials);
            let report = bench::run_separation_sweep(&cfg, a.threads)?;
            finish(&a.common.out, "separation", &report, started, a.threads)
        }
        Command::BenchClipping(a) => {
            let started = now();
            let mut cfg: ClippingConfig = io::read_json(&a.config)?;
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let report = bench::run_clipping_demo(&cfg)?;
            finish(&a.out, "clipping", &report, started, Some(1))
        }
        Command::KernelInfo { kernel, window, bins } => kernel_info(&kernel, window, bins),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
