use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use rb4dvar_core::experiments::io::{fmt_f64, write_csv, write_json};
use rb4dvar_core::experiments::{
    read_sweep_csv, summarize, Experiment, ExperimentConfig, OuterErrorTable, RomFile, RunMeta, SweepRow,
    SCHEMA_VERSION, SWEEP_HEADER,
};
use rb4dvar_core::{Error, Result, Variant};

#[derive(Parser)]
#[command(name = "rb4dvar", version, about = "Certified reduced-basis 4D-Var on the Taylor-Green benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration. Defaults to the built-in desk config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the noise seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the built-in full-scale configuration (long running).
    #[arg(long, global = true, conflicts_with = "config")]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the finite element operators and write them with the constants.
    Assemble,
    /// Simulate the truth and write noisy observations.
    Synthesize,
    /// Run POD-Greedy for the strong-constraint variant.
    TrainStrong,
    /// Run POD-Greedy for the weak-constraint variant.
    TrainWeak,
    /// Run POD-Greedy for the combined variant.
    TrainCombined,
    /// Certified reduced solves against full solves over the test set.
    Sweep,
    /// Parameter estimation with the full and the reduced models.
    Estimate,
    /// Aggregate sweep.csv into per-(variant, N) statistics.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, c.full_scale) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        (None, true) => ExperimentConfig::full_scale(),
        (None, false) => ExperimentConfig::desk(),
    };
    if let Some(seed) = c.seed {
        cfg.truth.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = load_config(c)?;
    std::fs::create_dir_all(&c.out)?;
    write_json(&c.out.join("config.json"), &cfg)?;
    match cli.command {
        Command::Assemble => assemble(&cfg, &c.out),
        Command::Synthesize => synthesize(&cfg, &c.out),
        Command::TrainStrong => train(&cfg, &c.out, Variant::Strong),
        Command::TrainWeak => train(&cfg, &c.out, Variant::Weak),
        Command::TrainCombined => train(&cfg, &c.out, Variant::Combined),
        Command::Sweep => sweep(&cfg, &c.out),
        Command::Estimate => estimate(&cfg, &c.out),
        Command::Report => report(&c.out),
    }
}

#[derive(Serialize)]
struct ConstantsFile {
    gamma_b: f64,
    gamma_c: f64,
    mu_ref: f64,
    mu_domain: (f64, f64),
    num_nodes: usize,
    num_free: usize,
}

fn assemble(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ex = Experiment::new(cfg.clone())?;
    write_json(&out.join("operators.json"), &ex.bench.dump())?;
    write_json(
        &out.join("constants.json"),
        &ConstantsFile {
            gamma_b: ex.constants.gamma_b,
            gamma_c: ex.constants.gamma_c,
            mu_ref: ex.constants.mu_ref,
            mu_domain: ex.constants.mu_domain,
            num_nodes: ex.bench.mesh.num_nodes(),
            num_free: ex.bench.free.len(),
        },
    )?;
    info!("wrote operators.json and constants.json");
    Ok(())
}

fn synthesize(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ex = Experiment::new(cfg.clone())?;
    let t = &ex.truth;
    write_json(&out.join("truth.json"), t)?;
    let l = t.clean.first().map_or(0, |v| v.len());
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=l).map(|i| format!("clean_{i}")));
    header.extend((1..=l).map(|i| format!("z_{i}")));
    let rows: Vec<Vec<String>> = t
        .clean
        .iter()
        .zip(&t.z_d)
        .enumerate()
        .map(|(i, (clean, z))| {
            let k = i + 1;
            let mut r = vec![k.to_string(), fmt_f64(k as f64 * cfg.discretization.tau)];
            r.extend(clean.iter().map(|v| fmt_f64(*v)));
            r.extend(z.iter().map(|v| fmt_f64(*v)));
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("truth_outputs.csv"), &header, &rows)?;
    info!("wrote truth.json and truth_outputs.csv (seed {})", t.seed);
    Ok(())
}

fn write_trace(out: &Path, file: &RomFile) -> Result<()> {
    let header = [
        "N",
        "mu",
        "max_rel_bound",
        "next_mu",
        "dim_y",
        "dim_u0",
        "dim_u",
        "discarded_initial",
        "wall_time_ms",
    ];
    let rows: Vec<Vec<String>> = file
        .trace
        .iterations
        .iter()
        .map(|it| {
            vec![
                it.n.to_string(),
                fmt_f64(it.mu),
                fmt_f64(it.max_rel_bound),
                fmt_f64(it.next_mu),
                it.dims.state.to_string(),
                it.dims.initial.to_string(),
                it.dims.forcing.to_string(),
                it.discarded_initial.to_string(),
                fmt_f64(it.wall_time_ms),
            ]
        })
        .collect();
    write_csv(&out.join(format!("greedy_{}.csv", file.variant)), &header, &rows)
}

fn train_and_save(ex: &Experiment, out: &Path, variant: Variant) -> Result<(RomFile, String)> {
    let file = ex.train(variant)?;
    let hash = file.save(&out.join(RomFile::file_name(variant)))?;
    write_trace(out, &file)?;
    info!("{variant}: {} greedy iterations, rom hash {hash}", file.trace.iterations.len());
    Ok((file, hash))
}

fn train(cfg: &ExperimentConfig, out: &Path, variant: Variant) -> Result<()> {
    let ex = Experiment::new(cfg.clone())?;
    train_and_save(&ex, out, variant).map(|_| ())
}

/// Loads `rom_<variant>.json` when it was trained with the same
/// configuration, otherwise trains it.
fn load_or_train(ex: &Experiment, out: &Path, variant: Variant) -> Result<(RomFile, String)> {
    let path = out.join(RomFile::file_name(variant));
    if path.exists() {
        let (file, hash) = RomFile::load(&path)?;
        if file.config_hash == ex.config.hash() && file.variant == variant {
            info!("{variant}: using {}", path.display());
            return Ok((file, hash));
        }
        warn!("{} was trained with a different configuration, retraining", path.display());
    }
    train_and_save(ex, out, variant)
}

fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ex = Experiment::new(cfg.clone())?;
    let mut records = Vec::new();
    let mut certificates = Vec::new();
    for &variant in &cfg.sweep.variants {
        let (file, rom_hash) = load_or_train(&ex, out, variant)?;
        let meta = RunMeta {
            schema_version: SCHEMA_VERSION,
            config_hash: cfg.hash(),
            rom_hash,
            seed: cfg.truth.seed,
        };
        let result = ex.sweep(&file.rom)?;
        let failed = result.rows.iter().filter(|r| !r.is_ok()).count();
        if failed > 0 {
            warn!("{variant}: {failed} sweep rows failed");
        }
        records.extend(result.rows.iter().map(|r| r.record(&meta)));
        certificates.extend(result.certificates);
        write_csv(&out.join("sweep.csv"), &SWEEP_HEADER, &records)?;
        write_json(&out.join("certificates.json"), &certificates)?;
    }
    info!("wrote sweep.csv ({} rows) and certificates.json", records.len());
    Ok(())
}

fn estimate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ex = Experiment::new(cfg.clone())?;
    let mut tables: Vec<OuterErrorTable> = Vec::new();
    let mut rows = Vec::new();
    for &variant in &cfg.estimate.variants {
        let (file, _) = load_or_train(&ex, out, variant)?;
        let table = ex.estimate(&file.rom)?;
        for r in &table.rows {
            rows.push(vec![
                variant.to_string(),
                r.n.to_string(),
                fmt_f64(table.mu_star),
                fmt_f64(r.mu_star_n),
                fmt_f64(r.e_mu),
                fmt_f64(r.e_j_max),
            ]);
        }
        tables.push(table);
    }
    write_json(&out.join("estimate.json"), &tables)?;
    write_csv(
        &out.join("estimate.csv"),
        &["variant", "N", "mu_star", "mu_star_N", "e_mu", "e_J_max"],
        &rows,
    )?;
    info!("wrote estimate.json and estimate.csv");
    Ok(())
}

fn report(out: &Path) -> Result<()> {
    let path = out.join("sweep.csv");
    if !path.exists() {
        return Err(Error::Config(format!("{} not found, run `sweep` first", path.display())));
    }
    let rows: Vec<SweepRow> = read_sweep_csv(&path)?;
    let summary = summarize(&rows);
    write_json(&out.join("report.json"), &summary)?;
    let header = [
        "variant",
        "N",
        "count",
        "failed",
        "max_rel_error",
        "max_rel_bound",
        "mean_effectivity",
        "min_effectivity",
        "max_effectivity",
        "mean_cg_iters",
    ];
    let table: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.variant.to_string(),
                s.n.to_string(),
                s.count.to_string(),
                s.failed.to_string(),
                fmt_f64(s.max_rel_error),
                fmt_f64(s.max_rel_bound),
                fmt_f64(s.mean_effectivity),
                fmt_f64(s.min_effectivity),
                fmt_f64(s.max_effectivity),
                fmt_f64(s.mean_cg_iters),
            ]
        })
        .collect();
    write_csv(&out.join("report.csv"), &header, &table)?;
    println!(
        "{:<9} {:>4} {:>12} {:>12} {:>10} {:>8}",
        "variant", "N", "max rel err", "max rel Δ", "mean eff", "mean CG"
    );
    for s in &summary {
        println!(
            "{:<9} {:>4} {:>12.3e} {:>12.3e} {:>10.1} {:>8.1}",
            s.variant.to_string(),
            s.n,
            s.max_rel_error,
            s.max_rel_bound,
            s.mean_effectivity,
            s.mean_cg_iters
        );
    }
    Ok(())
}
