//! `emicut`: runs the convergence and robustness studies of the EMI CutFEM
//! solver and writes their tables, snapshots and configuration echo.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emi_cutfem_cli::config::RunConfig;
use emi_cutfem_cli::studies::{self, StudyOutput};

#[derive(Parser)]
#[command(name = "emicut", version, about = "Unfitted finite element studies of the EMI model")]
struct Cli {
    #[command(subcommand)]
    study: Study,
}

#[derive(Subcommand)]
enum Study {
    /// Spatial convergence of the multi-dimensional formulation.
    ConvMulti(Common),
    /// Condition numbers of the PDE matrix under sub-cell translations.
    SensPde(Common),
    /// Condition numbers of the surface mass matrix under sub-cell translations.
    SensOde(Common),
    /// Convergence of the unfitted ODE scheme.
    ConvOde(Common),
    /// Convergence of the coupled splitting scheme.
    ConvCoupled(Common),
    /// Hodgkin-Huxley action potential in a two-lobe cell.
    HhDemo(Common),
}

#[derive(Args)]
struct Common {
    /// Cells per axis (sensitivity studies).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated refinement levels (cells per axis, or time steps for conv-ode and conv-coupled).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Number of translation steps.
    #[arg(long)]
    mdelta: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// single, multi (conv-coupled also accepts both).
    #[arg(long)]
    formulation: Option<String>,
    /// Surface mass stabilization: none, s1 or s2.
    #[arg(long)]
    stab: Option<String>,
    /// Ghost-penalty coefficient.
    #[arg(long)]
    gamma: Option<f64>,
    /// Surface mass stabilization coefficient.
    #[arg(long)]
    gamma_b: Option<f64>,
    #[arg(long)]
    geometry: Option<String>,
    /// Comma-separated mesh sizes of the HH demo.
    #[arg(long, value_delimiter = ',')]
    mesh_sizes: Option<Vec<f64>>,
    /// Comma-separated VTK snapshot times of the HH demo.
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with status 2 if a threshold check fails.
    #[arg(long)]
    check: bool,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            n: self.n,
            levels: self.levels.clone(),
            mdelta: self.mdelta,
            dt: self.dt,
            t_end: self.t_end,
            formulation: self.formulation.clone(),
            stab: self.stab.clone(),
            gamma: self.gamma,
            gamma_b: self.gamma_b,
            threads: self.threads,
            geometry: self.geometry.clone(),
            mesh_sizes: self.mesh_sizes.clone(),
            snapshot_times: self.snapshot_times.clone(),
            ..Default::default()
        };
        Ok(file.merged(&flags))
    }
}

fn write_outputs(dir: &Path, study: &str, cfg: &RunConfig, output: &StudyOutput, seconds: f64) -> Result<()> {
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    for r in &output.reports {
        let mut r = r.clone();
        r.metadata.insert("study".into(), study.into());
        r.metadata.insert("config_hash".into(), cfg.hash_hex());
        r.metadata.insert("wall_time_s".into(), format!("{seconds:.3}"));
        let path = r.write_csv(dir)?;
        r.write_metadata(dir)?;
        println!("{}", r.to_table());
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (name, common) = match &cli.study {
        Study::ConvMulti(c) => ("conv-multi", c),
        Study::SensPde(c) => ("sens-pde", c),
        Study::SensOde(c) => ("sens-ode", c),
        Study::ConvOde(c) => ("conv-ode", c),
        Study::ConvCoupled(c) => ("conv-coupled", c),
        Study::HhDemo(c) => ("hh-demo", c),
    };
    let cfg = common.run_config()?;
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cfg.threads {
        pool = pool.num_threads(k);
    }
    let pool = pool.build()?;
    let start = Instant::now();
    let output = pool.install(|| match &cli.study {
        Study::ConvMulti(_) => studies::conv_multi::run(&cfg),
        Study::SensPde(_) => studies::sens_pde::run(&cfg),
        Study::SensOde(_) => studies::sens_ode::run(&cfg),
        Study::ConvOde(_) => studies::conv_ode::run(&cfg),
        Study::ConvCoupled(_) => studies::conv_coupled::run(&cfg),
        Study::HhDemo(_) => studies::hh_demo::run(&cfg, Some(&common.out)),
    })?;
    write_outputs(&common.out, name, &cfg, &output, start.elapsed().as_secs_f64())?;
    for c in &output.checks {
        println!("[{}] {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(!common.check || output.all_passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
