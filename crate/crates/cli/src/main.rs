use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use vortexlab::config::Config;
use vortexlab::dynamics::Dynamics;
use vortexlab::harness::{self, Experiment};
use vortexlab::io;
use vortexlab::kernels::{kernel_l1_diff, MollifiedKernel};
use vortexlab::metrics::w1_solve;
use vortexlab::noise::write_increments_csv;
use vortexlab::reference::ReferenceSolver;
use vortexlab::sampling::initial_ensemble;

#[derive(Parser)]
#[command(name = "vortexlab", version, about = "Point-vortex approximation of stochastic 2D Euler on the torus")]
struct Cli {
    /// TOML config; defaults apply to missing keys. VORTEXLAB_<SECTION>__<KEY> overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle system and write its trajectory.
    Simulate {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the reference solver and write vorticity snapshots.
    Reference {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// W1 distance between two measures given as CSV (x1, x2, weight).
    W1 {
        mu: PathBuf,
        nu: PathBuf,
        /// Write the optimal potential on the combined support here.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Print eps, l1_diff, dk_sup for a ladder of mollification scales.
    KernelCheck {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.25, 0.125, 0.0625])]
        eps: Vec<f64>,
        /// Also export the kernel table of kernel.eps as a binary grid file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Dump Brownian increments as CSV (step, mode_k1, mode_k2, dW).
    NoiseDump {
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence experiment; exits nonzero iff one of its checks fails.
    Converge {
        #[arg(value_parser = ["regularized", "mollification", "full"])]
        experiment: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> vortexlab::Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Config::from_env(),
    }
}

fn create(path: &Path) -> vortexlab::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(cfg: &Config, out: &Path) -> vortexlab::Result<()> {
    let eps = cfg.particle_eps();
    let kernel = MollifiedKernel::new(eps, cfg.kernel.kmax, cfg.kernel.table_n)?;
    let noise = cfg.noise.model()?;
    let path = cfg.noise.path(cfg.noise.seed, &noise)?;
    let init = cfg.init.initial()?;
    let start = initial_ensemble(
        &init,
        cfg.init.mode,
        cfg.particles.n,
        cfg.init.seed,
        eps,
        cfg.particles.tv_bound,
        cfg.init.density_n,
    )?;
    let sim = cfg.particles.simulation(cfg.particles.t_end, cfg.particles.save_every);
    let traj = Dynamics::new(&kernel, &noise, &path, sim)?.simulate(&start)?;
    io::write_particles_csv(create(&out.join("particles.csv"))?, &traj.snapshots)?;
    io::write_snapshot(create(&out.join("final.bin"))?, traj.final_state())?;
    println!("noise_checksum,{}", traj.noise_checksum);
    info!("wrote {} snapshots to {}", traj.snapshots.len(), out.display());
    Ok(())
}

fn reference(cfg: &Config, out: &Path) -> vortexlab::Result<()> {
    let noise = cfg.noise.model()?;
    let path = cfg.noise.path(cfg.noise.seed, &noise)?;
    let field = cfg.init.initial()?.to_field(cfg.reference.n)?;
    let solver_cfg = cfg.reference.solver(cfg.reference.t_end, cfg.reference.save_every);
    let run = ReferenceSolver::new(&noise, &path, solver_cfg)?.solve(&field)?;
    io::write_field_csv(create(&out.join("fields.csv"))?, &run.snapshots)?;
    io::write_field_binary(create(&out.join("final.bin"))?, run.final_field())?;
    println!("noise_checksum,{}", run.noise_checksum);
    info!("wrote {} fields to {}", run.snapshots.len(), out.display());
    Ok(())
}

fn w1(cfg: &Config, mu: &Path, nu: &Path, potential: Option<&Path>) -> vortexlab::Result<()> {
    let mu = io::read_measure_csv(File::open(mu)?)?;
    let nu = io::read_measure_csv(File::open(nu)?)?;
    let sol = w1_solve(&mu, &nu, cfg.metric.mode)?;
    println!("w1,{}", sol.value);
    if let Some(p) = potential {
        io::write_potential_csv(create(p)?, &sol.points, &sol.potential)?;
    }
    Ok(())
}

fn kernel_check(cfg: &Config, eps: &[f64], table: Option<&Path>) -> vortexlab::Result<()> {
    let n = cfg.torus.quadrature_n;
    let mut w = std::io::stdout().lock();
    writeln!(w, "eps,l1_diff,dk_sup")?;
    for &e in eps {
        let k = MollifiedKernel::new(e, n / 2 - 1, None)?;
        writeln!(w, "{e},{},{}", kernel_l1_diff(&k, n)?, k.dk_sup())?;
    }
    if let Some(p) = table {
        let k = MollifiedKernel::new(cfg.kernel.eps, cfg.kernel.kmax, cfg.kernel.table_n)?;
        io::write_kernel_table(create(p)?, &k)?;
    }
    Ok(())
}

fn noise_dump(cfg: &Config, dt: f64, steps: u64, out: Option<&Path>) -> vortexlab::Result<()> {
    let noise = cfg.noise.model()?;
    let path = cfg.noise.path(cfg.noise.seed, &noise)?;
    match out {
        Some(p) => write_increments_csv(&noise, &path, dt, steps, create(p)?),
        None => write_increments_csv(&noise, &path, dt, steps, std::io::stdout().lock()),
    }
}

fn converge(cfg: &Config, experiment: &str, out: &Path) -> vortexlab::Result<bool> {
    let experiment: Experiment = experiment.parse()?;
    let report = harness::run(cfg, experiment)?;
    let (csv, json) = report.emit(out)?;
    for line in report.verdict_lines() {
        println!("{line}");
    }
    info!("wrote {} and {}", csv.display(), json.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match &cli.command {
        Command::Simulate { out } => simulate(&cfg, out).map(|_| true),
        Command::Reference { out } => reference(&cfg, out).map(|_| true),
        Command::W1 { mu, nu, potential } => w1(&cfg, mu, nu, potential.as_deref()).map(|_| true),
        Command::KernelCheck { eps, table } => kernel_check(&cfg, eps, table.as_deref()).map(|_| true),
        Command::NoiseDump { dt, steps, out } => noise_dump(&cfg, *dt, *steps, out.as_deref()).map(|_| true),
        Command::Converge { experiment, out } => converge(&cfg, experiment, out),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
