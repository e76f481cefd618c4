use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use particle_clusters::experiment::{
    parse_config_file, reproduce_table1, reproduce_table2, run_experiment, run_single, table2_base, table2_sets,
    ExperimentConfig, RunContext,
};
use particle_clusters::gmm::fit_increments;
use particle_clusters::io;
use particle_clusters::membership::radius_terms;
use particle_clusters::sim::simulate;
use particle_clusters::{Error, Result};

/// Particles among drifting clusters: simulation, mixture fitting, membership estimation.
#[derive(Parser)]
#[command(name = "particle-clusters", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (`key = value` lines, optional `[block]` overrides).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate run 0 and write particle.csv and clusters.csv.
    Simulate(Common),
    /// Fit the two-mode mixture to run 0, or to a saved particle.csv via --input.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory holding particle.csv and clusters.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run every experiment in the config and write the accuracy report.
    Membership(Common),
    /// Reproduce the EM recovery table.
    Table1(Common),
    /// Reproduce the membership accuracy grid.
    Table2(Common),
    /// Write trajectory plot data for run 0.
    Plotdata(Common),
}

fn load(common: &Common, defaults: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut experiments = match &common.config {
        Some(path) => parse_config_file(path, defaults)?.experiments(),
        None => vec![("base".to_string(), defaults.clone())],
    };
    for (_, cfg) in &mut experiments {
        if let Some(seed) = common.seed {
            cfg.master_seed = seed;
        }
        cfg.validate()?;
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
    }
    Ok(experiments)
}

fn single(common: &Common) -> Result<ExperimentConfig> {
    let mut all = load(common, &ExperimentConfig::default())?;
    if all.len() > 1 {
        eprintln!("note: using the first of {} blocks", all.len());
    }
    Ok(all.swap_remove(0).1)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = single(&c)?;
            let record = simulate(&cfg.sim_for_run(0))?;
            io::write_particle_csv(&record, create(&c.out, "particle.csv")?)?;
            io::write_clusters_csv(&record, create(&c.out, "clusters.csv")?)?;
            println!("wrote {} timepoints, {} clusters to {}", record.horizon(), record.n_clusters(), c.out.display());
        }
        Command::Fit { common: c, input } => {
            let cfg = single(&c)?;
            let record = match input {
                Some(dir) => io::read_record(File::open(dir.join("particle.csv"))?, File::open(dir.join("clusters.csv"))?, cfg.sim.dim)?,
                None => simulate(&cfg.sim_for_run(0))?,
            };
            let fit = fit_increments(&record.increments())?;
            io::write_gmm(&fit.params, create(&c.out, "gmm.txt")?)?;
            let p = &fit.params;
            println!(
                "alpha_in {:.3}  sigma_in {:.3}  sigma_out {:.3}  ({} iterations, converged: {})",
                p.alpha_in,
                p.sigma_in(),
                p.sigma_out(),
                fit.iterations,
                fit.converged
            );
        }
        Command::Membership(c) => {
            let experiments = load(&c, &ExperimentConfig::default())?;
            let mut report_csv = create(&c.out, "membership.csv")?;
            use std::io::Write;
            writeln!(report_csv, "cell_id,beta_r,beta_s,distance,variant,mean_accuracy,stddev")?;
            for (name, cfg) in &experiments {
                let report = run_experiment(cfg, c.jobs)?;
                writeln!(
                    report_csv,
                    "{name},{},{},{},{},{},{}",
                    cfg.beta_r,
                    cfg.beta_s,
                    cfg.distance,
                    cfg.variant,
                    io::fmt_f64(report.mean_accuracy()),
                    io::fmt_f64(report.stddev_accuracy())
                )?;
                let failed = report.runs.iter().filter(|r| r.is_err()).count();
                println!(
                    "{name:<16} accuracy {:.3} ± {:.3} over {} runs{}",
                    report.mean_accuracy(),
                    report.stddev_accuracy(),
                    report.runs.len() - failed,
                    if failed > 0 { format!(" ({failed} failed)") } else { String::new() }
                );
                for err in report.runs.iter().filter_map(|r| r.as_ref().err()) {
                    eprintln!("  run failed: {err}");
                }
                // Terms and estimate of the first run, for inspection.
                let dir = c.out.join(name);
                let (_, estimate) = run_single(cfg, 0)?;
                let ctx = RunContext::prepare(cfg, 0)?;
                let mut terms = radius_terms(&ctx.record, cfg.radius_bound)?;
                if cfg.beta_s > 0.0 {
                    terms.extend(ctx.similarity(cfg, cfg.variant, cfg.distance)?.1);
                }
                io::write_terms_csv(&terms, create(&dir, "terms.csv")?)?;
                io::write_estimate_csv(&estimate, &ctx.record.inside, create(&dir, "estimate.csv")?)?;
            }
        }
        Command::Table1(c) => {
            let seed = match &c.config {
                Some(_) => single(&c)?.master_seed,
                None => c.seed.unwrap_or(0),
            };
            let report = reproduce_table1(seed, c.jobs)?;
            print!("{}", report.to_text());
            report.write_csv(create(&c.out, "table1.csv")?)?;
        }
        Command::Table2(c) => {
            let mut all = load(&c, &table2_base())?;
            let base = all.swap_remove(0).1;
            let report = reproduce_table2(&base, &table2_sets(), c.jobs)?;
            print!("{}", report.to_text());
            report.write_csv(create(&c.out, "table2.csv")?)?;
        }
        Command::Plotdata(c) => {
            let cfg = single(&c)?;
            let record = simulate(&cfg.sim_for_run(0))?;
            io::write_plotdata(&record, cfg.sim.radius, create(&c.out, "plotdata.csv")?)?;
            println!("wrote {}", c.out.join("plotdata.csv").display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Parse { .. } | Error::HorizonTooShort { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
