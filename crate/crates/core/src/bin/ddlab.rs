//! Command-line front end: capacity sweeps, the synthetic circle model,
//! plot re-rendering and the fill-distance experiments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ddlab::sweep::{self, Family, PlotData, SweepConfig, SweepResult};
use ddlab::theory::{self, ApproxConfig};
use ddlab::{Error, Result};

#[derive(Parser)]
#[command(name = "ddlab", version, about = "Double descent capacity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Synthetic circle model over a grid of frequency counts.
    Synthetic {
        /// Optional TOML config; flags below override its [synthetic] table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Signal-to-noise ratio (`inf` for noiseless).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated frequency counts.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render the plot of a sweep CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
        /// Squared-risk tolerance for locating the threshold.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Output SVG (defaults to the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill-distance scaling and noiseless kernel interpolation.
    Theory {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 12)]
        centers: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn apply_common(cfg: &mut SweepConfig, common: &Common) {
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
}

fn write_outputs(result: &SweepResult, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    sweep::emit_csv(result, &out.join("sweep.csv"))?;
    sweep::emit_plot(result, &out.join("sweep.svg"))?;
    sweep::emit_metadata(result, &out.join("metadata.json"))?;
    if !result.histories.is_empty() {
        let dir = out.join("histories");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for h in &result.histories {
            h.history
                .write_csv(&dir.join(format!("h{}_r{}.csv", h.hidden, h.repeat)))?;
        }
    }
    for p in &result.points {
        let m = |s: Option<sweep::Stat>| {
            s.map_or_else(|| "-".to_string(), |s| format!("{:.4e}", s.mean))
        };
        println!(
            "{:<16} {:>8} train_sq {:>11} test_sq {:>11} test_01 {:>11} norm {:>11} {}",
            p.family,
            p.capacity,
            m(p.train_sq),
            m(p.test_sq),
            m(p.test_01),
            m(p.norm),
            p.status
        );
    }
    match result.threshold() {
        Some(t) => println!("interpolation threshold: {t}"),
        None => println!("interpolation threshold: none"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { config, common } => {
            let mut cfg = SweepConfig::load(&config)?;
            apply_common(&mut cfg, &common);
            write_outputs(&sweep::run_sweep(&cfg)?, &common.out)
        }
        Command::Synthetic {
            config,
            n,
            snr,
            trials,
            grid,
            common,
        } => {
            let mut cfg = match config {
                Some(p) => SweepConfig::load(&p)?,
                None => SweepConfig::new(
                    Family::Synthetic,
                    vec![
                        16, 32, 64, 128, 192, 224, 256, 288, 320, 384, 512, 1024, 2048,
                    ],
                ),
            };
            if cfg.family != Family::Synthetic {
                return Err(Error::Config(
                    "the synthetic subcommand needs family = \"synthetic\"".into(),
                ));
            }
            if let Some(n) = n {
                cfg.synthetic.n = n;
            }
            if let Some(snr) = snr {
                cfg.synthetic.snr = snr;
            }
            if let Some(t) = trials {
                cfg.repeats = Some(t);
            }
            if let Some(g) = grid {
                cfg.capacities = g;
            }
            apply_common(&mut cfg, &common);
            write_outputs(&sweep::run_sweep(&cfg)?, &common.out)
        }
        Command::Report { csv, tol, out } => {
            let file = std::fs::File::open(&csv).map_err(|e| Error::io(&csv, e))?;
            let points = sweep::read_csv(file)?;
            let svg = sweep::render_svg(&PlotData::from_csv_points(&points, tol));
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&out, svg).map_err(|e| Error::io(&out, e))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Theory {
            d,
            n_grid,
            trials,
            sigma,
            centers,
            common,
        } => {
            if let Some(w) = common.workers.filter(|&w| w > 0) {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build_global()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            let seed = common.seed.unwrap_or(0);
            let out = &common.out;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let fill = theory::fill_scaling(d, &n_grid, trials, seed)?;
            let ns: Vec<usize> = fill.iter().map(|r| r.n).collect();
            let kappas: Vec<f64> = fill.iter().map(|r| r.kappa_geo_mean).collect();
            println!(
                "fill distance slope vs n/log n: {:.4} (expected {:.4})",
                theory::scaling_slope(&ns, &kappas),
                -1.0 / d as f64
            );
            let report = theory::noiseless_approx_experiment(&ApproxConfig {
                d,
                sigma,
                centers,
                n_grid: n_grid.clone(),
                trials,
                probes_per_side: if d == 1 { 4001 } else { 201 },
                seed,
            })?;
            let path = out.join("theory.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv(e.to_string()))?;
            w.write_record([
                "n",
                "kappa_grid_geo_mean",
                "kappa_mean",
                "sup_error_mean",
                "sup_error_std",
                "norm_h_mean",
                "norm_hstar",
                "norm_violations",
                "solver_failures",
                "trials",
            ])
            .map_err(|e| Error::Csv(e.to_string()))?;
            for (row, f) in report.rows.iter().zip(&fill) {
                w.write_record([
                    row.n.to_string(),
                    f.kappa_geo_mean.to_string(),
                    row.kappa_mean.to_string(),
                    row.sup_error_mean.to_string(),
                    row.sup_error_std.to_string(),
                    row.norm_h_mean.to_string(),
                    row.norm_hstar.to_string(),
                    row.norm_violations.to_string(),
                    row.solver_failures.to_string(),
                    row.trials.to_string(),
                ])
                .map_err(|e| Error::Csv(e.to_string()))?;
                println!(
                    "n {:>6}  kappa {:.4e}  sup error {:.4e}  |h| {:.6}  |h*| {:.6}",
                    row.n, row.kappa_mean, row.sup_error_mean, row.norm_h_mean, row.norm_hstar
                );
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
