#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regctl::config::{self, SweepAxis, WEIGHT_SWEEP};
use regctl::error::{CliError, ConfigError, EXIT_OK};
use regctl::experiment::{eigen_csv, Problem};
use regctl::field_io::{format_value, read_field};
use regctl_core::presets::left_half;
use regctl_core::shape::LevelSet;
use regctl_core::Field;

#[derive(Parser)]
#[command(
    name = "regctl",
    version,
    about = "Regional control of a predator population by level-set shape descent"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Preset (experiment1, experiment2, custom); overrides the file.
    #[arg(long)]
    preset: Option<String>,

    /// Override a config key, e.g. `--set cost.alpha=100`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Common {
    fn all_overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(p) = &self.preset {
            v.push(format!("preset=\"{p}\""));
        }
        v.extend(self.overrides.iter().cloned());
        v
    }

    fn load(&self, defaults: Option<&str>) -> Result<regctl::RunConfig, ConfigError> {
        let mut cfg = match (&self.config, defaults) {
            (None, Some(text)) => config::parse_config_str(text, &self.all_overrides())?,
            _ => config::load(self.config.as_deref(), &self.all_overrides())?,
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Alpha,
    Beta,
}

#[derive(Clone, Copy, ValueEnum)]
enum Omega {
    /// Left half of the domain.
    LeftHalf,
    /// `{phi0 > 0}` for the configured initial level set.
    Phi0,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the shape optimization and write history, snapshots and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Sweep one weight over the configured values (default set if none).
        #[arg(long, value_enum)]
        sweep: Option<Axis>,
        /// Exit with status 4 when a run stops at `maxiter`.
        #[arg(long)]
        require_convergence: bool,
    },
    /// Principal eigenvalue against the control rate gamma.
    Eigen {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gammas; overrides `eigen.gammas`.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Field dump of a level set; omega = {phi > 0}.
        #[arg(long, conflicts_with = "mask")]
        phi: Option<PathBuf>,
        /// Field dump of an indicator with values in [0, 1].
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Forward prey-predator run with feedback, checked against the eigenvalue.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "left-half")]
        omega: Omega,
    },
    /// Finite-difference and duality checks of the shape derivative at phi0.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn field_arg(path: &Path, grid: &regctl_core::Grid, key: &str) -> Result<Field, ConfigError> {
    let (_, f) = read_field(path).map_err(|e| ConfigError::at(key, format!("{}: {e}", path.display())))?;
    if f.grid() != grid {
        return Err(ConfigError::at(key, "grid does not match the configuration"));
    }
    Ok(f)
}

fn run(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Run {
            common,
            sweep,
            require_convergence,
        } => {
            let mut cfg = common.load(None)?;
            if let Some(axis) = sweep {
                let axis = match axis {
                    Axis::Alpha => SweepAxis::Alpha,
                    Axis::Beta => SweepAxis::Beta,
                };
                let values = cfg
                    .sweep
                    .take()
                    .map(|s| s.values)
                    .unwrap_or_else(|| WEIGHT_SWEEP.to_vec());
                cfg.sweep = Some(config::Sweep { axis, values });
            }
            let problem = Problem::new(cfg)?;
            let mut first_error = None;
            let mut not_converged = None;
            for result in problem.run_all() {
                match result {
                    Ok(s) => {
                        println!(
                            "alpha={} beta={} {} after {} iterations, J {} -> {} ({})",
                            format_value(s.alpha),
                            format_value(s.beta),
                            s.stop_reason,
                            s.iterations_run,
                            s.j_initial.map(format_value).unwrap_or_default(),
                            s.j_final.map(format_value).unwrap_or_default(),
                            s.output_dir.display()
                        );
                        if !s.converged && not_converged.is_none() {
                            not_converged = Some(CliError::NotConverged {
                                reason: "maxiter_reached",
                                iterations: s.iterations_run,
                            });
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
            match not_converged {
                Some(e) if require_convergence => Err(e),
                _ => Ok(()),
            }
        }
        Verb::Eigen {
            common,
            gammas,
            phi,
            mask,
        } => {
            let mut cfg = common.load(None)?;
            if let Some(g) = gammas {
                config::check_gammas("--gammas", &g)?;
                cfg.eigen_gammas = g;
            }
            let problem = Problem::new(cfg)?;
            let grid = problem.grid;
            let omega = match (phi, mask) {
                (Some(p), _) => LevelSet::new(field_arg(&p, &grid, "--phi")?, problem.cfg.sigma)?.region_mask(),
                (None, Some(m)) => {
                    let f = field_arg(&m, &grid, "--mask")?;
                    if f.min() < 0.0 || f.max() > 1.0 {
                        return Err(ConfigError::at("--mask", "indicator values must lie in [0, 1]").into());
                    }
                    f
                }
                (None, None) => LevelSet::new(problem.cfg.phi0(&grid)?, problem.cfg.sigma)?.region_mask(),
            };
            let k = problem.carrying_capacity()?;
            let rows = problem.eigen_table(&omega, &k)?;
            let table = eigen_csv(&rows);
            let dir = &problem.cfg.output_dir;
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let path = dir.join("eigen.csv");
            std::fs::write(&path, &table).map_err(|e| CliError::io(&path, e))?;
            print!("{table}");
            Ok(())
        }
        Verb::Simulate { common, omega } => {
            let cfg = common.load(Some(config::DECAY_DEFAULTS))?;
            let problem = Problem::new(cfg)?;
            let grid = problem.grid;
            let omega = match omega {
                Omega::LeftHalf => left_half(&grid),
                Omega::Phi0 => LevelSet::new(problem.cfg.phi0(&grid)?, problem.cfg.sigma)?.region_mask(),
            };
            let report = problem.simulate(&omega)?;
            report.write(&problem.cfg.output_dir)?;
            println!(
                "lambda1={} fitted_rate={} ratio={} max(p-y)={}",
                format_value(report.lambda1),
                format_value(report.fitted_rate),
                format_value(report.fitted_rate / report.lambda1),
                format_value(report.comparison_gap)
            );
            Ok(())
        }
        Verb::Gradcheck {
            common,
            directions,
            step,
            seed,
        } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(ConfigError::at("--step", "must be positive").into());
            }
            let problem = Problem::new(common.load(None)?)?;
            let report = problem.gradcheck(directions, step, seed)?;
            println!("direction,analytic,finite_difference,relative_error,duality_error");
            for (i, r) in report.rows.iter().enumerate() {
                println!(
                    "{i},{},{},{},{}",
                    format_value(r.analytic),
                    format_value(r.finite_difference),
                    format_value(r.relative_error),
                    format_value(r.duality_error)
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let status = match run(cli.verb) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("regctl: {e}");
            e.exit_code()
        }
    };
    eprintln!("elapsed {:.2} s", start.elapsed().as_secs_f64());
    ExitCode::from(status as u8)
}
