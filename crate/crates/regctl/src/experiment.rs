//! Drivers behind the CLI verbs and the files they write.
//!
//! A single optimization run writes into its output directory:
//!
//! * `history.csv`: `iter,J_damage,J_area,J_perimeter,J`, one row per evaluated `phi`,
//! * `phi_NNNN.csv`: level-set snapshots (field dumps tagged `iter=N`),
//! * `y_final.csv`, `r_initial.csv`, `K.csv`: state at `T`, adjoint at `t = 0`, carrying capacity,
//! * `summary.json`: stop reason, iteration count, first and last cost,
//! * `eigen.csv` (optional): `gamma,lambda1` for the final control region,
//! * `plot.gp` (optional): a gnuplot script for the history and the final `phi`.
//!
//! Nothing time-dependent is written, so repeated runs produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regctl_core::dynamics::{solve_full_system, solve_state, PredatorParams, SystemParams};
use regctl_core::gradcheck::CostModel;
use regctl_core::optimizer::run_optimization;
use regctl_core::shape::{default_eps_reg, CostBreakdown, CostWeights};
use regctl_core::spectral::{eigen_gamma_sweep, EigenSetup};
use regctl_core::{Field, Grid, InteractionOperator};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, ConfigError};
use crate::field_io::{format_field, format_value};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_field(dir: &Path, file: &str, field: &Field, name: &str, tag: &str) -> Result<(), CliError> {
    let path = dir.join(file);
    let text = format_field(field, name, tag).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    write(&path, text)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize infallibly");
    s.push('\n');
    s
}

pub fn history_csv(history: &[CostBreakdown]) -> String {
    let mut out = String::from("iter,J_damage,J_area,J_perimeter,J\n");
    for (k, c) in history.iter().enumerate() {
        out.push_str(&format!(
            "{k},{},{},{},{}\n",
            format_value(c.j_damage),
            format_value(c.j_area),
            format_value(c.j_perimeter),
            format_value(c.j_total)
        ));
    }
    out
}

pub fn eigen_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("gamma,lambda1\n");
    for (g, l) in rows {
        out.push_str(&format!("{},{}\n", format_value(*g), format_value(*l)));
    }
    out
}

fn gnuplot_script(last_snapshot: &str) -> String {
    format!(
        "# gnuplot -persist plot.gp\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set multiplot layout 1,2\n\
         set xlabel 'iteration'\n\
         set logscale y\n\
         plot 'history.csv' using 1:2 with linespoints, \\\n\
         \x20    '' using 1:3 with linespoints, \\\n\
         \x20    '' using 1:4 with linespoints, \\\n\
         \x20    '' using 1:5 with linespoints\n\
         unset logscale y\n\
         unset key\n\
         set xlabel 'i'\n\
         set ylabel 'j'\n\
         set size ratio -1\n\
         set contour base\n\
         set cntrparam levels discrete 0\n\
         plot '{last_snapshot}' matrix with image\n\
         unset multiplot\n"
    )
}

/// Outcome of one optimization run as recorded in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub preset: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub stop_reason: String,
    pub converged: bool,
    pub iterations_run: usize,
    pub j_initial: Option<f64>,
    pub j_final: Option<f64>,
    pub nx: usize,
    pub ny: usize,
    pub n_steps: usize,
    pub t_final: f64,
    pub s0: f64,
    pub format_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

/// Setup shared by every run of one invocation.
pub struct Problem {
    pub cfg: RunConfig,
    pub grid: Grid,
    pub b: InteractionOperator,
}

impl Problem {
    pub fn new(cfg: RunConfig) -> Result<Self, ConfigError> {
        let grid = cfg.grid()?;
        let b = cfg.operator(&grid)?;
        // surface phi0 and time-scheme problems as config errors up front
        cfg.phi0(&grid)?;
        cfg.scheme()?;
        Ok(Problem { cfg, grid, b })
    }

    pub fn carrying_capacity(&self) -> Result<Field, CliError> {
        Ok(self.cfg.carrying_capacity(&self.grid).resolve()?)
    }

    fn summary(&self, weights: &CostWeights, dir: &Path) -> RunSummary {
        RunSummary {
            preset: self.cfg.preset.name(),
            alpha: weights.alpha,
            beta: weights.beta,
            stop_reason: String::new(),
            converged: false,
            iterations_run: 0,
            j_initial: None,
            j_final: None,
            nx: self.grid.nx(),
            ny: self.grid.ny(),
            n_steps: self.cfg.n_steps,
            t_final: self.cfg.t_final,
            s0: self.cfg.s0(&self.grid),
            format_version: self.cfg.format_version.clone(),
            error: None,
            output_dir: dir.to_path_buf(),
        }
    }

    /// Run the optimization for one weight pair and write its artifacts.
    pub fn run_one(&self, weights: CostWeights, dir: &Path) -> Result<RunSummary, CliError> {
        create_dir(dir)?;
        let mut opt = self.cfg.optimizer_config(&self.grid, &self.b)?;
        opt.weights = weights;
        let mut summary = self.summary(&weights, dir);
        let snapshot_tag = |k: usize| (format!("phi_{k:04}.csv"), format!("iter={k}"));
        match run_optimization(&opt) {
            Ok(res) => {
                summary.stop_reason = res.stop_reason.as_str().to_owned();
                summary.converged = res.stop_reason.is_converged();
                summary.iterations_run = res.iterations_run;
                summary.j_initial = res.history.first().map(|c| c.j_total);
                summary.j_final = res.history.last().map(|c| c.j_total);
                write(&dir.join("history.csv"), history_csv(&res.history))?;
                for (k, ls) in &res.phi_snapshots {
                    let (file, tag) = snapshot_tag(*k);
                    write_field(dir, &file, &ls.phi, "phi", &tag)?;
                }
                let t_tag = format!("t={}", format_value(self.cfg.t_final));
                write_field(dir, "y_final.csv", &res.final_state, "y", &t_tag)?;
                if let Some(r) = &res.final_adjoint {
                    write_field(dir, "r_initial.csv", r, "r", "t=0")?;
                }
                write_field(dir, "K.csv", &res.carrying_capacity, "K", "steady")?;
                if self.cfg.gnuplot {
                    let last = res
                        .phi_snapshots
                        .last()
                        .map(|s| snapshot_tag(s.0).0)
                        .unwrap_or_default();
                    write(&dir.join("plot.gp"), gnuplot_script(&last))?;
                }
                let mut eigen_failure = None;
                if self.cfg.eigen_report {
                    match self.eigen_table(&res.final_phi.region_mask(), &res.carrying_capacity) {
                        Ok(rows) => write(&dir.join("eigen.csv"), eigen_csv(&rows))?,
                        Err(e) => {
                            summary.error = Some(format!("eigenvalue report: {e}"));
                            eigen_failure = Some(e);
                        }
                    }
                }
                write(&dir.join("summary.json"), to_json(&summary))?;
                match eigen_failure {
                    Some(e) => Err(e),
                    None => Ok(summary),
                }
            }
            Err(fail) => {
                summary.stop_reason = "solver_failure".into();
                summary.iterations_run = fail.iterations_run;
                summary.j_initial = fail.history.first().map(|c| c.j_total);
                summary.j_final = fail.history.last().map(|c| c.j_total);
                summary.error = Some(fail.error.to_string());
                write(&dir.join("history.csv"), history_csv(&fail.history))?;
                for (k, ls) in &fail.phi_snapshots {
                    let (file, tag) = snapshot_tag(*k);
                    write_field(dir, &file, &ls.phi, "phi", &tag)?;
                }
                write(&dir.join("summary.json"), to_json(&summary))?;
                Err(CliError::Solver(fail.error))
            }
        }
    }

    /// Run every configured weight pair. A sweep fans out one thread per
    /// pair, each writing to `alpha_<a>_beta_<b>` under the output directory.
    pub fn run_all(&self) -> Vec<Result<RunSummary, CliError>> {
        let out = &self.cfg.output_dir;
        let pairs = self.cfg.weight_pairs();
        let theta = self.cfg.weights.theta;
        let weights = |(alpha, beta): (f64, f64)| CostWeights { theta, alpha, beta };
        if self.cfg.sweep.is_none() {
            return vec![self.run_one(weights(pairs[0]), out)];
        }
        let results: Vec<Result<RunSummary, CliError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .iter()
                .map(|&pair| {
                    let dir = out.join(format!("alpha_{}_beta_{}", format_value(pair.0), format_value(pair.1)));
                    scope.spawn(move || self.run_one(weights(pair), &dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });
        let mut index = String::from("alpha,beta,stop_reason,iterations,J_final,dir\n");
        for (pair, r) in pairs.iter().zip(&results) {
            let dir = format!("alpha_{}_beta_{}", format_value(pair.0), format_value(pair.1));
            let (reason, iters, j) = match r {
                Ok(s) => (
                    s.stop_reason.clone(),
                    s.iterations_run,
                    s.j_final.map(format_value).unwrap_or_default(),
                ),
                Err(e) => (format!("error: {}", e.to_string().replace(',', ";")), 0, String::new()),
            };
            index.push_str(&format!(
                "{},{},{reason},{iters},{j},{dir}\n",
                format_value(pair.0),
                format_value(pair.1)
            ));
        }
        let mut results = results;
        if let Err(e) = create_dir(out).and_then(|_| write(&out.join("sweep.csv"), index)) {
            results.push(Err(e));
        }
        results
    }

    pub fn eigen_setup(&self, omega: &Field, k: &Field) -> EigenSetup<'_> {
        EigenSetup {
            d2: self.cfg.d,
            a: Field::constant(&self.grid, self.cfg.a),
            gamma: 0.0,
            omega_indicator: omega.clone(),
            c0: self.cfg.c0,
            k: k.clone(),
            b: &self.b,
            eps: 0.0,
        }
    }

    /// `(gamma, lambda1)` over the configured gammas for control region `omega`.
    pub fn eigen_table(&self, omega: &Field, k: &Field) -> Result<Vec<(f64, f64)>, CliError> {
        let setup = self.eigen_setup(omega, k);
        Ok(eigen_gamma_sweep(&setup, &self.cfg.eigen_gammas, self.cfg.eigen_tol)?)
    }

    /// Forward prey-predator run with feedback on `omega`, compared against
    /// the principal eigenvalue and the linear bound `y`.
    pub fn simulate(&self, omega: &Field) -> Result<DecayReport, CliError> {
        let cfg = &self.cfg;
        let k = self.carrying_capacity()?;
        let scheme = cfg.scheme()?;
        let predator = PredatorParams {
            d: cfg.d,
            a: Field::constant(&self.grid, cfg.a),
            c0: cfg.c0,
            gamma: cfg.gamma,
            b: &self.b,
            control: omega.clone(),
        };
        let mut setup = self.eigen_setup(omega, &k);
        setup.gamma = cfg.gamma;
        let lambda1 = regctl_core::spectral::principal_eigenpair(&setup, cfg.eigen_tol)?.lambda1;

        let system = SystemParams {
            d1: cfg.prey.d1,
            r: Field::constant(&self.grid, cfg.prey.r),
            rho: Field::constant(&self.grid, cfg.prey.rho),
            predator: predator.clone(),
        };
        let p0 = Field::constant(&self.grid, cfg.y0);
        let (h, p) = solve_full_system(&system, &k, &p0, &scheme)?;
        let y = solve_state(&predator, &p0, &k, &scheme)?;

        let times: Vec<f64> = (0..p.len()).map(|n| p.time(n)).collect();
        let sup_p = p.sup_series();
        let sup_y = y.sup_series();
        let sup_h = h.sup_series();
        let comparison_gap = (0..p.len())
            .map(|n| p.at(n).zip_map(y.at(n), |a, b| a - b).map(|d| d.max()))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let fitted_rate = fit_decay_rate(&times, &sup_p, 0.5 * scheme.t_final());
        Ok(DecayReport {
            lambda1,
            fitted_rate,
            comparison_gap,
            times,
            sup_p,
            sup_y,
            sup_h,
        })
    }

    pub fn cost_model(&self, k: Field) -> Result<CostModel<'_>, CliError> {
        let cfg = &self.cfg;
        Ok(CostModel {
            d: cfg.d,
            a: Field::constant(&self.grid, cfg.a),
            c0: cfg.c0,
            gamma: cfg.gamma,
            b: &self.b,
            k,
            y0: Field::constant(&self.grid, cfg.y0),
            sigma: cfg.sigma,
            weights: cfg.weights,
            scheme: cfg.scheme()?,
            eps_reg: cfg.eps_reg.unwrap_or_else(|| default_eps_reg(&self.grid)),
        })
    }

    /// Finite-difference and duality checks of the shape derivative at
    /// `phi0` along `directions` seeded cosine perturbations.
    pub fn gradcheck(&self, directions: usize, step: f64, seed: u64) -> Result<GradcheckReport, CliError> {
        let model = self.cost_model(self.carrying_capacity()?)?;
        let phi = self.cfg.phi0(&self.grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(directions);
        for _ in 0..directions {
            let coeffs: [f64; 9] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let psi = neumann_direction(&self.grid, &coeffs);
            let check = model.directional_check(&phi, &psi, step)?;
            let dual = model.duality_check(&phi, &psi)?;
            rows.push(GradcheckRow {
                analytic: check.analytic,
                finite_difference: check.finite_difference,
                relative_error: check.relative_error,
                duality_error: dual.relative_error,
            });
        }
        Ok(GradcheckReport { step, rows })
    }
}

/// Least-squares slope of `-ln f` against `t` over `t >= t_start`.
pub fn fit_decay_rate(times: &[f64], values: &[f64], t_start: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_start)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    -cov / var
}

/// `sum c[3p + q] cos(p pi x') cos(q pi y')` over `p, q < 3` in domain-scaled
/// coordinates, normalized to unit max norm. Its normal derivative vanishes.
pub fn neumann_direction(grid: &Grid, c: &[f64; 9]) -> Field {
    use std::f64::consts::PI;
    let b = grid.bounds();
    let f = Field::from_fn(grid, |x, y| {
        let u = (x - b.x_min) / b.width();
        let v = (y - b.y_min) / b.height();
        let mut s = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                s += c[3 * p + q] * (p as f64 * PI * u).cos() * (q as f64 * PI * v).cos();
            }
        }
        s
    });
    let m = f.norm_inf();
    if m > 0.0 {
        f.map(|v| v / m)
    } else {
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda1: f64,
    /// Fitted `-d/dt ln sup p` over the second half of the horizon.
    pub fitted_rate: f64,
    /// `max_{n, x} (p - y)`.
    pub comparison_gap: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub sup_p: Vec<f64>,
    #[serde(skip)]
    pub sup_y: Vec<f64>,
    #[serde(skip)]
    pub sup_h: Vec<f64>,
}

impl DecayReport {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        create_dir(dir)?;
        let mut csv = String::from("t,sup_p,sup_y,sup_h\n");
        for n in 0..self.times.len() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                format_value(self.times[n]),
                format_value(self.sup_p[n]),
                format_value(self.sup_y[n]),
                format_value(self.sup_h[n])
            ));
        }
        write(&dir.join("decay.csv"), csv)?;
        write(&dir.join("decay.json"), to_json(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
    pub duality_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub step: f64,
    pub rows: Vec<GradcheckRow>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_error).fold(0.0, f64::max)
    }

    pub fn max_duality_error(&self) -> f64 {
        self.rows.iter().map(|r| r.duality_error).fold(0.0, f64::max)
    }
}
