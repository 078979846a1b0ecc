use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causal_var::bench::{
    run_interventional, run_observational, run_usecase_crossing, CrossingDirection, CrossingSpec, Dataset, ExperimentSpec,
};
use causal_var::counterfactual::counterfactual_trajectory;
use causal_var::datasets;
use causal_var::estimate::{fit, select_lag, Criterion, FitData, FitOptions};
use causal_var::forecast::{causal_effect_path, forecast, forecast_intervened, BAND_Z};
use causal_var::intervene::intervention_stability;
use causal_var::linalg;
use causal_var::model::DEFAULT_STABILITY_MARGIN;
use causal_var::scm::{scm_intervene, scm_solution, to_equilibrium_scm, verify_commutation, CommutationConfig};
use causal_var::series::{default_names, PanelSchema};
use causal_var::simulate::{simulate, SimConfig, DEFAULT_BURN_IN};
use causal_var::{Error, Intervention, PanelSeries, TimeSeries, VarModel, Vector};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "causal-var", version, about = "Causal inference over time for linear VAR processes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Random seed for simulation and benchmarks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Model JSON file, or `german` / `pendulum` for the built-in processes.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Input CSV (series with a `t` column, or a panel with `entity,t`).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories from a model.
    Simulate {
        /// Steps kept per entity after burn-in.
        #[arg(long)]
        length: usize,
        /// Number of panel entities; one entity writes a plain series.
        #[arg(long, default_value_t = 1)]
        entities: usize,
        /// Steps simulated and discarded before recording.
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
    },
    /// Least-squares estimation of a VAR(p).
    Fit {
        /// Lag order; selected by information criterion when omitted.
        #[arg(long)]
        lag: Option<usize>,
        /// Largest lag tried when selecting the order.
        #[arg(long, default_value_t = 8)]
        max_lag: usize,
        /// `aic` or `bic`.
        #[arg(long, default_value = "bic")]
        criterion: String,
        /// Ridge penalty added to the normal equations.
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        /// Fit without an intercept.
        #[arg(long)]
        no_intercept: bool,
    },
    /// Spectral radius and companion root moduli.
    Stability {
        /// Exit with a domain error when the model is unstable.
        #[arg(long)]
        require_stable: bool,
    },
    /// Observational or interventional h-step forecast.
    Forecast {
        /// Number of steps ahead.
        #[arg(long)]
        horizon: usize,
        /// Intervention JSON; observational forecast when omitted.
        #[arg(long)]
        intervention: Option<PathBuf>,
    },
    /// Apply an intervention and write the transformed model.
    Intervene {
        /// Intervention JSON.
        #[arg(long)]
        intervention: PathBuf,
    },
    /// Causal-effect path for k = 0..=horizon.
    Ce {
        /// Intervention JSON.
        #[arg(long)]
        intervention: PathBuf,
        /// Last step of the path.
        #[arg(long)]
        horizon: usize,
    },
    /// Retrospective counterfactual of an observed series.
    Counterfact {
        /// Intervention JSON; its `start` field is ignored.
        #[arg(long)]
        intervention: PathBuf,
        /// First time index at which the intervention acts.
        #[arg(long, allow_negative_numbers = true)]
        t0: i64,
        /// Last time index; defaults to the end of the series.
        #[arg(long, allow_negative_numbers = true)]
        t1: Option<i64>,
    },
    /// Equilibrium SCM of a stable model and its solution law.
    Scm {
        /// Intervention JSON applied on the SCM side.
        #[arg(long)]
        intervention: Option<PathBuf>,
    },
    /// Monte Carlo check that intervening commutes with the SCM mapping.
    VerifyCommutation {
        /// Null intervention when omitted.
        #[arg(long)]
        intervention: Option<PathBuf>,
        /// Monte Carlo replicates.
        #[arg(long, default_value_t = 5000)]
        replicates: usize,
        /// Steps averaged per replicate.
        #[arg(long, default_value_t = 4000)]
        length: usize,
    },
    /// Fitted VAR versus oracle forecast accuracy.
    BenchObservational(BenchArgs),
    /// Accuracy of estimated causal-effect paths.
    BenchInterventional {
        #[command(flatten)]
        bench: BenchArgs,
        /// Intervention JSON.
        #[arg(long)]
        intervention: PathBuf,
    },
    /// Per-entity time until the expected target crosses a threshold.
    UsecaseCrossing {
        /// Intervention JSON.
        #[arg(long)]
        intervention: PathBuf,
        /// Component whose expected path is tracked.
        #[arg(long, default_value_t = datasets::CREDIT_SCORE)]
        target: usize,
        /// Threshold value for the tracked component.
        #[arg(long, allow_negative_numbers = true)]
        threshold: f64,
        /// `above` or `below`.
        #[arg(long, default_value = "above")]
        direction: String,
        /// Steps searched before reporting `never`.
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Entities to simulate when no --data panel is given.
        #[arg(long, default_value_t = 100)]
        entities: usize,
        /// History length per simulated entity.
        #[arg(long, default_value_t = 50)]
        length: usize,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// `german`, `pendulum` or a panel CSV path.
    #[arg(long, default_value = "german")]
    dataset: String,
    /// Training rows per run.
    #[arg(long)]
    train_size: usize,
    /// Forecast horizon in steps.
    #[arg(long)]
    horizon: usize,
    /// Independent runs, seeded `seed + r`.
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Test rows; dataset default when omitted.
    #[arg(long)]
    test_size: Option<usize>,
    /// Fitted lag order; the true order when omitted.
    #[arg(long)]
    lag: Option<usize>,
    /// Comma-separated scored components; dataset default when omitted.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<usize>,
}

/// A failure tagged with the operation and input that produced it.
#[derive(Debug)]
struct Failure {
    context: String,
    error: Error,
}

trait Context<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> Context<T> for Result<T, E> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            context: context(),
            error: e.into(),
        })
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Overflow { .. } | Error::InsufficientSamples { .. } => 3,
        Error::Numerical(_) | Error::Estimation(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.context, f.error);
            ExitCode::from(exit_code(&f.error))
        }
    }
}

fn usage(msg: &str) -> Failure {
    Failure {
        context: "arguments".into(),
        error: Error::InvalidModel(msg.into()),
    }
}

fn load_model(g: &Global) -> Result<(VarModel, Vec<String>), Failure> {
    let spec = g.model.as_deref().ok_or_else(|| usage("--model is required"))?;
    match spec {
        "german" => Ok((datasets::german_model(datasets::DEFAULT_SIGMA), datasets::german_names())),
        "pendulum" => Ok((datasets::pendulum_model(datasets::DEFAULT_SIGMA), datasets::pendulum_names())),
        path => {
            let text = fs::read_to_string(path).ctx(|| format!("reading model {path}"))?;
            let m = VarModel::from_json(&text).ctx(|| format!("parsing model {path}"))?;
            let names = default_names(m.dim());
            Ok((m, names))
        }
    }
}

fn data_path(g: &Global) -> Result<&Path, Failure> {
    g.data.as_deref().ok_or_else(|| usage("--data is required"))
}

fn is_panel(path: &Path) -> Result<bool, Failure> {
    let text = fs::read_to_string(path).ctx(|| format!("reading {}", path.display()))?;
    Ok(text.lines().next().is_some_and(|h| h.split(',').any(|c| c.trim() == "entity")))
}

fn load_series(path: &Path) -> Result<(TimeSeries, Vec<String>), Failure> {
    let f = fs::File::open(path).ctx(|| format!("opening {}", path.display()))?;
    TimeSeries::read_csv(io::BufReader::new(f)).ctx(|| format!("parsing series {}", path.display()))
}

fn load_panel(path: &Path) -> Result<(PanelSeries, Vec<String>), Failure> {
    PanelSeries::load_csv(path, &PanelSchema::default()).ctx(|| format!("parsing panel {}", path.display()))
}

fn load_intervention(path: &Path, dim: usize) -> Result<Intervention, Failure> {
    let text = fs::read_to_string(path).ctx(|| format!("reading intervention {}", path.display()))?;
    let i = Intervention::from_json(&text).ctx(|| format!("parsing intervention {}", path.display()))?;
    i.validate(dim).ctx(|| format!("checking intervention {}", path.display()))?;
    Ok(i)
}

fn emit(g: &Global, write: impl FnOnce(&mut dyn Write) -> causal_var::Result<()>) -> Result<(), Failure> {
    let target = || g.out.as_ref().map_or("standard output".to_string(), |p| p.display().to_string());
    match &g.out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path).ctx(|| format!("creating {}", target()))?);
            write(&mut f).ctx(|| format!("writing {}", target()))?;
            f.flush().ctx(|| format!("writing {}", target()))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).ctx(|| format!("writing {}", target()))
        }
    }
}

fn emit_json(g: &Global, value: &serde_json::Value) -> Result<(), Failure> {
    emit(g, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn emit_text(g: &Global, text: &str) -> Result<(), Failure> {
    emit(g, |w| Ok(w.write_all(text.as_bytes())?))
}

fn bench_spec(b: &BenchArgs, seed: u64) -> Result<ExperimentSpec, Failure> {
    let dataset: Dataset = b.dataset.parse().ctx(|| "parsing --dataset".to_string())?;
    let mut spec = ExperimentSpec::new(dataset, b.train_size, b.horizon).runs(b.runs).seed(seed).targets(b.targets.clone());
    spec.test_size = b.test_size;
    spec.lag = b.lag;
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate {
            length,
            entities,
            burn_in,
        } => {
            let (model, names) = load_model(g)?;
            if *entities <= 1 {
                let cfg = SimConfig::new(*length, g.seed).burn_in(*burn_in);
                let s = simulate(&model, &cfg).ctx(|| "simulate".to_string())?;
                match g.format {
                    Format::Csv => emit(g, |w| s.write_csv(w, &names)),
                    Format::Json => emit_json(
                        g,
                        &serde_json::json!({"names": names, "start": s.start_index(), "values": linalg::mat_to_rows(s.values())}),
                    ),
                }
            } else {
                let panel = datasets::generate_panel(&model, g.seed, *length, *entities, *burn_in).ctx(|| "simulate".to_string())?;
                emit(g, |w| panel.write_csv(w, &names))
            }
        }
        Command::Fit {
            lag,
            max_lag,
            criterion,
            ridge,
            no_intercept,
        } => {
            let path = data_path(g)?;
            let (series, panel);
            let data: FitData = if is_panel(path)? {
                panel = load_panel(path)?.0;
                (&panel).into()
            } else {
                series = load_series(path)?.0;
                (&series).into()
            };
            let p = match lag {
                Some(p) => *p,
                None => {
                    let c: Criterion = criterion.parse().ctx(|| "parsing --criterion".to_string())?;
                    select_lag(data, *max_lag, c).ctx(|| format!("lag selection on {}", path.display()))?
                }
            };
            let opts = FitOptions::new(p).ridge(*ridge).intercept(!no_intercept);
            let report = fit(data, &opts).ctx(|| format!("fit on {}", path.display()))?;
            eprintln!(
                "fitted VAR({p}) on {} rows: aic {:.6}, bic {:.6}",
                report.n_effective, report.aic, report.bic
            );
            let json = report.model.to_json().ctx(|| "fit".to_string())?;
            emit_text(g, &(json + "\n"))
        }
        Command::Stability { require_stable } => {
            let (model, _) = load_model(g)?;
            let r = model.stability(DEFAULT_STABILITY_MARGIN).ctx(|| "stability".to_string())?;
            match g.format {
                Format::Json => emit_json(
                    g,
                    &serde_json::json!({"spectral_radius": r.spectral_radius, "is_stable": r.is_stable, "root_moduli": r.root_moduli}),
                )?,
                Format::Csv => {
                    let mut text = format!("spectral_radius,{:.10}\nis_stable,{}\n", r.spectral_radius, r.is_stable);
                    for m in &r.root_moduli {
                        text += &format!("root_modulus,{m:.10}\n");
                    }
                    emit_text(g, &text)?;
                }
            }
            if *require_stable && !r.is_stable {
                return Err(Failure {
                    context: "stability".into(),
                    error: Error::Domain(format!("model is unstable (spectral radius {:.6})", r.spectral_radius)),
                });
            }
            Ok(())
        }
        Command::Forecast { horizon, intervention } => {
            let (model, _) = load_model(g)?;
            let path = data_path(g)?;
            let (hist, _) = load_series(path)?;
            let f = match intervention {
                Some(ip) => {
                    let i = load_intervention(ip, model.dim())?;
                    forecast_intervened(&model, &i, &hist, *horizon)
                }
                None => forecast(&model, &hist, *horizon),
            }
            .ctx(|| format!("forecast from {}", path.display()))?;
            if f.unstable {
                eprintln!("warning: forecast dynamics are unstable; intervals grow without bound");
            }
            match g.format {
                Format::Csv => emit(g, |w| f.write_csv(w)),
                Format::Json => {
                    let (lo, hi) = f.bands(BAND_Z);
                    let covs: serde_json::Value = serde_json::from_str(&f.covariances_json().ctx(|| "forecast".to_string())?)
                        .ctx(|| "forecast".to_string())?;
                    emit_json(
                        g,
                        &serde_json::json!({
                            "horizon": f.horizon,
                            "means": linalg::mat_to_rows(&f.means),
                            "lower": linalg::mat_to_rows(&lo),
                            "upper": linalg::mat_to_rows(&hi),
                            "covariances": covs,
                            "unstable": f.unstable,
                        }),
                    )
                }
            }
        }
        Command::Intervene { intervention } => {
            let (model, _) = load_model(g)?;
            let i = load_intervention(intervention, model.dim())?;
            let dynamics = i.dynamics(&model).ctx(|| "intervene".to_string())?;
            let st = intervention_stability(&model, &i).ctx(|| "intervene".to_string())?;
            eprintln!(
                "intervened spectral radius {:.6} ({})",
                st.report.spectral_radius,
                if st.preserved { "stable" } else { "unstable" }
            );
            let json = dynamics.model.to_json().ctx(|| "intervene".to_string())?;
            emit_text(g, &(json + "\n"))
        }
        Command::Ce { intervention, horizon } => {
            let (model, _) = load_model(g)?;
            let path = data_path(g)?;
            let (hist, _) = load_series(path)?;
            let i = load_intervention(intervention, model.dim())?;
            let ce = causal_effect_path(&model, &i, &hist, *horizon).ctx(|| format!("ce from {}", path.display()))?;
            match g.format {
                Format::Csv => emit(g, |w| ce.write_csv(w)),
                Format::Json => emit_json(
                    g,
                    &serde_json::json!({
                        "horizon": ce.horizon,
                        "effects": linalg::mat_to_rows(&ce.effects),
                        "asymptote": ce.asymptote.as_ref().map(|a| a.iter().copied().collect::<Vec<_>>()),
                    }),
                ),
            }
        }
        Command::Counterfact { intervention, t0, t1 } => {
            let (model, _) = load_model(g)?;
            let path = data_path(g)?;
            let (x, names) = load_series(path)?;
            let i = load_intervention(intervention, model.dim())?;
            let t1 = t1.unwrap_or(x.end_index() - 1);
            let r = counterfactual_trajectory(&model, &x, &i, *t0, t1).ctx(|| format!("counterfact on {}", path.display()))?;
            match g.format {
                Format::Csv => emit(g, |w| r.write_csv(w, &names)),
                Format::Json => emit_json(
                    g,
                    &serde_json::json!({
                        "t0": r.t0,
                        "t1": r.t1,
                        "start": r.factual.start_index(),
                        "factual": linalg::mat_to_rows(r.factual.values()),
                        "counterfactual": linalg::mat_to_rows(r.counterfactual.values()),
                        "effect": linalg::mat_to_rows(r.effect.values()),
                        "diagnostics": r.diagnostics,
                    }),
                ),
            }
        }
        Command::Scm { intervention } => {
            let (model, _) = load_model(g)?;
            let mut scm = to_equilibrium_scm(&model).ctx(|| "scm".to_string())?;
            if let Some(ip) = intervention {
                let i = load_intervention(ip, model.dim())?;
                scm = scm_intervene(&scm, &i).ctx(|| "scm intervention".to_string())?;
            }
            let sol = scm_solution(&scm).ctx(|| "scm solution".to_string())?;
            let scm_json: serde_json::Value =
                serde_json::from_str(&scm.to_json().ctx(|| "scm".to_string())?).ctx(|| "scm".to_string())?;
            emit_json(g, &serde_json::json!({"scm": scm_json, "solution": sol.to_json_value()}))
        }
        Command::VerifyCommutation {
            intervention,
            replicates,
            length,
        } => {
            let (model, _) = load_model(g)?;
            let i = match intervention {
                Some(ip) => load_intervention(ip, model.dim())?,
                None => Intervention::additive(Vector::zeros(model.dim()), 0),
            };
            let cfg = CommutationConfig::new(*replicates, *length, g.seed);
            let r = causal_var::bench::with_thread_cap(|| verify_commutation(&model, &i, &cfg))
                .and_then(|r| r)
                .ctx(|| "verify-commutation".to_string())?;
            match g.format {
                Format::Json => emit_json(g, &r.to_json_value()),
                Format::Csv => emit_text(
                    g,
                    &format!(
                        "max_mean_gap,{:e}\nmax_mean_gap_se,{:.4}\nmax_cov_gap_rel,{:.6}\nreplicates,{}\nlength,{}\n",
                        r.max_mean_gap, r.max_mean_gap_se, r.max_cov_gap_rel, r.replicates, r.length
                    ),
                ),
            }
        }
        Command::BenchObservational(b) => {
            let spec = bench_spec(b, g.seed)?;
            let t = run_observational(&spec).ctx(|| "bench-observational".to_string())?;
            match g.format {
                Format::Csv => {
                    eprintln!("{}", t.metadata);
                    emit(g, |w| t.write_csv(w))
                }
                Format::Json => emit_text(g, &(t.to_json().ctx(|| "bench-observational".to_string())? + "\n")),
            }
        }
        Command::BenchInterventional { bench, intervention } => {
            let mut spec = bench_spec(bench, g.seed)?;
            let dim = match spec.dataset {
                Dataset::Pendulum => 2,
                _ => 7,
            };
            spec.intervention = Some(load_intervention(intervention, dim)?);
            let t = run_interventional(&spec).ctx(|| "bench-interventional".to_string())?;
            match g.format {
                Format::Csv => {
                    eprintln!("{}", t.metadata);
                    emit(g, |w| t.write_csv(w))
                }
                Format::Json => emit_text(g, &(t.to_json().ctx(|| "bench-interventional".to_string())? + "\n")),
            }
        }
        Command::UsecaseCrossing {
            intervention,
            target,
            threshold,
            direction,
            horizon,
            entities,
            length,
        } => {
            if g.model.is_none() {
                return Err(usage("--model is required (use `german` for the built-in process)"));
            }
            let (model, _) = load_model(g)?;
            let panel = match &g.data {
                Some(p) => load_panel(p)?.0,
                None => datasets::generate_panel(&model, g.seed, *length, *entities, DEFAULT_BURN_IN)
                    .ctx(|| "usecase-crossing".to_string())?,
            };
            let spec = CrossingSpec {
                intervention: load_intervention(intervention, model.dim())?,
                model,
                panel,
                target: *target,
                threshold: *threshold,
                direction: direction.parse::<CrossingDirection>().ctx(|| "parsing --direction".to_string())?,
                horizon: *horizon,
            };
            let r = run_usecase_crossing(&spec).ctx(|| "usecase-crossing".to_string())?;
            match g.format {
                Format::Csv => {
                    eprintln!("histogram {:?}, never {}", r.histogram, r.never);
                    emit(g, |w| r.write_csv(w))
                }
                Format::Json => emit_json(g, &serde_json::to_value(&r).ctx(|| "usecase-crossing".to_string())?),
            }
        }
    }
}
