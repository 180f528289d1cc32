//! Command-line surface: simulation, fitting, ranking-based selection,
//! link selection, stepwise selection and the Monte Carlo evaluation
//! harness. Every run writes a JSON artifact embedding the fully
//! resolved configuration; thread count follows RAYON_NUM_THREADS.

mod plot;

use anyhow::{bail, Context, Result};
use bivsurv::brbvs::{run_brbvs, BrbvsConfig, BrbvsResult};
use bivsurv::data::{parse_dataset, standardize, write_dataset, DataSchema, Dataset};
use bivsurv::fit::{fit_model_with, summarize, Measure};
use bivsurv::likelihood::{BaselineConfig, ModelSpec};
use bivsurv::margins::LinkKind;
use bivsurv::optimizer::OptimOptions;
use bivsurv::ranking::Metric;
use bivsurv::simulator::{evaluate, generate, Scenario, SimConfig};
use bivsurv::stepwise::{backward, forward, select_link, StepwiseOptions};
use bivsurv::CopulaId;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "bivsurv",
    about = "Bivariate copula link-based survival models with ranking-based variable selection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SchemaArgs {
    /// Column holding the margin-1 lower time bound.
    #[arg(long, default_value = "t11")]
    t1_lower: String,
    /// Column holding the margin-1 upper bound (NA or empty when absent).
    #[arg(long, default_value = "t12")]
    t1_upper: String,
    #[arg(long, default_value = "t21")]
    t2_lower: String,
    #[arg(long, default_value = "t22")]
    t2_upper: String,
    /// Margin-1 censor code column (U, R or I per row).
    #[arg(long, default_value = "cens1")]
    cens1: String,
    #[arg(long, default_value = "cens2")]
    cens2: String,
}

impl SchemaArgs {
    fn schema(&self) -> DataSchema {
        DataSchema {
            t1_lower: self.t1_lower.clone(),
            t1_upper: self.t1_upper.clone(),
            t2_lower: self.t2_lower.clone(),
            t2_upper: self.t2_upper.clone(),
            cens1: self.cens1.clone(),
            cens2: self.cens2.clone(),
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Copula family code: AMH, C0, FGM, F, GAL, N, G0, J0 or PL.
    #[arg(long, default_value = "C0")]
    copula: String,
    /// Margin links as a pair, e.g. PH,PO (codes PH, PO, probit).
    #[arg(long, default_value = "PH,PO", value_delimiter = ',')]
    margins: Vec<String>,
    /// Interior knots of the monotone baseline spline.
    #[arg(long, default_value_t = 8)]
    knots: usize,
    /// Ridge penalty on the baseline raw coefficients.
    #[arg(long, default_value_t = 1e-4)]
    ridge: f64,
    /// Gradient tolerance of the trust-region maximizer.
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Iteration cap of the trust-region maximizer.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

impl ModelArgs {
    fn copula(&self) -> Result<CopulaId> {
        CopulaId::from_code(&self.copula)
            .with_context(|| format!("unknown copula code `{}`", self.copula))
    }

    fn links(&self) -> Result<(LinkKind, LinkKind)> {
        if self.margins.len() != 2 {
            bail!("--margins needs exactly two comma-separated link codes");
        }
        let l1 = LinkKind::from_code(&self.margins[0])
            .with_context(|| format!("unknown link code `{}`", self.margins[0]))?;
        let l2 = LinkKind::from_code(&self.margins[1])
            .with_context(|| format!("unknown link code `{}`", self.margins[1]))?;
        Ok((l1, l2))
    }

    fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            interior_knots: self.knots,
        }
    }

    fn optim(&self) -> OptimOptions {
        OptimOptions {
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            ..OptimOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus a JSON truth sidecar).
    Simulate {
        /// Dependence scenario: A (constant) or B (covariate-driven).
        #[arg(long, default_value = "A")]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Margin-1 generating link (PH or PO).
        #[arg(long, default_value = "PH")]
        link1: String,
        /// Output CSV path; the sidecar lands next to it as <out>.truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one joint copula survival model and print its summary.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Margin-1 covariates (comma-separated names; default all).
        #[arg(long, value_delimiter = ',')]
        eta1: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        eta2: Option<Vec<String>>,
        /// Dependence covariates (default none: intercept only).
        #[arg(long, value_delimiter = ',')]
        eta3: Option<Vec<String>>,
        /// Columns to standardize before fitting.
        #[arg(long, value_delimiter = ',')]
        standardize: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ranking-based variable selection over bootstrap subsamples.
    Brbvs {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Maximum candidate set size.
        #[arg(long)]
        kmax: usize,
        /// Subsample size (default n/2).
        #[arg(long)]
        m: Option<usize>,
        /// Ratio decay exponent in (0,1].
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Bootstrap replicates.
        #[arg(long = "B", default_value_t = 50)]
        b_reps: usize,
        /// Ranking metric: FIM or Abs.
        #[arg(long, default_value = "FIM")]
        metric: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        standardize: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        /// Also render the selection-frequency histogram.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Pick the best link per margin by univariate AIC/BIC.
    SelectLink {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Criterion: AIC or BIC.
        #[arg(long, default_value = "AIC")]
        measure: String,
        #[arg(long, value_delimiter = ',')]
        eta1: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        eta2: Option<Vec<String>>,
        #[arg(long, default_value_t = 8)]
        knots: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy forward covariate selection on the joint model.
    Forward {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "AIC")]
        measure: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy backward covariate elimination on the joint model.
    Backward {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "AIC")]
        measure: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo evaluation of the selector against generator truths.
    Evaluate {
        #[arg(long, default_value = "A")]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long = "B", default_value_t = 50)]
        b_reps: usize,
        #[arg(long, default_value = "FIM")]
        metric: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "PH")]
        link1: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the selection-frequency histogram from a saved result.
    Plot {
        /// JSON artifact produced by the brbvs subcommand.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    schema_version: u32,
    command: &'static str,
    config: C,
    result: R,
}

fn write_artifact<C: Serialize, R: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    result: R,
) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    let json = serde_json::to_string_pretty(&env)?;
    fs::write(path, json.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load(input: &Path, schema: &DataSchema, std_cols: Option<&[String]>) -> Result<Dataset> {
    let d = parse_dataset(input, schema)
        .with_context(|| format!("reading {}", input.display()))?;
    match std_cols {
        Some(cols) if !cols.is_empty() => Ok(standardize(&d, cols)?),
        _ => Ok(d),
    }
}

fn resolve_cols(d: &Dataset, names: &Option<Vec<String>>, default_all: bool) -> Result<Vec<usize>> {
    match names {
        None => Ok(if default_all { (0..d.p).collect() } else { Vec::new() }),
        Some(list) => list
            .iter()
            .filter(|n| !n.is_empty())
            .map(|n| {
                d.column_index(n)
                    .with_context(|| format!("unknown covariate `{n}`"))
            })
            .collect(),
    }
}

fn parse_scenario(code: &str) -> Result<Scenario> {
    Scenario::from_code(code).with_context(|| format!("unknown scenario `{code}`"))
}

fn parse_metric(code: &str) -> Result<Metric> {
    Metric::from_code(code).with_context(|| format!("unknown metric `{code}` (FIM or Abs)"))
}

fn parse_measure(code: &str) -> Result<Measure> {
    Measure::from_code(code).with_context(|| format!("unknown measure `{code}` (AIC or BIC)"))
}

fn parse_link(code: &str) -> Result<LinkKind> {
    LinkKind::from_code(code).with_context(|| format!("unknown link code `{code}`"))
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            scenario,
            n,
            p,
            seed,
            link1,
            out,
        } => {
            let mut cfg = SimConfig::new(n, p, parse_scenario(&scenario)?, seed);
            cfg.link1 = parse_link(&link1)?;
            let sim = generate(&cfg)?;
            let mut csv = Vec::new();
            write_dataset(&sim.dataset, &DataSchema::default(), &mut csv)?;
            fs::write(&out, &csv).with_context(|| format!("writing {}", out.display()))?;
            let sidecar = out.with_extension("truth.json");
            write_artifact(&sidecar, "simulate", &cfg, &sim.truth)?;
            println!(
                "wrote {} ({} units, {} covariates); censoring rates {:.1}% / {:.1}%",
                out.display(),
                n,
                p,
                100.0 * sim.truth.censoring_rate1,
                100.0 * sim.truth.censoring_rate2
            );
            println!("truth sidecar: {}", sidecar.display());
            Ok(())
        }
        Command::Fit {
            input,
            schema,
            model,
            eta1,
            eta2,
            eta3,
            standardize,
            out,
        } => {
            let d = load(&input, &schema.schema(), standardize.as_deref())?;
            let (l1, l2) = model.links()?;
            let mut spec = ModelSpec::new(
                model.copula()?,
                l1,
                l2,
                resolve_cols(&d, &eta1, true)?,
                resolve_cols(&d, &eta2, true)?,
                resolve_cols(&d, &eta3, false)?,
            );
            spec.baseline = model.baseline();
            spec.ridge = model.ridge;
            let fm = fit_model_with(&spec, &d, &model.optim())?;
            let report = summarize(&fm);
            println!("{report}");
            println!("{}", fm.report);
            write_artifact(&out, "fit", &spec, &report)?;
            Ok(())
        }
        Command::Brbvs {
            input,
            schema,
            model,
            kmax,
            m,
            tau,
            b_reps,
            metric,
            seed,
            standardize,
            out,
            plot,
        } => {
            let d = load(&input, &schema.schema(), standardize.as_deref())?;
            let mut cfg = BrbvsConfig::new(kmax, model.copula()?, model.links()?, m.unwrap_or(d.n / 2));
            cfg.tau = tau;
            cfg.b_reps = b_reps;
            cfg.metric = parse_metric(&metric)?;
            cfg.seed = seed;
            cfg.baseline = model.baseline();
            cfg.ridge = model.ridge;
            let res = run_brbvs(&d, &cfg)?;
            print_brbvs(&res);
            write_artifact(&out, "brbvs", &cfg, &res)?;
            if let Some(plot_path) = plot {
                fs::write(&plot_path, plot::render_svg(&res))
                    .with_context(|| format!("writing {}", plot_path.display()))?;
            }
            Ok(())
        }
        Command::SelectLink {
            input,
            schema,
            measure,
            eta1,
            eta2,
            knots,
            out,
        } => {
            let d = load(&input, &schema.schema(), None)?;
            let opts = StepwiseOptions {
                baseline: BaselineConfig {
                    interior_knots: knots,
                },
                ..StepwiseOptions::default()
            };
            let e1 = resolve_cols(&d, &eta1, true)?;
            let e2 = resolve_cols(&d, &eta2, true)?;
            let measure = parse_measure(&measure)?;
            let res = select_link(&d, measure, &e1, &e2, &opts)?;
            println!("Summary of Best Margins for Survival Analysis:");
            println!("-------------------------------------------------");
            for choice in [&res.margin1, &res.margin2] {
                println!("Survival {}:", choice.margin);
                println!("Best Link Function: {}", choice.best.code());
                for (code, value) in &choice.criteria {
                    println!("  {code}: {} = {value:.6}", res.measure);
                }
                println!("-------------------------------------------------");
            }
            write_artifact(&out, "select-link", measure.code(), &res)?;
            Ok(())
        }
        Command::Forward {
            input,
            schema,
            model,
            measure,
            out,
        } => {
            let d = load(&input, &schema.schema(), None)?;
            let opts = StepwiseOptions {
                baseline: model.baseline(),
                ridge: model.ridge,
                optim: model.optim(),
            };
            let trace = forward(
                &d,
                model.copula()?,
                model.links()?,
                parse_measure(&measure)?,
                &opts,
            )?;
            print_trace(&trace);
            write_artifact(&out, "forward", &model.copula, &trace)?;
            Ok(())
        }
        Command::Backward {
            input,
            schema,
            model,
            measure,
            out,
        } => {
            let d = load(&input, &schema.schema(), None)?;
            let opts = StepwiseOptions {
                baseline: model.baseline(),
                ridge: model.ridge,
                optim: model.optim(),
            };
            let trace = backward(
                &d,
                model.copula()?,
                model.links()?,
                parse_measure(&measure)?,
                &opts,
            )?;
            print_trace(&trace);
            write_artifact(&out, "backward", &model.copula, &trace)?;
            Ok(())
        }
        Command::Evaluate {
            scenario,
            n,
            p,
            reps,
            model,
            kmax,
            m,
            tau,
            b_reps,
            metric,
            seed,
            link1,
            out,
        } => {
            let mut sim_cfg = SimConfig::new(n, p, parse_scenario(&scenario)?, seed);
            sim_cfg.link1 = parse_link(&link1)?;
            let mut cfg = BrbvsConfig::new(kmax, model.copula()?, model.links()?, m.unwrap_or(n / 2));
            cfg.tau = tau;
            cfg.b_reps = b_reps;
            cfg.metric = parse_metric(&metric)?;
            cfg.baseline = model.baseline();
            cfg.ridge = model.ridge;
            let cfg_ref = &cfg;
            let report = evaluate(&sim_cfg, reps, seed, |d, rep_seed| {
                let mut c = cfg_ref.clone();
                c.seed = rep_seed;
                let res = run_brbvs(d, &c)?;
                Ok((
                    res.margin1.selected_indices.clone(),
                    res.margin2.selected_indices.clone(),
                ))
            })?;
            println!(
                "margin 1: FP={:.3} FN={:.3} <s>={:.3} <s∩truth>={:.3} containment={:.0}%",
                report.margin1.fp_mean,
                report.margin1.fn_mean,
                report.margin1.avg_selected,
                report.margin1.avg_correct,
                100.0 * report.margin1.containment_rate
            );
            println!(
                "margin 2: FP={:.3} FN={:.3} <s>={:.3} <s∩truth>={:.3} containment={:.0}%",
                report.margin2.fp_mean,
                report.margin2.fn_mean,
                report.margin2.avg_selected,
                report.margin2.avg_correct,
                100.0 * report.margin2.containment_rate
            );
            println!(
                "joint containment: {:.0}%",
                100.0 * report.joint_containment_rate
            );
            #[derive(Serialize)]
            struct EvalConfig<'a> {
                sim: &'a SimConfig,
                brbvs: &'a BrbvsConfig,
                reps: usize,
                master_seed: u64,
            }
            write_artifact(
                &out,
                "evaluate",
                EvalConfig {
                    sim: &sim_cfg,
                    brbvs: &cfg,
                    reps,
                    master_seed: seed,
                },
                &report,
            )?;
            Ok(())
        }
        Command::Plot { input, out } => {
            let raw = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let value: serde_json::Value = serde_json::from_str(&raw)?;
            let result = value
                .get("result")
                .cloned()
                .with_context(|| "artifact has no `result` field")?;
            let res: BrbvsResult = serde_json::from_value(result)
                .with_context(|| "artifact is not a brbvs result")?;
            fs::write(&out, plot::render_svg(&res))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn print_brbvs(res: &BrbvsResult) {
    println!("Sets of Relevant Covariates");
    println!("================================\n");
    println!("Metric: {}", res.config.metric.code());
    println!("kmax: {}", res.config.kmax);
    println!("Copula: {}", res.config.copula.code());
    println!(
        "Margins: {} {}",
        res.config.links.0.code(),
        res.config.links.1.code()
    );
    println!("\n================================\n");
    for sel in [&res.margin1, &res.margin2] {
        println!("Survival Function {}:", sel.margin);
        if sel.frequencies.is_empty() {
            println!("  - no variables selected");
        }
        for (rank, (name, freq)) in sel.frequencies.iter().enumerate() {
            println!("  - {}: {} ({:.2}%)", rank + 1, name, 100.0 * freq);
        }
        println!();
    }
    if res.subsamples_failed > 0 {
        println!(
            "note: {}/{} subsample fits failed{}",
            res.subsamples_failed,
            res.subsamples_total,
            if res.high_failure_warning {
                " (more than 20%)"
            } else {
                ""
            }
        );
    }
}

fn print_trace(trace: &bivsurv::stepwise::StepTrace) {
    println!("Results ({}):", trace.measure);
    println!("  Step  Model            {}", trace.measure);
    for s in &trace.steps {
        println!("  {:<5} {:<16} {:.3}", s.step, s.label, s.criterion);
    }
    println!("Equations:");
    println!("  eta1 ~ baseline(t1) + {}", trace.final_eta1.join(" + "));
    println!("  eta2 ~ baseline(t2) + {}", trace.final_eta2.join(" + "));
    println!("  eta3 ~ {}", trace.final_eta3.join(" + "));
}
