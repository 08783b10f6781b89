use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sobolev_trace::geometry::{touching_bound, whitney_decompose, whitney_fit, WhitneyFit};
use sobolev_trace::trace::{
    jet_trace_norm, trace_1d_linf, trace_1d_lp, trace_norm_l1p, DividedDifferenceTable,
    EXHAUSTIVE_LIMIT,
};
use sobolev_trace_cli::pipeline::{exponents, maximal_weight, metric_stage};
use sobolev_trace_cli::{
    load_experiment, run_jet_pipeline, run_l1p_pipeline, run_verification_suite, CliError, Data,
    Experiment, Overrides, PipelineResult, SuiteOptions,
};

#[derive(Parser)]
#[command(
    name = "sobtrace",
    version,
    about = "Sobolev trace norms, geodesic metrics and extension pipelines"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    hop_radius: Option<usize>,
    /// Grid nodes per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Double the grid this many times.
    #[arg(long, global = true)]
    refine: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Scalar extension: sharp field, weight, geodesic metric, McShane extension.
    Extend,
    /// Jet extension through the Whitney construction.
    ExtendJet,
    /// The trace functional of the configured data.
    TraceNorm,
    /// Weight, A1 estimate and geodesic equivalence ratio for the configured data.
    VerifyMetric,
    /// Whitney decomposition of the configured point set.
    Whitney,
    /// One-dimensional divided differences and trace functionals.
    Dd1d,
    /// Batch property checks; writes suite.csv.
    Suite {
        /// Inject a negative node into every weight fixture.
        #[arg(long)]
        inject_negative_weight: bool,
        /// Random chains per chain-inequality case.
        #[arg(long, default_value_t = 200)]
        chains: usize,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            hop_radius: self.hop_radius,
            grid: self.grid,
            refine: self.refine,
        }
    }

    fn experiment(&self) -> Result<Experiment, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
        load_experiment(path, &self.overrides())
    }
}

fn out_dir(common: &Common, exp: Option<&Experiment>) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| exp.and_then(|e| e.config.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn finish(result: PipelineResult, dir: &Path) -> Result<u8, CliError> {
    result.write(dir)?;
    for f in &result.summary.failures {
        eprintln!("FAIL: {f}");
    }
    println!("{}", serde_json::to_string_pretty(&result.summary)?);
    Ok(u8::from(!result.passed()))
}

fn trace_norm(common: &Common) -> Result<u8, CliError> {
    let exp = common.experiment()?;
    let dir = out_dir(common, Some(&exp))?;
    let cfg = &exp.config;
    let report = if cfg.m == 1 {
        trace_norm_l1p(&exp.values(), &exp.e, cfg.p, &exp.bx, &exp.grid)?
    } else {
        jet_trace_norm(&exp.jet()?, cfg.p, &exp.bx, &exp.grid)?
    };
    let corpus_id = match &exp.data {
        Data::Function(f) => Some(f.name.clone()),
        _ => None,
    };
    let summary = report.summary(
        if cfg.m == 1 { "l1p" } else { "jet" },
        corpus_id,
        Some(cfg.seed),
    );
    report.write_csv(&dir.join("sharp.csv"))?;
    summary.write_json(&dir.join("trace.json"))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn verify_metric(common: &Common) -> Result<u8, CliError> {
    let exp = common.experiment()?;
    let dir = out_dir(common, Some(&exp))?;
    let cfg = &exp.config;
    let (q, theta) = exponents(cfg.n, cfg.p);
    let sharp = if cfg.m == 1 {
        trace_norm_l1p(&exp.values(), &exp.e, cfg.p, &exp.bx, &exp.grid)?
    } else {
        jet_trace_norm(&exp.jet()?, cfg.p, &exp.bx, &exp.grid)?
    }
    .sharp_field;
    let Some(h) = maximal_weight(&sharp, theta)? else {
        return Err(CliError::Failed(
            "the data has no oscillation, so the weight vanishes".into(),
        ));
    };
    let stage = metric_stage(h, q, cfg.hop_radius, &exp.e)?;
    stage.table.write_csv(&dir.join("distances.csv"))?;
    stage.weight.field().write_csv(&dir.join("weight.csv"))?;
    let summary = json!({
        "provenance": cfg.provenance(),
        "q": q,
        "theta": theta,
        "hop_radius": cfg.hop_radius,
        "a1_norm": stage.a1.norm_estimate,
        "a1_finite": stage.a1.finite,
        "geodesic_ratio": stage.geodesic_ratio,
    });
    write_json(&dir.join("metric.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(u8::from(
        !(stage.a1.finite && stage.geodesic_ratio.is_finite()),
    ))
}

fn whitney(common: &Common) -> Result<u8, CliError> {
    let exp = common.experiment()?;
    let dir = out_dir(common, Some(&exp))?;
    let w = whitney_decompose(&exp.e, &exp.bx, exp.config.whitney_levels)?;
    w.write_csv(&dir.join("whitney.csv"))?;
    let violations = w
        .cubes()
        .iter()
        .zip(w.dists())
        .filter(|(q, &d)| whitney_fit(q.diam(), d) != WhitneyFit::Admissible)
        .count();
    let touching = (0..w.len())
        .map(|k| w.touching_indices(k).len())
        .max()
        .unwrap_or(0);
    let summary = json!({
        "provenance": exp.config.provenance(),
        "cubes": w.len(),
        "collar_cubes": w.collar().len(),
        "window_violations": violations,
        "max_touching": touching,
        "touching_bound": touching_bound(exp.config.n),
    });
    write_json(&dir.join("whitney.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(u8::from(
        violations > 0 || touching > touching_bound(exp.config.n),
    ))
}

fn dd1d(common: &Common) -> Result<u8, CliError> {
    let exp = common.experiment()?;
    let cfg = &exp.config;
    if cfg.n != 1 {
        return Err(CliError::Config(format!("dd1d needs n = 1, got {}", cfg.n)));
    }
    let dir = out_dir(common, Some(&exp))?;
    let e: Vec<f64> = exp.e.points().iter().map(|x| x[0]).collect();
    let values = exp.values();
    let table = DividedDifferenceTable::new(&e, &values, cfg.m)?;
    table.write_csv(&dir.join("divided_differences.csv"))?;
    let linf = trace_1d_linf(&values, &e, cfg.m, cfg.seed)?;
    let lp = if e.len() <= EXHAUSTIVE_LIMIT {
        Some(trace_1d_lp(&values, &e, cfg.m, cfg.p, &exp.bx, &exp.grid)?)
    } else {
        None
    };
    let summary = json!({
        "provenance": cfg.provenance(),
        "m": cfg.m,
        "sup_norm": linf.value(),
        "sup_search": linf,
        "lp_first": lp.map(|v| v.0),
        "lp_second": lp.map(|v| v.1),
    });
    write_json(&dir.join("dd1d.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn suite(common: &Common, inject: bool, chains: usize) -> Result<u8, CliError> {
    let exp = match &common.config {
        Some(_) => Some(common.experiment()?),
        None => None,
    };
    let seed = common
        .seed
        .or(exp.as_ref().map(|e| e.config.seed))
        .unwrap_or(42);
    let dir = out_dir(common, exp.as_ref())?;
    let report = run_verification_suite(&SuiteOptions {
        seed,
        chains,
        inject_negative_weight: inject,
    })?;
    report.write_csv(&dir.join("suite.csv"))?;
    for r in &report.rows {
        println!(
            "{:<20} {:<32} {:>12.4e} {:>12.4e} {}",
            r.check, r.fixture, r.measured, r.bound, r.status
        );
    }
    Ok(report.exit_code())
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Extend => {
            let exp = common.experiment()?;
            let dir = out_dir(common, Some(&exp))?;
            finish(run_l1p_pipeline(&exp)?, &dir)
        }
        Command::ExtendJet => {
            let exp = common.experiment()?;
            let dir = out_dir(common, Some(&exp))?;
            finish(run_jet_pipeline(&exp)?, &dir)
        }
        Command::TraceNorm => trace_norm(common),
        Command::VerifyMetric => verify_metric(common),
        Command::Whitney => whitney(common),
        Command::Dd1d => dd1d(common),
        Command::Suite {
            inject_negative_weight,
            chains,
        } => suite(common, *inject_negative_weight, *chains),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
