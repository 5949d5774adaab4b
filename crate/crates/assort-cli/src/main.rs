use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use assort_cli::config::{ExperimentConfig, HypothesisSpec};
use assort_cli::error::{CliError, CliResult};
use assort_cli::experiments::{
    coverage_csv, power_csv, qq_csv, run_coverage, run_power, run_qq,
};
use assort_core::dataset::{generate_scenario, ObservedDataset, ScenarioSpec};
use assort_core::estimation::{debias_with, fit_mle, penalty_weight, FitConfig, HessianPseudoinverse, LikelihoodWorkspace};
use assort_core::inference::{
    gap_estimates, run_pipeline, single_product_test, test_property, Decision, PipelineConfig,
};
use assort_core::model::{optimal_assortment, RevenueVector};

/// Assortment optimization and inference under the multinomial logit model.
#[derive(Parser)]
#[command(name = "assort", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scenario description.
    Simulate {
        /// Scenario JSON file (n, sigma_theta_sq, k_star_target, L, ...).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the scenario's product revenues as a JSON array.
        #[arg(long)]
        revenues_out: Option<PathBuf>,
    },
    /// Fit scores to observed choices and report gap estimates.
    Estimate {
        /// Dataset JSON file.
        #[arg(long)]
        data: PathBuf,
        /// Product revenues: a comma-separated list or @file with a JSON
        /// array, highest first.
        #[arg(long)]
        revenues: String,
        /// Penalty multiplier c in λ = c·sqrt(2^n·p·ln(n)/(n·L)).
        #[arg(long, default_value_t = 0.25)]
        lambda_c: f64,
        /// Write the full estimate as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a claim about the optimal assortment.
    Test {
        #[arg(long)]
        data: PathBuf,
        /// Product revenues: comma-separated list or @file.
        #[arg(long)]
        revenues: String,
        /// Claim as inline JSON or @file, e.g.
        /// '{"kind":"group_not_contained","a":[2,4,6,8]}'.
        #[arg(long, conflicts_with = "product")]
        hypothesis: Option<String>,
        /// Instead: test membership of one product with a normal z-test.
        #[arg(long)]
        product: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap replicates.
        #[arg(long, default_value_t = 200)]
        b: usize,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda_c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo study and write its CSV table.
    Experiment {
        kind: ExperimentKind,
        /// Experiment JSON config.
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to <kind>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    /// Sampling-distribution check of the standardized estimates.
    Qq,
    /// Confidence-interval coverage across true optimal sizes.
    Coverage,
    /// Rejection rates under the null (d = 0) and alternatives (d ≥ 1).
    Power,
}

fn main() {
    // Usage problems (unknown flags, missing arguments) exit 1; clap's
    // default of 2 is reserved here for quality failures like non-convergence.
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let _ = e.print();
        std::process::exit(if e.use_stderr() { 1 } else { 0 });
    });
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, out, revenues_out } => {
            simulate(&config, seed, out.as_deref(), revenues_out.as_deref())
        }
        Command::Estimate { data, revenues, lambda_c, out } => {
            estimate(&data, &revenues, lambda_c, out.as_deref())
        }
        Command::Test { data, revenues, hypothesis, product, alpha, b, seed, lambda_c, out } => {
            test(
                &data,
                &revenues,
                hypothesis.as_deref(),
                product,
                alpha,
                b,
                seed,
                lambda_c,
                out.as_deref(),
            )
        }
        Command::Experiment { kind, config, out, seed, jobs } => {
            experiment(kind, &config, out.as_deref(), seed, jobs)
        }
    }
}

fn simulate(
    config: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    revenues_out: Option<&Path>,
) -> CliResult<()> {
    let text = fs::read_to_string(config)?;
    let mut spec: ScenarioSpec = serde_json::from_str(&text)?;
    if let Some(s) = seed {
        spec.seed = Some(s);
    }
    let scenario = generate_scenario(&spec)?;
    let dataset_json = scenario.dataset.to_json_string();

    let summary = format!(
        "n = {}, offered sets = {}, L = {}, p = {:.6}, true optimal size = {}",
        scenario.dataset.n(),
        scenario.dataset.num_sets(),
        scenario.dataset.l(),
        scenario.dataset.sampling_p(),
        scenario.k_star,
    );
    match out {
        Some(path) => {
            fs::write(path, &dataset_json)?;
            println!("{summary}");
            println!("dataset written to {}", path.display());
        }
        None => {
            println!("{dataset_json}");
            eprintln!("{summary}");
        }
    }
    if let Some(path) = revenues_out {
        let products = &scenario.revenues.r()[1..];
        fs::write(path, serde_json::to_string_pretty(products)? + "\n")?;
        println!("revenues written to {}", path.display());
    }
    Ok(())
}

fn parse_revenues(arg: &str, n: usize) -> CliResult<RevenueVector> {
    let products: Vec<f64> = if let Some(path) = arg.strip_prefix('@') {
        serde_json::from_str(&fs::read_to_string(path)?)?
    } else {
        arg.split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("cannot parse revenue entry {tok:?} as a number"))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?
    };
    if products.len() != n {
        return Err(CliError::Usage(format!(
            "got {} revenues for a dataset with {} products",
            products.len(),
            n
        )));
    }
    Ok(RevenueVector::from_products(products)?)
}

fn write_or_print(out: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn estimate(data: &Path, revenues: &str, lambda_c: f64, out: Option<&Path>) -> CliResult<()> {
    let dataset = ObservedDataset::load(data)?;
    let r = parse_revenues(revenues, dataset.n())?;
    let lambda = penalty_weight(lambda_c, dataset.n(), dataset.sampling_p(), dataset.l());
    let workspace = LikelihoodWorkspace::new(&dataset, lambda)?;
    let uncovered = workspace.uncovered_items();
    if !uncovered.is_empty() {
        eprintln!(
            "warning: products {uncovered:?} never appear in an offered set; \
             their scores are identified only through the penalty"
        );
    }
    let theta_hat = fit_mle(&workspace, &FitConfig::default())?;
    let pinv = HessianPseudoinverse::compute(&workspace.hessian(&theta_hat)?)?;
    let theta_debiased = debias_with(&workspace, &theta_hat, &pinv)?;
    let gaps = gap_estimates(&theta_debiased, &theta_hat, &r, &pinv, dataset.l())?;
    let plugin = optimal_assortment(&theta_debiased, &r)?;

    let result = json!({
        "lambda": lambda,
        "lambda_c": lambda_c,
        "theta_hat": theta_hat.theta(),
        "theta_debiased": theta_debiased.theta(),
        "delta_hat": gaps.deltas(),
        "sd": gaps.sds(),
        "k_star_plugin": plugin.k_star,
        "uncovered_items": uncovered,
    });
    if out.is_some() {
        println!(
            "fit converged; plug-in optimal size = {} of n = {}",
            plugin.k_star,
            dataset.n()
        );
    }
    write_or_print(out, &result)
}

#[allow(clippy::too_many_arguments)]
fn test(
    data: &Path,
    revenues: &str,
    hypothesis: Option<&str>,
    product: Option<usize>,
    alpha: f64,
    b: usize,
    seed: u64,
    lambda_c: f64,
    out: Option<&Path>,
) -> CliResult<()> {
    let dataset = ObservedDataset::load(data)?;
    let r = parse_revenues(revenues, dataset.n())?;
    let config = PipelineConfig { lambda_c, alpha, b, fit: FitConfig::default() };

    let result = match (hypothesis, product) {
        (Some(h), None) => {
            let text = match h.strip_prefix('@') {
                Some(path) => fs::read_to_string(path)?,
                None => h.to_string(),
            };
            let spec: HypothesisSpec = serde_json::from_str(&text)?;
            let k0 = spec.build(dataset.n())?;
            if k0.is_empty() {
                eprintln!(
                    "warning: the claim holds for no optimal size at n = {}; \
                     it is rejected unconditionally",
                    dataset.n()
                );
            }
            let outp = run_pipeline(&dataset, &r, &config, seed)?;
            let decision = test_property(&outp.ci, &k0);
            println!("{}", decision_str(decision));
            json!({
                "decision": decision_str(decision),
                "hypothesis": spec,
                "k0": k0.members(),
                "k_lower": outp.ci.k_lower,
                "k_upper": outp.ci.k_upper,
                "c_w": outp.ci.c_w,
                "alpha": alpha,
                "b": b,
                "seed": seed,
                "lambda": outp.lambda,
            })
        }
        (None, Some(i)) => {
            let lambda = penalty_weight(lambda_c, dataset.n(), dataset.sampling_p(), dataset.l());
            let workspace = LikelihoodWorkspace::new(&dataset, lambda)?;
            let theta_hat = fit_mle(&workspace, &FitConfig::default())?;
            let pinv = HessianPseudoinverse::compute(&workspace.hessian(&theta_hat)?)?;
            let theta_debiased = debias_with(&workspace, &theta_hat, &pinv)?;
            let gaps = gap_estimates(&theta_debiased, &theta_hat, &r, &pinv, dataset.l())?;
            let d = single_product_test(&gaps, i, alpha)?;
            println!("{}", decision_str(d.decision));
            json!({
                "decision": decision_str(d.decision),
                "product": d.product,
                "delta_hat": d.delta_hat,
                "sd": d.sd,
                "z": d.z,
                "alpha": alpha,
                "lambda": lambda,
            })
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --hypothesis or --product".into(),
            ))
        }
    };
    write_or_print(out, &result)
}

fn decision_str(d: Decision) -> &'static str {
    match d {
        Decision::Reject => "reject",
        Decision::FailToReject => "fail_to_reject",
    }
}

fn experiment(
    kind: ExperimentKind,
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> CliResult<()> {
    if let Some(j) = jobs {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let mut cfg = ExperimentConfig::from_json_str(&fs::read_to_string(config)?)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let (default_name, csv, summary) = match kind {
        ExperimentKind::Qq => {
            let result = run_qq(&cfg)?;
            let summary = format!(
                "qq: reps = {}, excluded = {}\n\
                 std_theta_d_1: KS statistic = {:.4}, p = {:.4}\n\
                 std_delta_1:   KS statistic = {:.4}, p = {:.4}",
                cfg.reps,
                result.excluded,
                result.ks_theta.statistic,
                result.ks_theta.p_value,
                result.ks_delta.statistic,
                result.ks_delta.p_value,
            );
            ("qq.csv", qq_csv(&result), summary)
        }
        ExperimentKind::Coverage => {
            let rows = run_coverage(&cfg)?;
            let mut summary = String::from("coverage (k_star, L -> coverage, mean width):");
            for r in &rows {
                summary.push_str(&format!(
                    "\n  k* = {}, L = {:>4} -> {:.3}, width {:.2}",
                    r.k_star, r.l, r.coverage, r.mean_width
                ));
            }
            ("coverage.csv", coverage_csv(&rows), summary)
        }
        ExperimentKind::Power => {
            let rows = run_power(&cfg)?;
            let mut summary = String::from("rejection rates (d, L -> rate):");
            for r in &rows {
                summary.push_str(&format!(
                    "\n  {} d = {}, L = {:>4} -> {:.3}",
                    r.example_id, r.d, r.l, r.reject_rate
                ));
            }
            ("power.csv", power_csv(&rows), summary)
        }
    };
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(default_name));
    fs::write(&path, csv)?;
    println!("{summary}");
    println!("table written to {}", path.display());
    Ok(())
}
