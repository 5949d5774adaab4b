//! Monte Carlo studies: sampling-distribution checks (QQ), interval
//! coverage, and test size/power. Every study derives its randomness from
//! `master_seed` through a fixed tree — cell c uses `split(master_seed, c)`,
//! replication r of a cell uses `split(cell_seed, r)` as the scenario seed
//! and `split(rep_seed, 4)` as the bootstrap seed — so runs are exactly
//! reproducible and rows are independent of execution order.
//!
//! Replications that fail (an infeasible scenario draw, a fit that does not
//! converge, a singular Hessian) are excluded from the cell's statistics
//! and counted in its `excluded` column; a cell that loses more than 5% of
//! its replications fails the whole run.

use rayon::prelude::*;
use serde::Serialize;

use assort_core::dataset::{generate_scenario, ScenarioSpec};
use assort_core::hypotheses::PropertySet;
use assort_core::inference::{run_pipeline, test_property, Decision, PipelineConfig};
use assort_core::rng::split;
use assort_core::stats::{ks_test_standard_normal, KsTest};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Fraction of replications a cell may lose before the run is rejected.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

const BOOTSTRAP_STREAM: u64 = 4;

fn pipeline_config(cfg: &ExperimentConfig) -> PipelineConfig {
    PipelineConfig {
        lambda_c: cfg.lambda_c,
        alpha: cfg.alpha,
        b: cfg.b,
        ..PipelineConfig::default()
    }
}

fn check_exclusions(cell: &str, excluded: usize, reps: usize) -> CliResult<()> {
    if excluded as f64 > MAX_EXCLUDED_FRACTION * reps as f64 {
        return Err(CliError::ExcessExclusions {
            cell: cell.to_string(),
            excluded,
            reps,
        });
    }
    Ok(())
}

/// One replication of the QQ study: both pivotal statistics, or the reason
/// the replication was excluded.
#[derive(Clone, Debug, Serialize)]
pub struct QqRow {
    pub rep: usize,
    pub std_theta_d_1: Option<f64>,
    pub std_delta_1: Option<f64>,
    pub error: Option<String>,
}

pub struct QqResult {
    pub rows: Vec<QqRow>,
    /// KS test of the standardized debiased score of product 1.
    pub ks_theta: KsTest,
    /// KS test of the standardized gap estimate Δ̂_1.
    pub ks_delta: KsTest,
    pub excluded: usize,
}

/// Draws `reps` independent scenarios from the base spec and standardizes
/// θ̂ᵈ_1 and Δ̂_1 against their per-replication truths; both should be
/// asymptotically standard normal.
pub fn run_qq(cfg: &ExperimentConfig) -> CliResult<QqResult> {
    cfg.validate()?;
    let pipe = pipeline_config(cfg);
    let cell_seed = split(cfg.master_seed, 0);

    let rows: Vec<QqRow> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = split(cell_seed, rep as u64);
            match qq_replication(&cfg.scenario, &pipe, rep_seed) {
                Ok((t, d)) => QqRow {
                    rep,
                    std_theta_d_1: Some(t),
                    std_delta_1: Some(d),
                    error: None,
                },
                Err(e) => QqRow {
                    rep,
                    std_theta_d_1: None,
                    std_delta_1: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let excluded = rows.iter().filter(|r| r.error.is_some()).count();
    check_exclusions("qq", excluded, cfg.reps)?;

    let thetas: Vec<f64> = rows.iter().filter_map(|r| r.std_theta_d_1).collect();
    let deltas: Vec<f64> = rows.iter().filter_map(|r| r.std_delta_1).collect();
    let ks_theta = ks_test_standard_normal(&thetas)?;
    let ks_delta = ks_test_standard_normal(&deltas)?;
    Ok(QqResult { rows, ks_theta, ks_delta, excluded })
}

fn qq_replication(
    base: &ScenarioSpec,
    pipe: &PipelineConfig,
    rep_seed: u64,
) -> assort_core::Result<(f64, f64)> {
    let spec = ScenarioSpec { seed: Some(rep_seed), ..base.clone() };
    let scenario = generate_scenario(&spec)?;
    let boot_seed = split(rep_seed, BOOTSTRAP_STREAM);
    let out = run_pipeline(&scenario.dataset, &scenario.revenues, pipe, boot_seed)?;

    let truth = scenario.theta_star.to_centered();
    let se_theta = (out.pinv.entry(1, 1) / scenario.dataset.l() as f64).sqrt();
    let std_theta = (out.theta_debiased.theta()[1] - truth.theta()[1]) / se_theta;
    let std_delta = out.gaps.standardized_gap(1, scenario.delta_targets[0]);
    Ok((std_theta, std_delta))
}

/// One cell of the coverage study.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageRow {
    pub k_star: usize,
    pub l: usize,
    /// Fraction of included replications whose interval contains the true
    /// optimal size.
    pub coverage: f64,
    /// Configured replications (included + excluded).
    pub reps: usize,
    /// Mean of K̂_U − K̂_L over included replications.
    pub mean_width: f64,
    pub excluded: usize,
}

/// Sweeps k_star_grid × l_grid; cells are seeded in that enumeration order
/// (k outer, L inner) and rows come back in the same order.
pub fn run_coverage(cfg: &ExperimentConfig) -> CliResult<Vec<CoverageRow>> {
    cfg.validate_for_coverage()?;
    let pipe = pipeline_config(cfg);
    let mut rows = Vec::new();
    let mut cell_idx = 0u64;
    for &k_star in &cfg.k_star_cells() {
        for &l in &cfg.l_grid {
            let cell_seed = split(cfg.master_seed, cell_idx);
            cell_idx += 1;
            let spec = ScenarioSpec {
                k_star_target: k_star,
                l,
                ..cfg.scenario.clone()
            };

            let results: Vec<Option<(bool, usize)>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = split(cell_seed, rep as u64);
                    coverage_replication(&spec, &pipe, rep_seed).ok()
                })
                .collect();

            let excluded = results.iter().filter(|r| r.is_none()).count();
            check_exclusions(&format!("coverage k_star={k_star} L={l}"), excluded, cfg.reps)?;
            let included = (cfg.reps - excluded) as f64;
            let covered = results.iter().flatten().filter(|(c, _)| *c).count();
            let width_sum: usize = results.iter().flatten().map(|(_, w)| w).sum();
            rows.push(CoverageRow {
                k_star,
                l,
                coverage: covered as f64 / included,
                reps: cfg.reps,
                mean_width: width_sum as f64 / included,
                excluded,
            });
        }
    }
    Ok(rows)
}

fn coverage_replication(
    spec: &ScenarioSpec,
    pipe: &PipelineConfig,
    rep_seed: u64,
) -> assort_core::Result<(bool, usize)> {
    let spec = ScenarioSpec { seed: Some(rep_seed), ..spec.clone() };
    let scenario = generate_scenario(&spec)?;
    let boot_seed = split(rep_seed, BOOTSTRAP_STREAM);
    let out = run_pipeline(&scenario.dataset, &scenario.revenues, pipe, boot_seed)?;
    let covered = out.ci.contains(scenario.k_star);
    Ok((covered, out.ci.k_upper - out.ci.k_lower))
}

/// One cell of the size/power study.
#[derive(Clone, Debug, Serialize)]
pub struct PowerRow {
    /// The hypothesis label from the config.
    pub example_id: String,
    /// Distance of the planted optimum from the null target; d = 0 measures
    /// size, d ≥ 1 measures power.
    pub d: usize,
    pub l: usize,
    pub reject_rate: f64,
    pub reps: usize,
    pub excluded: usize,
}

/// Sweeps d_grid × l_grid for the configured hypothesis: cell d plants the
/// true optimal size at k_star_target + d while the tested claim stays
/// fixed. Cells are seeded in enumeration order (d outer, L inner).
pub fn run_power(cfg: &ExperimentConfig) -> CliResult<Vec<PowerRow>> {
    cfg.validate_for_power()?;
    let hypothesis = cfg.hypothesis.as_ref().ok_or_else(|| {
        CliError::Core(assort_core::Error::InvalidInput(
            "the power study needs a hypothesis in the config".into(),
        ))
    })?;
    let k0 = hypothesis.build(cfg.scenario.n)?;
    let example_id = hypothesis.label();
    let pipe = pipeline_config(cfg);

    let mut rows = Vec::new();
    let mut cell_idx = 0u64;
    for &d in &cfg.d_grid {
        for &l in &cfg.l_grid {
            let cell_seed = split(cfg.master_seed, cell_idx);
            cell_idx += 1;
            let spec = ScenarioSpec {
                k_star_target: cfg.scenario.k_star_target + d,
                l,
                ..cfg.scenario.clone()
            };

            let results: Vec<Option<bool>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = split(cell_seed, rep as u64);
                    power_replication(&spec, &pipe, &k0, rep_seed).ok()
                })
                .collect();

            let excluded = results.iter().filter(|r| r.is_none()).count();
            check_exclusions(&format!("power d={d} L={l}"), excluded, cfg.reps)?;
            let included = (cfg.reps - excluded) as f64;
            let rejected = results.iter().flatten().filter(|&&r| r).count();
            rows.push(PowerRow {
                example_id: example_id.clone(),
                d,
                l,
                reject_rate: rejected as f64 / included,
                reps: cfg.reps,
                excluded,
            });
        }
    }
    Ok(rows)
}

fn power_replication(
    spec: &ScenarioSpec,
    pipe: &PipelineConfig,
    k0: &PropertySet,
    rep_seed: u64,
) -> assort_core::Result<bool> {
    let spec = ScenarioSpec { seed: Some(rep_seed), ..spec.clone() };
    let scenario = generate_scenario(&spec)?;
    let boot_seed = split(rep_seed, BOOTSTRAP_STREAM);
    let out = run_pipeline(&scenario.dataset, &scenario.revenues, pipe, boot_seed)?;
    Ok(test_property(&out.ci, k0) == Decision::Reject)
}

// ---------------------------------------------------------------------------
// CSV output. Hand-rolled so the byte layout is fully pinned: floats print
// with 17 significant digits ({:.16e}), integers plain, strings quoted only
// when they contain a delimiter, quote, or newline.

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn qq_csv(result: &QqResult) -> String {
    let mut out = String::from("rep,std_theta_d_1,std_delta_1,error\n");
    for row in &result.rows {
        let t = row.std_theta_d_1.map(fmt_f64).unwrap_or_default();
        let d = row.std_delta_1.map(fmt_f64).unwrap_or_default();
        let e = row.error.as_deref().map(csv_field).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", row.rep, t, d, e));
    }
    out
}

pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("k_star,L,coverage,reps,mean_width,excluded\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k_star,
            r.l,
            fmt_f64(r.coverage),
            r.reps,
            fmt_f64(r.mean_width),
            r.excluded
        ));
    }
    out
}

pub fn power_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("example_id,d,L,reject_rate,reps,excluded\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&r.example_id),
            r.d,
            r.l,
            fmt_f64(r.reject_rate),
            r.reps,
            r.excluded
        ));
    }
    out
}
