//! Inference on the size of the optimal assortment: plug-in gap estimates
//! with delta-method standard errors, a Gaussian-multiplier bootstrap for
//! the sup-statistic critical value, the resulting confidence interval for
//! the number of stocked products, and the derived hypothesis tests.
//!
//! The full pipeline is: fit the penalized MLE, debias it against the
//! unpenalized score equation, estimate the gap sequence from the debiased
//! scores, bootstrap the maximum of the standardized gap statistics, and
//! read off the interval
//!
//!   K̂_L = max{ k : Δ̂_k < −ĉ·σ̂_k },   K̂_U = max{ k : Δ̂_k ≤ +ĉ·σ̂_k },
//!
//! (max of an empty set is 0). A candidate set of sizes is rejected exactly
//! when it misses [K̂_L, K̂_U].

use nalgebra::DVector;

use crate::dataset::ObservedDataset;
use crate::error::{Error, Result};
use crate::estimation::{
    debias_with, fit_mle, penalty_weight, FitConfig, HessianPseudoinverse, LikelihoodWorkspace,
};
use crate::hypotheses::PropertySet;
use crate::model::{delta_sequence, PreferenceVector, RevenueVector};
use crate::rng::Rng;
use crate::stats::normal_quantile;

/// Gap estimates Δ̂_k for k = 1..n with their gradient directions and
/// delta-method standard errors.
///
/// Δ̂ is evaluated on the debiased scores in the mean-centered scale; the
/// direction vectors v̂_k = ∇Δ_k and the variances v̂ᵀH†v̂/L are evaluated
/// at the centered MLE, whose weights û_j = e^{θ̂'_j} enter
///
///   v̂_k = ( −r_k·û_0, (r_1 − r_k)·û_1, …, (r_{k−1} − r_k)·û_{k−1}, 0, …, 0 ).
pub struct GapEstimates {
    delta_hat: Vec<f64>,
    v_hat: Vec<DVector<f64>>,
    sd: Vec<f64>,
    l: usize,
}

impl GapEstimates {
    pub fn n(&self) -> usize {
        self.delta_hat.len()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Δ̂_k, 1-based.
    pub fn delta(&self, k: usize) -> f64 {
        self.delta_hat[k - 1]
    }

    /// σ̂_k, 1-based.
    pub fn sd(&self, k: usize) -> f64 {
        self.sd[k - 1]
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta_hat
    }

    pub fn sds(&self) -> &[f64] {
        &self.sd
    }

    /// ∇Δ_k at the centered MLE, 1-based.
    pub fn direction(&self, k: usize) -> &DVector<f64> {
        &self.v_hat[k - 1]
    }

    /// (Δ̂_k − reference) / σ̂_k — standardized against a known gap value.
    pub fn standardized_gap(&self, k: usize, reference: f64) -> f64 {
        (self.delta(k) - reference) / self.sd(k)
    }
}

pub fn gap_estimates(
    theta_debiased: &PreferenceVector,
    theta_mle: &PreferenceVector,
    revenues: &RevenueVector,
    pinv: &HessianPseudoinverse,
    l: usize,
) -> Result<GapEstimates> {
    let n = revenues.n();
    if theta_debiased.n() != n || theta_mle.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "scores have n = {}/{}, revenues have n = {}",
            theta_debiased.n(),
            theta_mle.n(),
            n
        )));
    }
    if pinv.dim() != n + 1 {
        return Err(Error::DimensionMismatch(format!(
            "pseudoinverse dim {} does not match n + 1 = {}",
            pinv.dim(),
            n + 1
        )));
    }
    if l == 0 {
        return Err(Error::InvalidInput("gap estimates need l >= 1".into()));
    }

    let delta_hat = delta_sequence(theta_debiased, revenues, true)?.as_slice().to_vec();

    let u_hat = theta_mle.to_centered().weights();
    let r = revenues.r();
    let mut v_hat = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for k in 1..=n {
        let mut v = DVector::zeros(n + 1);
        v[0] = -r[k] * u_hat[0];
        for j in 1..k {
            v[j] = (r[j] - r[k]) * u_hat[j];
        }
        let variance = pinv.quadratic_form(&v) / l as f64;
        let s = variance.sqrt();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::DegenerateVariance { k });
        }
        v_hat.push(v);
        sd.push(s);
    }

    Ok(GapEstimates { delta_hat, v_hat, sd, l })
}

/// Critical value from the Gaussian-multiplier bootstrap of
/// W = max_k Σ_{S,ℓ} (a_kᵀ g_{S,ℓ}) z_{S,ℓ}, where a_k = H†v̂_k / √(L·v̂_kᵀH†v̂_k),
/// g_{S,ℓ} is the score residual of draw ℓ on set S — one indicator minus the
/// fitted probabilities, over the *augmented* coordinates S ∪ {0} — and the
/// z's are fresh standard normals per replicate.
pub struct BootstrapQuantile {
    samples: Vec<f64>,
    alpha: f64,
    c_w: f64,
    seed: u64,
}

impl BootstrapQuantile {
    /// W samples in replicate order (replicate b uses RNG substream b).
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn replicates(&self) -> usize {
        self.samples.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The ⌈(1−α)B⌉-th order statistic of the W samples.
    pub fn critical_value(&self) -> f64 {
        self.c_w
    }
}

/// 0-based index of the ⌈(1−α)b⌉-th order statistic.
pub fn quantile_index(alpha: f64, b: usize) -> usize {
    let rank = ((1.0 - alpha) * b as f64).ceil() as usize;
    rank.clamp(1, b) - 1
}

pub fn bootstrap_quantile(
    dataset: &ObservedDataset,
    gaps: &GapEstimates,
    pinv: &HessianPseudoinverse,
    theta_mle: &PreferenceVector,
    alpha: f64,
    b: usize,
    seed: u64,
) -> Result<BootstrapQuantile> {
    let n = dataset.n();
    if gaps.n() != n || theta_mle.n() != n || pinv.dim() != n + 1 {
        return Err(Error::DimensionMismatch(
            "bootstrap inputs disagree on the number of products".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("bootstrap level {alpha} must be in (0, 1)")));
    }
    if b < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 replicates".into()));
    }
    let l = dataset.l();
    let num_sets = dataset.num_sets();
    let rows = num_sets * l;
    if rows == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one offered set".into()));
    }

    // a_k = H†v̂_k / (L·σ̂_k); note √(L·v̂ᵀH†v̂) = L·σ̂.
    let lf = l as f64;
    let a: Vec<DVector<f64>> =
        (1..=n).map(|k| pinv.apply(gaps.direction(k)) / (lf * gaps.sd(k))).collect();

    // Fitted probabilities per set over its augmented coordinates.
    let theta = theta_mle.theta();
    let mut set_coords: Vec<Vec<usize>> = Vec::with_capacity(num_sets);
    let mut set_probs: Vec<Vec<f64>> = Vec::with_capacity(num_sets);
    for set in dataset.sets() {
        let mut coords = Vec::with_capacity(set.len() + 1);
        coords.push(0usize);
        coords.extend_from_slice(set.items());
        let m = coords.iter().map(|&c| theta[c]).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = coords.iter().map(|&c| (theta[c] - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        set_probs.push(exps.into_iter().map(|e| e / sum).collect());
        set_coords.push(coords);
    }

    // Coefficient matrix, column-major: coeff[(k−1)·rows + j] with row
    // j = s·L + ℓ. Because the residual g_{S,ℓ} is one indicator minus the
    // fitted probabilities, a_kᵀg_{S,ℓ} = a_k[choice] − Σ_{i∈S₊} a_k[i]·p̂_i.
    let mut coeff = vec![0.0f64; rows * n];
    for (k_idx, ak) in a.iter().enumerate() {
        let col = &mut coeff[k_idx * rows..(k_idx + 1) * rows];
        for s in 0..num_sets {
            let base: f64 = set_coords[s]
                .iter()
                .zip(&set_probs[s])
                .map(|(&c, &p)| ak[c] * p)
                .sum();
            let row_base = s * l;
            for (ell, &choice) in dataset.choices()[s].iter().enumerate() {
                col[row_base + ell] = ak[choice] - base;
            }
        }
    }

    // Replicates: substream b of the bootstrap seed drives replicate b; the
    // multipliers fill in row order (set-major, then draw).
    let mut samples = Vec::with_capacity(b);
    let mut z = vec![0.0f64; rows];
    for rep in 0..b {
        let mut rng = Rng::substream(seed, rep as u64);
        rng.fill_normals(&mut z);
        let mut w = f64::NEG_INFINITY;
        for k_idx in 0..n {
            let col = &coeff[k_idx * rows..(k_idx + 1) * rows];
            let mut dot = 0.0;
            for (c, zv) in col.iter().zip(&z) {
                dot += c * zv;
            }
            w = w.max(dot);
        }
        samples.push(w);
    }

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("W samples are finite"));
    let c_w = sorted[quantile_index(alpha, b)];
    Ok(BootstrapQuantile { samples, alpha, c_w, seed })
}

/// Interval of plausible optimal-assortment sizes, closed on both ends.
/// `k_lower` can be 0 when even Δ̂_1 is not significantly negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub k_lower: usize,
    pub k_upper: usize,
    pub alpha: f64,
    pub c_w: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, k: usize) -> bool {
        self.k_lower <= k && k <= self.k_upper
    }
}

/// Interval from raw statistics: the largest k with Δ̂_k significantly
/// negative, and the largest k with Δ̂_k not significantly positive.
pub fn interval_from_stats(
    delta_hat: &[f64],
    sd: &[f64],
    c_w: f64,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if delta_hat.len() != sd.len() || delta_hat.is_empty() {
        return Err(Error::DimensionMismatch(
            "interval needs matching nonempty delta and sd slices".into(),
        ));
    }
    if !(c_w.is_finite() && c_w >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "critical value {c_w} must be finite and nonnegative"
        )));
    }
    let mut k_lower = 0;
    let mut k_upper = 0;
    for (idx, (&d, &s)) in delta_hat.iter().zip(sd).enumerate() {
        let k = idx + 1;
        if d < -c_w * s {
            k_lower = k;
        }
        if d <= c_w * s {
            k_upper = k;
        }
    }
    Ok(ConfidenceInterval { k_lower, k_upper, alpha, c_w })
}

pub fn confidence_interval(
    gaps: &GapEstimates,
    boot: &BootstrapQuantile,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    interval_from_stats(gaps.deltas(), gaps.sds(), boot.critical_value().max(0.0), alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Reject,
    FailToReject,
}

/// Tests "the optimal size lies in `k0`" by checking whether `k0` meets the
/// confidence interval. An empty `k0` (an impossible hypothesis) is always
/// rejected.
pub fn test_property(ci: &ConfidenceInterval, k0: &PropertySet) -> Decision {
    if k0.members().iter().any(|&k| ci.contains(k)) {
        Decision::FailToReject
    } else {
        Decision::Reject
    }
}

/// One-product membership test: conclude product `i` belongs to the optimal
/// assortment when the upper normal confidence bound of Δ_i is negative.
#[derive(Clone, Copy, Debug)]
pub struct SingleProductDecision {
    pub product: usize,
    pub delta_hat: f64,
    pub sd: f64,
    /// Φ⁻¹(1 − α/2).
    pub z: f64,
    pub decision: Decision,
}

pub fn single_product_from_stats(
    product: usize,
    delta_hat: f64,
    sd: f64,
    alpha: f64,
) -> Result<SingleProductDecision> {
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::DegenerateVariance { k: product });
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let decision =
        if delta_hat + z * sd < 0.0 { Decision::Reject } else { Decision::FailToReject };
    Ok(SingleProductDecision { product, delta_hat, sd, z, decision })
}

/// Tests membership of product `i`; rejecting means the data support
/// i ∈ optimal assortment at level α.
pub fn single_product_test(
    gaps: &GapEstimates,
    i: usize,
    alpha: f64,
) -> Result<SingleProductDecision> {
    if i == 0 || i > gaps.n() {
        return Err(Error::InvalidInput(format!(
            "product {i} is outside 1..={}",
            gaps.n()
        )));
    }
    single_product_from_stats(i, gaps.delta(i), gaps.sd(i), alpha)
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineConfig {
    /// Multiplier c in the penalty weight c·sqrt(2^n·p·ln(n)/(n·L)).
    pub lambda_c: f64,
    /// Overall level of the confidence interval; the bootstrap runs at α/2
    /// per side.
    pub alpha: f64,
    /// Bootstrap replicates.
    pub b: usize,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { lambda_c: 1.0, alpha: 0.05, b: 200, fit: FitConfig::default() }
    }
}

pub struct PipelineOutput {
    pub lambda: f64,
    pub theta_hat: PreferenceVector,
    pub theta_debiased: PreferenceVector,
    pub pinv: HessianPseudoinverse,
    pub gaps: GapEstimates,
    pub boot: BootstrapQuantile,
    pub ci: ConfidenceInterval,
}

/// Everything from raw data to the confidence interval. `seed` drives only
/// the bootstrap multipliers.
pub fn run_pipeline(
    dataset: &ObservedDataset,
    revenues: &RevenueVector,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineOutput> {
    if revenues.n() != dataset.n() {
        return Err(Error::DimensionMismatch(format!(
            "revenues have n = {}, dataset has n = {}",
            revenues.n(),
            dataset.n()
        )));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "level {} must be in (0, 1)",
            config.alpha
        )));
    }
    let lambda =
        penalty_weight(config.lambda_c, dataset.n(), dataset.sampling_p(), dataset.l());
    let workspace = LikelihoodWorkspace::new(dataset, lambda)?;
    let theta_hat = fit_mle(&workspace, &config.fit)?;
    let pinv = HessianPseudoinverse::compute(&workspace.hessian(&theta_hat)?)?;
    let theta_debiased = debias_with(&workspace, &theta_hat, &pinv)?;
    let gaps = gap_estimates(&theta_debiased, &theta_hat, revenues, &pinv, dataset.l())?;
    let boot = bootstrap_quantile(
        dataset,
        &gaps,
        &pinv,
        &theta_hat,
        config.alpha / 2.0,
        config.b,
        seed,
    )?;
    let ci = confidence_interval(&gaps, &boot, config.alpha)?;
    Ok(PipelineOutput { lambda, theta_hat, theta_debiased, pinv, gaps, boot, ci })
}
