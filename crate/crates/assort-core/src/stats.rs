//! Distribution helpers shared by the inference layer and the experiment
//! harness: standard-normal quantile/CDF and a one-sample
//! Kolmogorov–Smirnov test against the standard normal.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal parameters are valid")
}

/// Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Φ⁻¹(p) for p ∈ (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile level {p} must lie strictly between 0 and 1"
        )));
    }
    Ok(standard_normal().inverse_cdf(p))
}

#[derive(Clone, Copy, Debug)]
pub struct KsTest {
    /// sup_x |F̂(x) − Φ(x)|.
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov series.
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test of `sample` against N(0, 1).
///
/// The p-value uses the asymptotic null distribution of √m·D_m,
/// P(K > x) = 2·Σ_{k≥1} (−1)^{k−1} e^{−2k²x²}, which is accurate for the
/// sample sizes the experiments use (hundreds of replications).
pub fn ks_test_standard_normal(sample: &[f64]) -> Result<KsTest> {
    let m = sample.len();
    if m == 0 {
        return Err(Error::InvalidInput("KS test needs a nonempty sample".into()));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("KS test sample contains non-finite values".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));

    let mf = m as f64;
    let mut statistic = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        let above = (i + 1) as f64 / mf - cdf;
        let below = cdf - i as f64 / mf;
        statistic = statistic.max(above).max(below);
    }
    Ok(KsTest { statistic, p_value: kolmogorov_tail(mf.sqrt() * statistic) })
}

/// P(K > x) for the Kolmogorov distribution, via the alternating series.
fn kolmogorov_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        if term < 1e-16 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
