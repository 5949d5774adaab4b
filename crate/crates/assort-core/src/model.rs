//! Multinomial-logit choice model and the revenue-ordered optimal assortment.
//!
//! Products are indexed 1..=n and carry fixed revenues sorted in nonincreasing
//! order; index 0 is the no-purchase option with revenue 0. A preference
//! vector θ ∈ R^{n+1} determines attraction weights u_i = exp(θ_i), and a
//! customer offered assortment S picks i ∈ S ∪ {0} with probability
//! u_i / Σ_{j ∈ S ∪ {0}} u_j.
//!
//! The optimal assortment (maximizing expected revenue) is always a prefix
//! {1, …, K*} of the revenue ordering. Membership is characterized by the
//! gap sequence
//!
//!   Δ_k = Σ_{i=1}^k r_i u_i − (Σ_{i=0}^k u_i) · r_k,
//!
//! which is nondecreasing in k: product k belongs to the optimal assortment
//! iff Δ_k < 0, so K* is the last k before the sequence crosses zero. The
//! scan in [`optimal_assortment`] stops at the first nonnegative gap; Δ_1 =
//! −r_1·u_0 < 0 guarantees K* ≥ 1.

use crate::error::{Error, Result};

/// Bound on |θ_i| accepted from callers. exp(±30) stays comfortably inside
/// f64 range even after gauge shifts (a shift can at most double the spread),
/// so everything downstream is overflow-free by construction.
pub const SCORE_BOUND: f64 = 30.0;

/// Largest n for which [`brute_force_optimal`] will enumerate all 2^n − 1
/// subsets.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Normalization of a preference vector. The model is invariant to adding a
/// constant to every score, so each stored vector pins one representative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// θ_0 = 0: the no-purchase weight is 1. The natural gauge for raw data
    /// and maximum-likelihood estimates.
    NoPurchaseZero,
    /// mean(θ) = 0 over all n+1 coordinates. The gauge in which debiased
    /// scores and gap estimates are defined.
    Centered,
}

/// Scores θ = (θ_0, θ_1, …, θ_n) with an explicit gauge tag.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceVector {
    theta: Vec<f64>,
    gauge: Gauge,
}

impl PreferenceVector {
    /// Wraps raw scores in the θ_0 = 0 gauge.
    pub fn no_purchase_zero(theta: Vec<f64>) -> Result<Self> {
        Self::validate_common(&theta)?;
        if theta[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "gauge NoPurchaseZero requires theta[0] = 0, got {}",
                theta[0]
            )));
        }
        Ok(PreferenceVector { theta, gauge: Gauge::NoPurchaseZero })
    }

    /// Wraps raw scores in the mean-zero gauge. The mean may deviate from
    /// zero only at the level of accumulated rounding (debiased estimates
    /// satisfy it to ~1e−9).
    pub fn centered(theta: Vec<f64>) -> Result<Self> {
        Self::validate_common(&theta)?;
        let mean = theta.iter().sum::<f64>() / theta.len() as f64;
        let scale = theta.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        if mean.abs() > 1e-7 * scale {
            return Err(Error::InvalidInput(format!(
                "gauge Centered requires mean(theta) = 0, got {mean:.3e}"
            )));
        }
        Ok(PreferenceVector { theta, gauge: Gauge::Centered })
    }

    fn validate_common(theta: &[f64]) -> Result<()> {
        if theta.len() < 2 {
            return Err(Error::InvalidInput(
                "preference vector needs the no-purchase score plus at least one product".into(),
            ));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("preference vector has non-finite entries".into()));
        }
        let max_abs = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if max_abs > SCORE_BOUND {
            return Err(Error::ScoreOutOfRange { max_abs, bound: SCORE_BOUND });
        }
        Ok(())
    }

    /// Internal constructor for vectors produced by our own arithmetic
    /// (gauge conversions, debiasing). Skips the range check: a conversion
    /// can legitimately push entries past SCORE_BOUND, and the bound exists
    /// to vet *inputs*, not to re-reject derived values.
    pub(crate) fn from_internal(theta: Vec<f64>, gauge: Gauge) -> Self {
        debug_assert!(theta.len() >= 2);
        PreferenceVector { theta, gauge }
    }

    pub fn n(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn mean(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }

    /// Attraction weights u_i = exp(θ_i) in this vector's gauge.
    pub fn weights(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.exp()).collect()
    }

    /// Shifts every score by −mean(θ). Already-centered vectors pass through
    /// unchanged so conversions are exact round trips.
    pub fn to_centered(&self) -> Self {
        if self.gauge == Gauge::Centered {
            return self.clone();
        }
        let mean = self.mean();
        let theta = self.theta.iter().map(|t| t - mean).collect();
        PreferenceVector::from_internal(theta, Gauge::Centered)
    }

    /// Shifts every score by −θ_0.
    pub fn to_no_purchase_zero(&self) -> Self {
        if self.gauge == Gauge::NoPurchaseZero {
            return self.clone();
        }
        let t0 = self.theta[0];
        let mut theta: Vec<f64> = self.theta.iter().map(|t| t - t0).collect();
        theta[0] = 0.0; // exact, not t0 − t0
        PreferenceVector::from_internal(theta, Gauge::NoPurchaseZero)
    }
}

/// Revenues r = (r_0, r_1, …, r_n) with r_0 = 0 and r_1 ≥ … ≥ r_n > 0.
/// The nonincreasing order is what makes the optimal assortment a prefix,
/// so it is enforced at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RevenueVector {
    r: Vec<f64>,
}

impl RevenueVector {
    /// From the full vector including the leading r_0 = 0.
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::InvalidInput("revenue vector needs r_0 plus at least one product".into()));
        }
        if r[0] != 0.0 {
            return Err(Error::InvalidInput(format!("r_0 must be 0, got {}", r[0])));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("revenue vector has non-finite entries".into()));
        }
        let products = &r[1..];
        if products.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "product revenues must be sorted in nonincreasing order".into(),
            ));
        }
        if *products.last().unwrap() <= 0.0 {
            return Err(Error::InvalidInput(
                "product revenues must be strictly positive (r_n > 0)".into(),
            ));
        }
        Ok(RevenueVector { r })
    }

    /// From product revenues only; prepends r_0 = 0.
    pub fn from_products(products: Vec<f64>) -> Result<Self> {
        let mut r = Vec::with_capacity(products.len() + 1);
        r.push(0.0);
        r.extend(products);
        Self::new(r)
    }

    pub fn n(&self) -> usize {
        self.r.len() - 1
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Every revenue multiplied by s > 0. Rescaling is a pure change of
    /// units; decisions downstream are invariant to it.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidInput(format!("revenue scale must be positive, got {s}")));
        }
        Ok(RevenueVector { r: self.r.iter().map(|x| x * s).collect() })
    }
}

/// A subset of the products {1, …, n}, stored sorted and deduplicated.
/// Item 0 (no-purchase) is never a member; it joins implicitly wherever the
/// augmented set S ∪ {0} is meant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assortment {
    items: Vec<usize>,
}

impl Assortment {
    pub fn new(items: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut items: Vec<usize> = items.into_iter().collect();
        if items.contains(&0) {
            return Err(Error::InvalidInput(
                "assortments contain product indices >= 1; 0 is the no-purchase option".into(),
            ));
        }
        items.sort_unstable();
        items.dedup();
        Ok(Assortment { items })
    }

    /// The prefix {1, …, k}; k = 0 gives the empty assortment.
    pub fn prefix(k: usize) -> Self {
        Assortment { items: (1..=k).collect() }
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    pub fn max_item(&self) -> Option<usize> {
        self.items.last().copied()
    }
}

/// The gap sequence (Δ_1, …, Δ_n). `scaled` marks the representative computed
/// from mean-centered weights exp(θ_i − θ̄), which is invariant to gauge
/// shifts; the unscaled sequence transforms by the factor exp(c) under
/// θ → θ + c. Signs — all that decisions depend on — agree either way.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSequence {
    values: Vec<f64>,
    scaled: bool,
}

impl DeltaSequence {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Δ_k, 1-based. Panics if k is outside 1..=n.
    pub fn value(&self, k: usize) -> f64 {
        assert!((1..=self.values.len()).contains(&k), "gap index {k} out of range");
        self.values[k - 1]
    }

    /// Slice view; entry [k−1] is Δ_k.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }
}

fn check_dims(theta: &PreferenceVector, r: &RevenueVector) -> Result<()> {
    if theta.n() != r.n() {
        return Err(Error::DimensionMismatch(format!(
            "preference vector has n = {}, revenue vector has n = {}",
            theta.n(),
            r.n()
        )));
    }
    Ok(())
}

fn check_subset(s: &Assortment, n: usize) -> Result<()> {
    if let Some(max) = s.max_item() {
        if max > n {
            return Err(Error::InvalidInput(format!(
                "assortment contains item {max} but the model has n = {n} products"
            )));
        }
    }
    Ok(())
}

/// P(customer picks `item` | offered `s`), for item ∈ s ∪ {0}.
/// Computed with a log-sum-exp shift so any gauge is safe.
pub fn choice_probability(theta: &PreferenceVector, s: &Assortment, item: usize) -> Result<f64> {
    check_subset(s, theta.n())?;
    if item != 0 && !s.contains(item) {
        return Err(Error::InvalidInput(format!(
            "item {item} is not in the offered assortment (or 0 for no-purchase)"
        )));
    }
    let t = theta.theta();
    let mut m = t[0];
    for &i in s.items() {
        m = m.max(t[i]);
    }
    let mut denom = (t[0] - m).exp();
    for &i in s.items() {
        denom += (t[i] - m).exp();
    }
    Ok((t[item] - m).exp() / denom)
}

/// Expected revenue of offering `s`: Σ_{i∈S} r_i u_i / Σ_{j∈S∪{0}} u_j.
/// The empty assortment earns 0.
pub fn expected_revenue(theta: &PreferenceVector, r: &RevenueVector, s: &Assortment) -> Result<f64> {
    check_dims(theta, r)?;
    check_subset(s, theta.n())?;
    let t = theta.theta();
    let rv = r.r();
    let mut m = t[0];
    for &i in s.items() {
        m = m.max(t[i]);
    }
    let mut denom = (t[0] - m).exp();
    let mut num = 0.0;
    for &i in s.items() {
        let u = (t[i] - m).exp();
        denom += u;
        num += rv[i] * u;
    }
    Ok(num / denom)
}

/// The full gap sequence. With `scaled`, weights are exp(θ_i − θ̄) and the
/// result is gauge-invariant; otherwise weights are exp(θ_i) as given.
pub fn delta_sequence(theta: &PreferenceVector, r: &RevenueVector, scaled: bool) -> Result<DeltaSequence> {
    check_dims(theta, r)?;
    let t = theta.theta();
    let rv = r.r();
    let shift = if scaled { theta.mean() } else { 0.0 };
    let n = theta.n();
    let u0 = (t[0] - shift).exp();
    let mut revenue_weight = 0.0; // Σ_{i=1}^k r_i u_i
    let mut total_weight = u0; // Σ_{i=0}^k u_i
    let mut values = Vec::with_capacity(n);
    for k in 1..=n {
        let u = (t[k] - shift).exp();
        revenue_weight += rv[k] * u;
        total_weight += u;
        values.push(revenue_weight - total_weight * rv[k]);
    }
    Ok(DeltaSequence { values, scaled })
}

/// The revenue-ordered optimal assortment {1, …, K*} and its size.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalAssortment {
    pub assortment: Assortment,
    pub k_star: usize,
}

/// Scans the gap sequence and stops at the first Δ_k ≥ 0; everything before
/// the stop is the optimal prefix. Runs in O(n) without forming the whole
/// sequence.
pub fn optimal_assortment(theta: &PreferenceVector, r: &RevenueVector) -> Result<OptimalAssortment> {
    check_dims(theta, r)?;
    let t = theta.theta();
    let rv = r.r();
    let n = theta.n();
    let mut revenue_weight = 0.0;
    let mut total_weight = t[0].exp();
    let mut k_star = 0;
    for k in 1..=n {
        let u = t[k].exp();
        revenue_weight += rv[k] * u;
        total_weight += u;
        if revenue_weight - total_weight * rv[k] >= 0.0 {
            break;
        }
        k_star = k;
    }
    // Δ_1 = −r_1·u_0 < 0 because revenues are positive, so the scan always
    // admits product 1.
    debug_assert!(k_star >= 1);
    Ok(OptimalAssortment { assortment: Assortment::prefix(k_star), k_star })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceOptimal {
    pub assortment: Assortment,
    pub revenue: f64,
}

/// Exhaustive maximizer over all subsets (the empty set included, earning 0).
/// Ties broken by smaller cardinality, then lexicographically smaller item
/// list, so the result is deterministic. Refuses n > [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_optimal(theta: &PreferenceVector, r: &RevenueVector) -> Result<BruteForceOptimal> {
    check_dims(theta, r)?;
    let n = theta.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationTooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let u: Vec<f64> = theta.theta().iter().map(|x| x.exp()).collect();
    let rv = r.r();

    let items_of = |mask: u32| -> Vec<usize> {
        (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect()
    };

    let mut best_mask: u32 = 0;
    let mut best_revenue = 0.0_f64; // the empty assortment
    for mask in 1u32..(1u32 << n) {
        let mut num = 0.0;
        let mut denom = u[0];
        for i in 1..=n {
            if mask >> (i - 1) & 1 == 1 {
                num += rv[i] * u[i];
                denom += u[i];
            }
        }
        let revenue = num / denom;
        let better = revenue > best_revenue
            || (revenue == best_revenue
                && (mask.count_ones() < best_mask.count_ones()
                    || (mask.count_ones() == best_mask.count_ones()
                        && items_of(mask) < items_of(best_mask))));
        if better {
            best_mask = mask;
            best_revenue = revenue;
        }
    }
    Ok(BruteForceOptimal {
        assortment: Assortment::new(items_of(best_mask))?,
        revenue: best_revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(theta: &[f64]) -> PreferenceVector {
        PreferenceVector::no_purchase_zero(theta.to_vec()).unwrap()
    }

    fn rv(r: &[f64]) -> RevenueVector {
        RevenueVector::new(r.to_vec()).unwrap()
    }

    // Hand-worked case: θ = (0,0,0), r = (0,2,1) gives u = (1,1,1),
    // Δ_1 = 2 − 2·2 = −2, Δ_2 = 3 − 3·1 = 0, so S* = {1} with revenue
    // 2·1/(1+1) = 1. Offering {1,2} also earns exactly (2+1)/3 = 1 — a true
    // tie that the brute force must break toward the smaller set.
    #[test]
    fn two_product_worked_example() {
        let theta = pv(&[0.0, 0.0, 0.0]);
        let r = rv(&[0.0, 2.0, 1.0]);

        let d = delta_sequence(&theta, &r, false).unwrap();
        assert_eq!(d.as_slice(), &[-2.0, 0.0]);

        let opt = optimal_assortment(&theta, &r).unwrap();
        assert_eq!(opt.k_star, 1);
        assert_eq!(opt.assortment.items(), &[1]);
        assert_eq!(expected_revenue(&theta, &r, &opt.assortment).unwrap(), 1.0);

        let bf = brute_force_optimal(&theta, &r).unwrap();
        assert_eq!(bf.assortment.items(), &[1]);
        assert_eq!(bf.revenue, 1.0);
    }

    #[test]
    fn first_gap_is_minus_r1_u0() {
        let theta = pv(&[0.0, 1.3, -0.2, 0.4]);
        let r = rv(&[0.0, 3.0, 2.0, 0.5]);
        let d = delta_sequence(&theta, &r, false).unwrap();
        assert!((d.value(1) - (-3.0 * 1.0)).abs() < 1e-12);

        // In a shifted gauge u_0 = exp(θ_0) ≠ 1; the identity still holds.
        let c = theta.to_centered();
        let d = delta_sequence(&c, &r, false).unwrap();
        assert!((d.value(1) - (-3.0 * c.theta()[0].exp())).abs() < 1e-12);
    }

    #[test]
    fn gap_increments_match_identity() {
        // Δ_{k+1} − Δ_k = (Σ_{i=0}^k u_i)(r_k − r_{k+1}), hence monotone.
        let theta = pv(&[0.0, 0.7, -1.1, 0.3, 1.9]);
        let r = rv(&[0.0, 5.0, 4.0, 4.0, 0.25]);
        let d = delta_sequence(&theta, &r, false).unwrap();
        let u = theta.weights();
        let mut total = u[0];
        for k in 1..4 {
            total += u[k];
            let expect = total * (r.r()[k] - r.r()[k + 1]);
            let got = d.value(k + 1) - d.value(k);
            assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
            assert!(got >= -1e-12);
        }
    }

    #[test]
    fn membership_iff_negative_gap() {
        let theta = pv(&[0.0, 0.9, 0.1, -0.5, 0.2, -1.0]);
        let r = rv(&[0.0, 4.0, 2.5, 1.5, 0.8, 0.1]);
        let d = delta_sequence(&theta, &r, false).unwrap();
        let opt = optimal_assortment(&theta, &r).unwrap();
        for k in 1..=5 {
            assert_eq!(opt.assortment.contains(k), d.value(k) < 0.0, "k = {k}");
        }
    }

    #[test]
    fn scaled_gaps_are_gauge_invariant_and_unscaled_gaps_transform() {
        let theta = pv(&[0.0, 1.2, 0.4, -0.9]);
        let r = rv(&[0.0, 2.0, 1.0, 0.5]);
        let centered = theta.to_centered();

        let s1 = delta_sequence(&theta, &r, true).unwrap();
        let s2 = delta_sequence(&centered, &r, true).unwrap();
        for k in 1..=3 {
            assert!((s1.value(k) - s2.value(k)).abs() < 1e-12 * s1.value(k).abs().max(1.0));
        }

        // Unscaled values pick up the factor exp(−θ̄) under centering.
        let u1 = delta_sequence(&theta, &r, false).unwrap();
        let u2 = delta_sequence(&centered, &r, false).unwrap();
        let f = (-theta.mean()).exp();
        for k in 1..=3 {
            assert!((u1.value(k) * f - u2.value(k)).abs() < 1e-12 * u2.value(k).abs().max(1.0));
        }
        // And the scaled sequence equals the unscaled one in the centered
        // gauge (θ̄ = 0 there).
        for k in 1..=3 {
            assert!((s2.value(k) - u2.value(k)).abs() < 1e-14 * u2.value(k).abs().max(1.0));
        }
    }

    #[test]
    fn choice_probabilities_form_a_distribution() {
        let theta = pv(&[0.0, 0.5, -0.3, 1.1]);
        let s = Assortment::new([1, 3]).unwrap();
        let p0 = choice_probability(&theta, &s, 0).unwrap();
        let p1 = choice_probability(&theta, &s, 1).unwrap();
        let p3 = choice_probability(&theta, &s, 3).unwrap();
        assert!((p0 + p1 + p3 - 1.0).abs() < 1e-12);
        assert!(choice_probability(&theta, &s, 2).is_err());

        // Gauge shift leaves probabilities unchanged.
        let c = theta.to_centered();
        assert!((choice_probability(&c, &s, 1).unwrap() - p1).abs() < 1e-14);

        // Revenue is the probability-weighted sum of revenues.
        let r = rv(&[0.0, 2.0, 1.5, 1.0]);
        let rev = expected_revenue(&theta, &r, &s).unwrap();
        assert!((rev - (2.0 * p1 + 1.0 * p3)).abs() < 1e-12);
    }

    #[test]
    fn gauge_conversions_round_trip() {
        let theta = pv(&[0.0, 1.5, -2.0, 0.25]);
        let back = theta.to_centered().to_no_purchase_zero();
        for (a, b) in back.theta().iter().zip(theta.theta()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(back.gauge(), Gauge::NoPurchaseZero);
        assert!(theta.to_centered().mean().abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(PreferenceVector::no_purchase_zero(vec![0.1, 1.0]).is_err());
        assert!(PreferenceVector::no_purchase_zero(vec![0.0, 31.0]).is_err());
        assert!(PreferenceVector::no_purchase_zero(vec![0.0, f64::NAN]).is_err());
        assert!(PreferenceVector::centered(vec![0.5, 0.5]).is_err());
        assert!(PreferenceVector::centered(vec![0.5, -0.5]).is_ok());

        assert!(RevenueVector::new(vec![1.0, 2.0]).is_err()); // r_0 ≠ 0
        assert!(RevenueVector::new(vec![0.0, 1.0, 2.0]).is_err()); // increasing
        assert!(RevenueVector::new(vec![0.0, 1.0, 0.0]).is_err()); // r_n = 0
        assert!(RevenueVector::from_products(vec![2.0, 1.0]).is_ok());

        assert!(Assortment::new([0, 1]).is_err());
        assert_eq!(Assortment::new([3, 1, 3]).unwrap().items(), &[1, 3]);
    }

    #[test]
    fn brute_force_guard_and_dimension_checks() {
        let theta = pv(&[0.0; 22].to_vec());
        let r = RevenueVector::from_products(vec![1.0; 21]).unwrap();
        assert!(matches!(
            brute_force_optimal(&theta, &r),
            Err(Error::EnumerationTooLarge { n: 21, .. })
        ));

        let theta = pv(&[0.0, 1.0]);
        let r2 = RevenueVector::from_products(vec![2.0, 1.0]).unwrap();
        assert!(delta_sequence(&theta, &r2, false).is_err());
        let s = Assortment::new([2]).unwrap();
        assert!(choice_probability(&theta, &s, 0).is_err());
    }
}
