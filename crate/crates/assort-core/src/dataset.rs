//! Observed choice data and scenario generation.
//!
//! The sampling design: every nonempty subset of {1..n} is offered
//! independently with probability p, and each offered set receives L
//! multinomial choice draws. Rather than enumerating all 2^n − 1 subsets and
//! flipping a coin for each, the number of offered sets N is drawn from
//! Binomial(2^n − 1, p) and then N distinct subsets are drawn uniformly —
//! the two procedures induce the same distribution, but this one is O(N).
//!
//! [`ObservedDataset`] serializes to a small versioned JSON format so runs
//! can be archived and replayed:
//!
//! ```json
//! {"version": 1, "n": 3, "L": 2, "p": 0.5, "seed": 7,
//!  "sets": [[1, 3], [2]], "choices": [[1, 0], [2, 2]]}
//! ```
//!
//! `choices[s][l]` is the item picked in draw l for `sets[s]`, with 0 for
//! no-purchase.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{choice_probability, Assortment, PreferenceVector, RevenueVector};
use crate::rng::Rng;

/// Largest population size for which the binomial sampler inverts the exact
/// CDF; beyond it (2^n − 1 > 10^6, i.e. n ≥ 20) a rounded normal
/// approximation is used. The count only controls how many sets are offered,
/// so the approximation does not touch per-set uniformity.
const BINOMIAL_EXACT_LIMIT: u64 = 1_000_000;

/// Immutable record of one data collection: which sets were offered and what
/// was chosen. Construction validates every invariant, so downstream code
/// can index freely.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedDataset {
    n: usize,
    l: usize,
    sampling_p: f64,
    seed: Option<u64>,
    sets: Vec<Assortment>,
    choices: Vec<Vec<usize>>,
}

impl ObservedDataset {
    pub fn new(
        n: usize,
        l: usize,
        sampling_p: f64,
        seed: Option<u64>,
        sets: Vec<Assortment>,
        choices: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dataset needs n >= 1 products".into()));
        }
        if l == 0 {
            return Err(Error::InvalidInput("dataset needs L >= 1 choice draws per set".into()));
        }
        if !(sampling_p.is_finite() && (0.0..=1.0).contains(&sampling_p)) {
            return Err(Error::InvalidInput(format!(
                "sampling probability {sampling_p} must lie in [0, 1]"
            )));
        }
        if sets.len() != choices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sets but {} choice rows",
                sets.len(),
                choices.len()
            )));
        }
        let mut seen: HashSet<&Assortment> = HashSet::with_capacity(sets.len());
        for (s, (set, row)) in sets.iter().zip(&choices).enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidInput(format!("offered set {s} is empty")));
            }
            if set.max_item().unwrap() > n {
                return Err(Error::InvalidInput(format!(
                    "offered set {s} contains an item above n = {n}"
                )));
            }
            if !seen.insert(set) {
                return Err(Error::InvalidInput(format!("offered set {s} is a duplicate")));
            }
            if row.len() != l {
                return Err(Error::DimensionMismatch(format!(
                    "choice row {s} has {} entries, expected L = {l}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&c| c != 0 && !set.contains(c)) {
                return Err(Error::InvalidInput(format!(
                    "choice {bad} in row {s} is outside the offered set"
                )));
            }
        }
        Ok(ObservedDataset { n, l, sampling_p, seed, sets, choices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn sampling_p(&self) -> f64 {
        self.sampling_p
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn sets(&self) -> &[Assortment] {
        &self.sets
    }

    pub fn choices(&self) -> &[Vec<usize>] {
        &self.choices
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawDataset {
            version: FORMAT_VERSION,
            n: self.n,
            l: self.l,
            p: self.sampling_p,
            seed: self.seed,
            sets: self.sets.iter().map(|s| s.items().to_vec()).collect(),
            choices: self.choices.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("dataset serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawDataset = serde_json::from_str(text)?;
        if raw.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {} (expected {FORMAT_VERSION})",
                raw.version
            )));
        }
        let sets = raw
            .sets
            .into_iter()
            .map(Assortment::new)
            .collect::<Result<Vec<_>>>()?;
        ObservedDataset::new(raw.n, raw.l, raw.p, raw.seed, sets, raw.choices)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RawDataset {
    version: u32,
    n: usize,
    #[serde(rename = "L")]
    l: usize,
    p: f64,
    seed: Option<u64>,
    sets: Vec<Vec<usize>>,
    choices: Vec<Vec<usize>>,
}

/// Parameters of a synthetic scenario: scores drawn N(0, σ²), revenues
/// reverse-engineered so the gap sequence hits prescribed targets around a
/// designed optimal size K*.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    /// Variance of the product scores θ_i, i ≥ 1.
    pub sigma_theta_sq: f64,
    /// The designed optimal assortment size.
    pub k_star_target: usize,
    /// Magnitude of the gap targets: Δ_k = −δ for k ≤ K*, 0 at K*+1, +δ after.
    #[serde(default = "default_delta_magnitude")]
    pub delta_magnitude: f64,
    /// Subset-offer probability; None means n·ln(n)/2^n.
    #[serde(default)]
    pub p: Option<f64>,
    /// Choice draws per offered set.
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_delta_magnitude() -> f64 {
    0.001
}

/// The default offer probability n·ln(n)/2^n, which keeps the expected
/// number of offered sets near n·ln(n).
pub fn default_sampling_p(n: usize) -> f64 {
    let nf = n as f64;
    nf * nf.ln() / 2f64.powi(n as i32)
}

impl ScenarioSpec {
    pub fn sampling_p(&self) -> f64 {
        self.p.unwrap_or_else(|| default_sampling_p(self.n))
    }

    /// The scaled gap targets (−δ, …, −δ, 0, +δ, …, +δ) with the sign change
    /// after position K*.
    pub fn delta_targets(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|k| {
                if k <= self.k_star_target {
                    -self.delta_magnitude
                } else if k == self.k_star_target + 1 {
                    0.0
                } else {
                    self.delta_magnitude
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 63 {
            return Err(Error::InvalidInput(format!("scenario n = {} must lie in 1..=63", self.n)));
        }
        if !(self.sigma_theta_sq.is_finite() && self.sigma_theta_sq >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma_theta_sq = {} must be a nonnegative number",
                self.sigma_theta_sq
            )));
        }
        if self.k_star_target == 0 || self.k_star_target > self.n {
            return Err(Error::InvalidInput(format!(
                "k_star_target = {} must lie in 1..={}",
                self.k_star_target, self.n
            )));
        }
        if !(self.delta_magnitude.is_finite() && self.delta_magnitude > 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta_magnitude = {} must be positive",
                self.delta_magnitude
            )));
        }
        let p = self.sampling_p();
        if !(p.is_finite() && p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "offer probability {p} must lie in (0, 1]; supply p explicitly for n = {}",
                self.n
            )));
        }
        if self.l == 0 {
            return Err(Error::InvalidInput("scenario L must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scores θ* with θ_0 = 0 and θ_i ~ N(0, σ²) i.i.d.
pub fn generate_scores(spec: &ScenarioSpec, rng: &mut Rng) -> Result<PreferenceVector> {
    spec.validate()?;
    let sigma = spec.sigma_theta_sq.sqrt();
    let mut theta = Vec::with_capacity(spec.n + 1);
    theta.push(0.0);
    for _ in 0..spec.n {
        theta.push(sigma * rng.next_normal());
    }
    PreferenceVector::no_purchase_zero(theta)
}

/// Inverts the gap recurrence to find revenues realizing the scaled targets:
///
///   r_1 = −exp(θ̄)·Δ_1 / u_0,
///   r_{k+1} = r_k − exp(θ̄)·(Δ_{k+1} − Δ_k) / Σ_{i=0}^k u_i.
///
/// Targets must be nondecreasing with Δ_1 < 0 (every valid gap sequence is),
/// and must not drive any revenue to 0 or below.
pub fn revenues_from_delta_targets(theta: &PreferenceVector, targets: &[f64]) -> Result<RevenueVector> {
    let n = theta.n();
    if targets.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} gap targets for n = {n} products",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InfeasibleTargets("targets must be finite".into()));
    }
    if targets[0] >= 0.0 {
        return Err(Error::InfeasibleTargets(format!(
            "first target {} must be negative (Δ_1 = −r_1·u_0 < 0 always)",
            targets[0]
        )));
    }
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InfeasibleTargets(
            "targets must be nondecreasing (gap sequences always are)".into(),
        ));
    }
    let u = theta.weights();
    let scale = theta.mean().exp();
    let mut r = Vec::with_capacity(n + 1);
    r.push(0.0);
    r.push(-scale * targets[0] / u[0]);
    let mut total_weight = u[0] + u[1];
    for k in 1..n {
        let next = r[k] - scale * (targets[k] - targets[k - 1]) / total_weight;
        if next <= 0.0 {
            return Err(Error::InfeasibleTargets(format!(
                "targets drive r_{} to {next:.3e}; revenues must stay positive",
                k + 1
            )));
        }
        r.push(next);
        total_weight += u[k + 1];
    }
    RevenueVector::new(r)
}

/// Binomial(m, p) draw. Exact CDF inversion for m ≤ 10^6; a rounded,
/// clamped normal approximation beyond that.
pub fn binomial_count(m: u64, p: f64, rng: &mut Rng) -> u64 {
    if p <= 0.0 || m == 0 {
        return 0;
    }
    if p >= 1.0 {
        return m;
    }
    if m <= BINOMIAL_EXACT_LIMIT {
        let u = rng.next_f64();
        let ratio = p / (1.0 - p);
        let mut pmf = ((m as f64) * (-p).ln_1p()).exp(); // (1−p)^m
        let mut cdf = pmf;
        let mut k: u64 = 0;
        while cdf <= u && k < m {
            pmf *= ((m - k) as f64 / (k + 1) as f64) * ratio;
            cdf += pmf;
            k += 1;
        }
        k
    } else {
        let mf = m as f64;
        let mean = mf * p;
        let sd = (mf * p * (1.0 - p)).sqrt();
        let draw = (mean + sd * rng.next_normal()).round();
        draw.clamp(0.0, mf) as u64
    }
}

/// Offers each nonempty subset of {1..n} independently with probability p:
/// draws N ~ Binomial(2^n − 1, p), then N distinct uniform subsets. A uniform
/// subset is one word of n fair coin flips (the low n bits of a `u64`),
/// rejecting the empty draw and previously seen masks. Order of the returned
/// sets is the draw order — unspecified but deterministic given the seed.
pub fn sample_offer_sets(n: usize, p: f64, rng: &mut Rng) -> Result<Vec<Assortment>> {
    if n == 0 || n > 63 {
        return Err(Error::InvalidInput(format!("offer-set sampling needs n in 1..=63, got {n}")));
    }
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidInput(format!("offer probability {p} must lie in [0, 1]")));
    }
    let population: u64 = (1u64 << n) - 1;
    let count = binomial_count(population, p, rng);

    let set_from_mask = |mask: u64| -> Assortment {
        Assortment::new((1..=n).filter(|i| mask >> (i - 1) & 1 == 1))
            .expect("masks index products 1..=n")
    };

    if count == population {
        // Everything is offered; skip the coupon-collector endgame.
        return Ok((1..=population).map(set_from_mask).collect());
    }
    let all_bits = population; // doubles as the bit mask for n items
    let mut seen: HashSet<u64> = HashSet::with_capacity(count as usize * 2);
    let mut sets = Vec::with_capacity(count as usize);
    while (sets.len() as u64) < count {
        let mask = rng.next_u64() & all_bits;
        if mask == 0 || !seen.insert(mask) {
            continue;
        }
        sets.push(set_from_mask(mask));
    }
    Ok(sets)
}

/// L multinomial choice draws for each offered set. `sampling_p` and `seed`
/// are provenance, recorded in the dataset so archived files describe how
/// they were produced.
pub fn simulate_choices(
    theta: &PreferenceVector,
    sets: &[Assortment],
    l: usize,
    sampling_p: f64,
    seed: Option<u64>,
    rng: &mut Rng,
) -> Result<ObservedDataset> {
    let n = theta.n();
    let mut choices = Vec::with_capacity(sets.len());
    for set in sets {
        // Coordinates in CDF order: no-purchase first, then items ascending.
        let mut coords = Vec::with_capacity(set.len() + 1);
        coords.push(0usize);
        coords.extend_from_slice(set.items());
        let probs: Vec<f64> = coords
            .iter()
            .map(|&i| choice_probability(theta, set, i))
            .collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(l);
        for _ in 0..l {
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut picked = *coords.last().unwrap(); // guards cumsum rounding
            for (&c, &pr) in coords.iter().zip(&probs) {
                acc += pr;
                if u < acc {
                    picked = c;
                    break;
                }
            }
            row.push(picked);
        }
        choices.push(row);
    }
    ObservedDataset::new(n, l, sampling_p, seed, sets.to_vec(), choices)
}

/// A fully generated scenario: the ground truth plus one simulated dataset.
#[derive(Clone, Debug)]
pub struct ScenarioInstance {
    pub theta_star: PreferenceVector,
    pub revenues: RevenueVector,
    /// The designed optimal size. The gap target at K*+1 is exactly zero, so
    /// recomputing the arg-scan from (θ*, r) can land on K* or K*+1 depending
    /// on the last bit of rounding; the designed value is the ground truth
    /// that simulations measure against.
    pub k_star: usize,
    /// The scaled gap targets the revenues were solved for.
    pub delta_targets: Vec<f64>,
    pub dataset: ObservedDataset,
}

/// Runs the whole generative recipe. Substreams of `spec.seed` (default 0):
/// stream 1 scores, stream 2 offer sets, stream 3 choices — so datasets are
/// reproducible byte-for-byte from (spec, seed) alone.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<ScenarioInstance> {
    spec.validate()?;
    let seed = spec.seed.unwrap_or(0);
    let theta_star = generate_scores(spec, &mut Rng::substream(seed, 1))?;
    let delta_targets = spec.delta_targets();
    let revenues = revenues_from_delta_targets(&theta_star, &delta_targets)?;
    let p = spec.sampling_p();
    let sets = sample_offer_sets(spec.n, p, &mut Rng::substream(seed, 2))?;
    let dataset = simulate_choices(
        &theta_star,
        &sets,
        spec.l,
        p,
        Some(seed),
        &mut Rng::substream(seed, 3),
    )?;
    Ok(ScenarioInstance {
        theta_star,
        revenues,
        k_star: spec.k_star_target,
        delta_targets,
        dataset,
    })
}
