//! Penalized maximum likelihood for the choice scores, plus the pieces the
//! inference layer needs: the unpenalized gradient and Hessian, the Hessian's
//! Moore–Penrose pseudoinverse, and the one-step debiased estimator.
//!
//! With aggregated choice frequencies x̄_S over the augmented set S₊ = S∪{0},
//! the negative log-likelihood is
//!
//!   ℓ(θ) = Σ_S [ log Σ_{j∈S₊} e^{θ_j} − Σ_{i∈S₊} x̄_S^(i) θ_i ],
//!
//! which is invariant to adding a constant to θ (the frequencies over S₊ sum
//! to one), as are its gradient and Hessian. The ridge-style penalty
//! (λ/2)·Σ_i (θ_i − θ̄)² is centered, hence shift-invariant too; pinning
//! θ_0 = 0 during optimization is what makes the minimizer unique.
//!
//! The Hessian is singular by construction (H·1 = 0). Its pseudoinverse is
//! recovered from the bordered system
//!
//!   [ H  1 ]⁻¹     [ H†        1/(n+1)·1 ]
//!   [ 1ᵀ 0 ]    =  [ 1/(n+1)·1ᵀ    0     ]
//!
//! — one LU inverse of an (n+2)×(n+2) matrix instead of an eigendecomposition.

use nalgebra::{DMatrix, DVector};

use crate::dataset::ObservedDataset;
use crate::error::{Error, Result};
use crate::model::{Gauge, PreferenceVector};

/// Penalty weight λ = c·sqrt(2^n·p·ln(n)/(n·L)) — the rate that balances
/// estimation error against shrinkage for the offer-probability design.
/// `c` is the tuning knob: 0.25 for estimation-quality runs, 1.0 for
/// confidence-interval and test runs.
pub fn penalty_weight(c: f64, n: usize, p: f64, l: usize) -> f64 {
    let nf = n as f64;
    c * (2f64.powi(n as i32) * p * nf.ln() / (nf * l as f64)).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct FitConfig {
    /// Convergence threshold on the Euclidean norm of the free-coordinate
    /// gradient.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { tol: 1e-8, max_iters: 10_000 }
    }
}

/// One optimizer iteration, for callers that want to watch convergence.
#[derive(Clone, Copy, Debug)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
}

/// Precomputed aggregation of a dataset for likelihood evaluation: for each
/// offered set, its augmented coordinate list and the choice frequencies on
/// it. Read-only after construction, so it can be shared across threads.
pub struct LikelihoodWorkspace<'d> {
    dataset: &'d ObservedDataset,
    lambda: f64,
    /// Augmented coordinates per set: [0, items...].
    coords: Vec<Vec<usize>>,
    /// x̄_S per coordinate, aligned with `coords`; rows sum to 1.
    freqs: Vec<Vec<f64>>,
}

impl<'d> LikelihoodWorkspace<'d> {
    pub fn new(dataset: &'d ObservedDataset, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "penalty weight {lambda} must be a nonnegative number"
            )));
        }
        let l = dataset.l() as f64;
        let mut coords = Vec::with_capacity(dataset.num_sets());
        let mut freqs = Vec::with_capacity(dataset.num_sets());
        for (set, row) in dataset.sets().iter().zip(dataset.choices()) {
            let mut cs = Vec::with_capacity(set.len() + 1);
            cs.push(0usize);
            cs.extend_from_slice(set.items());
            let mut fs = vec![0.0; cs.len()];
            for &choice in row {
                let pos = cs.iter().position(|&c| c == choice).expect("validated choice");
                fs[pos] += 1.0;
            }
            for f in &mut fs {
                *f /= l;
            }
            coords.push(cs);
            freqs.push(fs);
        }
        Ok(LikelihoodWorkspace { dataset, lambda, coords, freqs })
    }

    pub fn dataset(&self) -> &ObservedDataset {
        self.dataset
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    /// A dataset with no offered sets makes the likelihood identically zero;
    /// the objective degenerates to the penalty alone.
    pub fn is_degenerate(&self) -> bool {
        self.coords.is_empty()
    }

    /// Products that never appear in any offered set. Their scores are
    /// identified only through the penalty; callers should warn when this
    /// is nonempty.
    pub fn uncovered_items(&self) -> Vec<usize> {
        let n = self.n();
        let mut covered = vec![false; n + 1];
        for cs in &self.coords {
            for &c in cs {
                covered[c] = true;
            }
        }
        (1..=n).filter(|&i| !covered[i]).collect()
    }

    /// Unpenalized value and optionally the gradient, on raw coordinates.
    /// Each set contributes log-sum-exp(θ on S₊) − ⟨x̄, θ on S₊⟩; gradients
    /// accumulate p − x̄ on the set's coordinates.
    fn eval_raw(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut value = 0.0;
        let mut expbuf: Vec<f64> = Vec::new();
        for (cs, fs) in self.coords.iter().zip(&self.freqs) {
            let mut m = f64::NEG_INFINITY;
            for &c in cs {
                m = m.max(theta[c]);
            }
            expbuf.clear();
            let mut sum = 0.0;
            for &c in cs {
                let e = (theta[c] - m).exp();
                expbuf.push(e);
                sum += e;
            }
            value += m + sum.ln();
            for (&c, &f) in cs.iter().zip(fs) {
                value -= f * theta[c];
            }
            if let Some(g) = grad.as_deref_mut() {
                for ((&c, &f), &e) in cs.iter().zip(fs).zip(&expbuf) {
                    g[c] += e / sum - f;
                }
            }
        }
        value
    }

    fn penalty_raw(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let m = theta.len() as f64;
        let mean = theta.iter().sum::<f64>() / m;
        let mut value = 0.0;
        for &t in theta {
            value += (t - mean) * (t - mean);
        }
        value *= 0.5 * self.lambda;
        if let Some(g) = grad {
            // Because Σ(θ_i − θ̄) = 0, the extra −θ̄-derivative terms cancel
            // and the gradient is simply λ(θ − θ̄·1).
            for (gi, &t) in g.iter_mut().zip(theta) {
                *gi += self.lambda * (t - mean);
            }
        }
        value
    }

    fn check_theta(&self, theta: &PreferenceVector) -> Result<()> {
        if theta.n() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "theta has n = {}, dataset has n = {}",
                theta.n(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Unpenalized negative log-likelihood. Gauge-invariant.
    pub fn value(&self, theta: &PreferenceVector) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.eval_raw(theta.theta(), None))
    }

    /// Negative log-likelihood plus the centered ridge penalty.
    pub fn value_penalized(&self, theta: &PreferenceVector) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.eval_raw(theta.theta(), None) + self.penalty_raw(theta.theta(), None))
    }

    /// Unpenalized gradient ∇ℓ(θ) ∈ R^{n+1}. Its coordinates sum to zero.
    pub fn gradient(&self, theta: &PreferenceVector) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        let mut g = vec![0.0; self.n() + 1];
        self.eval_raw(theta.theta(), Some(&mut g));
        Ok(DVector::from_vec(g))
    }

    pub fn gradient_penalized(&self, theta: &PreferenceVector) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        let mut g = vec![0.0; self.n() + 1];
        self.eval_raw(theta.theta(), Some(&mut g));
        self.penalty_raw(theta.theta(), Some(&mut g));
        Ok(DVector::from_vec(g))
    }

    /// Unpenalized Hessian: per set, diag(p) − p·pᵀ on the set's coordinates.
    /// Positive semidefinite with H·1 = 0.
    pub fn hessian(&self, theta: &PreferenceVector) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let t = theta.theta();
        let mut h = DMatrix::zeros(t.len(), t.len());
        let mut probs: Vec<f64> = Vec::new();
        for cs in &self.coords {
            let mut m = f64::NEG_INFINITY;
            for &c in cs {
                m = m.max(t[c]);
            }
            probs.clear();
            let mut sum = 0.0;
            for &c in cs {
                let e = (t[c] - m).exp();
                probs.push(e);
                sum += e;
            }
            for p in &mut probs {
                *p /= sum;
            }
            for (a, &ca) in cs.iter().enumerate() {
                h[(ca, ca)] += probs[a] * (1.0 - probs[a]);
                for (b, &cb) in cs.iter().enumerate().skip(a + 1) {
                    let off = -probs[a] * probs[b];
                    h[(ca, cb)] += off;
                    h[(cb, ca)] += off;
                }
            }
        }
        Ok(h)
    }
}

/// Minimizes the penalized objective over θ with θ_0 pinned at 0, by
/// gradient descent with Armijo backtracking. The step warm-starts from the
/// previously accepted step (doubled), so the line search typically tests
/// one or two candidates. Requires λ > 0 and a nonempty dataset — that is
/// what makes the minimizer exist and be unique.
pub fn fit_mle(w: &LikelihoodWorkspace, config: &FitConfig) -> Result<PreferenceVector> {
    fit_mle_traced(w, config, &mut |_| {})
}

pub fn fit_mle_traced(
    w: &LikelihoodWorkspace,
    config: &FitConfig,
    trace: &mut dyn FnMut(TraceRecord),
) -> Result<PreferenceVector> {
    const ARMIJO_C: f64 = 1e-4;

    if w.is_degenerate() {
        return Err(Error::InvalidInput("cannot fit on a dataset with no offered sets".into()));
    }
    if w.lambda() <= 0.0 {
        return Err(Error::InvalidInput(
            "fitting requires a positive penalty weight (the unpenalized MLE can diverge)".into(),
        ));
    }
    if !(config.tol > 0.0) || config.max_iters == 0 {
        return Err(Error::InvalidInput("fit config needs tol > 0 and max_iters >= 1".into()));
    }

    let dim = w.n() + 1;
    let mut theta = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut candidate = vec![0.0; dim];
    let mut cand_grad = vec![0.0; dim];

    let free_sq = |g: &[f64]| g[1..].iter().map(|x| x * x).sum::<f64>();

    let mut value = w.eval_raw(&theta, Some(&mut grad)) + w.penalty_raw(&theta, Some(&mut grad));
    let mut grad_sq = free_sq(&grad);
    let mut step = 1.0f64;

    for iteration in 0..config.max_iters {
        // θ_0 stays fixed: only coordinates 1..=n descend.
        let grad_norm = grad_sq.sqrt();
        trace(TraceRecord { iteration, objective: value, grad_norm, step });
        if grad_norm <= config.tol {
            return PreferenceVector::no_purchase_zero(theta);
        }

        // Near the optimum the Armijo decrease c·s·‖g‖² drops below the
        // floating-point resolution of the objective, and the exact test
        // would reject every step while the gradient is still above tol.
        // In that regime a step is accepted when the objective change is
        // within rounding noise *and* the gradient norm strictly shrinks —
        // which still rejects unstable steps.
        let noise = 8.0 * f64::EPSILON * (1.0 + value.abs());
        step = (step * 2.0).min(1e6);
        loop {
            candidate[0] = 0.0;
            for i in 1..dim {
                candidate[i] = theta[i] - step * grad[i];
            }
            let cand_value = w.eval_raw(&candidate, Some(&mut cand_grad))
                + w.penalty_raw(&candidate, Some(&mut cand_grad));
            let cand_sq = free_sq(&cand_grad);
            let required = ARMIJO_C * step * grad_sq;
            let accept = if required > noise {
                cand_value <= value - required
            } else {
                cand_value <= value + noise && cand_sq < grad_sq
            };
            if accept {
                std::mem::swap(&mut theta, &mut candidate);
                std::mem::swap(&mut grad, &mut cand_grad);
                value = cand_value;
                grad_sq = cand_sq;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return Err(Error::NotConverged {
                    iters: iteration,
                    grad_norm,
                    tol: config.tol,
                    last_iterate: theta,
                });
            }
        }
    }

    Err(Error::NotConverged {
        iters: config.max_iters,
        grad_norm: grad_sq.sqrt(),
        tol: config.tol,
        last_iterate: theta,
    })
}

/// The Moore–Penrose pseudoinverse of a likelihood Hessian, computed through
/// the bordered-matrix identity (see module docs). Fails when the bordered
/// system is numerically singular — e.g. when some product never appears in
/// the data, leaving the Hessian rank-deficient beyond its structural
/// null direction.
pub struct HessianPseudoinverse {
    matrix: DMatrix<f64>,
    cond: f64,
}

/// Condition-estimate ceiling beyond which the bordered system is declared
/// singular.
const MAX_CONDITION: f64 = 1e12;

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl HessianPseudoinverse {
    pub fn compute(h: &DMatrix<f64>) -> Result<Self> {
        let m = h.nrows();
        if h.ncols() != m || m < 2 {
            return Err(Error::DimensionMismatch(format!(
                "hessian must be square with dim >= 2, got {}x{}",
                m,
                h.ncols()
            )));
        }
        let scale = inf_norm(h).max(1.0);
        for i in 0..m {
            for j in (i + 1)..m {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::InvalidInput(format!(
                        "hessian is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }

        let mut bordered = DMatrix::zeros(m + 1, m + 1);
        bordered.view_mut((0, 0), (m, m)).copy_from(h);
        for i in 0..m {
            bordered[(i, m)] = 1.0;
            bordered[(m, i)] = 1.0;
        }
        let bordered_norm = inf_norm(&bordered);
        let inv = match bordered.try_inverse() {
            Some(inv) => inv,
            None => return Err(Error::SingularHessian { cond: f64::INFINITY }),
        };
        let cond = bordered_norm * inf_norm(&inv);
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::SingularHessian { cond });
        }

        // Read the top-left block and symmetrize away LU rounding drift.
        let block = inv.view((0, 0), (m, m));
        let matrix = (&block + block.transpose()) * 0.5;
        Ok(HessianPseudoinverse { matrix, cond })
    }

    /// Dimension n+1 of the underlying Hessian.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    /// H†·v.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// vᵀ·H†·v.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.matrix * v)[(0, 0)]
    }
}

/// One-step debiased estimator: θ̂ᵈ = θ̂′ − H†(θ̂)·∇ℓ(θ̂), where θ̂′ is the
/// mean-centered MLE and both the gradient and Hessian are *unpenalized*.
/// The result lives in the centered gauge: 1ᵀθ̂ᵈ = 1ᵀθ̂′ − (H†1)ᵀ∇ℓ = 0 up
/// to rounding.
pub fn debias(w: &LikelihoodWorkspace, theta_hat: &PreferenceVector) -> Result<PreferenceVector> {
    let pinv = HessianPseudoinverse::compute(&w.hessian(theta_hat)?)?;
    debias_with(w, theta_hat, &pinv)
}

/// [`debias`] with a precomputed pseudoinverse, for pipelines that reuse H†
/// for the variance estimates.
pub fn debias_with(
    w: &LikelihoodWorkspace,
    theta_hat: &PreferenceVector,
    pinv: &HessianPseudoinverse,
) -> Result<PreferenceVector> {
    w.check_theta(theta_hat)?;
    if pinv.dim() != w.n() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "pseudoinverse dim {} does not match n + 1 = {}",
            pinv.dim(),
            w.n() + 1
        )));
    }
    let grad = w.gradient(theta_hat)?;
    let correction = pinv.apply(&grad);
    let centered = theta_hat.to_centered();
    let theta_d: Vec<f64> = centered
        .theta()
        .iter()
        .zip(correction.iter())
        .map(|(t, c)| t - c)
        .collect();
    debug_assert!(
        theta_d.iter().sum::<f64>().abs() <= 1e-8 * (1.0 + inf_vec(&theta_d)),
        "debiased scores drifted off the centered gauge"
    );
    Ok(PreferenceVector::from_internal(theta_d, Gauge::Centered))
}

fn inf_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Assortment;

    fn single_set_dataset(n: usize, items: &[usize], choices: Vec<usize>) -> ObservedDataset {
        let l = choices.len();
        ObservedDataset::new(
            n,
            l,
            1.0,
            None,
            vec![Assortment::new(items.iter().copied()).unwrap()],
            vec![choices],
        )
        .unwrap()
    }

    fn zero_theta(n: usize) -> PreferenceVector {
        PreferenceVector::no_purchase_zero(vec![0.0; n + 1]).unwrap()
    }

    #[test]
    fn single_observation_value_is_log_two() {
        // One set {1}, one draw, choice 0, θ = 0: value = log(e^0 + e^0).
        let d = single_set_dataset(1, &[1], vec![0]);
        let w = LikelihoodWorkspace::new(&d, 0.0).unwrap();
        let v = w.value(&zero_theta(1)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn value_and_gradient_are_gauge_invariant() {
        let d = single_set_dataset(2, &[1, 2], vec![1, 0, 2, 1]);
        let w = LikelihoodWorkspace::new(&d, 0.7).unwrap();
        let theta = PreferenceVector::no_purchase_zero(vec![0.0, 0.4, -1.2]).unwrap();
        let shifted = theta.to_centered();
        assert!((w.value(&theta).unwrap() - w.value(&shifted).unwrap()).abs() < 1e-12);
        assert!(
            (w.value_penalized(&theta).unwrap() - w.value_penalized(&shifted).unwrap()).abs()
                < 1e-12
        );
        let g1 = w.gradient(&theta).unwrap();
        let g2 = w.gradient(&shifted).unwrap();
        assert!((g1 - g2).amax() < 1e-12);
    }

    #[test]
    fn gradient_coordinates_sum_to_zero() {
        let d = ObservedDataset::new(
            3,
            2,
            0.5,
            None,
            vec![Assortment::new([1, 2]).unwrap(), Assortment::new([3]).unwrap()],
            vec![vec![1, 2], vec![0, 3]],
        )
        .unwrap();
        let w = LikelihoodWorkspace::new(&d, 0.0).unwrap();
        let theta = PreferenceVector::no_purchase_zero(vec![0.0, 0.3, -0.8, 1.1]).unwrap();
        let g = w.gradient(&theta).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-14);
        // The penalty is centered, so the penalized gradient sums to zero too.
        let w = LikelihoodWorkspace::new(&d, 2.5).unwrap();
        let g = w.gradient_penalized(&theta).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn empty_dataset_reduces_to_penalty() {
        let d = ObservedDataset::new(2, 1, 0.0, None, vec![], vec![]).unwrap();
        let w = LikelihoodWorkspace::new(&d, 2.0).unwrap();
        assert!(w.is_degenerate());
        // Centered θ = (0, 1, −1): penalty = (λ/2)(0 + 1 + 1) = 2.
        let theta = PreferenceVector::centered(vec![0.0, 1.0, -1.0]).unwrap();
        assert!((w.value_penalized(&theta).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(w.value(&theta).unwrap(), 0.0);
        assert!(fit_mle(&w, &FitConfig::default()).is_err());
    }

    #[test]
    fn uncovered_items_are_reported() {
        let d = single_set_dataset(3, &[2], vec![0, 2]);
        let w = LikelihoodWorkspace::new(&d, 1.0).unwrap();
        assert_eq!(w.uncovered_items(), vec![1, 3]);
    }

    // Finite-difference oracles for the gradient and Hessian.
    fn fd_gradient(w: &LikelihoodWorkspace, theta: &[f64], h: f64) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        let mut t = theta.to_vec();
        for i in 0..theta.len() {
            t[i] = theta[i] + h;
            let up = w.eval_raw(&t, None);
            t[i] = theta[i] - h;
            let down = w.eval_raw(&t, None);
            t[i] = theta[i];
            g[i] = (up - down) / (2.0 * h);
        }
        g
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let d = ObservedDataset::new(
            4,
            3,
            0.4,
            None,
            vec![
                Assortment::new([1, 2, 4]).unwrap(),
                Assortment::new([2, 3]).unwrap(),
                Assortment::new([1]).unwrap(),
            ],
            vec![vec![1, 4, 0], vec![2, 2, 3], vec![0, 1, 1]],
        )
        .unwrap();
        let w = LikelihoodWorkspace::new(&d, 0.0).unwrap();
        let theta = PreferenceVector::no_purchase_zero(vec![0.0, 0.6, -0.9, 0.2, 1.4]).unwrap();

        let g = w.gradient(&theta).unwrap();
        let fd = fd_gradient(&w, theta.theta(), 1e-5);
        for i in 0..5 {
            assert!((g[i] - fd[i]).abs() < 1e-8, "grad[{i}]: {} vs {}", g[i], fd[i]);
        }

        // Hessian columns = finite differences of the gradient.
        let hess = w.hessian(&theta).unwrap();
        let h = 1e-5;
        let mut t = theta.theta().to_vec();
        for j in 0..5 {
            t[j] += h;
            let mut gp = vec![0.0; 5];
            w.eval_raw(&t, Some(&mut gp));
            t[j] -= 2.0 * h;
            let mut gm = vec![0.0; 5];
            w.eval_raw(&t, Some(&mut gm));
            t[j] = theta.theta()[j];
            for i in 0..5 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((hess[(i, j)] - fd).abs() < 1e-7, "hess[({i},{j})]");
            }
        }

        // Structural identities: symmetry and H·1 = 0.
        for i in 0..5 {
            let row_sum: f64 = (0..5).map(|j| hess[(i, j)]).sum();
            assert!(row_sum.abs() < 1e-14);
            for j in 0..5 {
                assert!((hess[(i, j)] - hess[(j, i)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fit_recovers_symmetric_and_asymmetric_logits() {
        // Balanced choices on one set {1}: the MLE is θ_1 = 0 for any λ.
        let d = single_set_dataset(1, &[1], vec![1, 1, 0, 0]);
        let w = LikelihoodWorkspace::new(&d, 0.5).unwrap();
        let fit = fit_mle(&w, &FitConfig::default()).unwrap();
        assert!(fit.theta()[1].abs() < 1e-7, "theta_1 = {}", fit.theta()[1]);

        // 3-of-4 choices: unpenalized MLE is ln 3; λ → 0 recovers it.
        let d = single_set_dataset(1, &[1], vec![1, 1, 1, 0]);
        let w = LikelihoodWorkspace::new(&d, 1e-8).unwrap();
        let fit = fit_mle(&w, &FitConfig::default()).unwrap();
        assert!((fit.theta()[1] - 3f64.ln()).abs() < 1e-5, "theta_1 = {}", fit.theta()[1]);
    }

    #[test]
    fn fit_on_saturated_frequencies_returns_zero() {
        // Choices hit each coordinate of {0,1,2} exactly once: frequencies
        // equal the θ = 0 probabilities, so the optimum is the origin.
        let d = single_set_dataset(2, &[1, 2], vec![0, 1, 2]);
        let w = LikelihoodWorkspace::new(&d, 0.3).unwrap();
        let mut iterations = 0;
        let fit = fit_mle_traced(&w, &FitConfig::default(), &mut |_| iterations += 1).unwrap();
        assert!(fit.theta().iter().all(|t| t.abs() < 1e-7));
        assert!(iterations <= 3, "took {iterations} iterations");
    }

    #[test]
    fn fit_converges_before_iteration_budget_and_honors_it() {
        let d = ObservedDataset::new(
            3,
            4,
            0.5,
            None,
            vec![
                Assortment::new([1, 2]).unwrap(),
                Assortment::new([2, 3]).unwrap(),
                Assortment::new([1, 3]).unwrap(),
            ],
            vec![vec![1, 1, 2, 0], vec![3, 2, 0, 2], vec![1, 0, 3, 1]],
        )
        .unwrap();
        let w = LikelihoodWorkspace::new(&d, 0.05).unwrap();
        let fit = fit_mle(&w, &FitConfig::default()).unwrap();
        let g = w.gradient_penalized(&fit).unwrap();
        let free_norm = g.as_slice()[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(free_norm <= 1e-8, "free gradient norm {free_norm}");

        match fit_mle(&w, &FitConfig { tol: 1e-12, max_iters: 1 }) {
            Err(Error::NotConverged { iters, last_iterate, .. }) => {
                assert_eq!(iters, 1);
                assert_eq!(last_iterate.len(), 4);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn pseudoinverse_matches_hand_computed_case() {
        // One set {1} at θ = 0: p = (1/2, 1/2), H = [[1/4, −1/4], [−1/4, 1/4]].
        // The pseudoinverse is [[1, −1], [−1, 1]] (eigenvalue 1/2 on (1,−1)/√2).
        let d = single_set_dataset(1, &[1], vec![0, 1]);
        let w = LikelihoodWorkspace::new(&d, 0.0).unwrap();
        let h = w.hessian(&zero_theta(1)).unwrap();
        assert!((h[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((h[(0, 1)] + 0.25).abs() < 1e-15);
        let pinv = HessianPseudoinverse::compute(&h).unwrap();
        let expect = [[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((pinv.entry(i, j) - expect[i][j]).abs() < 1e-12);
            }
        }
        assert!(pinv.condition_estimate() < 100.0);
    }

    #[test]
    fn pseudoinverse_rejects_singular_and_asymmetric_input() {
        // All-zero Hessian: the bordered matrix has two identical rows.
        let h = DMatrix::zeros(3, 3);
        assert!(matches!(
            HessianPseudoinverse::compute(&h),
            Err(Error::SingularHessian { .. })
        ));
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 1)] = 1.0;
        assert!(HessianPseudoinverse::compute(&h).is_err());
    }

    #[test]
    fn pseudoinverse_agrees_with_spectral_construction() {
        // Independent oracle: eigendecompose H, invert the eigenvalues above
        // a relative threshold, and rebuild. Also check the Moore–Penrose
        // identities and that the null direction stays null.
        let d = ObservedDataset::new(
            4,
            6,
            0.4,
            None,
            vec![
                Assortment::new([1, 2]).unwrap(),
                Assortment::new([2, 3, 4]).unwrap(),
                Assortment::new([1, 4]).unwrap(),
            ],
            vec![vec![1, 0, 2, 1, 2, 0], vec![3, 4, 0, 2, 3, 3], vec![4, 1, 1, 0, 4, 1]],
        )
        .unwrap();
        let w = LikelihoodWorkspace::new(&d, 0.0).unwrap();
        let theta = PreferenceVector::no_purchase_zero(vec![0.0, 0.5, -0.3, 0.9, -1.1]).unwrap();
        let h = w.hessian(&theta).unwrap();
        let pinv = HessianPseudoinverse::compute(&h).unwrap();

        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let max_ev = eig.eigenvalues.amax();
        let mut spectral = DMatrix::zeros(5, 5);
        for k in 0..5 {
            let ev = eig.eigenvalues[k];
            if ev.abs() > 1e-10 * max_ev {
                let v = eig.eigenvectors.column(k);
                spectral += (&v * v.transpose()) / ev;
            }
        }
        assert!((pinv.matrix() - &spectral).amax() < 1e-8);

        let hphp = &h * pinv.matrix() * &h;
        assert!((&hphp - &h).amax() < 1e-10);
        let php = pinv.matrix() * &h * pinv.matrix();
        assert!((&php - pinv.matrix()).amax() < 1e-10);
        let ones = DVector::from_element(5, 1.0);
        assert!(pinv.apply(&ones).amax() < 1e-10);
        // H·H† = I − 11ᵀ/(n+1): projection off the null direction.
        let proj = &h * pinv.matrix();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 - 0.2 } else { -0.2 };
                assert!((proj[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn debias_fixes_exact_mle() {
        // Balanced logit: θ̂ = 0 is the exact unpenalized MLE, so the
        // correction term vanishes and θ̂ᵈ is just the centered θ̂.
        let d = single_set_dataset(1, &[1], vec![1, 0]);
        let w = LikelihoodWorkspace::new(&d, 0.4).unwrap();
        let theta_hat = zero_theta(1);
        let theta_d = debias(&w, &theta_hat).unwrap();
        assert_eq!(theta_d.gauge(), Gauge::Centered);
        for (d, c) in theta_d.theta().iter().zip(theta_hat.to_centered().theta()) {
            assert!((d - c).abs() < 1e-12);
        }
    }

    #[test]
    fn debiased_scores_stay_centered() {
        let d = ObservedDataset::new(
            3,
            5,
            0.5,
            None,
            vec![
                Assortment::new([1, 2, 3]).unwrap(),
                Assortment::new([1, 3]).unwrap(),
                Assortment::new([2]).unwrap(),
            ],
            vec![vec![1, 2, 0, 3, 1], vec![3, 3, 1, 0, 1], vec![0, 2, 2, 0, 2]],
        )
        .unwrap();
        let w = LikelihoodWorkspace::new(&d, 0.2).unwrap();
        let theta_hat = fit_mle(&w, &FitConfig::default()).unwrap();
        let theta_d = debias(&w, &theta_hat).unwrap();
        assert!(theta_d.theta().iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn penalty_weight_formula() {
        // n = 4, p = 0.5, L = 10: λ = c·sqrt(16·0.5·ln4 / 40).
        let expect = (16.0 * 0.5 * 4f64.ln() / 40.0).sqrt();
        assert!((penalty_weight(1.0, 4, 0.5, 10) - expect).abs() < 1e-15);
        assert!((penalty_weight(0.25, 4, 0.5, 10) - 0.25 * expect).abs() < 1e-15);
    }
}
