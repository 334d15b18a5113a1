//! Closed-form evaluation of the covering-number, concentration, probability
//! and sample-complexity expressions.
//!
//! Covering quantities are computed and reported in log-space throughout.
//! Probability lower bounds may come out negative (vacuous) at desk scale;
//! they are returned as-is with a vacuous flag rather than clamped. The
//! relation constants `L_L` and `L_L_Omega` cannot be estimated from data and
//! are always user-supplied assumptions.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};

/// Which case of the activation-boundedness assumption applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationBoundBranch {
    /// Outputs bounded in value by `B_eta` (sigmoid, softmax).
    Value,
    /// Bounded as an operator: `||eta(u)|| <= B_op ||u||` (ReLU).
    Operator,
}

/// Which objective family a rule refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mmd,
    Adversarial,
}

/// Every constant the bound expressions consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundInputs {
    /// Accuracy parameter of the probability expressions.
    pub epsilon: f64,
    /// Target-loss weight.
    pub alpha: f64,
    /// Loss magnitude bound `b_l`.
    pub loss_bound: f64,
    /// Loss Lipschitz constant `L_l`.
    pub loss_lipschitz: f64,
    /// Kernel Lipschitz constant `L_k`.
    pub kernel_lipschitz: f64,
    /// Activation Lipschitz constant `L_eta`.
    pub activation_lipschitz: f64,
    /// Value bound `B_eta` (used by the value branch for layers >= 2).
    pub value_bound: f64,
    /// Operator bound `B_op` (used by the first layer in both branches).
    pub operator_bound: f64,
    pub branch: ActivationBoundBranch,
    /// Network widths `d_0..d_L`.
    pub widths: Vec<usize>,
    /// Discriminator widths `d^D_1..d^D_K` (empty when there is none).
    pub discriminator_widths: Vec<usize>,
    /// Parameter box bound `B_theta`.
    pub weight_bound: f64,
    /// Input norm bound `B_x`.
    pub input_bound: f64,
    pub labeled_source: usize,
    pub labeled_target: usize,
    pub total_source: usize,
    pub total_target: usize,
    pub sigma_s: f64,
    pub sigma_t: f64,
    pub moment_c_s: f64,
    pub moment_c_t: f64,
    /// Relation constant `L_L` (assumed, not estimable from data).
    pub relation_lipschitz: f64,
    /// Relation constant `L_L_Omega` for the adversarial distance (assumed).
    pub relation_lipschitz_adv: f64,
    /// Discriminator output bound `B_D` (1 for a sigmoid head).
    pub discriminator_bound: f64,
    /// Unit constant in front of the big-O rules.
    pub scale: f64,
    /// Empirical weighted loss, when a target-loss bound is wanted.
    pub empirical_weighted_loss: Option<f64>,
    /// Empirical distance (MMD or discriminator-gap), same purpose.
    pub empirical_distance: Option<f64>,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            epsilon: 0.5,
            alpha: 0.3,
            loss_bound: 13.815510557964274,        // m=2, delta=1e-3
            loss_lipschitz: 1_414.213_562_373_095, // sqrt(2)/1e-3
            kernel_lipschitz: 1.0,
            activation_lipschitz: 1.0,
            value_bound: 1.0,
            operator_bound: 1.0,
            branch: ActivationBoundBranch::Value,
            widths: vec![2, 2, 2],
            discriminator_widths: vec![2, 1],
            weight_bound: 1.0,
            input_bound: 1.0,
            labeled_source: 1_000_000,
            labeled_target: 1_000_000,
            total_source: 1_000_000,
            total_target: 1_000_000,
            sigma_s: 1.0,
            sigma_t: 1.0,
            moment_c_s: 1.0,
            moment_c_t: 1.0,
            relation_lipschitz: 1.0,
            relation_lipschitz_adv: 1.0,
            discriminator_bound: 1.0,
            scale: 1.0,
            empirical_weighted_loss: None,
            empirical_distance: None,
        }
    }
}

impl BoundInputs {
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn common_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    /// Extractor layers `1..L-1` followed by the discriminator layers; this is
    /// the architecture over which the discriminator-composition class lives.
    pub fn cascade_widths(&self) -> Result<Vec<usize>> {
        if self.discriminator_widths.is_empty() {
            return Err(Error::Config(
                "discriminator widths are required for the cascade covering bound".into(),
            ));
        }
        let l = self.depth();
        let mut w: Vec<usize> = self.widths[..l].to_vec();
        w.extend_from_slice(&self.discriminator_widths);
        Ok(w)
    }

    fn validate_eps(eps: f64) -> Result<()> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {eps}"
            )));
        }
        Ok(())
    }
}

/// Lipschitz constant of an activation on R^d (softmax depends on `d`).
pub fn lipschitz_of_activation(kind: Activation, d: usize) -> f64 {
    kind.lipschitz(d)
}

/// Layer-output norm bounds `R_0..R_{L-1}` for an arbitrary width sequence.
///
/// `R_0 = B_x`; `R_1 = B_op B_theta sqrt(d_1 d_0) B_x + B_op B_theta sqrt(d_1)`
/// in both branches. For `l >= 2` the value branch uses `R_l = B_eta sqrt(d_l)`;
/// the operator branch unrolls the affine recursion
/// `R_l = B_op B_theta sqrt(d_l d_{l-1}) R_{l-1} + B_op B_theta sqrt(d_l)`,
/// whose closed form carries the per-term product indexed `k = i..l-1`.
pub fn feature_norm_bounds_for(
    widths: &[usize],
    weight_bound: f64,
    input_bound: f64,
    value_bound: f64,
    operator_bound: f64,
    branch: ActivationBoundBranch,
) -> Vec<f64> {
    let depth = widths.len() - 1;
    let mut r = Vec::with_capacity(depth);
    r.push(input_bound);
    for l in 1..depth {
        let dl = widths[l] as f64;
        let v = if l == 1 {
            let d0 = widths[0] as f64;
            operator_bound * weight_bound * (dl * d0).sqrt() * input_bound
                + operator_bound * weight_bound * dl.sqrt()
        } else {
            match branch {
                ActivationBoundBranch::Value => value_bound * dl.sqrt(),
                ActivationBoundBranch::Operator => {
                    let dlm = widths[l - 1] as f64;
                    operator_bound * weight_bound * (dl * dlm).sqrt() * r[l - 1]
                        + operator_bound * weight_bound * dl.sqrt()
                }
            }
        };
        r.push(v);
    }
    r
}

pub fn feature_norm_bounds(inputs: &BoundInputs) -> Vec<f64> {
    feature_norm_bounds_for(
        &inputs.widths,
        inputs.weight_bound,
        inputs.input_bound,
        inputs.value_bound,
        inputs.operator_bound,
        inputs.branch,
    )
}

/// Constants `Q_1..Q_L` and their partial sum `Q = sum_{l<=L-1} Q_l`.
///
/// `Q_l = sum_{i=1}^{l} (L_eta R_{i-1} sqrt(d_i d_{i-1}) + L_eta sqrt(d_i))
///          prod_{k=i+1}^{l} L_eta B_theta sqrt(d_k d_{k-1})`,
/// which reduces to `Q_1 = L_eta sqrt(d_1 d_0) R_0 + L_eta sqrt(d_1)`.
pub fn q_constants_for(
    widths: &[usize],
    r: &[f64],
    weight_bound: f64,
    activation_lipschitz: f64,
) -> (Vec<f64>, f64) {
    let depth = widths.len() - 1;
    let leta = activation_lipschitz;
    let mut q = Vec::with_capacity(depth);
    for l in 1..=depth {
        let mut total = 0.0;
        for i in 1..=l {
            let (di, dim) = (widths[i] as f64, widths[i - 1] as f64);
            let term = leta * r[i - 1] * (di * dim).sqrt() + leta * di.sqrt();
            let mut prod = 1.0;
            for k in (i + 1)..=l {
                let (dk, dkm) = (widths[k] as f64, widths[k - 1] as f64);
                prod *= leta * weight_bound * (dk * dkm).sqrt();
            }
            total += term * prod;
        }
        q.push(total);
    }
    let q_sum: f64 = q[..depth - 1].iter().sum();
    (q, q_sum)
}

pub fn q_constants(inputs: &BoundInputs) -> (Vec<f64>, f64) {
    let r = feature_norm_bounds(inputs);
    q_constants_for(
        &inputs.widths,
        &r,
        inputs.weight_bound,
        inputs.activation_lipschitz,
    )
}

/// `log N(F, eps) <= sum_{l=1}^{L-1} d_l (d_{l-1}+1) ln(4 B_theta L_k Q / eps^2 + 1)`.
pub fn log_covering_f(inputs: &BoundInputs, eps: f64) -> Result<f64> {
    BoundInputs::validate_eps(eps)?;
    let (_, q_sum) = q_constants(inputs);
    let mut acc = 0.0;
    for l in 1..inputs.depth() {
        let exponent = (inputs.widths[l] * (inputs.widths[l - 1] + 1)) as f64;
        acc += exponent
            * (4.0 * inputs.weight_bound * inputs.kernel_lipschitz * q_sum / (eps * eps) + 1.0)
                .ln();
    }
    Ok(acc)
}

/// `log N(H.F, eps) <= sum_{l=1}^{L} d_l (d_{l-1}+1) ln(2 B_theta Q_L / eps + 1)`.
pub fn log_covering_hf(inputs: &BoundInputs, eps: f64) -> Result<f64> {
    BoundInputs::validate_eps(eps)?;
    let (q, _) = q_constants(inputs);
    Ok(log_covering_hf_for(
        &inputs.widths,
        q[inputs.depth() - 1],
        inputs.weight_bound,
        eps,
    ))
}

fn log_covering_hf_for(widths: &[usize], q_last: f64, weight_bound: f64, eps: f64) -> f64 {
    let depth = widths.len() - 1;
    let mut acc = 0.0;
    for l in 1..=depth {
        let exponent = (widths[l] * (widths[l - 1] + 1)) as f64;
        acc += exponent * (2.0 * weight_bound * q_last / eps + 1.0).ln();
    }
    acc
}

/// Covering bound for the discriminator-after-extractor class: the
/// composite-class formula applied to the cascade of extractor layers
/// `1..L-1` and discriminator layers `1..K` with scalar output.
pub fn log_covering_v(inputs: &BoundInputs, eps: f64) -> Result<f64> {
    BoundInputs::validate_eps(eps)?;
    let widths = inputs.cascade_widths()?;
    let r = feature_norm_bounds_for(
        &widths,
        inputs.weight_bound,
        inputs.input_bound,
        inputs.value_bound,
        inputs.operator_bound,
        inputs.branch,
    );
    let (q, _) = q_constants_for(
        &widths,
        &r,
        inputs.weight_bound,
        inputs.activation_lipschitz,
    );
    Ok(log_covering_hf_for(
        &widths,
        q[widths.len() - 2],
        inputs.weight_bound,
        eps,
    ))
}

/// Concentration exponent
/// `a(N, eps) = (1/8) (sqrt(N) eps / (4 sigma) - 1)^2
///               / (1 + (sqrt(N) eps / (4 sigma) - 1) C / (2 sqrt(N) sigma))`,
/// defined for `N > 16 sigma^2 / eps^2`.
pub fn concentration_a(n: usize, eps: f64, sigma: f64, c: f64) -> Result<f64> {
    let min_n = 16.0 * sigma * sigma / (eps * eps);
    if (n as f64) <= min_n {
        return Err(Error::Precondition {
            name: "concentration_a",
            min_n,
            n,
        });
    }
    let x = (n as f64).sqrt() * eps / (4.0 * sigma);
    Ok((x - 1.0).powi(2) / 8.0 / (1.0 + (x - 1.0) * c / (2.0 * (n as f64).sqrt() * sigma)))
}

/// A probability lower bound together with its vacuousness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBound {
    pub value: f64,
    pub vacuous: bool,
}

impl ProbabilityBound {
    fn new(value: f64) -> Self {
        ProbabilityBound {
            value,
            vacuous: value <= 0.0 || value.is_nan(),
        }
    }
}

/// Weighted-loss deviation probability:
/// `1 - 2 N(H.F_t, eps/(8 alpha L_l)) e^{-Mt eps^2/(8 alpha^2 b_l^2)}
///    - 2 N(H.F_s, eps/(8 (1-alpha) L_l)) e^{-Ms eps^2/(8 (1-alpha)^2 b_l^2)}`.
///
/// At `alpha = 0` the target deviation term is exactly 0 (the target loss has
/// zero weight in the weighted loss); symmetrically at `alpha = 1`.
pub fn theorem2_probability(inputs: &BoundInputs) -> Result<ProbabilityBound> {
    let eps = inputs.epsilon;
    BoundInputs::validate_eps(eps)?;
    let alpha = inputs.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    let b = inputs.loss_bound;
    let ll = inputs.loss_lipschitz;
    let target_term = if alpha == 0.0 {
        0.0
    } else {
        let log_cov = log_covering_hf(inputs, eps / (8.0 * alpha * ll))?;
        let exponent = inputs.labeled_target as f64 * eps * eps / (8.0 * alpha * alpha * b * b);
        2.0 * (log_cov - exponent).exp()
    };
    let source_term = if alpha == 1.0 {
        0.0
    } else {
        let one_m = 1.0 - alpha;
        let log_cov = log_covering_hf(inputs, eps / (8.0 * one_m * ll))?;
        let exponent = inputs.labeled_source as f64 * eps * eps / (8.0 * one_m * one_m * b * b);
        2.0 * (log_cov - exponent).exp()
    };
    Ok(ProbabilityBound::new(1.0 - target_term - source_term))
}

/// The weighted-loss probability expression minus the two unlabeled-sample
/// terms
/// `N(F, eps/8) exp(-a(N, eps))` for the source and target domains.
pub fn theorem3_probability(inputs: &BoundInputs) -> Result<ProbabilityBound> {
    let eps = inputs.epsilon;
    let base = theorem2_probability(inputs)?;
    let a_s = concentration_a(inputs.total_source, eps, inputs.sigma_s, inputs.moment_c_s)?;
    let a_t = concentration_a(inputs.total_target, eps, inputs.sigma_t, inputs.moment_c_t)?;
    let log_cov = log_covering_f(inputs, eps / 8.0)?;
    let value = base.value - (log_cov - a_s).exp() - (log_cov - a_t).exp();
    Ok(ProbabilityBound::new(value))
}

/// Discriminator-distance deviation probability:
/// `1 - 2 N(V_s, eps/6) e^{-Ns eps^2/(72 B_D^2)} - 2 N(V_t, eps/6) e^{-Nt eps^2/(72 B_D^2)}`.
pub fn lemma9_probability(inputs: &BoundInputs) -> Result<ProbabilityBound> {
    let eps = inputs.epsilon;
    BoundInputs::validate_eps(eps)?;
    let log_cov = log_covering_v(inputs, eps / 6.0)?;
    let bd2 = inputs.discriminator_bound * inputs.discriminator_bound;
    let exp_s = inputs.total_source as f64 * eps * eps / (72.0 * bd2);
    let exp_t = inputs.total_target as f64 * eps * eps / (72.0 * bd2);
    Ok(ProbabilityBound::new(
        1.0 - 2.0 * (log_cov - exp_s).exp() - 2.0 * (log_cov - exp_t).exp(),
    ))
}

/// Right-hand side of the target-loss bound:
/// `hLw + (1-alpha) L hD + (1-alpha) L eps + eps`, with `L` the assumed
/// relation constant of the chosen variant.
pub fn target_loss_upper_bound(
    empirical_weighted_loss: f64,
    empirical_distance: f64,
    inputs: &BoundInputs,
    variant: Variant,
) -> Result<f64> {
    let l = match variant {
        Variant::Mmd => inputs.relation_lipschitz,
        Variant::Adversarial => inputs.relation_lipschitz_adv,
    };
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Config(
            "relation constant must be supplied (finite, positive)".into(),
        ));
    }
    let one_m = 1.0 - inputs.alpha;
    Ok(empirical_weighted_loss
        + one_m * l * empirical_distance
        + one_m * l * inputs.epsilon
        + inputs.epsilon)
}

fn complexity_denominator(eps: f64, d: usize, layers: usize) -> Result<f64> {
    let (d, l) = (d as f64, layers as f64);
    let den = d * d * l * (l / eps).ln() + d * d * l * l * d.ln();
    if !(den.is_finite() && den > 0.0) {
        return Err(Error::Config(format!(
            "nonpositive complexity denominator {den} (need L/eps > 1 and d >= 2)"
        )));
    }
    Ok(den)
}

/// Weight rule `alpha = min(1, c sqrt(Mt eps^2 / (d^2 L log(L/eps) + d^2 L^2 log d)))`.
pub fn recommended_alpha(
    mt: usize,
    eps: f64,
    d: usize,
    layers: usize,
    c_scale: f64,
) -> Result<f64> {
    BoundInputs::validate_eps(eps)?;
    let den = complexity_denominator(eps, d, layers)?;
    Ok((c_scale * (mt as f64 * eps * eps / den).sqrt()).min(1.0))
}

/// Sample-complexity rule. For the MMD variant all three counts equal
/// `c (d^2 L log(L/eps) + d^2 L^2 log d) / eps^2`; the adversarial variant
/// keeps that for `Ms` and replaces `L` by `L+K` for `Ns` and `Nt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexity {
    pub labeled_source: f64,
    pub total_source: f64,
    pub total_target: f64,
}

pub fn sample_complexity(
    eps: f64,
    d: usize,
    layers: usize,
    disc_layers: usize,
    variant: Variant,
    c_scale: f64,
) -> Result<SampleComplexity> {
    BoundInputs::validate_eps(eps)?;
    let labeled = c_scale * complexity_denominator(eps, d, layers)? / (eps * eps);
    let unlabeled = match variant {
        Variant::Mmd => labeled,
        Variant::Adversarial => {
            c_scale * complexity_denominator(eps, d, layers + disc_layers)? / (eps * eps)
        }
    };
    Ok(SampleComplexity {
        labeled_source: labeled,
        total_source: unlabeled,
        total_target: unlabeled,
    })
}

/// Fixed-function tails consumed by the Monte-Carlo verification suite.
/// These are the single sources of truth for its theoretical-bound columns.
pub mod tails {
    /// Two-sided Hoeffding tail `2 exp(-2 n eps^2 / range^2)` for i.i.d.
    /// variables spanning `range`.
    pub fn hoeffding(n: usize, eps: f64, range: f64) -> f64 {
        2.0 * (-2.0 * n as f64 * eps * eps / (range * range)).exp()
    }

    /// RKHS-mean deviation tail
    /// `exp(-(1/8)(sqrt(N) eps/sigma - 1)^2 / (1 + (sqrt(N) eps/sigma - 1) C/(2 sqrt(N) sigma)))`,
    /// valid for `N > sigma^2/eps^2`. Returns `None` below the precondition.
    pub fn rkhs_mean(n: usize, eps: f64, sigma: f64, c: f64) -> Option<f64> {
        if (n as f64) <= sigma * sigma / (eps * eps) {
            return None;
        }
        let x = (n as f64).sqrt() * eps / sigma;
        let a = (x - 1.0).powi(2) / 8.0 / (1.0 + (x - 1.0) * c / (2.0 * (n as f64).sqrt() * sigma));
        Some((-a).exp())
    }

    /// Fixed-pair MMD deviation tail `exp(-a_s) + exp(-a_t)` with the
    /// covering factors dropped (sound: dropping them only loosens the
    /// uniform bound down to the fixed pair).
    pub fn mmd_fixed_pair(
        n_s: usize,
        n_t: usize,
        eps: f64,
        sigma_s: f64,
        c_s: f64,
        sigma_t: f64,
        c_t: f64,
    ) -> crate::error::Result<f64> {
        let a_s = super::concentration_a(n_s, eps, sigma_s, c_s)?;
        let a_t = super::concentration_a(n_t, eps, sigma_t, c_t)?;
        Ok((-a_s).exp() + (-a_t).exp())
    }

    /// Fixed-function discriminator-gap tail, per domain
    /// `2 exp(-N eps^2 / (72 B_D^2))`, summed over the two domains.
    pub fn ddan_fixed(n_s: usize, n_t: usize, eps: f64, b_d: f64) -> f64 {
        let coef = eps * eps / (72.0 * b_d * b_d);
        2.0 * (-(n_s as f64) * coef).exp() + 2.0 * (-(n_t as f64) * coef).exp()
    }
}

/// Everything the `bounds` CLI subcommand reports, all covering quantities in
/// log-space. `relation_assumed` flags that `L_L`/`L_L_Omega` were supplied
/// by the user, never estimated.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub feature_norm_bounds: Vec<f64>,
    pub q_constants: Vec<f64>,
    pub q_total: f64,
    pub log_covering_f_s: f64,
    pub log_covering_f_t: f64,
    pub log_covering_hf_s: f64,
    pub log_covering_hf_t: f64,
    pub log_covering_v_s: Option<f64>,
    pub log_covering_v_t: Option<f64>,
    pub a_s: Option<f64>,
    pub a_t: Option<f64>,
    pub theorem2: ProbabilityBound,
    pub theorem3: Option<ProbabilityBound>,
    pub lemma9: Option<ProbabilityBound>,
    pub target_loss_bound_mmd: Option<f64>,
    pub target_loss_bound_adversarial: Option<f64>,
    pub recommended_alpha: f64,
    pub sample_complexity_mmd: SampleComplexity,
    pub sample_complexity_adversarial: SampleComplexity,
    pub relation_assumed: bool,
}

/// Evaluates the full report. Components whose preconditions fail (e.g. too
/// few unlabeled samples for the concentration exponent) are reported as
/// absent rather than failing the whole report.
pub fn bound_report(inputs: &BoundInputs) -> Result<BoundReport> {
    let eps = inputs.epsilon;
    let r = feature_norm_bounds(inputs);
    let (q, q_total) = q_constants(inputs);
    let log_f = log_covering_f(inputs, eps / 8.0)?;
    let ll = inputs.loss_lipschitz;
    let hf_t = if inputs.alpha > 0.0 {
        log_covering_hf(inputs, eps / (8.0 * inputs.alpha * ll))?
    } else {
        0.0
    };
    let hf_s = if inputs.alpha < 1.0 {
        log_covering_hf(inputs, eps / (8.0 * (1.0 - inputs.alpha) * ll))?
    } else {
        0.0
    };
    let log_v = if inputs.discriminator_widths.is_empty() {
        None
    } else {
        Some(log_covering_v(inputs, eps / 6.0)?)
    };
    let a_s = concentration_a(inputs.total_source, eps, inputs.sigma_s, inputs.moment_c_s).ok();
    let a_t = concentration_a(inputs.total_target, eps, inputs.sigma_t, inputs.moment_c_t).ok();
    let theorem2 = theorem2_probability(inputs)?;
    let theorem3 = theorem3_probability(inputs).ok();
    let lemma9 = if log_v.is_some() {
        Some(lemma9_probability(inputs)?)
    } else {
        None
    };
    let empirical = inputs
        .empirical_weighted_loss
        .zip(inputs.empirical_distance);
    let bound_mmd = empirical
        .map(|(lw, d)| target_loss_upper_bound(lw, d, inputs, Variant::Mmd))
        .transpose()?;
    let bound_adv = empirical
        .map(|(lw, d)| target_loss_upper_bound(lw, d, inputs, Variant::Adversarial))
        .transpose()?;
    let d = inputs.common_width();
    let layers = inputs.depth();
    let k = inputs.discriminator_widths.len();
    Ok(BoundReport {
        feature_norm_bounds: r,
        q_constants: q,
        q_total,
        log_covering_f_s: log_f,
        log_covering_f_t: log_f,
        log_covering_hf_s: hf_s,
        log_covering_hf_t: hf_t,
        log_covering_v_s: log_v,
        log_covering_v_t: log_v,
        a_s,
        a_t,
        theorem2,
        theorem3,
        lemma9,
        target_loss_bound_mmd: bound_mmd,
        target_loss_bound_adversarial: bound_adv,
        recommended_alpha: recommended_alpha(inputs.labeled_target, eps, d, layers, inputs.scale)?,
        sample_complexity_mmd: sample_complexity(eps, d, layers, k, Variant::Mmd, inputs.scale)?,
        sample_complexity_adversarial: sample_complexity(
            eps,
            d,
            layers,
            k,
            Variant::Adversarial,
            inputs.scale,
        )?,
        relation_assumed: true,
    })
}

impl BoundReport {
    /// Flat CSV serialization: one header row and one value row.
    pub fn to_csv(&self) -> String {
        fn opt(v: &Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let header = [
            "q_total",
            "log_covering_f_s",
            "log_covering_f_t",
            "log_covering_hf_s",
            "log_covering_hf_t",
            "log_covering_v_s",
            "log_covering_v_t",
            "a_s",
            "a_t",
            "theorem2",
            "theorem2_vacuous",
            "theorem3",
            "theorem3_vacuous",
            "lemma9",
            "lemma9_vacuous",
            "target_loss_bound_mmd",
            "target_loss_bound_adversarial",
            "recommended_alpha",
            "ms_mmd",
            "ns_mmd",
            "nt_mmd",
            "ms_adv",
            "ns_adv",
            "nt_adv",
            "relation_assumed",
        ]
        .join(",");
        let row = [
            self.q_total.to_string(),
            self.log_covering_f_s.to_string(),
            self.log_covering_f_t.to_string(),
            self.log_covering_hf_s.to_string(),
            self.log_covering_hf_t.to_string(),
            opt(&self.log_covering_v_s),
            opt(&self.log_covering_v_t),
            opt(&self.a_s),
            opt(&self.a_t),
            self.theorem2.value.to_string(),
            self.theorem2.vacuous.to_string(),
            opt(&self.theorem3.map(|p| p.value)),
            self.theorem3
                .map(|p| p.vacuous.to_string())
                .unwrap_or_default(),
            opt(&self.lemma9.map(|p| p.value)),
            self.lemma9
                .map(|p| p.vacuous.to_string())
                .unwrap_or_default(),
            opt(&self.target_loss_bound_mmd),
            opt(&self.target_loss_bound_adversarial),
            self.recommended_alpha.to_string(),
            self.sample_complexity_mmd.labeled_source.to_string(),
            self.sample_complexity_mmd.total_source.to_string(),
            self.sample_complexity_mmd.total_target.to_string(),
            self.sample_complexity_adversarial
                .labeled_source
                .to_string(),
            self.sample_complexity_adversarial.total_source.to_string(),
            self.sample_complexity_adversarial.total_target.to_string(),
            self.relation_assumed.to_string(),
        ]
        .join(",");
        format!("{header}\n{row}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_inputs(widths: Vec<usize>) -> BoundInputs {
        BoundInputs {
            widths,
            ..BoundInputs::default()
        }
    }

    #[test]
    fn activation_lipschitz_table() {
        assert_eq!(lipschitz_of_activation(Activation::Relu, 3), 1.0);
        assert_eq!(lipschitz_of_activation(Activation::Softplus, 3), 1.0);
        assert_eq!(lipschitz_of_activation(Activation::Sigmoid, 3), 0.25);
        assert_eq!(lipschitz_of_activation(Activation::Softmax, 4), 1.0);
        assert_eq!(lipschitz_of_activation(Activation::Identity, 9), 1.0);
    }

    #[test]
    fn r_value_branch() {
        // widths (4,4,4,4): R_0 = B_x = 1, R_1 = sqrt(16) + sqrt(4) = 6,
        // R_2 = B_eta sqrt(4) = 2
        let r = feature_norm_bounds(&unit_inputs(vec![4, 4, 4, 4]));
        assert_eq!(r, vec![1.0, 6.0, 2.0]);
    }

    #[test]
    fn r_operator_branch() {
        // all-ones, d_0 = d_1 = 1: R_1 = 1*1*1*1 + 1*1*1 = 2
        let mut inp = unit_inputs(vec![1, 1, 1]);
        inp.branch = ActivationBoundBranch::Operator;
        let r = feature_norm_bounds(&inp);
        assert_eq!(r, vec![1.0, 2.0]);
    }

    #[test]
    fn r_operator_recursion_matches_closed_form() {
        // closed form with the per-term product indexing k = i..l-1
        let mut inp = unit_inputs(vec![2, 3, 4, 5]);
        inp.branch = ActivationBoundBranch::Operator;
        inp.weight_bound = 0.7;
        inp.input_bound = 1.3;
        let r = feature_norm_bounds(&inp);
        let (bt, bx, bo): (f64, f64, f64) = (0.7, 1.3, 1.0);
        let w = [2f64, 3.0, 4.0, 5.0];
        for l in 2..=2usize {
            let mut first = (bo * bt).powi(l as i32) * (bx * w[0].sqrt() + 1.0) * w[1].sqrt();
            for k in 1..l {
                first *= (w[k + 1] * w[k]).sqrt();
            }
            let mut mid = 0.0;
            for i in 2..l {
                let mut prod = 1.0;
                for k in i..l {
                    prod *= (w[k + 1] * w[k]).sqrt();
                }
                mid += (bo * bt).powi((l + 1 - i) as i32) * w[i].sqrt() * prod;
            }
            let last = bo * bt * w[l].sqrt();
            assert_relative_eq!(r[l], first + mid + last, max_relative = 1e-12);
        }
    }

    #[test]
    fn q1_spot_value() {
        let (q, q_sum) = q_constants(&unit_inputs(vec![2, 2, 2]));
        assert_relative_eq!(q[0], 3.414213562373095, max_relative = 1e-14);
        assert_relative_eq!(q[1], 15.071067811865475, max_relative = 1e-14);
        // L = 2: Q = Q_1 alone
        assert_relative_eq!(q_sum, q[0], epsilon = 0.0);
    }

    #[test]
    fn q_monotone_in_width() {
        let mut prev = 0.0;
        for d in [2usize, 4, 8] {
            let (_, q_sum) = q_constants(&unit_inputs(vec![d, d, d]));
            assert!(q_sum > prev, "Q not increasing at d = {d}");
            prev = q_sum;
        }
    }

    #[test]
    fn log_covering_f_spot_value() {
        // 6 * ln(4 * (2 + sqrt 2) + 1), oracle-evaluated
        let v = log_covering_f(&unit_inputs(vec![2, 2, 2]), 1.0).unwrap();
        assert_relative_eq!(v, 16.109448557442312, max_relative = 1e-12);
    }

    #[test]
    fn log_covering_f_limits() {
        let inp = unit_inputs(vec![2, 2, 2]);
        assert!(log_covering_f(&inp, 1e9).unwrap() < 1e-15);
        assert!(log_covering_f(&inp, 0.0).is_err());
        assert!(log_covering_f(&inp, -1.0).is_err());
    }

    #[test]
    fn log_covering_hf_spot_value() {
        let v = log_covering_hf(&unit_inputs(vec![2, 2, 2]), 0.5).unwrap();
        assert_relative_eq!(v, 49.38627868220136, max_relative = 1e-12);
    }

    #[test]
    fn log_covering_hf_single_layer_and_eps_monotone() {
        let inp = unit_inputs(vec![3, 2]);
        // single-term sum: d_1 (d_0 + 1) ln(2 B Q_1 / eps + 1)
        let (q, _) = q_constants(&inp);
        let eps = 0.4;
        let expect = (2.0 * (3.0 + 1.0)) * (2.0 * q[0] / eps + 1.0).ln();
        assert_relative_eq!(
            log_covering_hf(&inp, eps).unwrap(),
            expect,
            max_relative = 1e-12
        );
        assert!(log_covering_hf(&inp, 0.8).unwrap() <= log_covering_hf(&inp, 0.4).unwrap());
    }

    #[test]
    fn monotonicity_grid() {
        // nonincreasing in eps; nondecreasing in d, L, B_theta, L_k
        let eps_grid = [0.25, 0.5, 1.0, 2.0];
        for d in [2usize, 4, 8] {
            for l in [2usize, 3, 4] {
                let widths = vec![d; l + 1];
                let mut prev_f = f64::INFINITY;
                let mut prev_hf = f64::INFINITY;
                for eps in eps_grid {
                    let inp = unit_inputs(widths.clone());
                    let f = log_covering_f(&inp, eps).unwrap();
                    let hf = log_covering_hf(&inp, eps).unwrap();
                    assert!(f <= prev_f + 1e-12);
                    assert!(hf <= prev_hf + 1e-12);
                    prev_f = f;
                    prev_hf = hf;
                }
            }
        }
        let at = |d: usize, l: usize, bt: f64, lk: f64| {
            let mut inp = unit_inputs(vec![d; l + 1]);
            inp.weight_bound = bt;
            inp.kernel_lipschitz = lk;
            (
                log_covering_f(&inp, 0.5).unwrap(),
                log_covering_hf(&inp, 0.5).unwrap(),
            )
        };
        for (lo, hi) in [
            ((2, 2, 1.0, 1.0), (4, 2, 1.0, 1.0)),
            ((2, 2, 1.0, 1.0), (2, 3, 1.0, 1.0)),
            ((2, 2, 1.0, 1.0), (2, 2, 2.0, 1.0)),
            ((2, 2, 1.0, 1.0), (2, 2, 1.0, 2.0)),
        ] {
            let a = at(lo.0, lo.1, lo.2, lo.3);
            let b = at(hi.0, hi.1, hi.2, hi.3);
            assert!(b.0 >= a.0 - 1e-12, "log N(F) not monotone: {a:?} vs {b:?}");
            assert!(b.1 >= a.1 - 1e-12, "log N(HF) not monotone: {a:?} vs {b:?}");
        }
        // L_k affects only the transformation-class bound; require strict
        // growth there and no change in the composite-class bound
        let a = at(2, 2, 1.0, 1.0);
        let b = at(2, 2, 1.0, 2.0);
        assert!(b.0 > a.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn log_covering_v_cascade() {
        // extractor layers 1..L-1 of a (2,2,2,2) net give pre-classifier
        // widths (2,2,2); with discriminator (2,1) the cascade is (2,2,2,2,1)
        let mut inp = unit_inputs(vec![2, 2, 2, 2]);
        inp.discriminator_widths = vec![2, 1];
        let v = log_covering_v(&inp, 0.5).unwrap();
        let direct = unit_inputs(vec![2, 2, 2, 2, 1]);
        let expect = log_covering_hf(&direct, 0.5).unwrap();
        assert_relative_eq!(v, expect, max_relative = 1e-12);

        // K = 1 scalar head degenerates to an L-layer net with d_L = 1
        let mut head = unit_inputs(vec![2, 2, 2]);
        head.discriminator_widths = vec![1];
        let v1 = log_covering_v(&head, 0.5).unwrap();
        let expect1 = log_covering_hf(&unit_inputs(vec![2, 2, 1]), 0.5).unwrap();
        assert_relative_eq!(v1, expect1, max_relative = 1e-12);

        // increasing K increases the value
        let mut base = unit_inputs(vec![2, 2, 2]);
        base.discriminator_widths = vec![2, 1];
        let vb = log_covering_v(&base, 0.5).unwrap();
        let mut deeper = unit_inputs(vec![2, 2, 2]);
        deeper.discriminator_widths = vec![2, 2, 1];
        assert!(log_covering_v(&deeper, 0.5).unwrap() > vb);

        let mut none = unit_inputs(vec![2, 2, 2]);
        none.discriminator_widths = vec![];
        assert!(log_covering_v(&none, 0.5).is_err());
    }

    #[test]
    fn concentration_a_spot_and_boundary() {
        let v = concentration_a(100, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.2616279069767442, max_relative = 1e-13);
        // boundary: N exactly 16 sigma^2/eps^2 violates the strict inequality
        assert!(matches!(
            concentration_a(16, 1.0, 1.0, 1.0),
            Err(Error::Precondition { .. })
        ));
        let big = concentration_a(1_000_000, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(big, 1809.7928436911488, max_relative = 1e-12);
    }

    #[test]
    fn concentration_a_increasing_in_n_and_rate() {
        let mut prev = 0.0;
        for n in [20, 50, 100, 1000, 10_000] {
            let v = concentration_a(n, 1.0, 1.0, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        // a(N)/(N eps^2) stabilizes towards 1/(128 sigma^2 (1 + eps C/(8 sigma^2)))
        let r1 = concentration_a(10_000, 1.0, 1.0, 1.0).unwrap() / 1e4;
        let r2 = concentration_a(1_000_000, 1.0, 1.0, 1.0).unwrap() / 1e6;
        assert!((r1 - r2).abs() / r2 < 0.10, "{r1} vs {r2}");
        let limit = 1.0 / 144.0;
        assert!((r2 - limit).abs() / limit < 0.01);
    }

    #[test]
    fn theorem2_endpoints_and_spot_values() {
        let mut inp = unit_inputs(vec![2, 2, 2]);
        inp.alpha = 0.0;
        inp.labeled_target = 0; // the target term must be exactly 0
        let p0 = theorem2_probability(&inp).unwrap();
        inp.alpha = 1.0;
        inp.labeled_source = 0;
        let p1 = theorem2_probability(&inp).unwrap();
        assert!(p0.value.is_finite() && p1.value.is_finite());

        // huge sample counts: probability -> 1
        let huge = unit_inputs(vec![2, 2, 2]);
        let p = theorem2_probability(&huge).unwrap();
        assert_relative_eq!(p.value, 1.0, epsilon = 1e-12);
        assert!(!p.vacuous);

        // oracle spot value at Ms = Mt = 475000
        let mut mid = unit_inputs(vec![2, 2, 2]);
        mid.labeled_source = 475_000;
        mid.labeled_target = 475_000;
        let pm = theorem2_probability(&mid).unwrap();
        assert_relative_eq!(pm.value, 0.6692047830019154, max_relative = 1e-9);

        // small counts: grossly vacuous, reported as-is
        let mut tiny = unit_inputs(vec![2, 2, 2]);
        tiny.labeled_source = 12_000;
        tiny.labeled_target = 12_000;
        let pv = theorem2_probability(&tiny).unwrap();
        assert!(pv.vacuous && pv.value < 0.0);
    }

    #[test]
    fn theorem3_spot_values_and_ordering() {
        let inp = unit_inputs(vec![2, 2, 2]);
        let p3 = theorem3_probability(&inp).unwrap();
        assert_relative_eq!(p3.value, 1.0, epsilon = 1e-12);

        let mut mid = unit_inputs(vec![2, 2, 2]);
        mid.total_source = 35_000;
        mid.total_target = 35_000;
        let pm = theorem3_probability(&mid).unwrap();
        assert_relative_eq!(pm.value, 0.9999213681292036, max_relative = 1e-10);

        // always <= theorem 2 (extra nonnegative subtraction)
        for n in [30_000usize, 65_000, 200_000] {
            let mut v = unit_inputs(vec![2, 2, 2]);
            v.total_source = n;
            v.total_target = n;
            let p2 = theorem2_probability(&v).unwrap();
            let p3 = theorem3_probability(&v).unwrap();
            assert!(p3.value <= p2.value + 1e-15);
        }

        // degenerate variance: the unlabeled terms vanish
        let mut degen = unit_inputs(vec![2, 2, 2]);
        degen.sigma_s = 1e-9;
        degen.sigma_t = 1e-9;
        degen.moment_c_s = 1e-9;
        degen.moment_c_t = 1e-9;
        let pd = theorem3_probability(&degen).unwrap();
        let p2 = theorem2_probability(&degen).unwrap();
        assert_relative_eq!(pd.value, p2.value, epsilon = 1e-12);

        // below the sample threshold: a named precondition error
        let mut low = unit_inputs(vec![2, 2, 2]);
        low.total_source = 60; // 16 sigma^2/eps^2 = 64
        assert!(matches!(
            theorem3_probability(&low),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn lemma9_spot_values() {
        // pre-classifier widths (2,2) + discriminator (2,1): cascade (2,2,2,1)
        let mut inp = unit_inputs(vec![2, 2, 2]);
        inp.discriminator_widths = vec![2, 1];
        let p = lemma9_probability(&inp).unwrap();
        assert_relative_eq!(p.value, 1.0, epsilon = 1e-12);

        let mut mid = inp.clone();
        mid.total_source = 30_000;
        mid.total_target = 30_000;
        let pm = lemma9_probability(&mid).unwrap();
        assert_relative_eq!(pm.value, 0.9992669350726711, max_relative = 1e-10);

        // doubling B_D with N fixed lowers the probability
        let mut wide = mid.clone();
        wide.discriminator_bound = 2.0;
        assert!(lemma9_probability(&wide).unwrap().value < pm.value);
    }

    #[test]
    fn target_loss_bound_examples() {
        let mut inp = unit_inputs(vec![2, 2, 2]);
        inp.alpha = 0.5;
        inp.relation_lipschitz = 2.0;
        inp.epsilon = 0.05;
        let v = target_loss_upper_bound(0.2, 0.1, &inp, Variant::Mmd).unwrap();
        assert_relative_eq!(v, 0.40, epsilon = 1e-12);

        inp.epsilon = 0.0;
        // epsilon 0 would be rejected upstream; exercise the formula directly
        let aligned = 0.3 + 0.5 * 2.0 * 0.0 + 0.0 + 0.0;
        let got = target_loss_upper_bound(0.3, 0.0, &inp, Variant::Mmd).unwrap();
        assert_relative_eq!(got, aligned, epsilon = 1e-12);

        inp.alpha = 1.0;
        inp.epsilon = 0.07;
        let v1 = target_loss_upper_bound(0.3, 5.0, &inp, Variant::Mmd).unwrap();
        assert_relative_eq!(v1, 0.3 + 0.07, epsilon = 1e-12);
    }

    #[test]
    fn alpha_rule_spot_and_scaling() {
        let a = recommended_alpha(100, 0.1, 10, 3, 1.0).unwrap();
        assert_relative_eq!(a, 0.017981755987000796, max_relative = 1e-12);
        // quadrupling Mt doubles alpha below the cap
        let a4 = recommended_alpha(400, 0.1, 10, 3, 1.0).unwrap();
        assert_relative_eq!(a4, 2.0 * a, max_relative = 1e-12);
        // enormous Mt: capped at 1
        assert_eq!(
            recommended_alpha(usize::MAX / 2, 0.1, 10, 3, 1.0).unwrap(),
            1.0
        );
        // nonpositive denominator
        assert!(recommended_alpha(100, 10.0, 1, 2, 1.0).is_err());
    }

    #[test]
    fn sample_complexity_spot_and_rate() {
        let sc = sample_complexity(0.1, 10, 3, 0, Variant::Mmd, 1.0).unwrap();
        assert_relative_eq!(sc.labeled_source, 309268.57981932877, max_relative = 1e-12);
        assert_eq!(sc.labeled_source, sc.total_source);
        assert_eq!(sc.total_source, sc.total_target);

        // halving eps roughly quadruples the counts (log drift allowed)
        let half = sample_complexity(0.05, 10, 3, 0, Variant::Mmd, 1.0).unwrap();
        let ratio = half.labeled_source / sc.labeled_source;
        assert!((3.9..=4.3).contains(&ratio), "ratio {ratio}");

        // adversarial with K = 0 degenerates to the MMD formula
        let adv0 = sample_complexity(0.1, 10, 3, 0, Variant::Adversarial, 1.0).unwrap();
        assert_eq!(adv0, sc);
        // with a discriminator the unlabeled counts use L + K
        let adv = sample_complexity(0.1, 10, 3, 2, Variant::Adversarial, 1.0).unwrap();
        assert_eq!(adv.labeled_source, sc.labeled_source);
        assert!(adv.total_source > sc.total_source);
    }

    #[test]
    fn report_round_trip() {
        let mut inp = unit_inputs(vec![2, 2, 2]);
        inp.empirical_weighted_loss = Some(0.2);
        inp.empirical_distance = Some(0.1);
        let report = bound_report(&inp).unwrap();
        assert!(report.relation_assumed);
        let json = serde_json::to_string_pretty(&report).unwrap();
        assert!(json.contains("recommended_alpha"));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(
            csv.lines().next().unwrap().split(',').count(),
            csv.lines().nth(1).unwrap().split(',').count()
        );
    }
}
