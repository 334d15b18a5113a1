//! Projected minibatch SGD on the two alignment objectives.
//!
//! The MMD objective is
//! `(1-alpha) hL_s + alpha hL_t + beta sum_l (hD^l)^2` with the per-layer
//! squared discrepancies taken over layers `1..L-1`. The adversarial
//! objective is `(1-alpha) hL_s + alpha hL_t - beta (hL_s_dom + hL_t_dom)`;
//! the discriminator descends the domain losses while the feature extractor
//! receives the sign-reversed domain gradient scaled by `beta` (the min-max
//! reading of the negated domain term). Every optimizer step is followed by
//! projection onto the parameter box, so the magnitude constraint holds
//! throughout training.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic, KernelSpec};
use crate::loss::{
    cross_entropy, cross_entropy_grad, domain_log_loss, domain_log_loss_grad, DomainLabel,
};
use crate::mmd::{mmd2_grad_with_bandwidth, mmd2_layer_with_bandwidth};
use crate::net::{
    backward_batch, clip_params_mut, forward_batch, init_params, NetworkGrads, NetworkParams,
    NetworkSpec,
};
use crate::seeding;

/// Hyperparameters shared by both trainers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Target classification-loss weight.
    pub alpha: f64,
    /// Alignment weight.
    pub beta: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Share the source and target feature networks (`f_s = f_t`).
    pub couple_domains: bool,
    /// Cross-entropy floor.
    pub delta: f64,
    /// Gaussian kernel bandwidth; `None` freezes the median heuristic of the
    /// first batch's layer features.
    pub bandwidth: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            beta: 1.0,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            couple_domains: true,
            delta: crate::loss::DEFAULT_DELTA,
            bandwidth: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::Config("beta must be nonnegative".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// One minibatch drawn from a domain: alignment samples (labeled and
/// unlabeled together) plus the labeled sub-batch used by the
/// classification term.
#[derive(Debug, Clone)]
pub struct DomainBatch {
    pub all_x: DMatrix<f64>,
    pub labeled_x: DMatrix<f64>,
    pub labeled_y: DMatrix<f64>,
}

/// Scalar pieces of an objective evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ObjectiveParts {
    pub loss_s: f64,
    pub loss_t: f64,
    pub weighted: f64,
    /// Total squared MMD (MMD objective) or the discriminator mean gap
    /// (adversarial objective).
    pub alignment: f64,
    /// Domain penalties, adversarial objective only.
    pub domain_loss_s: f64,
    pub domain_loss_t: f64,
    pub total: f64,
}

/// Per-epoch trace row. Losses and alignment are means over the epoch's
/// minibatches; accuracy is measured on the target test split.
#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub loss_s: f64,
    pub loss_t: f64,
    pub weighted: f64,
    pub alignment: f64,
    pub target_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn final_target_accuracy(&self) -> f64 {
        self.epochs.last().map(|e| e.target_accuracy).unwrap_or(0.0)
    }

    /// CSV rows: `epoch,hLs,hLt,hLw,alignment,target_acc`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,hLs,hLt,hLw,alignment,target_acc\n");
        for (i, e) in self.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i, e.loss_s, e.loss_t, e.weighted, e.alignment, e.target_accuracy
            ));
        }
        out
    }
}

/// Fraction of argmax-correct predictions; ties break toward the lowest
/// class index on both sides.
pub fn accuracy(predictions: &DMatrix<f64>, labels: &DMatrix<f64>) -> Result<f64> {
    if predictions.ncols() == 0 {
        return Err(Error::EmptySampleSet("accuracy"));
    }
    if predictions.ncols() != labels.ncols() {
        return Err(Error::Dimension {
            expected: labels.ncols(),
            got: predictions.ncols(),
            context: "accuracy sample count",
        });
    }
    let argmax = |col: nalgebra::DVectorView<f64>| {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i] > col[best] {
                best = i;
            }
        }
        best
    };
    let mut correct = 0usize;
    for j in 0..predictions.ncols() {
        if argmax(predictions.column(j)) == argmax(labels.column(j)) {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.ncols() as f64)
}

// ---------------------------------------------------------------------------
// MMD-aligned network

/// Source and target networks of equal architecture with a shared output
/// layer; fully coupled (`target = None`) by default.
#[derive(Debug, Clone)]
pub struct MmdModel {
    pub spec: NetworkSpec,
    pub source: NetworkParams,
    /// `None` means fully coupled domains (`Theta_s = Theta_t`). When
    /// present, the output layers are kept identical (shared classifier).
    pub target: Option<NetworkParams>,
}

impl MmdModel {
    pub fn new(
        widths: Vec<usize>,
        hidden: Activation,
        weight_bound: f64,
        input_bound: f64,
        coupled: bool,
        seed: u64,
    ) -> Result<Self> {
        let depth = widths.len().saturating_sub(1);
        if depth < 1 {
            return Err(Error::Spec("network needs at least one layer".into()));
        }
        let mut acts = vec![hidden; depth - 1];
        acts.push(Activation::Softmax);
        let spec = NetworkSpec::new(widths, acts, weight_bound, input_bound)?;
        let source = init_params(&spec, seed);
        let target = if coupled { None } else { Some(source.clone()) };
        Ok(MmdModel {
            spec,
            source,
            target,
        })
    }

    pub fn coupled(&self) -> bool {
        self.target.is_none()
    }

    pub fn params(&self, domain: DomainLabel) -> &NetworkParams {
        match domain {
            DomainLabel::Source => &self.source,
            DomainLabel::Target => self.target.as_ref().unwrap_or(&self.source),
        }
    }

    pub fn predict(&self, domain: DomainLabel, x: &DMatrix<f64>) -> DMatrix<f64> {
        forward_batch(&self.spec, self.params(domain), x)
            .pop()
            .unwrap()
    }

    pub fn evaluate(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, domain: DomainLabel) -> Result<f64> {
        accuracy(&self.predict(domain, x), y)
    }

    /// Per-layer hidden features (`1..L-1`) used by the alignment term.
    pub fn hidden_features(&self, domain: DomainLabel, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut feats = forward_batch(&self.spec, self.params(domain), x);
        feats.pop();
        feats.remove(0);
        feats
    }
}

/// Gradients for the two networks of an [`MmdModel`].
#[derive(Debug, Clone)]
pub struct MmdGrads {
    pub source: NetworkGrads,
    pub target: NetworkGrads,
}

fn classification_pass(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &DomainBatch,
    weight: f64,
    delta: f64,
    grads: &mut NetworkGrads,
) -> Result<f64> {
    let m = batch.labeled_x.ncols();
    if m == 0 {
        if weight != 0.0 {
            return Err(Error::Config(
                "classification weight is nonzero but the labeled batch is empty".into(),
            ));
        }
        return Ok(0.0);
    }
    let feats = forward_batch(spec, params, &batch.labeled_x);
    let preds = feats.last().unwrap();
    let mut loss = 0.0;
    let mut upstream = DMatrix::zeros(preds.nrows(), m);
    for j in 0..m {
        let p = preds.column(j).into_owned();
        let y = batch.labeled_y.column(j).into_owned();
        loss += cross_entropy(&p, &y, delta)?;
        if weight != 0.0 {
            upstream.set_column(
                j,
                &(cross_entropy_grad(&p, &y, delta) * (weight / m as f64)),
            );
        }
    }
    if weight != 0.0 {
        let (g, _) = backward_batch(spec, params, &feats, &upstream, None);
        grads.axpy(1.0, &g);
    }
    Ok(loss / m as f64)
}

/// Evaluates the MMD objective on one batch pair and returns its value parts
/// together with gradients for both networks. Gradients flow through the
/// classification terms and through every per-layer alignment term.
pub fn mmd_objective(
    model: &MmdModel,
    batch_s: &DomainBatch,
    batch_t: &DomainBatch,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> Result<(ObjectiveParts, MmdGrads)> {
    cfg.validate()?;
    let spec = &model.spec;
    let mut gs = NetworkParams::zeros(spec);
    let mut gt = NetworkParams::zeros(spec);
    let loss_s = classification_pass(
        spec,
        model.params(DomainLabel::Source),
        batch_s,
        1.0 - cfg.alpha,
        cfg.delta,
        &mut gs,
    )?;
    let loss_t = classification_pass(
        spec,
        model.params(DomainLabel::Target),
        batch_t,
        cfg.alpha,
        cfg.delta,
        &mut gt,
    )?;

    let mut alignment = 0.0;
    if cfg.beta > 0.0 && spec.depth() >= 2 {
        let feats_s = forward_batch(spec, model.params(DomainLabel::Source), &batch_s.all_x);
        let feats_t = forward_batch(spec, model.params(DomainLabel::Target), &batch_t.all_x);
        let mut inj_s: Vec<Option<DMatrix<f64>>> = vec![None; spec.depth() + 1];
        let mut inj_t: Vec<Option<DMatrix<f64>>> = vec![None; spec.depth() + 1];
        for l in 1..spec.depth() {
            let gamma = kernel.bandwidth_for_layer(l);
            alignment += mmd2_layer_with_bandwidth(gamma, &feats_s[l], &feats_t[l])?;
            let (grad_s, grad_t) = mmd2_grad_with_bandwidth(gamma, &feats_s[l], &feats_t[l])?;
            inj_s[l] = Some(cfg.beta * grad_s);
            inj_t[l] = Some(cfg.beta * grad_t);
        }
        let zero_top_s = DMatrix::zeros(spec.output_dim(), batch_s.all_x.ncols());
        let (g, _) = backward_batch(
            spec,
            model.params(DomainLabel::Source),
            &feats_s,
            &zero_top_s,
            Some(&inj_s),
        );
        gs.axpy(1.0, &g);
        let zero_top_t = DMatrix::zeros(spec.output_dim(), batch_t.all_x.ncols());
        let (g, _) = backward_batch(
            spec,
            model.params(DomainLabel::Target),
            &feats_t,
            &zero_top_t,
            Some(&inj_t),
        );
        gt.axpy(1.0, &g);
    }

    let weighted = (1.0 - cfg.alpha) * loss_s + cfg.alpha * loss_t;
    let parts = ObjectiveParts {
        loss_s,
        loss_t,
        weighted,
        alignment,
        total: weighted + cfg.beta * alignment,
        ..Default::default()
    };
    Ok((
        parts,
        MmdGrads {
            source: gs,
            target: gt,
        },
    ))
}

// ---------------------------------------------------------------------------
// Adversarial network

/// Feature extractor, single-layer softmax label predictor, and a sigmoid
/// discriminator head. The sigmoid keeps discriminator outputs in (0,1), so
/// its output bound is 1.
#[derive(Debug, Clone)]
pub struct AdversarialModel {
    pub extractor_spec: NetworkSpec,
    pub extractor_s: NetworkParams,
    /// `None` means coupled extractors (`f_s = f_t`).
    pub extractor_t: Option<NetworkParams>,
    pub predictor_spec: NetworkSpec,
    pub predictor: NetworkParams,
    pub discriminator_spec: NetworkSpec,
    pub discriminator: NetworkParams,
}

impl AdversarialModel {
    /// `widths` lists `d_0..d_L` with `d_L` the class count; the extractor
    /// spans `d_0..d_{L-1}` and the predictor is the final layer.
    /// `disc_hidden` gives the discriminator's hidden widths.
    pub fn new(
        widths: &[usize],
        hidden: Activation,
        disc_hidden: &[usize],
        weight_bound: f64,
        input_bound: f64,
        coupled: bool,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Spec(
                "adversarial model needs depth >= 2 (extractor + predictor)".into(),
            ));
        }
        let feat_dim = widths[widths.len() - 2];
        let classes = widths[widths.len() - 1];
        let ext_widths = widths[..widths.len() - 1].to_vec();
        let ext_acts = vec![hidden; ext_widths.len() - 1];
        let extractor_spec = NetworkSpec::new(ext_widths, ext_acts, weight_bound, input_bound)?;
        let predictor_spec = NetworkSpec::new(
            vec![feat_dim, classes],
            vec![Activation::Softmax],
            weight_bound,
            input_bound,
        )?;
        let mut disc_widths = vec![feat_dim];
        disc_widths.extend_from_slice(disc_hidden);
        disc_widths.push(1);
        let mut disc_acts = vec![hidden; disc_widths.len() - 2];
        disc_acts.push(Activation::Sigmoid);
        let discriminator_spec =
            NetworkSpec::new(disc_widths, disc_acts, weight_bound, input_bound)?;

        let extractor_s = init_params(&extractor_spec, seeding::derive(seed, 1));
        let extractor_t = if coupled {
            None
        } else {
            Some(extractor_s.clone())
        };
        Ok(AdversarialModel {
            predictor: init_params(&predictor_spec, seeding::derive(seed, 2)),
            discriminator: init_params(&discriminator_spec, seeding::derive(seed, 3)),
            extractor_spec,
            extractor_s,
            extractor_t,
            predictor_spec,
            discriminator_spec,
        })
    }

    pub fn coupled(&self) -> bool {
        self.extractor_t.is_none()
    }

    pub fn extractor(&self, domain: DomainLabel) -> &NetworkParams {
        match domain {
            DomainLabel::Source => &self.extractor_s,
            DomainLabel::Target => self.extractor_t.as_ref().unwrap_or(&self.extractor_s),
        }
    }

    /// Features at the extractor output (layer `L-1`).
    pub fn features(&self, domain: DomainLabel, x: &DMatrix<f64>) -> DMatrix<f64> {
        forward_batch(&self.extractor_spec, self.extractor(domain), x)
            .pop()
            .unwrap()
    }

    pub fn predict(&self, domain: DomainLabel, x: &DMatrix<f64>) -> DMatrix<f64> {
        let feats = self.features(domain, x);
        forward_batch(&self.predictor_spec, &self.predictor, &feats)
            .pop()
            .unwrap()
    }

    pub fn evaluate(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, domain: DomainLabel) -> Result<f64> {
        accuracy(&self.predict(domain, x), y)
    }

    /// Scalar discriminator outputs for raw domain inputs.
    pub fn discriminate(&self, domain: DomainLabel, x: &DMatrix<f64>) -> DVector<f64> {
        let feats = self.features(domain, x);
        let out = forward_batch(&self.discriminator_spec, &self.discriminator, &feats)
            .pop()
            .unwrap();
        out.row(0).transpose()
    }
}

/// `| mean_S D(f_s(x)) - mean_T D(f_t(x)) |`, the empirical
/// discriminator-based distribution distance. Bounded by the discriminator
/// output bound.
pub fn empirical_ddan_distance(
    model: &AdversarialModel,
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
) -> Result<f64> {
    if s.ncols() == 0 || t.ncols() == 0 {
        return Err(Error::EmptySampleSet("empirical_ddan_distance"));
    }
    let vs = model.discriminate(DomainLabel::Source, s);
    let vt = model.discriminate(DomainLabel::Target, t);
    Ok((vs.mean() - vt.mean()).abs())
}

/// Gradients for every player of an [`AdversarialModel`].
#[derive(Debug, Clone)]
pub struct AdversarialGrads {
    pub extractor_s: NetworkGrads,
    pub extractor_t: NetworkGrads,
    pub predictor: NetworkGrads,
    pub discriminator: NetworkGrads,
}

/// Evaluates the adversarial objective on one batch pair.
///
/// Returned gradients implement the min-max reading: the discriminator
/// gradient descends `hL_s_dom + hL_t_dom`, while the extractor gradient is
/// the classification gradient minus `beta` times the domain-loss gradient.
pub fn adversarial_objective(
    model: &AdversarialModel,
    batch_s: &DomainBatch,
    batch_t: &DomainBatch,
    cfg: &TrainConfig,
) -> Result<(ObjectiveParts, AdversarialGrads)> {
    cfg.validate()?;
    let ext_spec = &model.extractor_spec;
    let mut g_es = NetworkParams::zeros(ext_spec);
    let mut g_et = NetworkParams::zeros(ext_spec);
    let mut g_pred = NetworkParams::zeros(&model.predictor_spec);
    let mut g_disc = NetworkParams::zeros(&model.discriminator_spec);

    let class_pass = |batch: &DomainBatch,
                      domain: DomainLabel,
                      weight: f64,
                      g_ext: &mut NetworkGrads,
                      g_pred: &mut NetworkGrads|
     -> Result<f64> {
        let m = batch.labeled_x.ncols();
        if m == 0 {
            if weight != 0.0 {
                return Err(Error::Config(
                    "classification weight is nonzero but the labeled batch is empty".into(),
                ));
            }
            return Ok(0.0);
        }
        let ext_feats = forward_batch(ext_spec, model.extractor(domain), &batch.labeled_x);
        let pred_feats = forward_batch(
            &model.predictor_spec,
            &model.predictor,
            ext_feats.last().unwrap(),
        );
        let preds = pred_feats.last().unwrap();
        let mut loss = 0.0;
        let mut upstream = DMatrix::zeros(preds.nrows(), m);
        for j in 0..m {
            let p = preds.column(j).into_owned();
            let y = batch.labeled_y.column(j).into_owned();
            loss += cross_entropy(&p, &y, cfg.delta)?;
            if weight != 0.0 {
                upstream.set_column(
                    j,
                    &(cross_entropy_grad(&p, &y, cfg.delta) * (weight / m as f64)),
                );
            }
        }
        if weight != 0.0 {
            let (gp, g_in) = backward_batch(
                &model.predictor_spec,
                &model.predictor,
                &pred_feats,
                &upstream,
                None,
            );
            g_pred.axpy(1.0, &gp);
            let (ge, _) =
                backward_batch(ext_spec, model.extractor(domain), &ext_feats, &g_in, None);
            g_ext.axpy(1.0, &ge);
        }
        Ok(loss / m as f64)
    };

    let loss_s = class_pass(
        batch_s,
        DomainLabel::Source,
        1.0 - cfg.alpha,
        &mut g_es,
        &mut g_pred,
    )?;
    let loss_t = class_pass(
        batch_t,
        DomainLabel::Target,
        cfg.alpha,
        &mut g_et,
        &mut g_pred,
    )?;

    // Domain-discrimination pass over the full batches. The discriminator
    // accumulates the descent direction; the extractor the reversed one.
    let mut mean_out = [0.0f64; 2];
    let mut dom_losses = [0.0f64; 2];
    for (idx, (batch, domain)) in [
        (batch_s, DomainLabel::Source),
        (batch_t, DomainLabel::Target),
    ]
    .into_iter()
    .enumerate()
    {
        let n = batch.all_x.ncols();
        if n == 0 {
            return Err(Error::EmptySampleSet("adversarial domain batch"));
        }
        let ext_feats = forward_batch(ext_spec, model.extractor(domain), &batch.all_x);
        let disc_feats = forward_batch(
            &model.discriminator_spec,
            &model.discriminator,
            ext_feats.last().unwrap(),
        );
        let outs = disc_feats.last().unwrap();
        let mut loss = 0.0;
        let mut upstream = DMatrix::zeros(1, n);
        for j in 0..n {
            let v = outs[(0, j)];
            loss += domain_log_loss(v, domain, cfg.delta)?;
            upstream[(0, j)] = domain_log_loss_grad(v, domain, cfg.delta) / n as f64;
        }
        loss /= n as f64;
        dom_losses[idx] = loss;
        mean_out[idx] = outs.row(0).mean();
        let (gd, g_in) = backward_batch(
            &model.discriminator_spec,
            &model.discriminator,
            &disc_feats,
            &upstream,
            None,
        );
        g_disc.axpy(1.0, &gd);
        if cfg.beta != 0.0 {
            let reversed = -cfg.beta * g_in;
            let (ge, _) = backward_batch(
                ext_spec,
                model.extractor(domain),
                &ext_feats,
                &reversed,
                None,
            );
            match domain {
                DomainLabel::Source => g_es.axpy(1.0, &ge),
                DomainLabel::Target => g_et.axpy(1.0, &ge),
            }
        }
    }

    let weighted = (1.0 - cfg.alpha) * loss_s + cfg.alpha * loss_t;
    let parts = ObjectiveParts {
        loss_s,
        loss_t,
        weighted,
        alignment: (mean_out[0] - mean_out[1]).abs(),
        domain_loss_s: dom_losses[0],
        domain_loss_t: dom_losses[1],
        total: weighted - cfg.beta * (dom_losses[0] + dom_losses[1]),
    };
    Ok((
        parts,
        AdversarialGrads {
            extractor_s: g_es,
            extractor_t: g_et,
            predictor: g_pred,
            discriminator: g_disc,
        },
    ))
}

// ---------------------------------------------------------------------------
// SGD loop

struct Momentum {
    velocity: NetworkParams,
}

impl Momentum {
    fn new(spec: &NetworkSpec) -> Self {
        Momentum {
            velocity: NetworkParams::zeros(spec),
        }
    }

    fn step(
        &mut self,
        spec: &NetworkSpec,
        params: &mut NetworkParams,
        grads: &NetworkGrads,
        cfg: &TrainConfig,
    ) {
        self.velocity.scale_mut(cfg.momentum);
        self.velocity.axpy(1.0, grads);
        params.axpy(-cfg.learning_rate, &self.velocity);
        clip_params_mut(spec, params);
    }
}

struct BatchPlan {
    all: Vec<usize>,
    labeled: Vec<usize>,
    cursor_all: usize,
    cursor_labeled: usize,
}

impl BatchPlan {
    fn new(total: usize, labeled: usize) -> Self {
        BatchPlan {
            all: (0..total).collect(),
            labeled: (0..labeled).collect(),
            cursor_all: 0,
            cursor_labeled: 0,
        }
    }

    fn reshuffle(&mut self, rng: &mut impl Rng) {
        self.all.shuffle(rng);
        self.labeled.shuffle(rng);
        self.cursor_all = 0;
        self.cursor_labeled = 0;
    }

    fn next_batch(&mut self, split: &crate::data::DomainSplit, batch_size: usize) -> DomainBatch {
        let take_all = batch_size.min(self.all.len());
        let mut all_idx = Vec::with_capacity(take_all);
        for _ in 0..take_all {
            all_idx.push(self.all[self.cursor_all]);
            self.cursor_all = (self.cursor_all + 1) % self.all.len();
        }
        let take_lab = batch_size.min(self.labeled.len());
        let mut lab_idx = Vec::with_capacity(take_lab);
        for _ in 0..take_lab {
            lab_idx.push(self.labeled[self.cursor_labeled]);
            self.cursor_labeled = (self.cursor_labeled + 1) % self.labeled.len().max(1);
        }
        let all_x = DMatrix::from_columns(
            &all_idx
                .iter()
                .map(|&i| split.train_x.column(i))
                .collect::<Vec<_>>(),
        );
        let (labeled_x, labeled_y) = if take_lab > 0 {
            (
                DMatrix::from_columns(
                    &lab_idx
                        .iter()
                        .map(|&i| split.train_x.column(i))
                        .collect::<Vec<_>>(),
                ),
                DMatrix::from_columns(
                    &lab_idx
                        .iter()
                        .map(|&i| split.train_y.column(i))
                        .collect::<Vec<_>>(),
                ),
            )
        } else {
            (
                DMatrix::zeros(split.train_x.nrows(), 0),
                DMatrix::zeros(split.train_y.nrows(), 0),
            )
        };
        DomainBatch {
            all_x,
            labeled_x,
            labeled_y,
        }
    }
}

fn check_label_budget(ds: &DomainDataset, cfg: &TrainConfig) -> Result<()> {
    ds.validate()?;
    if cfg.alpha > 0.0 && ds.target.labeled == 0 {
        return Err(Error::Config(
            "alpha > 0 requires labeled target samples".into(),
        ));
    }
    if cfg.alpha < 1.0 && ds.source.labeled == 0 {
        return Err(Error::Config(
            "alpha < 1 requires labeled source samples".into(),
        ));
    }
    Ok(())
}

fn epochs_steps(ds: &DomainDataset, cfg: &TrainConfig) -> usize {
    let n = ds.source.total().max(ds.target.total());
    n.div_ceil(cfg.batch_size)
}

/// Freezes per-layer bandwidths from the median heuristic of the first
/// batch's hidden features, unless the config pins a bandwidth.
fn resolve_kernel(model: &MmdModel, ds: &DomainDataset, cfg: &TrainConfig) -> Result<KernelSpec> {
    if let Some(b) = cfg.bandwidth {
        return KernelSpec::gaussian(b);
    }
    let n = cfg.batch_size.min(ds.source.total()).min(ds.target.total());
    let first_s = ds.source.train_x.columns(0, n).into_owned();
    let first_t = ds.target.train_x.columns(0, n).into_owned();
    let fs = model.hidden_features(DomainLabel::Source, &first_s);
    let ft = model.hidden_features(DomainLabel::Target, &first_t);
    let mut per_layer = Vec::with_capacity(fs.len());
    for (a, b) in fs.iter().zip(&ft) {
        per_layer.push(median_heuristic(a, b));
    }
    let mut k = KernelSpec::gaussian(1.0)?;
    if !per_layer.is_empty() {
        k.bandwidth = per_layer[0];
        k.per_layer = Some(per_layer);
    }
    Ok(k)
}

/// Trains an [`MmdModel`] with projected minibatch SGD. Deterministic for a
/// given `(model, dataset, config)`.
pub fn train_mmd(
    model: &mut MmdModel,
    ds: &DomainDataset,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    cfg.validate()?;
    check_label_budget(ds, cfg)?;
    let kernel = resolve_kernel(model, ds, cfg)?;
    let steps = epochs_steps(ds, cfg);
    let mut plan_s = BatchPlan::new(ds.source.total(), ds.source.labeled);
    let mut plan_t = BatchPlan::new(ds.target.total(), ds.target.labeled);
    let mut vel_s = Momentum::new(&model.spec);
    let mut vel_t = Momentum::new(&model.spec);
    let mut trace = TrainTrace::default();
    let depth = model.spec.depth();

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, epoch as u64));
        plan_s.reshuffle(&mut rng);
        plan_t.reshuffle(&mut rng);
        let mut sums = ObjectiveParts::default();
        for _ in 0..steps {
            let bs = plan_s.next_batch(&ds.source, cfg.batch_size);
            let bt = plan_t.next_batch(&ds.target, cfg.batch_size);
            let (parts, grads) = mmd_objective(model, &bs, &bt, &kernel, cfg)?;
            if !parts.total.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            sums.loss_s += parts.loss_s;
            sums.loss_t += parts.loss_t;
            sums.weighted += parts.weighted;
            sums.alignment += parts.alignment;
            if model.coupled() {
                let mut g = grads.source;
                g.axpy(1.0, &grads.target);
                vel_s.step(&model.spec, &mut model.source, &g, cfg);
            } else {
                // shared output layer: both networks receive the summed
                // last-layer gradient, so they stay identical there
                let mut gs = grads.source.clone();
                let mut gt = grads.target.clone();
                let shared_w =
                    &grads.source.layers[depth - 1].weight + &grads.target.layers[depth - 1].weight;
                let shared_b =
                    &grads.source.layers[depth - 1].bias + &grads.target.layers[depth - 1].bias;
                gs.layers[depth - 1].weight = shared_w.clone();
                gs.layers[depth - 1].bias = shared_b.clone();
                gt.layers[depth - 1].weight = shared_w;
                gt.layers[depth - 1].bias = shared_b;
                vel_s.step(&model.spec, &mut model.source, &gs, cfg);
                let target = model.target.as_mut().unwrap();
                vel_t.step(&model.spec, target, &gt, cfg);
            }
        }
        let target_accuracy =
            model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target)?;
        trace.epochs.push(EpochRecord {
            loss_s: sums.loss_s / steps as f64,
            loss_t: sums.loss_t / steps as f64,
            weighted: sums.weighted / steps as f64,
            alignment: sums.alignment / steps as f64,
            target_accuracy,
        });
    }
    Ok(trace)
}

/// Trains an [`AdversarialModel`]; all three players update simultaneously
/// each step, the extractor through the reversed domain gradient.
pub fn train_adversarial(
    model: &mut AdversarialModel,
    ds: &DomainDataset,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    cfg.validate()?;
    check_label_budget(ds, cfg)?;
    let steps = epochs_steps(ds, cfg);
    let mut plan_s = BatchPlan::new(ds.source.total(), ds.source.labeled);
    let mut plan_t = BatchPlan::new(ds.target.total(), ds.target.labeled);
    let mut vel_es = Momentum::new(&model.extractor_spec);
    let mut vel_et = Momentum::new(&model.extractor_spec);
    let mut vel_pred = Momentum::new(&model.predictor_spec);
    let mut vel_disc = Momentum::new(&model.discriminator_spec);
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, epoch as u64));
        plan_s.reshuffle(&mut rng);
        plan_t.reshuffle(&mut rng);
        let mut sums = ObjectiveParts::default();
        for _ in 0..steps {
            let bs = plan_s.next_batch(&ds.source, cfg.batch_size);
            let bt = plan_t.next_batch(&ds.target, cfg.batch_size);
            let (parts, grads) = adversarial_objective(model, &bs, &bt, cfg)?;
            if !parts.total.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            sums.loss_s += parts.loss_s;
            sums.loss_t += parts.loss_t;
            sums.weighted += parts.weighted;
            sums.alignment += parts.alignment;
            if model.coupled() {
                let mut g = grads.extractor_s;
                g.axpy(1.0, &grads.extractor_t);
                vel_es.step(&model.extractor_spec, &mut model.extractor_s, &g, cfg);
            } else {
                vel_es.step(
                    &model.extractor_spec,
                    &mut model.extractor_s,
                    &grads.extractor_s,
                    cfg,
                );
                let et = model.extractor_t.as_mut().unwrap();
                vel_et.step(&model.extractor_spec, et, &grads.extractor_t, cfg);
            }
            vel_pred.step(
                &model.predictor_spec,
                &mut model.predictor,
                &grads.predictor,
                cfg,
            );
            vel_disc.step(
                &model.discriminator_spec,
                &mut model.discriminator,
                &grads.discriminator,
                cfg,
            );
        }
        let target_accuracy =
            model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target)?;
        trace.epochs.push(EpochRecord {
            loss_s: sums.loss_s / steps as f64,
            loss_t: sums.loss_t / steps as f64,
            weighted: sums.weighted / steps as f64,
            alignment: sums.alignment / steps as f64,
            target_accuracy,
        });
    }
    Ok(trace)
}
