//! The optimal target-loss weight grows like sqrt(Mt): scan accuracy over
//! alpha for several labeled-target budgets, take the quadratic-fit argmax,
//! and fit c sqrt(Mt) through the optima.
//!
//! A quick look with few trials; the acceptance suite runs 20 trials.
//!
//! ```bash
//! cargo run --release --example alpha_scaling
//! ```

use dalab::data::{DomainCounts, GenConfig, ShiftKind, ShiftSpec};
use dalab::sweep::{
    alpha_opt_curve, Architecture, SweepAxis, SweepConfig, SweepMetric, TrainerKind,
};
use dalab::train::TrainConfig;

fn main() {
    let cfg = SweepConfig {
        axis: SweepAxis::Alpha,
        grid: vec![],
        trials: 6,
        metric: SweepMetric::Accuracy,
        trainer: TrainerKind::Mmd,
        gen: GenConfig {
            kind: ShiftKind::Gaussians,
            dim: 2,
            classes: 4,
            separation: 2.0,
            noise: 1.0,
            shift: ShiftSpec {
                rotation_deg: 10.0,
                ..ShiftSpec::default()
            },
            counts: DomainCounts {
                source_total: 160,
                source_labeled: 120,
                target_total: 160,
                target_labeled: 8,
                test_per_domain: 300,
            },
            seed: 0,
        },
        arch: Architecture {
            widths: vec![2, 8, 4],
            ..Architecture::default()
        },
        train: TrainConfig {
            beta: 1.0,
            epochs: 300,
            learning_rate: 0.05,
            batch_size: 32,
            ..TrainConfig::default()
        },
        seed: 42,
        reference_accuracy: None,
        lattice_min: 4,
        lattice_max: 512,
        standardize: true,
    };
    let curve = alpha_opt_curve(&cfg, &[8, 32, 128], &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
    for p in &curve.points {
        println!(
            "Mt = {:>4}: alpha_opt = {}",
            p.mt,
            p.alpha_opt
                .map(|a| format!("{a:.3}"))
                .unwrap_or_else(|| "flat".into())
        );
    }
    if let Some(fit) = &curve.sqrt_fit {
        println!(
            "fit alpha_opt = {:.4} sqrt(Mt), R^2 = {:.3}",
            fit.coefficients[0], fit.r_squared
        );
    }
}
