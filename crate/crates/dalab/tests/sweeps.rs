//! Desk-scale sweep behavior on real training runs.

use dalab::data::{DomainCounts, GenConfig, ShiftKind, ShiftSpec};
use dalab::sweep::{sweep, Architecture, SweepAxis, SweepConfig, SweepMetric, TrainerKind};
use dalab::train::TrainConfig;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

#[test]
fn mt_accuracy_nondecreasing_in_median() {
    // separable data: more labeled target samples should never hurt
    let cfg = SweepConfig {
        axis: SweepAxis::Mt,
        grid: vec![4.0, 16.0, 64.0],
        trials: 5,
        metric: SweepMetric::Accuracy,
        trainer: TrainerKind::Mmd,
        gen: GenConfig {
            kind: ShiftKind::Gaussians,
            dim: 2,
            classes: 2,
            separation: 1.5,
            noise: 0.8,
            shift: ShiftSpec {
                rotation_deg: 30.0,
                ..ShiftSpec::default()
            },
            counts: DomainCounts {
                source_total: 96,
                source_labeled: 64,
                target_total: 96,
                target_labeled: 4,
                test_per_domain: 200,
            },
            seed: 0,
        },
        arch: Architecture {
            widths: vec![2, 6, 2],
            ..Architecture::default()
        },
        train: TrainConfig {
            alpha: 0.5,
            beta: 0.5,
            epochs: 60,
            learning_rate: 0.05,
            batch_size: 32,
            ..TrainConfig::default()
        },
        seed: 7,
        reference_accuracy: None,
        lattice_min: 4,
        lattice_max: 64,
        standardize: true,
    };
    let res = sweep(&cfg, None).unwrap();
    let mut medians = Vec::new();
    for &value in &cfg.grid {
        let mut accs: Vec<f64> = res
            .rows
            .iter()
            .filter(|r| r.value == value && !r.diverged)
            .map(|r| r.metric)
            .collect();
        assert_eq!(accs.len(), cfg.trials);
        medians.push(median(&mut accs));
    }
    assert!(
        medians.windows(2).all(|w| w[0] <= w[1] + 1e-12),
        "medians not nondecreasing: {medians:?}"
    );

    // empty result -> header-only CSV
    let empty = dalab::sweep::SweepResult {
        axis: "mt".into(),
        metric: "target_accuracy".into(),
        trials: 0,
        seed: 0,
        reference_accuracy: None,
        rows: vec![],
    };
    assert_eq!(empty.to_csv(), "mt,trial,target_accuracy,diverged\n");
}
