//! Sample-complexity sweep: the smallest labeled-source budget reaching a
//! reference target accuracy, bisected on a doubling lattice, as network
//! depth grows. Cells are journaled, so rerunning resumes instead of
//! retraining.
//!
//! ```bash
//! cargo run --release --example depth_sweep
//! ```

use dalab::data::{DomainCounts, GenConfig, ShiftKind, ShiftSpec};
use dalab::emit::{svg_chart, Series};
use dalab::sweep::{sweep, Architecture, SweepAxis, SweepConfig, SweepMetric, TrainerKind};
use dalab::train::TrainConfig;

fn main() {
    std::fs::create_dir_all("out").unwrap();
    for trainer in [TrainerKind::Mmd, TrainerKind::Adversarial] {
        let cfg = SweepConfig {
            axis: SweepAxis::Depth,
            grid: vec![2.0, 3.0, 4.0],
            trials: 5, // the acceptance suite uses 10
            metric: SweepMetric::RequiredMs,
            trainer,
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
                    source_total: 256,
                    source_labeled: 64,
                    target_total: 256,
                    target_labeled: 4,
                    test_per_domain: 300,
                },
                seed: 0,
            },
            arch: Architecture {
                widths: vec![2, 8, 4],
                ..Architecture::default()
            },
            train: TrainConfig {
                alpha: 0.0,
                beta: if matches!(trainer, TrainerKind::Mmd) {
                    1.0
                } else {
                    0.3
                },
                epochs: 150,
                learning_rate: 0.05,
                batch_size: 32,
                ..TrainConfig::default()
            },
            seed: 31,
            reference_accuracy: Some(0.70),
            lattice_min: 4,
            lattice_max: 256,
            standardize: true,
        };
        let result = sweep(&cfg, Some(std::path::Path::new("out"))).unwrap();
        println!("{trainer:?} required labeled source samples:");
        for row in &result.rows {
            println!("  L = {}: Ms = {}", row.value, row.metric);
        }
        let points: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.value, r.metric)).collect();
        let svg = svg_chart(
            &format!("{trainer:?}: required Ms vs depth"),
            "depth L",
            "required Ms",
            &[Series::solid("bisected minimum", points)],
        );
        let path = format!("out/depth_sweep_{trainer:?}.svg").to_lowercase();
        std::fs::write(&path, svg).unwrap();
        println!("  wrote {path}");
    }
}
