//! Monte-Carlo check that observed deviation frequencies stay below the
//! theoretical concentration tails (fixed-function cores of the four
//! deviation results).
//!
//! ```bash
//! cargo run --release --example verify_concentration
//! ```

use dalab::conc::{
    random_adversarial_model, verify_ddan_deviation, verify_loss_hoeffding, verify_mean_embedding,
    verify_mmd_deviation, McConfig, ViolationReport,
};

fn main() {
    let trials = 800; // the acceptance suite runs 2000; this is a quick look
    let hoeffding = verify_loss_hoeffding(&McConfig {
        trials,
        seed: 1,
        sample_sizes: vec![50, 100, 200],
        eps_grid: vec![0.1, 0.2],
        ..McConfig::default()
    })
    .unwrap();
    let embedding = verify_mean_embedding(&McConfig {
        trials,
        seed: 2,
        sample_sizes: vec![50, 100, 200],
        eps_grid: vec![0.35, 0.5],
        ..McConfig::default()
    })
    .unwrap();
    let mmd = verify_mmd_deviation(&McConfig {
        trials,
        seed: 3,
        sample_sizes: vec![100, 400],
        eps_grid: vec![0.4, 0.5],
        ..McConfig::default()
    })
    .unwrap();
    let model = random_adversarial_model(2, 4).unwrap();
    let ddan = verify_ddan_deviation(
        &McConfig {
            trials,
            seed: 4,
            sample_sizes: vec![400, 1600, 6400],
            eps_grid: vec![0.3, 0.6],
            shift: 1.5,
            ..McConfig::default()
        },
        &model,
    )
    .unwrap();

    let report = ViolationReport::merged(vec![hoeffding, embedding, mmd, ddan]);
    print!("{}", report.to_csv());
    println!(
        "\nsuite {} ({} nonvacuous cells; vacuous rows are reported but not judged)",
        if report.passed() { "PASS" } else { "FAIL" },
        report.rows.iter().filter(|r| !r.vacuous).count()
    );
}
