//! The shallow pipeline: two-class data pushed through unknown affine
//! domain transforms, aligned by perturbed inverse maps, classified by
//! weighted ridge regression. Reproduces the qualitative rates: error falls
//! as c1 + c2/sqrt(Mt) and rises linearly in the transform error tau. Also
//! demonstrates the subspace-alignment primitive.
//!
//! ```bash
//! cargo run --release --example shallow_alignment
//! ```

use dalab::emit::{svg_chart, Series};
use dalab::fit::{fit_rate, RateModel};
use dalab::seeding;
use dalab::shallow::{run_shallow, subspace_align, ShallowConfig};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn mean_curve(
    base: &ShallowConfig,
    values: &[f64],
    trials: u64,
    apply: impl Fn(&mut ShallowConfig, f64),
) -> Vec<(f64, f64)> {
    values
        .iter()
        .map(|&v| {
            let mut total = 0.0;
            for trial in 0..trials {
                let mut cfg = base.clone();
                apply(&mut cfg, v);
                cfg.seed = seeding::derive2(base.seed, v.to_bits(), trial);
                total += run_shallow(&cfg).unwrap();
            }
            (v, total / trials as f64)
        })
        .collect()
}

fn main() {
    let trials = 100;

    // error vs number of labeled target samples
    let base = ShallowConfig {
        alpha: 0.7,
        tau: 0.4,
        seed: 1,
        ..ShallowConfig::default()
    };
    let mt_curve = mean_curve(
        &base,
        &[2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        trials,
        |cfg, v| cfg.labeled_target = v as usize,
    );
    let xs: Vec<f64> = mt_curve.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = mt_curve.iter().map(|p| p.1).collect();
    let fit = fit_rate(&xs, &ys, RateModel::OffsetInvSqrt).unwrap();
    println!("error vs Mt: {mt_curve:.4?}");
    println!(
        "  fit {:.4} + {:.4}/sqrt(Mt), R^2 = {:.3}",
        fit.coefficients[0], fit.coefficients[1], fit.r_squared
    );

    // error vs transform estimation error
    let base_tau = ShallowConfig {
        alpha: 0.5,
        labeled_target: 16,
        seed: 2,
        ..ShallowConfig::default()
    };
    let tau_curve = mean_curve(
        &base_tau,
        &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        trials,
        |cfg, v| cfg.tau = v,
    );
    let xs: Vec<f64> = tau_curve.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tau_curve.iter().map(|p| p.1).collect();
    let lin = fit_rate(&xs, &ys, RateModel::OffsetLinear).unwrap();
    println!("error vs tau: {tau_curve:.4?}");
    println!(
        "  fit {:.4} + {:.4} tau, R^2 = {:.3}",
        lin.coefficients[0], lin.coefficients[1], lin.r_squared
    );

    // chart with the fitted dashed rate
    let fitted: Vec<(f64, f64)> = mt_curve.iter().map(|p| (p.0, fit.predict(p.0))).collect();
    let svg = svg_chart(
        "target error vs labeled target samples",
        "Mt",
        "error",
        &[
            Series::solid("mean error", mt_curve),
            Series::fitted("c1 + c2/sqrt(Mt)", fitted),
        ],
    );
    std::fs::create_dir_all("out").unwrap();
    std::fs::write("out/shallow_alignment.svg", svg).unwrap();
    println!("wrote out/shallow_alignment.svg");

    // subspace alignment recovers a rotated copy's basis
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let source = DMatrix::from_fn(2, 300, |i, _| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if i == 0 {
            2.0 * z
        } else {
            0.5 * z
        }
    });
    let th = 0.7f64;
    let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
    let target = &rot * &source;
    let sa = subspace_align(&source, &target, 2).unwrap();
    let mapped = sa.map_source(&source);
    let direct = sa.target_basis.transpose() * &source;
    println!(
        "subspace alignment (k = d): ||mapped - target-basis coords|| = {:.2e}",
        (mapped - direct).norm()
    );
}
