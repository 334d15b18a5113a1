//! Build a small dense network, run the forward recursion, backpropagate,
//! and confirm the analytic gradients against central finite differences.
//!
//! ```bash
//! cargo run --release --example network_basics
//! ```

use dalab::net::{backward, clip_params, forward, init_params, NetworkSpec};
use dalab::Activation;
use nalgebra::DVector;

fn main() {
    let spec = NetworkSpec::new(
        vec![3, 6, 4, 2],
        vec![Activation::Softplus, Activation::Relu, Activation::Softmax],
        1.0,
        4.0,
    )
    .unwrap();
    let params = init_params(&spec, 7);
    println!(
        "network widths {:?}, parameter box |theta| <= {}",
        spec.widths, spec.weight_bound
    );

    let x = DVector::from_vec(vec![0.4, -1.1, 0.7]);
    let feats = forward(&spec, &params, &x).unwrap();
    for (l, f) in feats.activations.iter().enumerate() {
        println!("layer {l}: {:?}", f.as_slice());
    }

    // gradient of the first output logit w.r.t. every parameter
    let probe = DVector::from_vec(vec![1.0, 0.0]);
    let (grads, input_grad) = backward(&spec, &params, &x, &probe).unwrap();
    println!("input gradient: {:?}", input_grad.as_slice());

    // spot-check one weight against a central finite difference
    let h = 1e-5;
    let mut plus = params.clone();
    let mut minus = params.clone();
    plus.layers[0].weight[(0, 0)] += h;
    minus.layers[0].weight[(0, 0)] -= h;
    let fd = (forward(&spec, &plus, &x).unwrap().output().dot(&probe)
        - forward(&spec, &minus, &x).unwrap().output().dot(&probe))
        / (2.0 * h);
    println!(
        "dW[0][0,0]: analytic {:.8}, finite difference {:.8}",
        grads.layers[0].weight[(0, 0)],
        fd
    );

    // the projection is idempotent and clamps violations to the box
    let mut blown = params.clone();
    blown.layers[1].weight[(0, 0)] = 3.7;
    let clipped = clip_params(&spec, &blown);
    println!(
        "entry 3.7 clips to {}, max |theta| after projection = {}",
        clipped.layers[1].weight[(0, 0)],
        clipped.max_abs()
    );

    // the architecture serializes as a plain config record
    println!("spec JSON: {}", serde_json::to_string(&spec).unwrap());
}
