//! Element-wise and vector activations with their Lipschitz constants.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Activation kinds supported by the dense networks.
///
/// `Softmax` is only valid in the output position of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softplus,
    Softmax,
    Identity,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    // ln(1 + e^z), stable for large |z|
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Activation {
    /// Applies the activation to a pre-activation vector.
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Softplus => z.map(softplus),
            Activation::Identity => z.clone(),
            Activation::Softmax => {
                let max = z.max();
                let exps = z.map(|v| (v - max).exp());
                let sum: f64 = exps.sum();
                exps / sum
            }
        }
    }

    /// Backpropagates an output-side gradient through the activation.
    ///
    /// `out` is the activation output (not the pre-activation); all supported
    /// activations admit a Jacobian expressed in terms of their output alone.
    pub fn vjp(&self, out: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
        match self {
            Activation::Identity => grad.clone(),
            Activation::Relu => grad.zip_map(out, |g, s| if s > 0.0 { g } else { 0.0 }),
            Activation::Sigmoid => grad.zip_map(out, |g, s| g * s * (1.0 - s)),
            // softplus output s satisfies sigma(z) = 1 - e^{-s}
            Activation::Softplus => grad.zip_map(out, |g, s| g * (1.0 - (-s).exp())),
            Activation::Softmax => {
                let dot = grad.dot(out);
                out.zip_map(grad, |s, g| s * (g - dot))
            }
        }
    }

    /// Lipschitz constant of the activation seen as a map on R^d.
    ///
    /// ReLU and softplus are 1-Lipschitz, sigmoid is 1/4-Lipschitz
    /// component-wise, softmax is d/4-Lipschitz, identity is 1.
    pub fn lipschitz(&self, d: usize) -> f64 {
        match self {
            Activation::Relu | Activation::Softplus | Activation::Identity => 1.0,
            Activation::Sigmoid => 0.25,
            Activation::Softmax => d as f64 / 4.0,
        }
    }

    /// Whether the activation output is bounded in value, and by what.
    ///
    /// Sigmoid and softmax outputs lie in (0,1); the others are unbounded in
    /// value but ReLU is 1-bounded as an operator.
    pub fn value_bound(&self) -> Option<f64> {
        match self {
            Activation::Sigmoid | Activation::Softmax => Some(1.0),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_spot_value() {
        // 1/(1+e^-0.3) = 0.574442516811659
        assert_relative_eq!(sigmoid(0.3), 0.574442516811659, max_relative = 1e-12);
        assert_relative_eq!(sigmoid(-700.0), 0.0, epsilon = 1e-300);
        assert_relative_eq!(sigmoid(700.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_symmetric_logits() {
        let s = Activation::Softmax.apply(&DVector::from_vec(vec![0.0, 0.0]));
        assert_relative_eq!(s[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(s[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        let s = Activation::Softmax.apply(&DVector::from_vec(vec![1000.0, 999.0]));
        assert!(s.iter().all(|v| v.is_finite()));
        assert_relative_eq!(s.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lipschitz_property_random_pairs() {
        // || eta(u) - eta(v) || <= C_eta || u - v || over 1000 random pairs each
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 8;
        for act in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Softmax,
            Activation::Identity,
        ] {
            // sigmoid's sharp constant is 1/4 <= 1; check against the constant
            // used by the bound formulas
            let c = match act {
                Activation::Softmax => d as f64 / 4.0,
                Activation::Sigmoid => 0.25,
                _ => 1.0,
            };
            for _ in 0..1000 {
                let u = DVector::from_fn(d, |_, _| rng.gen_range(-5.0..5.0));
                let v = DVector::from_fn(d, |_, _| rng.gen_range(-5.0..5.0));
                let lhs = (act.apply(&u) - act.apply(&v)).norm();
                let rhs = c * (&u - &v).norm();
                assert!(lhs <= rhs + 1e-12, "{act:?}: {lhs} > {c} * ||u-v|| = {rhs}");
            }
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let h = 1e-6;
        for act in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Softmax,
            Activation::Identity,
        ] {
            let z = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0) + 0.123);
            let g = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            let out = act.apply(&z);
            let analytic = act.vjp(&out, &g);
            let mut fd = DVector::zeros(d);
            for j in 0..d {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += h;
                zm[j] -= h;
                fd[j] = (act.apply(&zp).dot(&g) - act.apply(&zm).dot(&g)) / (2.0 * h);
            }
            let rel = (&analytic - &fd).norm() / analytic.norm().max(fd.norm()).max(1e-12);
            assert!(rel < 1e-5, "{act:?}: rel err {rel}");
        }
    }
}
