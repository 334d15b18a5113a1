//! Shallow synthetic experiments: two-class geometric-transform data,
//! perturbed alignment maps, weighted ridge regression, and subspace
//! alignment.
//!
//! Source and target domains are built by pushing two mean-shifted standard
//! normals through different invertible affine maps. The alignment maps are
//! the inverse transformations perturbed by a random matrix of spectral norm
//! exactly `tau`, emulating transformations learnt with estimation error.
//! Labels are encoded as `+-1` and classification is by the sign of the
//! ridge-regressed score.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Invertible affine map `x -> A x + t` on the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTransform {
    pub matrix: Matrix2<f64>,
    pub translation: Vector2<f64>,
}

impl GeometricTransform {
    pub fn new(matrix: Matrix2<f64>, translation: Vector2<f64>) -> Result<Self> {
        if matrix.determinant().abs() <= 1e-9 {
            return Err(Error::Singular("geometric transform matrix".into()));
        }
        Ok(GeometricTransform {
            matrix,
            translation,
        })
    }

    pub fn identity() -> Self {
        GeometricTransform {
            matrix: Matrix2::identity(),
            translation: Vector2::zeros(),
        }
    }

    pub fn apply(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.matrix * x + self.translation
    }

    pub fn inverse(&self) -> GeometricTransform {
        let inv = self.matrix.try_inverse().expect("validated invertible");
        GeometricTransform {
            matrix: inv,
            translation: -inv * self.translation,
        }
    }

    pub fn apply_all(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(2, xs.ncols());
        for j in 0..xs.ncols() {
            let v = self.apply(&Vector2::new(xs[(0, j)], xs[(1, j)]));
            out[(0, j)] = v[0];
            out[(1, j)] = v[1];
        }
        out
    }
}

/// Configuration of one shallow run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ShallowConfig {
    /// Training samples per domain.
    pub n: usize,
    pub labeled_source: usize,
    pub labeled_target: usize,
    pub alpha: f64,
    /// Ridge weight.
    pub lambda: f64,
    /// Spectral norm of the transform estimation error.
    pub tau: f64,
    pub seed: u64,
    pub test_size: usize,
    /// Class mean offset along the first axis (pre-transform).
    pub class_offset: f64,
    /// Noise scale of the standard-normal class clouds.
    pub noise: f64,
    /// Replace training labels with coin flips (null-model control).
    pub scramble_labels: bool,
}

impl Default for ShallowConfig {
    fn default() -> Self {
        ShallowConfig {
            n: 400,
            labeled_source: 200,
            labeled_target: 16,
            alpha: 0.5,
            lambda: 1e-2,
            tau: 0.0,
            seed: 0,
            test_size: 1000,
            class_offset: 1.5,
            noise: 1.0,
            scramble_labels: false,
        }
    }
}

impl ShallowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labeled_source > self.n || self.labeled_target > self.n {
            return Err(Error::Config("labeled counts exceed n".into()));
        }
        if self.lambda < 0.0 || self.tau < 0.0 {
            return Err(Error::Config("lambda and tau must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0,1]".into()));
        }
        Ok(())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draws `n` two-class samples (means at `+-(offset, 0)`, unit-ish noise)
/// mapped through `transform`; labels alternate `-1, +1`, so any prefix is
/// balanced and even `n` splits exactly in half.
pub fn gen_two_class(
    seed: u64,
    n: usize,
    transform: &GeometricTransform,
    class_offset: f64,
    noise: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(2, n);
    let mut y = DVector::zeros(n);
    for j in 0..n {
        let label = if j % 2 == 0 { -1.0 } else { 1.0 };
        let base = Vector2::new(
            label * class_offset + noise * normal(&mut rng),
            noise * normal(&mut rng),
        );
        let v = transform.apply(&base);
        x[(0, j)] = v[0];
        x[(1, j)] = v[1];
        y[j] = label;
    }
    (x, y)
}

/// Largest singular value of a 2x2 matrix.
fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    m.svd(false, false).singular_values[0]
}

/// Adds a random matrix of spectral norm exactly `tau` to the transform's
/// linear part. Resamples (up to 10 times) if the result is singular.
pub fn perturb_transform(
    truth: &GeometricTransform,
    tau: f64,
    seed: u64,
) -> Result<GeometricTransform> {
    if tau == 0.0 {
        return Ok(truth.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let raw = Matrix2::from_fn(|_, _| normal(&mut rng));
        let norm = spectral_norm(&raw);
        if norm < 1e-12 {
            continue;
        }
        let perturbed = truth.matrix + raw * (tau / norm);
        if perturbed.determinant().abs() > 1e-9 {
            return Ok(GeometricTransform {
                matrix: perturbed,
                translation: truth.translation,
            });
        }
    }
    Err(Error::Singular(
        "perturbed transform stayed singular after 10 attempts".into(),
    ))
}

/// Closed-form weighted ridge regression
/// `min_w (1-alpha)/Ms sum (w'f_s - y)^2 + alpha/Mt sum (w'f_t - y)^2 + lambda ||w||^2`.
///
/// Solves the regularized normal equations with a dense decomposition;
/// errors if the system is singular (possible only at `lambda = 0`).
pub fn weighted_ridge(
    f_s: &DMatrix<f64>,
    y_s: &DVector<f64>,
    f_t: &DMatrix<f64>,
    y_t: &DVector<f64>,
    alpha: f64,
    lambda: f64,
) -> Result<DVector<f64>> {
    let d = f_s.nrows();
    if f_t.nrows() != d {
        return Err(Error::Dimension {
            expected: d,
            got: f_t.nrows(),
            context: "weighted_ridge feature dimension",
        });
    }
    let ms = f_s.ncols();
    let mt = f_t.ncols();
    let mut lhs = DMatrix::<f64>::identity(d, d) * lambda;
    let mut rhs = DVector::<f64>::zeros(d);
    if ms > 0 && alpha < 1.0 {
        let w = (1.0 - alpha) / ms as f64;
        lhs += w * f_s * f_s.transpose();
        rhs += w * f_s * y_s;
    }
    if mt > 0 && alpha > 0.0 {
        let w = alpha / mt as f64;
        lhs += w * f_t * f_t.transpose();
        rhs += w * f_t * y_t;
    }
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("weighted ridge normal equations".into()))
}

/// Gradient of the ridge objective at `w`; the optimality residual.
pub fn ridge_gradient(
    f_s: &DMatrix<f64>,
    y_s: &DVector<f64>,
    f_t: &DMatrix<f64>,
    y_t: &DVector<f64>,
    alpha: f64,
    lambda: f64,
    w: &DVector<f64>,
) -> DVector<f64> {
    let mut g = 2.0 * lambda * w;
    if f_s.ncols() > 0 && alpha < 1.0 {
        let r = f_s.transpose() * w - y_s;
        g += 2.0 * (1.0 - alpha) / f_s.ncols() as f64 * f_s * r;
    }
    if f_t.ncols() > 0 && alpha > 0.0 {
        let r = f_t.transpose() * w - y_t;
        g += 2.0 * alpha / f_t.ncols() as f64 * f_t * r;
    }
    g
}

/// Top-`k` principal bases of two datasets plus the alignment matrix
/// `M = P_s' P_t`. Source features map as `x -> (x'P_s) M`, target features
/// as `x -> x'P_t` (rows in, k-vectors out).
#[derive(Debug, Clone)]
pub struct SubspaceAlignment {
    pub source_basis: DMatrix<f64>,
    pub target_basis: DMatrix<f64>,
    pub alignment: DMatrix<f64>,
}

/// PCA basis: top-`k` eigenvectors of the centered covariance, one column
/// per component, deterministic sign (largest-magnitude entry positive).
fn pca_basis(data: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let d = data.nrows();
    let n = data.ncols();
    if k > d || k == 0 {
        return Err(Error::Config(format!(
            "k = {k} out of range for dimension {d}"
        )));
    }
    let mean = DVector::from_fn(d, |i, _| data.row(i).sum() / n as f64);
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&centered * centered.transpose()) / n as f64;
    let eig = nalgebra::SymmetricEigen::new(cov);
    // order by descending eigenvalue
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    if k > order.len() || eig.eigenvalues[order[k - 1]] <= 1e-12 {
        return Err(Error::Config(format!("k = {k} exceeds the data rank")));
    }
    let mut basis = DMatrix::zeros(d, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let lead = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
        if let Some((_, &val)) = lead {
            if val < 0.0 {
                v = -v;
            }
        }
        basis.set_column(col, &v);
    }
    Ok(basis)
}

/// Aligns the PCA bases of the source and target datasets.
pub fn subspace_align(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    k: usize,
) -> Result<SubspaceAlignment> {
    let source_basis = pca_basis(source, k)?;
    let target_basis = pca_basis(target, k)?;
    let alignment = source_basis.transpose() * &target_basis;
    Ok(SubspaceAlignment {
        source_basis,
        target_basis,
        alignment,
    })
}

impl SubspaceAlignment {
    /// Aligned source features: `(x' P_s) (P_s' P_t)`, columns in, columns out.
    pub fn map_source(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.alignment.transpose() * (self.source_basis.transpose() * x)
    }

    /// Target features `x' P_t`.
    pub fn map_target(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.target_basis.transpose() * x
    }
}

/// Full shallow pipeline. Returns the target misclassification rate over the
/// held-out target test set.
pub fn run_shallow(cfg: &ShallowConfig) -> Result<f64> {
    cfg.validate()?;
    let seed = cfg.seed;
    // ground-truth domain transforms, drawn per seed
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, 0));
    let draw_transform = |rng: &mut ChaCha8Rng| loop {
        let m = Matrix2::from_fn(|i, j| {
            let diag = if i == j { 1.0 } else { 0.0 };
            diag + 0.5 * normal(rng)
        });
        if m.determinant().abs() > 0.1 {
            let t = Vector2::new(normal(rng), normal(rng));
            return GeometricTransform {
                matrix: m,
                translation: t,
            };
        }
    };
    let t_source = draw_transform(&mut rng);
    let t_target = draw_transform(&mut rng);

    let (x_s, y_s) = gen_two_class(
        seeding::derive(seed, 1),
        cfg.n,
        &t_source,
        cfg.class_offset,
        cfg.noise,
    );
    let (x_t, y_t) = gen_two_class(
        seeding::derive(seed, 2),
        cfg.n,
        &t_target,
        cfg.class_offset,
        cfg.noise,
    );
    let (x_test, y_test) = gen_two_class(
        seeding::derive(seed, 3),
        cfg.test_size,
        &t_target,
        cfg.class_offset,
        cfg.noise,
    );

    // alignment maps: perturbed inverse transforms
    let f_s = perturb_transform(&t_source.inverse(), cfg.tau, seeding::derive(seed, 4))?;
    let f_t = perturb_transform(&t_target.inverse(), cfg.tau, seeding::derive(seed, 5))?;

    let feats_s = f_s.apply_all(&x_s.columns(0, cfg.labeled_source).into_owned());
    let feats_t = f_t.apply_all(&x_t.columns(0, cfg.labeled_target).into_owned());
    let mut labels_s = y_s.rows(0, cfg.labeled_source).into_owned();
    let mut labels_t = y_t.rows(0, cfg.labeled_target).into_owned();
    if cfg.scramble_labels {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, 6));
        labels_s
            .iter_mut()
            .for_each(|v| *v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        labels_t
            .iter_mut()
            .for_each(|v| *v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    }

    let w = weighted_ridge(
        &feats_s, &labels_s, &feats_t, &labels_t, cfg.alpha, cfg.lambda,
    )?;

    let test_feats = f_t.apply_all(&x_test);
    let mut errors = 0usize;
    for j in 0..cfg.test_size {
        let score = w.dot(&test_feats.column(j).into_owned());
        let predicted = if score >= 0.0 { 1.0 } else { -1.0 };
        if predicted != y_test[j] {
            errors += 1;
        }
    }
    Ok(errors as f64 / cfg.test_size as f64)
}
