//! Synthetic shifted-domain datasets, feature standardization, and a CSV
//! loader for user-supplied data.
//!
//! Samples are stored one per column. Labels are one-hot columns. The first
//! `labeled` columns of a training split are the labeled prefix; class
//! assignment cycles `0,1,..,m-1,0,..` so every prefix is as balanced as it
//! can be.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One domain's training pool (labeled prefix) and held-out test split.
#[derive(Debug, Clone)]
pub struct DomainSplit {
    pub train_x: DMatrix<f64>,
    /// One-hot labels for the labeled prefix of `train_x` (first `labeled` columns).
    pub train_y: DMatrix<f64>,
    pub labeled: usize,
    pub test_x: DMatrix<f64>,
    pub test_y: DMatrix<f64>,
}

impl DomainSplit {
    pub fn total(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn labeled_x(&self) -> DMatrix<f64> {
        self.train_x.columns(0, self.labeled).into_owned()
    }
}

/// Source and target domains plus the label dimension.
#[derive(Debug, Clone)]
pub struct DomainDataset {
    pub source: DomainSplit,
    pub target: DomainSplit,
    pub label_dim: usize,
}

impl DomainDataset {
    pub fn validate(&self) -> Result<()> {
        if self.source.labeled > self.source.total() {
            return Err(Error::Config("Ms exceeds Ns".into()));
        }
        if self.target.labeled > self.target.total() {
            return Err(Error::Config("Mt exceeds Nt".into()));
        }
        Ok(())
    }
}

/// Base sample family for the synthetic generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    /// Isotropic Gaussian class blobs.
    Gaussians,
    /// Two interleaved half-moons (2 classes, first two coordinates).
    Moons,
    /// Gaussian blobs pushed through a seeded random invertible linear map,
    /// so the class geometry is not axis-aligned.
    Affine,
}

/// Affine-plus-warp target shift: `x -> scale * R(rotation) x + translation`,
/// then `x_2 += warp * x_1^2`. Rotation acts on the first two coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub rotation_deg: f64,
    pub scale: f64,
    pub translation: Vec<f64>,
    pub warp: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            rotation_deg: 0.0,
            scale: 1.0,
            translation: vec![],
            warp: 0.0,
        }
    }
}

impl ShiftSpec {
    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0
            && self.scale == 1.0
            && self.warp == 0.0
            && self.translation.iter().all(|&t| t == 0.0)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let finite = self.rotation_deg.is_finite()
            && self.scale.is_finite()
            && self.warp.is_finite()
            && self.translation.iter().all(|t| t.is_finite());
        if !finite || self.scale == 0.0 {
            return Err(Error::Config("invalid shift parameters".into()));
        }
        if !self.translation.is_empty() && self.translation.len() != dim {
            return Err(Error::Config(format!(
                "translation has {} entries for dimension {dim}",
                self.translation.len()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &mut DVector<f64>) {
        if x.len() >= 2 && self.rotation_deg != 0.0 {
            let th = self.rotation_deg.to_radians();
            let (c, s) = (th.cos(), th.sin());
            let (a, b) = (x[0], x[1]);
            x[0] = c * a - s * b;
            x[1] = s * a + c * b;
        }
        if self.scale != 1.0 {
            *x *= self.scale;
        }
        for (i, t) in self.translation.iter().enumerate() {
            x[i] += t;
        }
        if self.warp != 0.0 && x.len() >= 2 {
            x[1] += self.warp * x[0] * x[0];
        }
    }
}

/// Sample counts for one generated dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainCounts {
    pub source_total: usize,
    pub source_labeled: usize,
    pub target_total: usize,
    pub target_labeled: usize,
    pub test_per_domain: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub kind: ShiftKind,
    pub dim: usize,
    pub classes: usize,
    /// Distance of class means from the origin.
    pub separation: f64,
    /// Isotropic noise level.
    pub noise: f64,
    pub shift: ShiftSpec,
    pub counts: DomainCounts,
    pub seed: u64,
}

impl GenConfig {
    /// Class means of the base (pre-shift) distribution, on a circle in the
    /// first two coordinates (or `+-separation` on the axis when `dim == 1`).
    pub fn class_means(&self) -> Vec<DVector<f64>> {
        (0..self.classes)
            .map(|c| {
                let mut mu = DVector::zeros(self.dim);
                if self.dim == 1 {
                    mu[0] = if c % 2 == 0 {
                        -self.separation
                    } else {
                        self.separation
                    };
                } else {
                    let angle = 2.0 * std::f64::consts::PI * c as f64 / self.classes as f64;
                    mu[0] = self.separation * angle.cos();
                    mu[1] = self.separation * angle.sin();
                }
                mu
            })
            .collect()
    }
}

fn standard_normal(rng: &mut impl Rng, d: usize) -> DVector<f64> {
    // Box-Muller keeps us independent of rand_distr
    DVector::from_fn(d, |_, _| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

fn moon_point(
    rng: &mut impl Rng,
    class: usize,
    separation: f64,
    noise: f64,
    d: usize,
) -> DVector<f64> {
    let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let mut x = DVector::zeros(d);
    if class == 0 {
        x[0] = t.cos() * separation;
        x[1] = t.sin() * separation;
    } else {
        x[0] = (1.0 - t.cos()) * separation;
        x[1] = (0.5 - t.sin()) * separation;
    }
    x + noise * standard_normal(rng, d)
}

struct BaseSampler {
    kind: ShiftKind,
    means: Vec<DVector<f64>>,
    mix: Option<DMatrix<f64>>,
    separation: f64,
    noise: f64,
    dim: usize,
}

impl BaseSampler {
    fn new(cfg: &GenConfig, rng: &mut impl Rng) -> Self {
        let mix = match cfg.kind {
            ShiftKind::Affine => {
                // seeded random map, re-drawn until comfortably invertible
                loop {
                    let m = DMatrix::from_fn(cfg.dim, cfg.dim, |i, j| {
                        let diag = if i == j { 1.0 } else { 0.0 };
                        diag + 0.4 * standard_normal(rng, 1)[0]
                    });
                    if m.determinant().abs() > 1e-3 {
                        break Some(m);
                    }
                }
            }
            _ => None,
        };
        BaseSampler {
            kind: cfg.kind,
            means: cfg.class_means(),
            mix,
            separation: cfg.separation,
            noise: cfg.noise,
            dim: cfg.dim,
        }
    }

    fn draw(&self, rng: &mut impl Rng, class: usize) -> DVector<f64> {
        match self.kind {
            ShiftKind::Moons => moon_point(rng, class, self.separation, self.noise, self.dim),
            ShiftKind::Gaussians | ShiftKind::Affine => {
                let x = &self.means[class] + self.noise * standard_normal(rng, self.dim);
                match &self.mix {
                    Some(m) => m * x,
                    None => x,
                }
            }
        }
    }
}

fn one_hot_matrix(classes: &[usize], m: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(m, classes.len());
    for (j, &c) in classes.iter().enumerate() {
        y[(c, j)] = 1.0;
    }
    y
}

fn gen_split(
    sampler: &BaseSampler,
    rng: &mut impl Rng,
    n: usize,
    labeled: usize,
    n_test: usize,
    classes: usize,
    shift: Option<&ShiftSpec>,
) -> DomainSplit {
    let mut draw_block = |count: usize| {
        let mut x = DMatrix::zeros(sampler.dim, count);
        let mut y = Vec::with_capacity(count);
        for i in 0..count {
            let class = i % classes;
            let mut v = sampler.draw(rng, class);
            if let Some(s) = shift {
                s.apply(&mut v);
            }
            x.set_column(i, &v);
            y.push(class);
        }
        (x, y)
    };
    let (train_x, train_classes) = draw_block(n);
    let (test_x, test_classes) = draw_block(n_test);
    DomainSplit {
        train_x,
        train_y: one_hot_matrix(&train_classes[..labeled], classes),
        labeled,
        test_x,
        test_y: one_hot_matrix(&test_classes, classes),
    }
}

/// Generates a source/target dataset pair where the target domain is the
/// base distribution composed with the configured shift.
pub fn gen_shifted_domains(cfg: &GenConfig) -> Result<DomainDataset> {
    if cfg.dim == 0 || cfg.classes < 2 {
        return Err(Error::Config("need dim >= 1 and classes >= 2".into()));
    }
    if cfg.kind == ShiftKind::Moons && cfg.classes != 2 {
        return Err(Error::Config("moons data is two-class".into()));
    }
    cfg.shift.validate(cfg.dim)?;
    if cfg.counts.source_labeled > cfg.counts.source_total
        || cfg.counts.target_labeled > cfg.counts.target_total
    {
        return Err(Error::Config("labeled counts exceed totals".into()));
    }
    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler_rng = ChaCha8Rng::seed_from_u64(seed_rng.gen());
    let sampler = BaseSampler::new(cfg, &mut sampler_rng);
    let mut src_rng = ChaCha8Rng::seed_from_u64(seed_rng.gen());
    let mut tgt_rng = ChaCha8Rng::seed_from_u64(seed_rng.gen());
    let source = gen_split(
        &sampler,
        &mut src_rng,
        cfg.counts.source_total,
        cfg.counts.source_labeled,
        cfg.counts.test_per_domain,
        cfg.classes,
        None,
    );
    let target = gen_split(
        &sampler,
        &mut tgt_rng,
        cfg.counts.target_total,
        cfg.counts.target_labeled,
        cfg.counts.test_per_domain,
        cfg.classes,
        Some(&cfg.shift),
    );
    let ds = DomainDataset {
        source,
        target,
        label_dim: cfg.classes,
    };
    ds.validate()?;
    Ok(ds)
}

/// Per-coordinate mean/std standardization, fit on the source training split
/// and applied to every matrix of the dataset. Stands in for batch
/// normalization so runs stay deterministic.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.ncols().max(1) as f64;
        let mean = DVector::from_fn(x.nrows(), |i, _| x.row(i).sum() / n);
        let std = DVector::from_fn(x.nrows(), |i, _| {
            let mu = mean[i];
            let var = x.row(i).iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            var.sqrt().max(1e-9)
        });
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[i]) / self.std[i]
        })
    }

    pub fn apply(&self, ds: &mut DomainDataset) {
        ds.source.train_x = self.transform(&ds.source.train_x);
        ds.source.test_x = self.transform(&ds.source.test_x);
        ds.target.train_x = self.transform(&ds.target.train_x);
        ds.target.test_x = self.transform(&ds.target.test_x);
    }
}

/// Standardizes a dataset in place using source-train statistics.
pub fn standardize(ds: &mut DomainDataset) -> Standardizer {
    let s = Standardizer::fit(&ds.source.train_x);
    s.apply(ds);
    s
}

/// Loads a CSV file whose rows are samples: feature columns first, then `m`
/// one-hot label columns. Returns features and labels, one column per sample.
pub fn load_csv_dataset(
    path: &std::path::Path,
    label_dim: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) => rows.push(v),
            // a non-numeric first row is a header
            Err(_) if lineno == 0 => continue,
            Err(e) => {
                return Err(Error::Config(format!("csv line {}: {e}", lineno + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("csv contains no data rows".into()));
    }
    let width = rows[0].len();
    if width <= label_dim {
        return Err(Error::Config(format!(
            "rows have {width} columns, need more than label_dim = {label_dim}"
        )));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Config("ragged csv rows".into()));
    }
    let d = width - label_dim;
    let n = rows.len();
    let mut x = DMatrix::zeros(d, n);
    let mut y = DMatrix::zeros(label_dim, n);
    for (j, row) in rows.iter().enumerate() {
        for i in 0..d {
            x[(i, j)] = row[i];
        }
        for i in 0..label_dim {
            y[(i, j)] = row[d + i];
        }
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_cfg() -> GenConfig {
        GenConfig {
            kind: ShiftKind::Gaussians,
            dim: 2,
            classes: 2,
            separation: 1.5,
            noise: 1.0,
            shift: ShiftSpec::default(),
            counts: DomainCounts {
                source_total: 4000,
                source_labeled: 100,
                target_total: 4000,
                target_labeled: 10,
                test_per_domain: 100,
            },
            seed: 5,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_shifted_domains(&base_cfg()).unwrap();
        let b = gen_shifted_domains(&base_cfg()).unwrap();
        assert_eq!(a.source.train_x, b.source.train_x);
        assert_eq!(a.target.test_x, b.target.test_x);
        let mut other = base_cfg();
        other.seed = 6;
        let c = gen_shifted_domains(&other).unwrap();
        assert_ne!(a.source.train_x, c.source.train_x);
    }

    #[test]
    fn zero_shift_means_matching_distributions() {
        let ds = gen_shifted_domains(&base_cfg()).unwrap();
        let k = crate::kernel::KernelSpec::gaussian(2.0).unwrap();
        let s = ds.source.train_x.columns(0, 1000).into_owned();
        let t = ds.target.train_x.columns(0, 1000).into_owned();
        let v = crate::mmd::mmd2_layer(&k, &s, &t).unwrap();
        assert!(v <= 0.01, "mmd2 = {v} for identical distributions");
    }

    #[test]
    fn rotation_shift_rotates_class_means() {
        let mut cfg = base_cfg();
        cfg.shift.rotation_deg = 30.0;
        cfg.noise = 0.4;
        let ds = gen_shifted_domains(&cfg).unwrap();
        let mean_of = |x: &DMatrix<f64>, class: usize| {
            let cols: Vec<_> = (0..x.ncols()).filter(|j| j % 2 == class).collect();
            let mut mu = DVector::zeros(2);
            for &j in &cols {
                mu += x.column(j);
            }
            mu / cols.len() as f64
        };
        let th = 30f64.to_radians();
        for class in 0..2 {
            let ms = mean_of(&ds.source.train_x, class);
            let mt = mean_of(&ds.target.train_x, class);
            let rotated = DVector::from_vec(vec![
                th.cos() * ms[0] - th.sin() * ms[1],
                th.sin() * ms[0] + th.cos() * ms[1],
            ]);
            // sampling error ~ noise/sqrt(2000)
            assert!((mt - rotated).norm() < 0.06, "class {class}");
        }
    }

    #[test]
    fn labeled_prefix_is_balanced() {
        let ds = gen_shifted_domains(&base_cfg()).unwrap();
        let y = &ds.target.train_y;
        assert_eq!(y.ncols(), 10);
        let count0: f64 = y.row(0).sum();
        assert_eq!(count0, 5.0);
    }

    #[test]
    fn invalid_shift_rejected() {
        let mut cfg = base_cfg();
        cfg.shift.translation = vec![1.0, 2.0, 3.0]; // wrong dim
        assert!(gen_shifted_domains(&cfg).is_err());
        let mut cfg2 = base_cfg();
        cfg2.shift.scale = f64::NAN;
        assert!(gen_shifted_domains(&cfg2).is_err());
    }

    #[test]
    fn moons_and_affine_kinds_generate() {
        let mut cfg = base_cfg();
        cfg.kind = ShiftKind::Moons;
        cfg.counts.source_total = 50;
        cfg.counts.target_total = 50;
        cfg.counts.source_labeled = 10;
        cfg.counts.target_labeled = 4;
        assert!(gen_shifted_domains(&cfg).is_ok());
        cfg.kind = ShiftKind::Affine;
        assert!(gen_shifted_domains(&cfg).is_ok());
    }

    #[test]
    fn standardizer_zero_mean_unit_std() {
        let mut ds = gen_shifted_domains(&base_cfg()).unwrap();
        standardize(&mut ds);
        let s = Standardizer::fit(&ds.source.train_x);
        for i in 0..2 {
            assert_relative_eq!(s.mean[i], 0.0, epsilon = 1e-10);
            assert_relative_eq!(s.std[i], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "f1,f2,y1,y2\n0.5,1.5,1,0\n-0.25,2.0,0,1\n").unwrap();
        let (x, y) = load_csv_dataset(&path, 2).unwrap();
        assert_eq!(x.ncols(), 2);
        assert_eq!(x[(0, 0)], 0.5);
        assert_eq!(x[(1, 1)], 2.0);
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(1, 1)], 1.0);
        assert!(load_csv_dataset(&path, 4).is_err());
    }
}
