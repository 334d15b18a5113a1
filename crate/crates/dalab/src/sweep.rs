//! Experiment grids over sample counts, architecture and loss weighting,
//! with resumable per-cell journaling and sample-complexity bisection.
//!
//! Cells own independent RNG streams derived from `(master seed, cell key,
//! trial)`, so results do not depend on execution order and grids are
//! embarrassingly parallel. A journal file records each finished cell;
//! rerunning a sweep with the same seed skips completed cells and reproduces
//! the final table byte for byte.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{gen_shifted_domains, standardize, GenConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_rate, RateFit, RateModel};
use crate::loss::DomainLabel;
use crate::seeding;
use crate::train::{train_adversarial, train_mmd, AdversarialModel, MmdModel, TrainConfig};
use crate::Activation;

/// Which scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Labeled target samples.
    Mt,
    /// Labeled source samples.
    Ms,
    /// Total source samples.
    Ns,
    /// Network depth (number of layers `L`).
    Depth,
    /// Hidden-layer width.
    Width,
    /// Target-loss weight.
    Alpha,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Mt => "mt",
            SweepAxis::Ms => "ms",
            SweepAxis::Ns => "ns",
            SweepAxis::Depth => "depth",
            SweepAxis::Width => "width",
            SweepAxis::Alpha => "alpha",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mt" => Ok(SweepAxis::Mt),
            "ms" => Ok(SweepAxis::Ms),
            "ns" => Ok(SweepAxis::Ns),
            "depth" => Ok(SweepAxis::Depth),
            "width" => Ok(SweepAxis::Width),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// What each sweep point records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    /// Target test accuracy per trial.
    Accuracy,
    /// Smallest labeled-source count reaching the reference accuracy.
    RequiredMs,
    /// Smallest total-source count reaching the reference accuracy.
    RequiredNs,
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::Accuracy => "target_accuracy",
            SweepMetric::RequiredMs => "required_ms",
            SweepMetric::RequiredNs => "required_ns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Mmd,
    Adversarial,
}

/// Architecture knobs shared by every cell of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    /// Widths `d_0..d_L`; depth/width axes rebuild the hidden block.
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    /// Discriminator hidden widths (adversarial trainer).
    pub disc_hidden: Vec<usize>,
    pub weight_bound: f64,
    pub input_bound: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            widths: vec![2, 8, 2],
            hidden_activation: Activation::Softplus,
            disc_hidden: vec![8],
            weight_bound: 1.5,
            input_bound: 6.0,
        }
    }
}

impl Architecture {
    fn hidden_width(&self) -> usize {
        if self.widths.len() > 2 {
            self.widths[1]
        } else {
            self.widths[0]
        }
    }

    fn with_depth(&self, layers: usize) -> Vec<usize> {
        let mut w = vec![self.widths[0]];
        w.extend(std::iter::repeat_n(
            self.hidden_width(),
            layers.saturating_sub(1),
        ));
        w.push(*self.widths.last().unwrap());
        w
    }

    fn with_width(&self, width: usize) -> Vec<usize> {
        let mut w = self.widths.clone();
        for v in w
            .iter_mut()
            .skip(1)
            .take(self.widths.len().saturating_sub(2))
        {
            *v = width;
        }
        w
    }
}

/// Everything one sweep needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub metric: SweepMetric,
    pub trainer: TrainerKind,
    pub gen: GenConfig,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub seed: u64,
    /// Reference accuracy for complexity sweeps; `None` takes the midpoint
    /// between chance and the best accuracy observed at the lattice top.
    #[serde(default)]
    pub reference_accuracy: Option<f64>,
    /// Doubling-lattice bounds for complexity bisection.
    #[serde(default = "default_lattice_min")]
    pub lattice_min: usize,
    #[serde(default = "default_lattice_max")]
    pub lattice_max: usize,
    #[serde(default)]
    pub standardize: bool,
}

fn default_lattice_min() -> usize {
    4
}
fn default_lattice_max() -> usize {
    512
}

/// One recorded sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub trial: usize,
    pub metric: f64,
    /// Training diverged for this cell (recorded, not fatal).
    pub diverged: bool,
}

/// Grid outputs: one row per (grid value, trial) for accuracy sweeps; one
/// row per grid value for complexity sweeps (`trial` then holds the trial
/// count, and unreachable references record `inf`).
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: String,
    pub metric: String,
    pub trials: usize,
    pub seed: u64,
    pub reference_accuracy: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},trial,{},diverged\n", self.axis, self.metric);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.value, r.trial, r.metric, r.diverged
            ));
        }
        out
    }

    /// Trial-mean metric per grid value, in grid order.
    pub fn means(&self) -> Vec<(f64, f64)> {
        let mut acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.value.to_bits()).or_insert((r.value, 0.0, 0));
            e.1 += r.metric;
            e.2 += 1;
        }
        let mut v: Vec<(f64, f64)> = acc.values().map(|(x, s, n)| (*x, s / *n as f64)).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }
}

/// Applies an axis value to the generation/architecture/training configs.
fn configure_cell(cfg: &SweepConfig, value: f64) -> (GenConfig, Vec<usize>, TrainConfig) {
    let mut gen = cfg.gen.clone();
    let mut widths = cfg.arch.widths.clone();
    let mut train = cfg.train.clone();
    match cfg.axis {
        SweepAxis::Mt => gen.counts.target_labeled = value as usize,
        SweepAxis::Ms => gen.counts.source_labeled = value as usize,
        SweepAxis::Ns => gen.counts.source_total = (value as usize).max(gen.counts.source_labeled),
        SweepAxis::Depth => widths = cfg.arch.with_depth(value as usize),
        SweepAxis::Width => widths = cfg.arch.with_width(value as usize),
        SweepAxis::Alpha => train.alpha = value,
    }
    (gen, widths, train)
}

/// Trains one cell and returns the final target accuracy. Divergence is
/// reported as `Ok(None)` so sweeps can record it without aborting.
fn run_cell(
    cfg: &SweepConfig,
    gen: &GenConfig,
    widths: &[usize],
    train: &TrainConfig,
    cell_salt: u64,
    trial: usize,
) -> Result<Option<f64>> {
    let mut gen = gen.clone();
    gen.seed = seeding::derive2(cfg.seed, cell_salt, trial as u64);
    let mut ds = gen_shifted_domains(&gen)?;
    if cfg.standardize {
        standardize(&mut ds);
    }
    let mut train = train.clone();
    train.seed = seeding::derive2(cfg.seed, cell_salt ^ 0xA5A5, trial as u64);
    let model_seed = seeding::derive2(cfg.seed, cell_salt ^ 0x5A5A, trial as u64);
    let arch = &cfg.arch;
    let run = match cfg.trainer {
        TrainerKind::Mmd => {
            let mut model = MmdModel::new(
                widths.to_vec(),
                arch.hidden_activation,
                arch.weight_bound,
                arch.input_bound,
                train.couple_domains,
                model_seed,
            )?;
            train_mmd(&mut model, &ds, &train)
                .map(|_| model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target))
        }
        TrainerKind::Adversarial => {
            let mut model = AdversarialModel::new(
                widths,
                arch.hidden_activation,
                &arch.disc_hidden,
                arch.weight_bound,
                arch.input_bound,
                train.couple_domains,
                model_seed,
            )?;
            train_adversarial(&mut model, &ds, &train)
                .map(|_| model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target))
        }
    };
    match run {
        Ok(acc) => Ok(Some(acc?)),
        Err(Error::TrainingDiverged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Append-only key/value journal of finished cells.
struct Journal {
    path: Option<PathBuf>,
    done: BTreeMap<String, (f64, bool)>,
}

impl Journal {
    fn open(path: Option<&Path>) -> Result<Self> {
        let mut done = BTreeMap::new();
        if let Some(p) = path {
            if p.exists() {
                for line in std::fs::read_to_string(p)?.lines().skip(1) {
                    let mut it = line.splitn(3, ',');
                    if let (Some(k), Some(v), Some(d)) = (it.next(), it.next(), it.next()) {
                        if let (Ok(v), Ok(d)) = (v.parse::<f64>(), d.parse::<bool>()) {
                            done.insert(k.to_string(), (v, d));
                        }
                    }
                }
            } else {
                std::fs::write(p, "cell,metric,diverged\n")?;
            }
        }
        Ok(Journal {
            path: path.map(|p| p.to_path_buf()),
            done,
        })
    }

    fn get(&self, key: &str) -> Option<(f64, bool)> {
        self.done.get(key).copied()
    }

    fn record(&mut self, key: &str, value: f64, diverged: bool) -> Result<()> {
        self.done.insert(key.to_string(), (value, diverged));
        if let Some(p) = &self.path {
            let mut f = std::fs::OpenOptions::new().append(true).open(p)?;
            writeln!(f, "{key},{value},{diverged}")?;
        }
        Ok(())
    }
}

fn cell_salt(value: f64, extra: u64) -> u64 {
    value.to_bits() ^ extra.rotate_left(17)
}

/// Runs an accuracy sweep: trains every `(grid value, trial)` cell in a
/// worker pool and records the target accuracy (NaN marks divergence).
fn sweep_accuracy(cfg: &SweepConfig, journal: &mut Journal) -> Result<Vec<SweepRow>> {
    struct Cell {
        value: f64,
        trial: usize,
        key: String,
    }
    let mut pending = Vec::new();
    let mut rows = Vec::new();
    for &value in &cfg.grid {
        for trial in 0..cfg.trials {
            let key = format!("{}/{}/{}", cfg.axis.name(), value, trial);
            if let Some((metric, diverged)) = journal.get(&key) {
                rows.push(SweepRow {
                    value,
                    trial,
                    metric,
                    diverged,
                });
            } else {
                pending.push(Cell { value, trial, key });
            }
        }
    }
    let computed: Vec<(String, f64, usize, f64, bool)> = {
        let cfg_ref = cfg;
        pending
            .par_iter()
            .map(|cell| {
                let (gen, widths, train) = configure_cell(cfg_ref, cell.value);
                let out = run_cell(
                    cfg_ref,
                    &gen,
                    &widths,
                    &train,
                    cell_salt(cell.value, 0),
                    cell.trial,
                )?;
                let (metric, diverged) = match out {
                    Some(acc) => (acc, false),
                    None => (f64::NAN, true),
                };
                Ok((cell.key.clone(), cell.value, cell.trial, metric, diverged))
            })
            .collect::<Result<Vec<_>>>()?
    };
    for (key, value, trial, metric, diverged) in computed {
        journal.record(&key, metric, diverged)?;
        rows.push(SweepRow {
            value,
            trial,
            metric,
            diverged,
        });
    }
    rows.sort_by(|a, b| (a.value, a.trial).partial_cmp(&(b.value, b.trial)).unwrap());
    Ok(rows)
}

/// Mean accuracy over trials at a given sample count, journal-cached.
fn complexity_cell(
    cfg: &SweepConfig,
    journal: &mut Journal,
    grid_value: f64,
    count: usize,
) -> Result<f64> {
    let key = format!(
        "{}/{}/{}/{}",
        cfg.axis.name(),
        grid_value,
        cfg.metric.name(),
        count
    );
    if let Some((v, _)) = journal.get(&key) {
        return Ok(v);
    }
    let (mut gen, widths, train) = configure_cell(cfg, grid_value);
    match cfg.metric {
        SweepMetric::RequiredMs => {
            gen.counts.source_labeled = count;
            gen.counts.source_total = gen.counts.source_total.max(count);
        }
        SweepMetric::RequiredNs => {
            gen.counts.source_total = count.max(gen.counts.source_labeled);
        }
        SweepMetric::Accuracy => unreachable!(),
    }
    let salt = cell_salt(grid_value, count as u64);
    let accs: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let out = run_cell(cfg, &gen, &widths, &train, salt, trial)?;
            Ok(out.unwrap_or(0.0)) // diverged trials count as chance-or-worse
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
    journal.record(&key, mean, false)?;
    Ok(mean)
}

/// First-crossing bisection on the doubling lattice
/// `{lattice_min, 2 lattice_min, ...}`: returns the smallest lattice count
/// whose mean accuracy reaches `reference` while half of it does not.
/// `None` when even the lattice top misses the reference.
fn bisect_required_count(
    cfg: &SweepConfig,
    journal: &mut Journal,
    grid_value: f64,
    reference: f64,
) -> Result<Option<usize>> {
    let mut lattice = Vec::new();
    let mut c = cfg.lattice_min.max(2);
    while c <= cfg.lattice_max {
        lattice.push(c);
        c *= 2;
    }
    let top = *lattice.last().unwrap();
    if complexity_cell(cfg, journal, grid_value, top)? < reference {
        return Ok(None);
    }
    if complexity_cell(cfg, journal, grid_value, lattice[0])? >= reference {
        return Ok(Some(lattice[0]));
    }
    // invariant: fail at lo, pass at hi
    let (mut lo, mut hi) = (0usize, lattice.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if complexity_cell(cfg, journal, grid_value, lattice[mid])? >= reference {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(lattice[hi]))
}

/// Mean accuracy over a complexity sweep's trials at one `(grid value,
/// count)` cell; exposed so the bisection consistency can be re-verified
/// post hoc against the identical cached cells.
pub fn complexity_cell_accuracy(
    cfg: &SweepConfig,
    journal_dir: Option<&Path>,
    grid_value: f64,
    count: usize,
) -> Result<f64> {
    let mut journal = Journal::open(journal_path(cfg, journal_dir).as_deref())?;
    complexity_cell(cfg, &mut journal, grid_value, count)
}

fn sweep_complexity(cfg: &SweepConfig, journal: &mut Journal) -> Result<(Vec<SweepRow>, f64)> {
    // reference accuracy: midpoint between chance and the best lattice-top
    // accuracy across the grid, unless pinned by the config
    let mut top = cfg.lattice_min.max(2);
    while top * 2 <= cfg.lattice_max {
        top *= 2;
    }
    let reference = match cfg.reference_accuracy {
        Some(r) => r,
        None => {
            let chance = 1.0 / cfg.gen.classes as f64;
            let mut best: f64 = chance;
            for &value in &cfg.grid {
                best = best.max(complexity_cell(cfg, journal, value, top)?);
            }
            (chance + best) / 2.0
        }
    };
    let mut rows = Vec::new();
    for &value in &cfg.grid {
        let found = bisect_required_count(cfg, journal, value, reference)?;
        rows.push(SweepRow {
            value,
            trial: cfg.trials,
            metric: found.map(|c| c as f64).unwrap_or(f64::INFINITY),
            diverged: false,
        });
    }
    Ok((rows, reference))
}

fn journal_path(cfg: &SweepConfig, journal_dir: Option<&Path>) -> Option<PathBuf> {
    journal_dir.map(|d| {
        d.join(format!(
            "sweep_{}_{}.cells.csv",
            cfg.axis.name(),
            cfg.metric.name()
        ))
    })
}

/// Runs a sweep, journaling per-cell results under
/// `<journal_dir>/sweep_<axis>_<metric>.cells.csv` when a directory is given.
pub fn sweep(cfg: &SweepConfig, journal_dir: Option<&Path>) -> Result<SweepResult> {
    if cfg.grid.is_empty() {
        return Err(Error::Config("sweep grid must be nonempty".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::Config("sweep needs at least one trial".into()));
    }
    let mut journal = Journal::open(journal_path(cfg, journal_dir).as_deref())?;
    let (rows, reference) = match cfg.metric {
        SweepMetric::Accuracy => (sweep_accuracy(cfg, &mut journal)?, f64::NAN),
        _ => sweep_complexity(cfg, &mut journal)?,
    };
    Ok(SweepResult {
        axis: cfg.axis.name().to_string(),
        metric: cfg.metric.name().to_string(),
        trials: cfg.trials,
        seed: cfg.seed,
        reference_accuracy: if reference.is_nan() {
            None
        } else {
            Some(reference)
        },
        rows,
    })
}

/// Per-`Mt` optimal alpha found by quadratic fitting of the mean-accuracy
/// curve over an alpha grid.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaOptPoint {
    pub mt: f64,
    pub alpha_opt: Option<f64>,
    pub flat: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaOptCurve {
    pub points: Vec<AlphaOptPoint>,
    /// `c sqrt(Mt)` fit over the defined optima (needs >= 3 of them).
    pub sqrt_fit: Option<RateFit>,
}

/// Interior argmax of the least-squares quadratic through
/// `(alpha, accuracy)` means, clamped to `[0,1]`. Flat curves yield `None`.
pub fn quadratic_argmax(alphas: &[f64], accs: &[f64]) -> Option<f64> {
    let spread = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - accs.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return None;
    }
    // least squares y = a x^2 + b x + c
    let n = alphas.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (&x, &y) in alphas.iter().zip(accs) {
        sx += x;
        sx2 += x * x;
        sx3 += x * x * x;
        sx4 += x * x * x * x;
        sy += y;
        sxy += x * y;
        sx2y += x * x * y;
    }
    let m = nalgebra::Matrix3::new(sx4, sx3, sx2, sx3, sx2, sx, sx2, sx, n);
    let rhs = nalgebra::Vector3::new(sx2y, sxy, sy);
    let sol = m.lu().solve(&rhs)?;
    let (a, b) = (sol[0], sol[1]);
    let best = if a < 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else {
        // convex fit: the maximum sits at an endpoint of [0,1]
        let at0 = sol[2];
        let at1 = a + b + sol[2];
        if at1 > at0 {
            1.0
        } else {
            0.0
        }
    };
    Some(best)
}

/// Generic optimal-alpha scan: `eval(mt, alpha, trial)` returns one trial's
/// target accuracy. The real trainer and the synthetic oracles both fit this
/// shape.
pub fn alpha_opt_curve_with<F>(
    mt_grid: &[usize],
    alpha_grid: &[f64],
    trials: usize,
    mut eval: F,
) -> Result<AlphaOptCurve>
where
    F: FnMut(usize, f64, usize) -> Result<f64>,
{
    if alpha_grid.len() < 5 {
        return Err(Error::Config("alpha grid needs at least 5 points".into()));
    }
    let mut points = Vec::new();
    for &mt in mt_grid {
        let mut means = Vec::new();
        for &alpha in alpha_grid {
            let mut acc = 0.0;
            for trial in 0..trials {
                acc += eval(mt, alpha, trial)?;
            }
            means.push(acc / trials as f64);
        }
        let alpha_opt = quadratic_argmax(alpha_grid, &means);
        points.push(AlphaOptPoint {
            mt: mt as f64,
            alpha_opt,
            flat: alpha_opt.is_none(),
        });
    }
    let defined: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.alpha_opt.map(|a| (p.mt, a)))
        .collect();
    let sqrt_fit = if defined.len() >= 3 {
        let xs: Vec<f64> = defined.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = defined.iter().map(|p| p.1).collect();
        Some(fit_rate(&xs, &ys, RateModel::SqrtLaw)?)
    } else {
        None
    };
    Ok(AlphaOptCurve { points, sqrt_fit })
}

/// Optimal-alpha curve on real training runs over the `Mt` grid.
pub fn alpha_opt_curve(
    cfg: &SweepConfig,
    mt_grid: &[usize],
    alpha_grid: &[f64],
) -> Result<AlphaOptCurve> {
    alpha_opt_curve_with(mt_grid, alpha_grid, cfg.trials, |mt, alpha, trial| {
        let mut cell_cfg = cfg.clone();
        cell_cfg.axis = SweepAxis::Alpha;
        let (mut gen, widths, mut train) = configure_cell(&cell_cfg, alpha);
        gen.counts.target_labeled = mt;
        train.alpha = alpha;
        let salt = cell_salt(alpha, mt as u64);
        let out = run_cell(&cell_cfg, &gen, &widths, &train, salt, trial)?;
        Ok(out.unwrap_or(0.0))
    })
}
