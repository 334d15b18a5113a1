//! Thin command-line front end over the library. Every subcommand is
//! deterministic: identical config and seed reproduce identical output bytes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use dalab::bounds::bound_report;
use dalab::conc::{
    random_adversarial_model, verify_ddan_deviation, verify_loss_hoeffding, verify_mean_embedding,
    verify_mmd_deviation, ViolationReport,
};
use dalab::config::LabConfig;
use dalab::data::{gen_shifted_domains, standardize};
use dalab::emit::{svg_chart, to_json, write_text, Series};
use dalab::error::{Error, Result};
use dalab::fit::{fit_rate, RateModel};
use dalab::loss::DomainLabel;
use dalab::seeding;
use dalab::shallow::{run_shallow, ShallowConfig};
use dalab::sweep::{sweep, SweepConfig};
use dalab::train::{train_adversarial, train_mmd, AdversarialModel, MmdModel};

#[derive(Parser)]
#[command(name = "dalab", about = "domain-adaptation laboratory", version)]
struct Cli {
    /// Master seed; overrides every seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and Monte-Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an MMD-aligned network on synthetic shifted domains.
    TrainMmd,
    /// Train an adversarial network on synthetic shifted domains.
    TrainAdv,
    /// Shallow ridge-regression experiments over Mt and tau grids.
    Shallow(ShallowArgs),
    /// Evaluate the closed-form bound report.
    Bounds,
    /// Monte-Carlo concentration verification.
    Verify,
    /// Grid sweep (accuracy or sample-complexity bisection).
    Sweep,
    /// Least-squares rate fit of a CSV column pair.
    Fit(FitArgs),
}

#[derive(Args)]
struct ShallowArgs {
    /// Comma-separated labeled-target grid.
    #[arg(long, value_delimiter = ',')]
    mt_grid: Vec<usize>,
    /// Comma-separated transform-error grid.
    #[arg(long, value_delimiter = ',')]
    tau_grid: Vec<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column name for x.
    #[arg(long)]
    x_col: String,
    /// Column name for y.
    #[arg(long)]
    y_col: String,
    /// Model kind: inv-sqrt | linear | quadratic | sqrt.
    #[arg(long)]
    model: String,
}

fn load_config(cli: &Cli) -> Result<LabConfig> {
    let mut cfg = match &cli.config {
        Some(p) => LabConfig::load(p)?,
        None => LabConfig::default(),
    };
    if let Some(seed) = cli.seed {
        if let Some(t) = cfg.train.as_mut() {
            t.seed = seed;
        }
        if let Some(d) = cfg.data.as_mut() {
            d.seed = seed;
        }
        if let Some(s) = cfg.shallow.as_mut() {
            s.seed = seed;
        }
        if let Some(v) = cfg.verify.as_mut() {
            v.seed = seed;
        }
        if let Some(s) = cfg.sweep.as_mut() {
            s.seed = seed;
        }
    }
    Ok(cfg)
}

fn train_series(trace: &dalab::train::TrainTrace) -> Vec<Series> {
    let acc: Vec<(f64, f64)> = trace
        .epochs
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64, e.target_accuracy))
        .collect();
    let weighted: Vec<(f64, f64)> = trace
        .epochs
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64, e.weighted))
        .collect();
    vec![
        Series::solid("target accuracy", acc),
        Series::solid("weighted loss", weighted),
    ]
}

#[derive(serde::Serialize)]
struct TrainSummary {
    trainer: &'static str,
    epochs: usize,
    final_target_accuracy: f64,
    final_source_accuracy: f64,
    final_weighted_loss: f64,
    final_alignment: f64,
}

fn cmd_train(cli: &Cli, adversarial: bool) -> Result<()> {
    let cfg = load_config(cli)?;
    let train_cfg = cfg.train.clone().unwrap_or_default();
    let gen = LabConfig::require(&cfg.data, "data")?;
    let arch = cfg.arch.clone().unwrap_or_default();
    let mut ds = gen_shifted_domains(gen)?;
    standardize(&mut ds);
    let model_seed = seeding::derive(train_cfg.seed, 0xF00D);
    let (name, trace, src_acc, tgt_acc) = if adversarial {
        let mut model = AdversarialModel::new(
            &arch.widths,
            arch.hidden_activation,
            &arch.disc_hidden,
            arch.weight_bound,
            arch.input_bound,
            train_cfg.couple_domains,
            model_seed,
        )?;
        let trace = train_adversarial(&mut model, &ds, &train_cfg)?;
        let s = model.evaluate(&ds.source.test_x, &ds.source.test_y, DomainLabel::Source)?;
        let t = model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target)?;
        ("adv", trace, s, t)
    } else {
        let mut model = MmdModel::new(
            arch.widths.clone(),
            arch.hidden_activation,
            arch.weight_bound,
            arch.input_bound,
            train_cfg.couple_domains,
            model_seed,
        )?;
        let trace = train_mmd(&mut model, &ds, &train_cfg)?;
        let s = model.evaluate(&ds.source.test_x, &ds.source.test_y, DomainLabel::Source)?;
        let t = model.evaluate(&ds.target.test_x, &ds.target.test_y, DomainLabel::Target)?;
        ("mmd", trace, s, t)
    };
    write_text(
        &cli.out_dir.join(format!("trace_{name}.csv")),
        &trace.to_csv(),
    )?;
    let last = trace.epochs.last();
    let summary = TrainSummary {
        trainer: if adversarial { "adversarial" } else { "mmd" },
        epochs: trace.epochs.len(),
        final_target_accuracy: tgt_acc,
        final_source_accuracy: src_acc,
        final_weighted_loss: last.map(|e| e.weighted).unwrap_or(f64::NAN),
        final_alignment: last.map(|e| e.alignment).unwrap_or(f64::NAN),
    };
    write_text(
        &cli.out_dir.join(format!("summary_{name}.json")),
        &to_json(&summary)?,
    )?;
    write_text(
        &cli.out_dir.join(format!("trace_{name}.svg")),
        &svg_chart(
            &format!("{name} training"),
            "epoch",
            "value",
            &train_series(&trace),
        ),
    )?;
    println!("target accuracy {tgt_acc:.4} (source {src_acc:.4})");
    Ok(())
}

fn shallow_grid_csv(
    base: &ShallowConfig,
    trials: u64,
    values: &[f64],
    apply: impl Fn(&mut ShallowConfig, f64),
    label: &str,
) -> Result<(String, Vec<(f64, f64)>)> {
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &v in values {
        let mut errs = Vec::with_capacity(trials as usize);
        for trial in 0..trials {
            let mut cfg = base.clone();
            apply(&mut cfg, v);
            cfg.seed = seeding::derive2(base.seed, v.to_bits(), trial);
            errs.push(run_shallow(&cfg)?);
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / errs.len() as f64;
        rows.push(format!("{v},{mean},{}", var.sqrt()));
        means.push((v, mean));
    }
    Ok((
        dalab::emit::csv_from_rows(&format!("{label},mean_error,std"), &rows),
        means,
    ))
}

fn cmd_shallow(cli: &Cli, args: &ShallowArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let mut base = cfg.shallow.clone().unwrap_or_default();
    if let Some(a) = args.alpha {
        base.alpha = a;
    }
    if let Some(seed) = cli.seed {
        base.seed = seed;
    }
    if args.mt_grid.is_empty() && args.tau_grid.is_empty() {
        return Err(Error::Config("provide --mt-grid and/or --tau-grid".into()));
    }
    if !args.mt_grid.is_empty() {
        let values: Vec<f64> = args.mt_grid.iter().map(|&v| v as f64).collect();
        let (csv, means) = shallow_grid_csv(
            &base,
            args.trials,
            &values,
            |cfg, v| cfg.labeled_target = v as usize,
            "mt",
        )?;
        write_text(&cli.out_dir.join("shallow_mt.csv"), &csv)?;
        let fit = fit_rate(
            &means.iter().map(|p| p.0).collect::<Vec<_>>(),
            &means.iter().map(|p| p.1).collect::<Vec<_>>(),
            RateModel::OffsetInvSqrt,
        );
        let mut series = vec![Series::solid("mean error", means.clone())];
        if let Ok(f) = &fit {
            series.push(Series::fitted(
                "c1 + c2/sqrt(Mt)",
                means.iter().map(|p| (p.0, f.predict(p.0))).collect(),
            ));
        }
        write_text(
            &cli.out_dir.join("shallow_mt.svg"),
            &svg_chart(
                "target error vs labeled target samples",
                "Mt",
                "error",
                &series,
            ),
        )?;
        if let Ok(f) = fit {
            println!(
                "mt fit: c1 = {:.4}, c2 = {:.4}, R^2 = {:.4}",
                f.coefficients[0], f.coefficients[1], f.r_squared
            );
        }
    }
    if !args.tau_grid.is_empty() {
        let (csv, means) = shallow_grid_csv(
            &base,
            args.trials,
            &args.tau_grid,
            |cfg, v| cfg.tau = v,
            "tau",
        )?;
        write_text(&cli.out_dir.join("shallow_tau.csv"), &csv)?;
        let fit = fit_rate(
            &means.iter().map(|p| p.0).collect::<Vec<_>>(),
            &means.iter().map(|p| p.1).collect::<Vec<_>>(),
            RateModel::OffsetLinear,
        );
        let mut series = vec![Series::solid("mean error", means.clone())];
        if let Ok(f) = &fit {
            series.push(Series::fitted(
                "c1 + c2 tau",
                means.iter().map(|p| (p.0, f.predict(p.0))).collect(),
            ));
        }
        write_text(
            &cli.out_dir.join("shallow_tau.svg"),
            &svg_chart("target error vs transform error", "tau", "error", &series),
        )?;
        if let Ok(f) = fit {
            println!(
                "tau fit: c1 = {:.4}, c2 = {:.4}, R^2 = {:.4}",
                f.coefficients[0], f.coefficients[1], f.r_squared
            );
        }
    }
    Ok(())
}

fn cmd_bounds(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let inputs = cfg.bounds.clone().unwrap_or_default();
    let report = bound_report(&inputs)?;
    write_text(&cli.out_dir.join("bounds.json"), &to_json(&report)?)?;
    write_text(&cli.out_dir.join("bounds.csv"), &report.to_csv())?;
    println!(
        "recommended alpha {:.5}; Ms (mmd) {:.1}",
        report.recommended_alpha, report.sample_complexity_mmd.labeled_source
    );
    Ok(())
}

fn cmd_verify(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let mc = cfg.verify.clone().unwrap_or_default();
    let model = random_adversarial_model(mc.dim, seeding::derive(mc.seed, 0xD15C))?;
    let report = ViolationReport::merged(vec![
        verify_loss_hoeffding(&mc)?,
        verify_mean_embedding(&mc)?,
        verify_mmd_deviation(&mc)?,
        verify_ddan_deviation(&mc, &model)?,
    ]);
    write_text(&cli.out_dir.join("violations.csv"), &report.to_csv())?;
    write_text(&cli.out_dir.join("violations.json"), &to_json(&report)?)?;
    let verdict = if report.passed() { "pass" } else { "FAIL" };
    println!(
        "{} nonvacuous cells, suite {verdict}",
        report.rows.iter().filter(|r| !r.vacuous).count()
    );
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let sweep_cfg: &SweepConfig = LabConfig::require(&cfg.sweep, "sweep")?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let result = sweep(sweep_cfg, Some(&cli.out_dir))?;
    let name = format!("sweep_{}_{}", result.axis, result.metric);
    write_text(&cli.out_dir.join(format!("{name}.csv")), &result.to_csv())?;
    write_text(
        &cli.out_dir.join(format!("{name}.json")),
        &to_json(&result)?,
    )?;
    let means = result.means();
    write_text(
        &cli.out_dir.join(format!("{name}.svg")),
        &svg_chart(
            &name,
            &result.axis,
            &result.metric,
            &[Series::solid("trial mean", means)],
        ),
    )?;
    println!("{} rows", result.rows.len());
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config("empty csv".into()))?
        .split(',')
        .collect();
    let xi = header
        .iter()
        .position(|h| *h == args.x_col)
        .ok_or_else(|| Error::Config(format!("no column '{}'", args.x_col)))?;
    let yi = header
        .iter()
        .position(|h| *h == args.y_col)
        .ok_or_else(|| Error::Config(format!("no column '{}'", args.y_col)))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for line in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let x: f64 = cells[xi]
            .parse()
            .map_err(|e| Error::Config(format!("bad x value: {e}")))?;
        let y: f64 = cells[yi]
            .parse()
            .map_err(|e| Error::Config(format!("bad y value: {e}")))?;
        if x.is_finite() && y.is_finite() {
            xs.push(x);
            ys.push(y);
        }
    }
    let model = RateModel::parse(&args.model)?;
    let fit = fit_rate(&xs, &ys, model)?;
    write_text(&cli.out_dir.join("fit.json"), &to_json(&fit)?)?;
    println!(
        "coefficients {:?}, R^2 {:.5}",
        fit.coefficients, fit.r_squared
    );
    Ok(())
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let run = || -> Result<()> {
        ensure_out_dir(&cli.out_dir)?;
        match &cli.command {
            Command::TrainMmd => cmd_train(&cli, false),
            Command::TrainAdv => cmd_train(&cli, true),
            Command::Shallow(args) => cmd_shallow(&cli, args),
            Command::Bounds => cmd_bounds(&cli),
            Command::Verify => cmd_verify(&cli),
            Command::Sweep => cmd_sweep(&cli),
            Command::Fit(args) => cmd_fit(&cli, args),
        }
    };
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
