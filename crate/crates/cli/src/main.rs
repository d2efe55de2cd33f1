use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sparca::cfselect::{cf_curve_with_window, default_grid, CfCurve, DEFAULT_GRID_POINTS, DEFAULT_SMOOTHING_WINDOW};
use sparca::data::{load_csv, load_idx, write_csv};
use sparca::evalkit::protocol::{fractions_to_counts, stratified_split};
use sparca::evalkit::synth::factor_labels;
use sparca::evalkit::{gen_blocks, gen_synthetic, profile_runtime, run_eval, BlockSpec, EvalConfig, NoiseScale, Split, SynthSpec};
use sparca::nalgebra::DMatrix;
use sparca::pipeline::DEFAULT_VARIANCE_THRESHOLD;
use sparca::{fit, DataMatrix, HornParams, LabelVector, SparcaModel};

#[derive(Parser)]
#[command(name = "sparca", version, about = "Sparse compressed agglomeration: interpretable sparse dimensionality reduction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPARCA_THREADS")]
    threads: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, env = "SPARCA_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Apply a fitted model to a data file.
    Transform(TransformArgs),
    /// Tabulate reduced feature count against cluster count.
    CfCurve(CurveArgs),
    /// Time fitting along the sample and feature axes.
    Profile(ProfileArgs),
    /// Compare downstream classification against a PCA baseline.
    Eval(EvalArgs),
    /// Write a synthetic data set.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Data file: CSV, or IDX images when `--labels` is given.
    #[arg(long, short)]
    input: PathBuf,
    /// IDX label file paired with IDX images.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// The CSV's first row is a header.
    #[arg(long)]
    header: bool,
    /// CSV column with integer class labels (index or `last`).
    #[arg(long)]
    label_column: Option<String>,
    /// Keep only the first N samples.
    #[arg(long)]
    max_samples: Option<usize>,
}

#[derive(Args)]
struct HornArgs {
    /// Permutation trials for parallel analysis.
    #[arg(long, default_value_t = 20)]
    horn_repeats: usize,
    /// Null percentile an eigenvalue must beat.
    #[arg(long, default_value_t = 95.0)]
    horn_percentile: f64,
}

impl HornArgs {
    fn params(&self, seed: u64) -> HornParams {
        HornParams {
            n_repeats: self.horn_repeats,
            percentile: self.horn_percentile,
            seed,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Explicit cluster counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Number of geometrically spaced cluster counts when no grid is given.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Moving-average window applied to the derivative.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
    smoothing: usize,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of feature clusters.
    #[arg(long, short = 'k', required_unless_present = "auto", conflicts_with = "auto")]
    clusters: Option<usize>,
    /// Choose the cluster count from the cluster-feature curve.
    #[arg(long)]
    auto: bool,
    /// Share of each component's variance the sparse fit must recover.
    #[arg(long, default_value_t = DEFAULT_VARIANCE_THRESHOLD)]
    variance: f64,
    #[command(flatten)]
    horn: HornArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Also write the curve used by `--auto`.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Model file to write.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    model: PathBuf,
    /// Reduced CSV to write.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    horn: HornArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000,8000")]
    sample_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800,1600")]
    feature_grid: Vec<usize>,
    /// Timed fits per size; the median is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Pooled,
    PerFeature,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Embedding / train / test sample counts.
    #[arg(long, value_delimiter = ',', num_args = 3, conflicts_with = "fractions")]
    counts: Option<Vec<usize>>,
    /// Embedding / train / test fractions of the input.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.2,0.6,0.2")]
    fractions: Vec<f64>,
    /// Fixed cluster count; chosen from the curve when absent.
    #[arg(long, short = 'k')]
    clusters: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_VARIANCE_THRESHOLD)]
    variance: f64,
    #[command(flatten)]
    horn: HornArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// L1 strengths searched by cross-validation.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Test-set noise levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4,8,16")]
    sigmas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Pooled)]
    noise_scale: NoiseArg,
    /// Directory for accuracy.csv, robustness.csv and the fitted model.
    #[arg(long, short)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Low-rank matrix with a controlled effective rank.
    LowRank,
    /// Noisy copies of independent latent factors.
    Blocks,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Blocks)]
    kind: SynthKind,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Feature count for `low-rank`.
    #[arg(long, default_value_t = 100)]
    features: usize,
    /// Participation-ratio effective rank for `low-rank`.
    #[arg(long, default_value_t = 20.0)]
    rank: f64,
    #[arg(long, default_value_t = 8)]
    blocks: usize,
    #[arg(long, default_value_t = 10)]
    block_size: usize,
    /// Factor-to-noise variance ratio for `blocks`.
    #[arg(long, default_value_t = 5.0)]
    snr: f64,
    /// Append a label column: argmax over the first K factors (`blocks` only).
    #[arg(long)]
    classes: Option<usize>,
    /// Write each feature's generating block (`blocks` only).
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

fn check_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("output directory {} does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

fn load(input: &InputArgs) -> Result<(DataMatrix, Option<LabelVector>)> {
    let (x, y) = match &input.labels {
        Some(labels) => {
            let (x, y) = load_idx(&input.input, labels)?;
            (x, Some(y))
        }
        None => {
            let label_column = match input.label_column.as_deref() {
                None => None,
                Some("last") => {
                    let (probe, _) = load_csv(&input.input, input.header, None)?;
                    Some(probe.n_features() - 1)
                }
                Some(s) => Some(s.parse().with_context(|| format!("bad --label-column {s:?}"))?),
            };
            load_csv(&input.input, input.header, label_column)?
        }
    };
    match input.max_samples {
        Some(n) if n < x.n_samples() => {
            let rows: Vec<usize> = (0..n).collect();
            Ok((x.select_rows(&rows)?, y.map(|y| y.select(&rows))))
        }
        _ => Ok((x, y)),
    }
}

fn curve(x: &DataMatrix, grid: &GridArgs, horn: HornParams) -> Result<CfCurve> {
    let m = sparca::Scaler::fit(x)?.n_kept();
    let ks = match &grid.grid {
        Some(g) => g.clone(),
        None => default_grid(m, grid.grid_points),
    };
    Ok(cf_curve_with_window(x, &ks, &horn, grid.smoothing)?)
}

fn write_curve(path: &Path, curve: &CfCurve) -> Result<()> {
    let rows = curve.points.len();
    let values = DMatrix::from_fn(rows, 4, |i, j| match j {
        0 => curve.points[i].n_clusters as f64,
        1 => curve.points[i].n_features as f64,
        2 => curve.derivative[i],
        _ => f64::from(u8::from(curve.points[i].n_clusters == curve.selected)),
    });
    let header = ["n_clusters", "n_features", "derivative", "selected"].map(String::from);
    write_csv(path, &values, Some(&header), &[])?;
    Ok(())
}

fn cmd_fit(a: &FitArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    if let Some(p) = &a.curve_out {
        check_output(p)?;
    }
    let (x, _) = load(&a.input)?;
    let horn = a.horn.params(seed);
    let k = match a.clusters {
        Some(k) => k,
        None => {
            let c = curve(&x, &a.grid, horn)?;
            if let Some(p) = &a.curve_out {
                write_curve(p, &c)?;
            }
            println!("auto-selected {} clusters", c.selected);
            c.selected
        }
    };
    let started = Instant::now();
    let model = fit(&x, k, a.variance, horn)?;
    let secs = started.elapsed().as_secs_f64();
    model.save(&a.out)?;
    let supports: Vec<usize> = model.components.iter().map(|c| c.entries.len()).collect();
    let mean_support = supports.iter().sum::<usize>() as f64 / supports.len() as f64;
    let min_evr = model.components.iter().map(|c| c.evr).fold(f64::INFINITY, f64::min);
    let flagged = model.components.iter().filter(|c| c.exhausted).count();
    println!(
        "clusters {}  features {} -> {}  mean support {mean_support:.2}  min evr {min_evr:.4}  full-support {flagged}  fit {secs:.2}s",
        model.n_clusters,
        x.n_features(),
        model.n_components()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_transform(a: &TransformArgs) -> Result<()> {
    check_output(&a.out)?;
    let model = SparcaModel::load(&a.model)?;
    let (x, _) = load(&a.input)?;
    let reduced = model.transform(&x)?;
    let header: Vec<String> = reduced
        .provenance
        .iter()
        .map(|p| format!("c{}_r{}", p.cluster, p.rank))
        .collect();
    let comments: Vec<String> = reduced
        .provenance
        .iter()
        .zip(&header)
        .map(|(p, name)| {
            let support: Vec<String> = p.support.iter().map(usize::to_string).collect();
            format!("{name}: cluster {} component {} features {}", p.cluster, p.rank, support.join(";"))
        })
        .collect();
    write_csv(&a.out, &reduced.values, Some(&header), &comments)?;
    println!("{} x {} -> {} x {}; wrote {}", x.n_samples(), x.n_features(), reduced.values.nrows(), reduced.values.ncols(), a.out.display());
    Ok(())
}

fn cmd_cf_curve(a: &CurveArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    let (x, _) = load(&a.input)?;
    let c = curve(&x, &a.grid, a.horn.params(seed))?;
    write_curve(&a.out, &c)?;
    let p = c.points.iter().find(|p| p.n_clusters == c.selected).map_or(0, |p| p.n_features);
    println!("selected {} clusters ({p} features); wrote {}", c.selected, a.out.display());
    Ok(())
}

fn cmd_profile(a: &ProfileArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    let report = profile_runtime(&a.sample_grid, &a.feature_grid, a.repeats, seed)?;
    let axes = [(0.0, &report.sample_axis), (1.0, &report.feature_axis)];
    let rows: Vec<[f64; 3]> = axes
        .iter()
        .flat_map(|(axis, t)| t.sizes.iter().zip(&t.seconds).map(move |(&s, &secs)| [*axis, s as f64, secs]))
        .collect();
    let values = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    let header = ["axis", "size", "seconds"].map(String::from);
    let comments = vec![
        "axis 0 = samples at 100 features, axis 1 = features at 50 samples".to_string(),
        format!("slope samples {:.4}", report.sample_axis.slope),
        format!("slope features {:.4}", report.feature_axis.slope),
    ];
    write_csv(&a.out, &values, Some(&header), &comments)?;
    println!(
        "log-log slope: samples {:.2}, features {:.2}; wrote {}",
        report.sample_axis.slope,
        report.feature_axis.slope,
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs, seed: u64) -> Result<()> {
    if !a.out_dir.is_dir() {
        bail!("output directory {} does not exist", a.out_dir.display());
    }
    let (x, y) = load(&a.input)?;
    let y = y.context("eval needs class labels: pass --labels (IDX) or --label-column (CSV)")?;
    let counts = match &a.counts {
        Some(c) => c.clone(),
        None => fractions_to_counts(x.n_samples(), &a.fractions)?,
    };
    let split = {
        let mut parts = stratified_split(y.labels(), &counts, seed)?.into_iter();
        Split {
            embed: parts.next().unwrap(),
            train: parts.next().unwrap(),
            test: parts.next().unwrap(),
        }
    };
    let cfg = EvalConfig {
        n_clusters: a.clusters,
        variance_threshold: a.variance,
        horn: a.horn.params(seed),
        grid_points: a.grid.grid_points,
        smoothing_window: a.grid.smoothing,
        lambdas: a.lambdas.clone().unwrap_or_else(sparca::evalkit::protocol::default_lambda_grid),
        n_folds: a.folds,
        sigmas: a.sigmas.clone(),
        seed,
    };
    let run = run_eval(&x, &y, &split, &cfg)?;

    let acc = DMatrix::from_fn(2, 5, |i, j| {
        let r = &run.reports[i];
        [r.n_features as f64, r.lambda, r.cv_accuracy, r.test_accuracy, r.fit_seconds][j]
    });
    let header = ["n_features", "lambda", "cv_accuracy", "test_accuracy", "fit_seconds"].map(String::from);
    let comments = vec![
        "row 0 = sparca, row 1 = pca".to_string(),
        format!("split embed {} train {} test {}", split.embed.len(), split.train.len(), split.test.len()),
        format!("sparca clusters {}", run.sparca.n_clusters),
    ];
    write_csv(a.out_dir.join("accuracy.csv"), &acc, Some(&header), &comments)?;

    let scale = match a.noise_scale {
        NoiseArg::Pooled => NoiseScale::Pooled,
        NoiseArg::PerFeature => NoiseScale::PerFeature,
    };
    let table = run.robustness(&a.sigmas, scale, seed)?;
    let noise = DMatrix::from_fn(table.sigmas.len(), 3, |i, j| match j {
        0 => table.sigmas[i],
        _ => table.accuracy[i][j - 1],
    });
    let header = ["sigma", "sparca", "pca"].map(String::from);
    write_csv(a.out_dir.join("robustness.csv"), &noise, Some(&header), &[])?;
    if let Some(c) = &run.cf_curve {
        write_curve(&a.out_dir.join("cf_curve.csv"), c)?;
    }
    run.sparca.save(a.out_dir.join("model.json"))?;

    for r in &run.reports {
        println!(
            "{:<7} features {:>4}  lambda {:.0e}  cv {:.3}  test {:.3}  fit {:.1}s",
            r.name, r.n_features, r.lambda, r.cv_accuracy, r.test_accuracy, r.fit_seconds
        );
    }
    println!("wrote accuracy.csv, robustness.csv and model.json to {}", a.out_dir.display());
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    let (values, labels, truth) = match a.kind {
        SynthKind::LowRank => {
            if a.classes.is_some() || a.truth_out.is_some() {
                bail!("--classes and --truth-out apply to --kind blocks only");
            }
            let spec = SynthSpec {
                n_samples: a.samples,
                n_features: a.features,
                effective_rank: a.rank,
                seed,
            };
            (gen_synthetic(&spec)?.into_values(), None, None)
        }
        SynthKind::Blocks => {
            let spec = BlockSpec {
                n_blocks: a.blocks,
                block_size: a.block_size,
                n_samples: a.samples,
                snr: a.snr,
                seed,
            };
            let data = gen_blocks(&spec)?;
            let labels = a.classes.map(|k| factor_labels(&data.factors, k));
            (data.x.into_values(), labels, Some(data.truth))
        }
    };
    let (n, m) = values.shape();
    let mut header: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
    let out = match &labels {
        Some(l) => {
            header.push("label".into());
            DMatrix::from_fn(n, m + 1, |i, j| if j < m { values[(i, j)] } else { l[i] as f64 })
        }
        None => values,
    };
    write_csv(&a.out, &out, Some(&header), &[format!("seed {seed}")])?;
    if let (Some(path), Some(truth)) = (&a.truth_out, truth) {
        let t = DMatrix::from_fn(truth.len(), 2, |i, j| if j == 0 { i as f64 } else { truth[i] as f64 });
        write_csv(path, &t, Some(&["feature".to_string(), "block".to_string()]), &[])?;
    }
    println!("{n} x {m}{}; wrote {}", if labels.is_some() { " plus labels" } else { "" }, a.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Transform(a) => cmd_transform(a),
        Command::CfCurve(a) => cmd_cf_curve(a, cli.seed),
        Command::Profile(a) => cmd_profile(a, cli.seed),
        Command::Eval(a) => cmd_eval(a, cli.seed),
        Command::Synth(a) => cmd_synth(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their cause in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
