//! `mifs` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use mifs::data::{self, Dataset, DatasetMeta, FriedmanVariant, SplitSpec, TargetColumn};
use mifs::forward::{self, ForwardConfig, ForwardTrace, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use mifs::rng::{seeded, substream};
use mifs::tuner::{self, KSelection, TunerConfig, DEFAULT_FOLDS};
use mifs::{eval, KsgConfig};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "mifs", version, about = "Mutual-information forward feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV plus a .meta.json sidecar.
    Generate(GenerateArgs),
    /// Shuffle a CSV into train and test files.
    Split(SplitArgs),
    /// Tune the neighbor count k.
    Tune(TuneArgs),
    /// Run the forward search with its permutation stopping rule.
    Select(SelectArgs),
    /// kNN-regression RMSE of a feature subset on a test set.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, env = "MIFS_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    input: PathBuf,
    /// Target column: a header name or a 0-based index. Defaults to the last column.
    #[arg(long)]
    target: Option<String>,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
    /// Relative width of tie-breaking noise added before estimation (0 = off).
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Friedman-style regression with 5 informative and 5 noise inputs.
    #[arg(long, required = true)]
    friedman: bool,
    /// Use sin(pi x1 x2) in place of sin(x1 x2).
    #[arg(long)]
    pi: bool,
    #[arg(short = 'n', long = "rows")]
    n: usize,
    /// Output file name, relative to the output directory.
    #[arg(long, default_value = "friedman.csv")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, conflicts_with_all = ["train", "test"])]
    train_fraction: Option<f64>,
    #[arg(long, requires = "test")]
    train: Option<usize>,
    #[arg(long, requires = "train")]
    test: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TuneOpts {
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    tune: TuneOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: Input,
    /// Fixed neighbor count; tuned first when absent.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    tune: TuneOpts,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    #[arg(long)]
    max_features: Option<usize>,
    /// Keep walking the greedy path after the first rejection.
    #[arg(long)]
    full_path: bool,
    /// Print a summary table.
    #[arg(long)]
    report: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[group(id = "subset", required = true, multiple = false, args = ["trace", "features", "all_features"])]
struct EvalArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// trace.json written by `select`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Comma-separated feature names or 1-based column numbers.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    #[arg(long)]
    all_features: bool,
    #[arg(long, default_value_t = eval::DEFAULT_K_REG)]
    k_reg: usize,
    #[command(flatten)]
    common: Common,
}

/// Every setting that shaped a result, embedded in each JSON output.
#[derive(Debug, Default, Serialize)]
struct RunConfig {
    command: String,
    seed: u64,
    input: Option<PathBuf>,
    generator: Option<String>,
    target: Option<String>,
    header: bool,
    jitter: f64,
    standardize: bool,
    folds: Option<usize>,
    k_min: Option<usize>,
    k_max: Option<usize>,
    k: Option<usize>,
    alpha: Option<f64>,
    permutations: Option<usize>,
    max_features: Option<usize>,
    full_path: bool,
    train: Option<PathBuf>,
    test: Option<PathBuf>,
    k_reg: Option<usize>,
    output_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

fn classify(err: anyhow::Error) -> Failure {
    // library errors already carry their cause in the message
    let mut msg = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !msg.contains(&part) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&part);
        }
    }
    if let Some(e) = err.downcast_ref::<mifs::Error>() {
        return if e.is_data_error() {
            Failure::Data(msg)
        } else {
            Failure::Usage(msg)
        };
    }
    if err.downcast_ref::<UsageError>().is_some() {
        return Failure::Usage(msg);
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return Failure::Data(msg);
    }
    Failure::Internal(msg)
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, msg) = match classify(err) {
                Failure::Usage(m) => (1, m),
                Failure::Data(m) => (2, m),
                Failure::Internal(m) => (3, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = match &cli.command {
        Command::Generate(a) => a.common.threads,
        Command::Split(a) => a.common.threads,
        Command::Tune(a) => a.common.threads,
        Command::Select(a) => a.common.threads,
        Command::Eval(a) => a.common.threads,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| anyhow!("cannot start worker threads: {e}"))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => generate(a),
        Command::Split(a) => split(a),
        Command::Tune(a) => tune(a),
        Command::Select(a) => select(a),
        Command::Eval(a) => evaluate(a),
    })
}

fn target_column(target: &Option<String>) -> anyhow::Result<TargetColumn> {
    match target {
        None => Ok(TargetColumn::Last),
        Some(t) => t.parse().map_err(|e| usage(format!("bad --target: {e}"))),
    }
}

fn load(input: &Input, seed: u64) -> anyhow::Result<Dataset> {
    let ds = data::load_csv(&input.input, &target_column(&input.target)?, !input.no_header)?;
    if input.jitter == 0.0 {
        return Ok(ds);
    }
    // a separate stream, so jitter does not shift the tuning and search draws
    Ok(ds.jitter(input.jitter, &mut substream(seed, &[1]))?)
}

fn base_config(command: &str, common: &Common) -> RunConfig {
    RunConfig {
        command: command.into(),
        seed: common.seed,
        output_dir: common.output_dir.clone(),
        header: true,
        standardize: true,
        ..RunConfig::default()
    }
}

fn with_input(mut cfg: RunConfig, input: &Input) -> RunConfig {
    cfg.input = Some(input.input.clone());
    cfg.target = input.target.clone();
    cfg.header = !input.no_header;
    cfg.jitter = input.jitter;
    cfg
}

fn out_path(common: &Common, name: impl AsRef<Path>) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&common.output_dir)
        .with_context(|| format!("cannot create {}", common.output_dir.display()))?;
    Ok(common.output_dir.join(name))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    debug_assert!(a.friedman);
    let variant = if a.pi { FriedmanVariant::Pi } else { FriedmanVariant::Plain };
    let ds = data::friedman_generate(a.n, variant, &mut seeded(a.common.seed))?;
    let generator = format!("friedman{} n={}", if a.pi { "-pi" } else { "" }, a.n);
    let ds = ds.with_meta(DatasetMeta {
        source: "generated".into(),
        seed: Some(a.common.seed),
        generator: Some(generator),
        history: Vec::new(),
    });
    let path = out_path(&a.common, &a.output)?;
    ds.write_csv(&path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let spec = match (a.train_fraction, a.train, a.test) {
        (Some(f), _, _) => SplitSpec::TrainFraction(f),
        (None, Some(train), Some(test)) => SplitSpec::Sizes { train, test },
        _ => return Err(usage("give --train-fraction or both --train and --test")),
    };
    let ds = data::load_csv(&a.input.input, &target_column(&a.input.target)?, !a.input.no_header)?;
    let (train, test) = data::split(&ds, spec, &mut seeded(a.common.seed))?;
    for (name, part) in [("train.csv", &train), ("test.csv", &test)] {
        let path = out_path(&a.common, name)?;
        part.write_csv(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn tuner_config(opts: &TuneOpts) -> anyhow::Result<TunerConfig> {
    if opts.k_min > opts.k_max {
        return Err(usage(format!(
            "--k-min {} is larger than --k-max {}",
            opts.k_min, opts.k_max
        )));
    }
    Ok(TunerConfig {
        k_min: opts.k_min,
        k_max: opts.k_max,
        folds: opts.folds,
        standardize: !opts.no_standardize,
    })
}

fn fill_tune(cfg: &mut RunConfig, t: &TunerConfig) {
    cfg.folds = Some(t.folds);
    cfg.k_min = Some(t.k_min);
    cfg.k_max = Some(t.k_max);
    cfg.standardize = t.standardize;
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    config: &'a RunConfig,
    feature_names: &'a [String],
    selection: &'a KSelection,
}

fn grid_csv(sel: &KSelection, names: &[String]) -> String {
    let mut out = String::from("feature,name,k,mean,variance,null_mean,null_variance,t\n");
    for (i, row) in sel.cells.iter().enumerate() {
        for (cell, k) in row.iter().zip(&sel.k_values) {
            writeln!(
                out,
                "{},{},{k},{},{},{},{},{}",
                i + 1,
                names[i],
                cell.mean,
                cell.variance,
                cell.null_mean,
                cell.null_variance,
                cell.t
            )
            .unwrap();
        }
    }
    out
}

fn tune(a: TuneArgs) -> anyhow::Result<()> {
    let config = tuner_config(&a.tune)?;
    let ds = load(&a.input, a.common.seed)?;
    let sel = tuner::select_k(&ds, &config, &mut seeded(a.common.seed))?;
    let mut cfg = with_input(base_config("tune", &a.common), &a.input);
    fill_tune(&mut cfg, &config);
    let path = out_path(&a.common, "kselection.json")?;
    write_json(
        &path,
        &TuneOutput {
            config: &cfg,
            feature_names: ds.names(),
            selection: &sel,
        },
    )?;
    fs::write(out_path(&a.common, "tgrid.csv")?, grid_csv(&sel, ds.names()))?;
    eprintln!(
        "k* = {} (feature {}, t = {:.3}); wrote {}",
        sel.k_star,
        ds.names()[sel.argmax_feature],
        sel.t_max,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SelectOutput {
    config: RunConfig,
    feature_names: Vec<String>,
    selected_names: Vec<String>,
    max_mi_subset: Vec<usize>,
    k_selection: Option<KSelection>,
    trace: ForwardTrace,
}

// the part of trace.json that `eval` reads back
#[derive(Deserialize)]
struct SelectedNames {
    selected_names: Vec<String>,
}

fn trace_csv(trace: &ForwardTrace, names: &[String]) -> String {
    let mut out = String::from("iteration,feature,name,mi,threshold,p_value,accepted\n");
    for it in &trace.iterations {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            it.step,
            it.chosen + 1,
            names[it.chosen],
            it.chosen_mi,
            it.threshold,
            it.p_value.p,
            it.accepted
        )
        .unwrap();
    }
    out
}

fn report(trace: &ForwardTrace, names: &[String]) -> String {
    let mut out = format!(
        "{:>4}  {:<12} {:>9} {:>9} {:>6}  {}\n",
        "step", "feature", "MI", "threshold", "p", "accepted"
    );
    for it in &trace.iterations {
        writeln!(
            out,
            "{:>4}  {:<12} {:>9.4} {:>9.4} {:>6.2}  {}",
            it.step,
            names[it.chosen],
            it.chosen_mi,
            it.threshold,
            it.p_value.p,
            if it.accepted { "yes" } else { "no" }
        )
        .unwrap();
    }
    let chosen: Vec<&str> = trace.selected.iter().map(|&j| names[j].as_str()).collect();
    writeln!(out, "selected: {} (stop: {:?})", chosen.join(", "), trace.stop_reason).unwrap();
    out
}

fn select(a: SelectArgs) -> anyhow::Result<()> {
    let tune_config = tuner_config(&a.tune)?;
    let ds = load(&a.input, a.common.seed)?;
    let mut rng = seeded(a.common.seed);
    let (k, k_selection) = match a.k {
        Some(k) => (k, None),
        None => {
            let sel = tuner::select_k(&ds, &tune_config, &mut rng)?;
            (sel.k_star, Some(sel))
        }
    };
    let config = ForwardConfig {
        ksg: KsgConfig::new(k).with_standardize(!a.tune.no_standardize),
        alpha: a.alpha,
        permutations: a.permutations,
        max_features: a.max_features,
        full_path: a.full_path,
    };
    let trace = forward::forward_select(&ds, &config, &mut rng)?;

    let mut cfg = with_input(base_config("select", &a.common), &a.input);
    if a.k.is_none() {
        fill_tune(&mut cfg, &tune_config);
    }
    cfg.standardize = !a.tune.no_standardize;
    cfg.k = Some(k);
    cfg.alpha = Some(a.alpha);
    cfg.permutations = Some(a.permutations);
    cfg.max_features = a.max_features;
    cfg.full_path = a.full_path;

    let names = ds.names().to_vec();
    if a.report {
        print!("{}", report(&trace, &names));
    }
    fs::write(out_path(&a.common, "trace.csv")?, trace_csv(&trace, &names))?;
    let out = SelectOutput {
        config: cfg,
        selected_names: trace.selected.iter().map(|&j| names[j].clone()).collect(),
        max_mi_subset: forward::max_mi_subset(&trace),
        feature_names: names,
        k_selection,
        trace,
    };
    let path = out_path(&a.common, "trace.json")?;
    write_json(&path, &out)?;
    eprintln!("selected {:?}; wrote {}", out.selected_names, path.display());
    Ok(())
}

fn resolve_features(ds: &Dataset, wanted: &[String]) -> anyhow::Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            let w = w.trim();
            if let Some(j) = ds.names().iter().position(|n| n == w) {
                return Ok(j);
            }
            match w.parse::<usize>() {
                Ok(j) if (1..=ds.n_features()).contains(&j) => Ok(j - 1),
                _ => Err(usage(format!("unknown feature {w:?}"))),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a RunConfig,
    feature_names: Vec<String>,
    report: &'a eval::EvalReport,
}

fn evaluate(a: EvalArgs) -> anyhow::Result<()> {
    let target = target_column(&a.target)?;
    let train = data::load_csv(&a.train, &target, !a.no_header)?;
    let test = data::load_csv(&a.test, &target, !a.no_header)?;
    let features = if let Some(path) = &a.trace {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let trace: SelectedNames = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a trace written by `select`", path.display()))?;
        resolve_features(&train, &trace.selected_names)?
    } else if let Some(list) = &a.features {
        resolve_features(&train, list)?
    } else {
        (0..train.n_features()).collect()
    };
    if features.is_empty() {
        return Err(usage("the feature subset is empty; nothing to evaluate"));
    }
    let rep = eval::knn_rmse(&train, &test, &features, a.k_reg)?;
    let mut cfg = base_config("eval", &a.common);
    cfg.target = a.target.clone();
    cfg.header = !a.no_header;
    cfg.train = Some(a.train.clone());
    cfg.test = Some(a.test.clone());
    cfg.k_reg = Some(a.k_reg);
    let path = out_path(&a.common, "eval.json")?;
    let names = features.iter().map(|&j| train.names()[j].clone()).collect();
    write_json(
        &path,
        &EvalOutput {
            config: &cfg,
            feature_names: names,
            report: &rep,
        },
    )?;
    eprintln!("rmse {:.4} on {} test rows; wrote {}", rep.rmse, rep.n_test, path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_classes() {
        let data = mifs::Error::NonFinite { row: 1, column: "a".into() };
        assert!(matches!(classify(data.into()), Failure::Data(_)));
        let bad = mifs::data::friedman_generate(3, FriedmanVariant::Plain, &mut seeded(1)).unwrap_err();
        assert!(matches!(classify(bad.into()), Failure::Usage(_)));
        assert!(matches!(classify(usage("x")), Failure::Usage(_)));
        assert!(matches!(classify(anyhow!("boom")), Failure::Internal(_)));
        let wrapped = anyhow::Error::from(UsageError("inner".into())).context("outer");
        match classify(wrapped) {
            Failure::Usage(m) => assert_eq!(m, "outer: inner"),
            _ => panic!("context hides the usage error"),
        }
    }

    #[test]
    fn features_resolve_by_name_or_position() {
        let ds = mifs::data::friedman_generate(10, FriedmanVariant::Plain, &mut seeded(1)).unwrap();
        let want: Vec<String> = ["X3", "1", " X10 "].iter().map(|s| s.to_string()).collect();
        assert_eq!(resolve_features(&ds, &want).unwrap(), vec![2, 0, 9]);
        assert!(resolve_features(&ds, &["0".into()]).is_err());
        assert!(resolve_features(&ds, &["X11".into()]).is_err());
    }
}
