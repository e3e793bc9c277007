use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use serde_json::Value;

use realfnd::baselines::build_variant;
use realfnd::config::{CorpusSource, RunConfig};
use realfnd::corpus::{generate_synthetic, write_jsonl, Corpus, NewsArticle, SplitMode, SyntheticConfig};
use realfnd::encoders::{pretrain_encoders, EncoderStack};
use realfnd::evaluation::{
    fold_seed, protocol_folds, report_csv, run_protocol, score_bundle, sweep, write_report, write_sweep, FoldMetrics,
    MetricReport, SweepParameter,
};
use realfnd::pipeline::{save_encoders, write_atomic, ModelBundle};
use realfnd::{Error, Result};

#[derive(Parser)]
#[command(name = "realfnd", version, about = "Domain-adaptive fake news detection with a reinforcement-learning agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-domain corpus as JSONL plus a manifest.
    Synth {
        /// Synthetic generator settings (JSON); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSONL path; the manifest goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain the encoder stack on one fold's training split.
    Pretrain {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Output file; defaults to <output_dir>/encoders.rfnd.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every stage on one fold's training split and save the bundle.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Score a saved bundle on its fold, or run the full k-fold protocol.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Bundle from `train`; without it every fold is retrained.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Fold the bundle was trained on.
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Cross-domain target F1 over a grid of one reward or split parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = ["alpha", "beta", "gamma"])]
        param: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON). Keys not given keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL corpus; replaces the configured corpus source.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, value_parser = ["single-domain", "cross-domain"])]
    mode: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set rl.episodes=500`. Values are
    /// parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let mut tree = serde_json::to_value(&base)?;
        let mut sets: Vec<(String, Value)> = Vec::new();
        if let Some(p) = &self.corpus {
            sets.push(("corpus".into(), serde_json::json!({ "jsonl": { "path": p } })));
        }
        if let Some(s) = self.seed {
            sets.push(("seed".into(), s.into()));
        }
        if let Some(v) = &self.variant {
            sets.push(("variant".into(), v.clone().into()));
        }
        if let Some(m) = &self.mode {
            sets.push(("mode".into(), m.clone().into()));
        }
        if let Some(d) = &self.output_dir {
            sets.push(("output_dir".into(), d.to_string_lossy().into_owned().into()));
        }
        for o in &self.overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            sets.push((key.to_string(), value));
        }
        for (key, value) in sets {
            set_path(&mut tree, &key, value)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(tree).map_err(|e| Error::Config(format!("configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .get_mut(*part)
            .filter(|v| v.is_object())
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
    }
    let leaf = node
        .as_object_mut()
        .and_then(|obj| obj.get_mut(parts[parts.len() - 1]))
        .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
    *leaf = value;
    Ok(())
}

/// Keys whose defaults are the reference experimental setting.
const REFERENCE_KEYS: &[&str] = &[
    "encoder.content_epochs",
    "encoder.comment_epochs",
    "classifier.hidden",
    "classifier.dropout",
    "classifier.learning_rate",
    "rl.alpha",
    "rl.beta",
    "rl.sigma",
    "rl.horizon",
    "rl.discount",
    "rl.episodes",
    "rl.learning_rate",
    "rl.hidden",
    "split.k",
    "split.gamma",
    "single_domain_folds",
];

fn config_key_help() -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) if !map.is_empty() && !prefix.starts_with("corpus.") => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    let mut tree = serde_json::to_value(RunConfig::default()).expect("default config serialises");
    // The corpus source is a tagged choice; list the synthetic settings.
    if let Some(corpus) = tree.get_mut("corpus").and_then(|c| c.get_mut("synthetic")) {
        for (k, v) in corpus.as_object().expect("synthetic settings are an object") {
            rows.push((format!("corpus.synthetic.{k}"), v.to_string()));
        }
    }
    tree.as_object_mut().expect("config is an object").remove("corpus");
    walk("", &tree, &mut rows);
    rows.push((
        "corpus".into(),
        r#"{"synthetic": {..}} or {"jsonl": {"path": .., "source_domain": ..}}"#.into(),
    ));
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut text = String::from("Config keys (defaults; * = reference setting):\n");
    for (k, v) in rows {
        let mark = if REFERENCE_KEYS.contains(&k.as_str()) { " *" } else { "" };
        text.push_str(&format!("  {k:<width$}  {v}{mark}\n"));
    }
    text.push_str("\nLog verbosity: REALFND_LOG (error, warn, info, debug, trace; default info).\n");
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REALFND_LOG", "info"))
        .format_timestamp(None)
        .init();
    let help = config_key_help();
    let mut command = Cli::command().after_help(help.clone());
    for name in ["pretrain", "train", "eval", "sweep"] {
        command = command.mut_subcommand(name, |sub| sub.after_help(help.clone()));
    }
    let matches = command.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, seed, out } => cmd_synth(config.as_deref(), seed, &out),
        Command::Pretrain { run, fold, out } => cmd_pretrain(&run.resolve()?, fold, out),
        Command::Train { run, fold } => cmd_train(&run.resolve()?, fold),
        Command::Eval { run, bundle, fold } => cmd_eval(&run.resolve()?, bundle.as_deref(), fold),
        Command::Sweep { run, param } => cmd_sweep(&run.resolve()?, param.parse()?),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a SyntheticConfig,
    articles: usize,
    vocabulary: usize,
    users: usize,
    domains: &'a [String; 2],
}

fn cmd_synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg: SyntheticConfig = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::Config(format!("synthetic config: {e}")))?,
        None => SyntheticConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let corpus = generate_synthetic(&cfg)?;
    let mut text = Vec::new();
    write_jsonl(&corpus, &mut text)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(out, &text)?;
    let manifest = Manifest {
        config: &cfg,
        articles: corpus.articles.len(),
        vocabulary: corpus.vocabulary.len(),
        users: corpus.user_count(),
        domains: &corpus.domain_names,
    };
    let manifest_path = manifest_path(out);
    write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    println!("{}", corpus.stats());
    println!("wrote {} and {}", out.display(), manifest_path.display());
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// The corpus and the requested fold's train and held-out index lists.
struct FoldData {
    corpus: Corpus,
    train: Vec<usize>,
    test: Vec<usize>,
    other: Vec<usize>,
}

fn load_fold(cfg: &RunConfig, fold: usize) -> Result<FoldData> {
    let corpus = cfg.corpus.load()?;
    if let CorpusSource::Jsonl { path, .. } = &cfg.corpus {
        info!("loaded {}\n{}", path.display(), corpus.stats());
    }
    let folds = protocol_folds(&corpus, cfg.mode, &cfg.split_for(cfg.mode))?;
    let f = folds
        .get(fold)
        .ok_or_else(|| Error::Config(format!("fold {fold} out of range ({} folds)", folds.len())))?;
    let (train, test, other) = (f.train.clone(), f.test.clone(), f.other_domain_test.clone());
    Ok(FoldData {
        corpus,
        train,
        test,
        other,
    })
}

fn pick<'c>(corpus: &'c Corpus, idx: &[usize]) -> Vec<&'c NewsArticle> {
    idx.iter().map(|&i| &corpus.articles[i]).collect()
}

fn cmd_pretrain(cfg: &RunConfig, fold: usize, out: Option<PathBuf>) -> Result<()> {
    let data = load_fold(cfg, fold)?;
    let spec = cfg.variant_spec()?;
    let pipeline = spec.apply(&cfg.pipeline());
    let seed = fold_seed(cfg.seed, fold);
    let stack = EncoderStack::new(&pipeline.encoder, data.corpus.vocabulary.len(), data.corpus.user_count(), seed)?;
    let (mut stack, report) =
        pretrain_encoders(&pick(&data.corpus, &data.train), stack, seed).map_err(|e| e.in_stage("encoder pretraining"))?;
    stack.freeze();
    fs::create_dir_all(&cfg.output_dir)?;
    let path = out.unwrap_or_else(|| cfg.output_dir.join("encoders.rfnd"));
    save_encoders(&stack, seed, &path)?;
    for (name, curve) in [
        ("content", &report.content_loss),
        ("comments", &report.comment_loss),
        ("fusion", &report.fusion_loss),
    ] {
        if let Some(last) = curve.last() {
            println!("{name} stage: {} epochs, final loss {last:.4}", curve.len());
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Held-out reports for one fold, in the same shape as the protocol reports.
fn fold_reports(cfg: &RunConfig, data: &FoldData, bundle: &ModelBundle, fold: usize) -> Result<Vec<MetricReport>> {
    let [source, target] = &data.corpus.domain_names;
    let name = bundle.variant.name();
    let (f1, auc) = score_bundle(bundle, &pick(&data.corpus, &data.test))?;
    let held_out = vec![FoldMetrics { fold, f1, auc }];
    let mut reports = Vec::new();
    match cfg.mode {
        SplitMode::SingleDomain => {
            reports.push(MetricReport::from_folds(format!("{source}→{source}"), name.clone(), held_out));
            if !data.other.is_empty() {
                let (f1, auc) = score_bundle(bundle, &pick(&data.corpus, &data.other))?;
                reports.push(MetricReport::from_folds(
                    format!("{source}→{target}"),
                    name,
                    vec![FoldMetrics { fold, f1, auc }],
                ));
            }
        }
        SplitMode::CrossDomain => reports.push(MetricReport::from_folds(format!("{source}→{target}"), name, held_out)),
    }
    Ok(reports)
}

fn cmd_train(cfg: &RunConfig, fold: usize) -> Result<()> {
    let data = load_fold(cfg, fold)?;
    let spec = cfg.variant_spec()?;
    let train = pick(&data.corpus, &data.train);
    info!("training {spec} on {} articles (fold {fold}, {})", train.len(), cfg.mode.as_str());
    let (bundle, log) = build_variant(
        spec,
        &train,
        data.corpus.vocabulary.len(),
        data.corpus.user_count(),
        &cfg.pipeline(),
        fold_seed(cfg.seed, fold),
    )?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    bundle.save(&dir.join("model.rfnd"))?;

    let mut episodes = csv::Writer::from_writer(Vec::new());
    for e in &log.episodes {
        episodes.serialize(e).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let episodes = episodes.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&dir.join("episodes.csv"), &episodes)?;
    write_atomic(&dir.join("training_log.json"), &serde_json::to_vec_pretty(&log)?)?;

    let reports = fold_reports(cfg, &data, &bundle, fold)?;
    write_atomic(&dir.join("holdout.csv"), &report_csv(&reports)?)?;
    for r in &reports {
        println!("{r}");
    }
    println!("wrote {}", dir.join("model.rfnd").display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, bundle: Option<&Path>, fold: usize) -> Result<()> {
    let reports = match bundle {
        Some(path) => {
            let bundle = ModelBundle::load(path)?;
            let data = load_fold(cfg, fold)?;
            bundle.check_compatible(data.corpus.vocabulary.len(), data.corpus.user_count())?;
            if bundle.variant.name() != cfg.variant {
                warn!("bundle variant {} differs from configured {}", bundle.variant, cfg.variant);
            }
            fold_reports(cfg, &data, &bundle, fold)?
        }
        None => {
            let corpus = cfg.corpus.load()?;
            run_protocol(
                &corpus,
                cfg.mode,
                cfg.variant_spec()?,
                &cfg.pipeline(),
                &cfg.split_for(cfg.mode),
                cfg.seed,
            )?
        }
    };
    write_report(&cfg.output_dir, &reports)?;
    for r in &reports {
        println!("{r}");
    }
    println!("wrote {}", cfg.output_dir.join("report.csv").display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, param: SweepParameter) -> Result<()> {
    let corpus = cfg.corpus.load()?;
    let grid = match param {
        SweepParameter::Alpha => &cfg.sweep.alpha,
        SweepParameter::Beta => &cfg.sweep.beta,
        SweepParameter::Gamma => &cfg.sweep.gamma,
    };
    let result = sweep(
        &corpus,
        param,
        grid,
        cfg.variant_spec()?,
        &cfg.pipeline(),
        &cfg.split_for(SplitMode::CrossDomain),
        cfg.seed,
    )?;
    write_sweep(&cfg.output_dir, &result)?;
    print!("{result}");
    println!(
        "wrote {}",
        cfg.output_dir.join(format!("sweep_{}.csv", param.as_str())).display()
    );
    Ok(())
}
