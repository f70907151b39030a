//! The `mamaf` command line: synthetic data, cross-validation, evaluation
//! of saved checkpoints, and gradient checks.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data or I/O,
//! 3 numerical failure (divergence, failed gradient check).

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mamaf_core::autodiff::{run_gradcheck, GradcheckScope, SuiteOptions};
use mamaf_core::data::{generate_synthetic_cohort, FoldPlan, Manifest, SynthConfig};
use mamaf_core::eval::{metrics_json, roc_auc, ConfusionMatrix, MetricsReport};
use mamaf_core::model::load_checkpoint;
use mamaf_core::training::{evaluate, load_cohort, run_cross_validation, EpochEvent, FOLDS_FILE};

pub use config::{Overrides, Profile, RunConfig};

/// File the effective configuration is echoed to inside a run directory.
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "mamaf", version, about = "Motion-aware multi-view video classifier")]
pub struct Cli {
    /// Worker threads for intra-op parallelism. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic four-view cohort.
    Synth(SynthArgs),
    /// Stratified k-fold training and evaluation.
    Cv(CvArgs),
    /// Evaluate a saved checkpoint on one fold's test split.
    Eval(EvalArgs),
    /// Compare analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub pos: usize,
    #[arg(long, default_value_t = 20)]
    pub neg: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 32)]
    pub hw: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base profile when no config file is given.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    /// Dataset directory (manifest.jsonl and views).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory for reports and checkpoints.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    /// No per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Fold whose test subjects are evaluated.
    #[arg(long)]
    pub split: usize,
    /// Fold plan; defaults to the run directory's folds.json.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Write metrics.json and predictions.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    /// The attention layer.
    #[value(alias = "attention")]
    Layer,
    /// One motion-aware module.
    Motion,
    /// The full reduced model.
    Model,
}

impl From<ScopeArg> for GradcheckScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Layer => GradcheckScope::Attention,
            ScopeArg::Motion => GradcheckScope::Motion,
            ScopeArg::Model => GradcheckScope::Model,
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub scope: ScopeArg,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Coordinates to sample.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Negate the analytic gradient of this parameter (test hook).
    #[arg(long, hide = true)]
    pub inject_wrong_sign: Option<String>,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A usage problem the argument parser cannot see.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A gradient check that ran but did not pass.
#[derive(Debug)]
pub struct GradcheckFailed(pub String);

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "gradient check failed: {}", self.0)
    }
}

impl std::error::Error for GradcheckFailed {}

/// Process exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<GradcheckFailed>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<mamaf_core::Error>() {
            return if e.is_config() {
                1
            } else if e.is_numerical() {
                3
            } else {
                2
            };
        }
    }
    2
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, &mut stdout),
        Command::Cv(a) => cmd_cv(&a, &mut stdout).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a, &mut stdout).map(|_| ()),
        Command::Gradcheck(a) => cmd_gradcheck(&a, &mut stdout),
    }
}

fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        bail!(UsageError("--threads must be at least 1".into()));
    }
    // A second initialisation (tests calling run twice) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        n_pos: a.pos,
        n_neg: a.neg,
        frames: a.frames,
        hw: a.hw,
        seed: a.seed,
    };
    let manifest = generate_synthetic_cohort(&a.out, &cfg)?;
    writeln!(
        out,
        "wrote {} subjects ({} positive, {} negative) to {}",
        manifest.samples.len(),
        a.pos,
        a.neg,
        a.out.display()
    )?;
    Ok(())
}

/// Builds the effective configuration: profile or file, then flags, with
/// paths made absolute.
pub fn effective_config(a: &CvArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::profile(a.profile),
    };
    a.overrides.apply(&mut cfg);
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    let Some(data) = &cfg.data else {
        bail!(UsageError("no dataset: pass --data or set \"data\" in the config".into()));
    };
    let Some(run_dir) = &cfg.out else {
        bail!(UsageError("no run directory: pass --out or set \"out\" in the config".into()));
    };
    cfg.data = Some(config::absolute(data)?);
    cfg.out = Some(config::absolute(run_dir)?);
    if let Some(c) = &cfg.train.checkpoint_dir {
        cfg.train.checkpoint_dir = Some(config::absolute(c)?);
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    Ok(cfg)
}

pub fn cmd_cv(a: &CvArgs, out: &mut dyn Write) -> Result<MetricsReport> {
    let cfg = effective_config(a)?;
    let data = cfg.data.clone().expect("resolved");
    let run_dir = cfg.out.clone().expect("resolved");
    fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    fs::write(run_dir.join(CONFIG_FILE), cfg.to_json())
        .with_context(|| format!("writing {}", run_dir.join(CONFIG_FILE).display()))?;

    let manifest = Manifest::load(&data)?;
    let quiet = a.quiet;
    let mut progress = |e: &EpochEvent| {
        if !quiet {
            eprintln!(
                "fold {} epoch {}/{}: train {:.4} val {:.4}{} ({:.1}s)",
                e.fold.unwrap_or(0),
                e.epoch,
                e.epochs,
                e.train_loss,
                e.val_loss,
                if e.improved { " *" } else { "" },
                e.seconds
            );
        }
    };
    let result = run_cross_validation(&data, &manifest, &cfg.model, &cfg.train, Some(&run_dir), &mut progress)?;
    for (f, auc) in result.folds.iter().zip(result.fold_aucs()) {
        let c = f.confusion;
        writeln!(
            out,
            "fold {}: tp {} fn {} fp {} tn {}, auc {}",
            f.index,
            c.tp,
            c.fn_,
            c.fp,
            c.tn,
            auc.map_or("undefined".to_string(), |a| format!("{a:.4}"))
        )?;
    }
    write!(out, "{}", metrics_json(&result.report))?;
    writeln!(out, "reports written to {}", run_dir.display())?;
    Ok(result.report)
}

fn default_folds_path(checkpoint: &Path) -> Result<PathBuf> {
    let parent = checkpoint.parent().unwrap_or(Path::new("."));
    let candidates = [parent.join("..").join(FOLDS_FILE), parent.join(FOLDS_FILE)];
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| UsageError(format!("no {FOLDS_FILE} next to {}; pass --folds", checkpoint.display())).into())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<MetricsReport> {
    let weights = load_checkpoint(&a.checkpoint, None)?;
    let folds_path = match &a.folds {
        Some(p) => p.clone(),
        None => default_folds_path(&a.checkpoint)?,
    };
    let text = fs::read_to_string(&folds_path).with_context(|| format!("reading {}", folds_path.display()))?;
    let plan: FoldPlan = serde_json::from_str(&text)
        .map_err(|e| mamaf_core::Error::Data(format!("{}: {e}", folds_path.display())))?;
    let manifest = Manifest::load(&a.data)?;
    plan.verify(&manifest)?;
    let Some(fold) = plan.folds.iter().find(|f| f.index == a.split) else {
        bail!(UsageError(format!(
            "unknown split {}: the plan has folds 0..{}",
            a.split,
            plan.folds.len()
        )));
    };

    let subset = Manifest {
        info: manifest.info.clone(),
        samples: manifest
            .samples
            .iter()
            .filter(|s| fold.test.contains(&s.subject_id))
            .cloned()
            .collect(),
    };
    let cohort = load_cohort(&a.data, &subset, &weights.config)?;
    let test: Vec<_> = fold.test.iter().map(|id| cohort[id].clone()).collect();
    let predictions = evaluate(&weights, &test)?;
    let confusion = ConfusionMatrix::from_predictions(&predictions);
    let report = MetricsReport::new(confusion, roc_auc(&predictions).ok().map(|r| r.auc));
    let json = metrics_json(&report);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("metrics.json"), &json)?;
        let mut preds = serde_json::to_string_pretty(&predictions)?;
        preds.push('\n');
        fs::write(dir.join("predictions.json"), preds)?;
    }
    write!(out, "{json}")?;
    Ok(report)
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let scope: GradcheckScope = a.scope.into();
    let opts = SuiteOptions {
        seed: a.seed,
        samples: a.samples,
        wrong_sign: a.inject_wrong_sign.clone(),
    };
    let report = run_gradcheck(scope, &opts)?;
    for c in &report.checks {
        let mark = if c.rel_err > report.tolerance { "FAIL" } else { "ok" };
        writeln!(
            out,
            "{mark:4} {}[{}] analytic {:+.6e} numeric {:+.6e} rel {:.2e}",
            c.param, c.index, c.analytic, c.numeric, c.rel_err
        )?;
    }
    if !report.skipped.is_empty() {
        writeln!(
            out,
            "skipped {} coordinates with a kink within the difference step",
            report.skipped.len()
        )?;
    }
    writeln!(
        out,
        "{} scope: max relative error {:.3e} (tolerance {:.0e}): {}",
        a.scope.to_possible_value().expect("not skipped").get_name(),
        report.max_rel_err,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    )?;
    if let Some(path) = &a.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    if !report.pass {
        let mut names: Vec<&str> = report.failing().map(|c| c.param.as_str()).collect();
        names.dedup();
        bail!(GradcheckFailed(format!("mismatched gradients in {}", names.join(", "))));
    }
    Ok(())
}
