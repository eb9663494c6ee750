//! Command implementations behind the `olce` binary.
//!
//! Every command resolves a [`Settings`] value (defaults, then an optional
//! JSON config file, then explicit flags), prints it, writes it to the output
//! directory as `config.json`, and writes all results as files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    Classifier, CnnSvm, CnnSvmConfig, DecisionTree, Lda, Mlp, MlpConfig, PcaLda, SvmConfig, TreeConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, comparison_table, confusion, evaluate, EvalReport, RunTable};
use crate::nn::gradcheck::{grad_check_resampling, GradCheckReport, DEFAULT_STEP, DEFAULT_TOLERANCE};
use crate::nn::{DenseNet, DenseProbe};
use crate::olce::{self, OlceClassifier, OlceGeometry, OlceParams, OlceProbe, TrainConfig};
use crate::signalio::{self, load_manifest, save_dataset, stratified_split, write_json, Dataset, SplitView};
use crate::synthgen::{self, SynthConfig};

pub const DEFAULT_PRESET: &str = "desk";

/// Models available to `bench`, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Olce,
    Lda,
    Mlp,
    Dt,
    PcaLda,
    CnnSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Lda,
        ModelKind::Mlp,
        ModelKind::Dt,
        ModelKind::PcaLda,
        ModelKind::CnnSvm,
        ModelKind::Olce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Olce => "olce",
            ModelKind::Lda => "lda",
            ModelKind::Mlp => "mlp",
            ModelKind::Dt => "dt",
            ModelKind::PcaLda => "pca_lda",
            ModelKind::CnnSvm => "cnn_svm",
        }
    }

    /// A fresh, unfitted classifier for one run.
    pub fn build(self, s: &Settings, seed: u64) -> Box<dyn Classifier> {
        match self {
            ModelKind::Olce => Box::new(OlceClassifier::new(s.olce_config(seed))),
            ModelKind::Lda => Box::new(Lda::default()),
            ModelKind::Mlp => Box::new(Mlp::new(MlpConfig {
                epochs: s.mlp_epochs,
                seed,
                ..MlpConfig::default()
            })),
            ModelKind::Dt => Box::new(DecisionTree::new(TreeConfig::default())),
            ModelKind::PcaLda => Box::new(PcaLda::default()),
            ModelKind::CnnSvm => Box::new(CnnSvm::new(
                CnnSvmConfig {
                    encoder: TrainConfig {
                        epochs: s.cnn_epochs,
                        lr: s.lr,
                        lambda_recon: 0.0,
                        ..TrainConfig::default()
                    },
                    svm: SvmConfig::default(),
                }
                .with_seed(seed),
            )),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown model {s:?}; valid models: {}", valid.join(", ")))
            })
    }
}

/// Fully resolved settings shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub manifest: Option<PathBuf>,
    pub preset: Option<String>,
    pub models: Vec<ModelKind>,
    pub runs: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub epochs: usize,
    pub lr: f64,
    pub lambda_recon: f64,
    pub batch_size: usize,
    pub mlp_epochs: usize,
    pub cnn_epochs: usize,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            manifest: None,
            preset: None,
            models: ModelKind::ALL.to_vec(),
            runs: 10,
            seed: 0,
            test_fraction: 0.25,
            epochs: t.epochs,
            lr: t.lr,
            lambda_recon: t.lambda_recon,
            batch_size: t.batch_size,
            mlp_epochs: MlpConfig::default().epochs,
            cnn_epochs: CnnSvmConfig::default().encoder.epochs,
            out: PathBuf::from("out"),
            checkpoint: None,
        }
    }
}

/// Optional overrides, from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub preset: Option<String>,
    pub models: Option<Vec<ModelKind>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub lambda_recon: Option<f64>,
    pub batch_size: Option<usize>,
    pub mlp_epochs: Option<usize>,
    pub cnn_epochs: Option<usize>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn apply(self, s: &mut Settings) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        macro_rules! take_opt {
            ($($f:ident),*) => { $(if self.$f.is_some() { s.$f = self.$f; })* };
        }
        take!(models, runs, seed, test_fraction, epochs, lr, lambda_recon, batch_size, mlp_epochs, cnn_epochs, out);
        take_opt!(manifest, preset, checkpoint);
    }
}

impl Settings {
    /// Defaults, then `config` file values, then `flags`.
    pub fn resolve(config: Option<&Path>, flags: Overrides) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = config {
            Overrides::from_file(path)?.apply(&mut s);
        }
        flags.apply(&mut s);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.manifest.is_some() && self.preset.is_some() {
            return Err(Error::Config("give either a manifest or a preset, not both".into()));
        }
        self.olce_config(self.seed).validate()
    }

    pub fn olce_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            lambda_recon: self.lambda_recon,
            seed,
            tied_decoder: false,
        }
    }

    /// Loads the manifest or generates the preset (default `desk`), then
    /// normalizes every sample.
    pub fn load_data(&self) -> Result<Dataset> {
        let raw = match (&self.manifest, &self.preset) {
            (Some(m), _) => load_manifest(m)?,
            (None, p) => synthgen::generate(&SynthConfig::preset(p.as_deref().unwrap_or(DEFAULT_PRESET))?)?,
        };
        Ok(raw.normalized())
    }

    /// Prints the effective settings and writes them to `<out>/config.json`.
    pub fn echo(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let text = serde_json::to_string_pretty(self).expect("settings serialize");
        println!("effective config:\n{text}");
        write_json(&self.out.join("config.json"), self)
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("olce_checkpoint.json"))
    }
}

/// Process exit code for an error: 1 usage, 2 data, 3 numeric.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Test-split predictions of a fitted classifier, evaluated.
pub fn evaluate_split(model: &dyn Classifier, data: &Dataset) -> Result<EvalReport> {
    let test = data.test_indices()?;
    let truth: Vec<usize> = test.iter().map(|&i| data.samples[i].label).collect();
    let predicted: Vec<usize> = test
        .iter()
        .map(|&i| model.predict(&data.samples[i]))
        .collect::<Result<_>>()?;
    evaluate(&confusion(&truth, &predicted, data.num_classes)?)
}

pub fn cmd_generate(s: &Settings) -> Result<PathBuf> {
    let preset = s.preset.as_deref().unwrap_or(DEFAULT_PRESET);
    let cfg = SynthConfig::preset(preset)?;
    let ds = synthgen::generate(&cfg)?;
    let manifest = save_dataset(&ds, &s.out)?;
    println!(
        "generated preset {preset}: {} samples, K = {}, per-class counts {:?}",
        ds.len(),
        ds.num_classes,
        ds.class_counts()
    );
    println!("manifest: {}", manifest.display());
    Ok(manifest)
}

/// Trains OLCE on the split drawn with `seed`; writes the checkpoint and the
/// per-epoch loss log.
pub fn cmd_train(s: &Settings) -> Result<(OlceParams, olce::TrainLog)> {
    s.echo()?;
    let data = stratified_split(&s.load_data()?, s.test_fraction, s.seed)?;
    let (params, log) = olce::train(&data, &s.olce_config(s.seed))?;
    let ck = s.checkpoint_path();
    params.save(&ck)?;
    log.save_csv(&s.out.join("train_log.csv"))?;
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        println!(
            "epoch 1: ce {:.4} mse {:.4}; epoch {}: ce {:.4} mse {:.4}",
            first.ce, first.mse, last.epoch, last.ce, last.mse
        );
    }
    println!("checkpoint: {}", ck.display());
    Ok((params, log))
}

/// Evaluates a saved checkpoint on the test split drawn with `seed`.
pub fn cmd_eval(s: &Settings) -> Result<EvalReport> {
    s.echo()?;
    let params = OlceParams::load(&s.checkpoint_path())?;
    let data = stratified_split(&s.load_data()?, s.test_fraction, s.seed)?;
    let model = OlceClassifier {
        params: Some(params),
        ..OlceClassifier::default()
    };
    let report = evaluate_split(&model, &data)?;
    write_json(&s.out.join("eval_report.json"), &report)?;
    let table = aggregate(std::slice::from_ref(&report))?.to_text();
    fs::write(s.out.join("eval_report.txt"), &table).map_err(|e| Error::io(s.out.join("eval_report.txt"), e))?;
    print!("{table}");
    Ok(report)
}

/// Decoded responses for the test split of a saved checkpoint.
pub fn cmd_export_decoded(s: &Settings) -> Result<Vec<PathBuf>> {
    s.echo()?;
    let params = OlceParams::load(&s.checkpoint_path())?;
    let data = stratified_split(&s.load_data()?, s.test_fraction, s.seed)?;
    let dir = s.out.join("decoded");
    let written = olce::export_decoded(&params, &data, data.test_indices()?, &dir)?;
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub olce_seed: u64,
    pub olce: GradCheckReport,
    pub mlp_seed: u64,
    pub mlp: GradCheckReport,
}

impl GradCheckSummary {
    pub fn pass(&self) -> bool {
        self.olce.pass && self.mlp.pass
    }
}

/// Resampling margin for kink avoidance in gradient checks.
pub const KINK_MARGIN: f64 = 1e-4;

/// Finite-difference checks of every OLCE and MLP parameter on random
/// inputs drawn from `seed`. Fails with a numeric error if either exceeds
/// the tolerance.
pub fn gradcheck_models(seed: u64) -> GradCheckSummary {
    let (olce_seed, olce) = grad_check_resampling(
        |s| OlceProbe::random(OlceGeometry::default(), s, 1.0).expect("default geometry is valid"),
        seed,
        20,
        KINK_MARGIN,
        DEFAULT_STEP,
        DEFAULT_TOLERANCE,
    );
    let (mlp_seed, mlp) = grad_check_resampling(|s| random_mlp_probe(s), seed, 20, KINK_MARGIN, DEFAULT_STEP, DEFAULT_TOLERANCE);
    GradCheckSummary {
        olce_seed,
        olce,
        mlp_seed,
        mlp,
    }
}

/// The default MLP (1200 inputs, 7 classes) pinned to a random input.
pub fn random_mlp_probe(seed: u64) -> DenseProbe {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = OlceGeometry::default();
    let mut widths = vec![g.channels * g.length];
    widths.extend(crate::baselines::mlp::HIDDEN_WIDTHS);
    widths.push(g.classes);
    let net = DenseNet::new(&widths, &mut rng).expect("valid widths");
    let x = (0..widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut t = vec![0.0; g.classes];
    t[rng.gen_range(0..g.classes)] = 1.0;
    DenseProbe::new(net, x, t)
}

pub fn cmd_gradcheck(s: &Settings) -> Result<GradCheckSummary> {
    s.echo()?;
    let summary = gradcheck_models(s.seed);
    write_json(&s.out.join("gradcheck.json"), &summary)?;
    for (name, r) in [("olce", &summary.olce), ("mlp", &summary.mlp)] {
        println!(
            "{name}: {} coordinates, max relative error {:.3e} -> {}",
            r.checked,
            r.max_relative_error,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    if summary.pass() {
        Ok(summary)
    } else {
        Err(Error::Numeric(format!("gradient check failed at tolerance {DEFAULT_TOLERANCE}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub split_seed: u64,
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRuns {
    pub model: ModelKind,
    pub runs: Vec<RunRecord>,
    /// Aggregate over successful runs; absent if every run failed.
    pub table: Option<RunTable>,
}

impl ModelRuns {
    pub fn accuracies(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| r.report.as_ref().map(|e| e.accuracy)).collect()
    }
}

/// Every model on `runs` stratified splits (seed `seed + r` for run `r`).
/// Fit failures are recorded and the bench continues.
pub fn run_bench(s: &Settings, data: &Dataset, mut progress: impl FnMut(ModelKind, usize, &RunRecord)) -> Result<Vec<ModelRuns>> {
    let mut results: Vec<ModelRuns> = s
        .models
        .iter()
        .map(|&model| ModelRuns {
            model,
            runs: Vec::with_capacity(s.runs),
            table: None,
        })
        .collect();
    for r in 0..s.runs {
        let split_seed = s.seed + r as u64;
        let split = signalio::compute_stratified_split(data, s.test_fraction, split_seed)?;
        let data = data.clone().with_split(split)?;
        for entry in results.iter_mut() {
            let mut model = entry.model.build(s, split_seed);
            let outcome = model.fit(&data as &dyn SplitView).and_then(|_| evaluate_split(model.as_ref(), &data));
            let record = match outcome {
                Ok(report) => RunRecord {
                    run: r + 1,
                    split_seed,
                    report: Some(report),
                    error: None,
                },
                Err(e) => RunRecord {
                    run: r + 1,
                    split_seed,
                    report: None,
                    error: Some(e.to_string()),
                },
            };
            progress(entry.model, r, &record);
            entry.runs.push(record);
        }
    }
    for entry in results.iter_mut() {
        let ok: Vec<EvalReport> = entry.runs.iter().filter_map(|r| r.report.clone()).collect();
        entry.table = aggregate(&ok).ok();
    }
    Ok(results)
}

/// Runs the benchmark and writes `<model>.json`, `<model>.txt` and
/// `comparison.txt` under the output directory.
pub fn cmd_bench(s: &Settings) -> Result<Vec<ModelRuns>> {
    s.echo()?;
    let data = s.load_data()?;
    let results = run_bench(s, &data, |model, r, rec| match (&rec.report, &rec.error) {
        (Some(rep), _) => println!("run {:>2} {:<8} accuracy {:.4}", r + 1, model.name(), rep.accuracy),
        (None, Some(e)) => println!("run {:>2} {:<8} FAILED: {e}", r + 1, model.name()),
        _ => {}
    })?;
    write_bench_outputs(&s.out, &results)?;
    print!("{}", bench_comparison(&results));
    Ok(results)
}

pub fn bench_comparison(results: &[ModelRuns]) -> String {
    let rows: Vec<(String, Vec<Option<f64>>)> =
        results.iter().map(|m| (m.model.name().to_string(), m.accuracies())).collect();
    comparison_table(&rows)
}

pub fn write_bench_outputs(out: &Path, results: &[ModelRuns]) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for m in results {
        write_json(&out.join(format!("{}.json", m.model.name())), m)?;
        if let Some(t) = &m.table {
            let path = out.join(format!("{}.txt", m.model.name()));
            fs::write(&path, t.to_text()).map_err(|e| Error::io(&path, e))?;
        }
    }
    let path = out.join("comparison.txt");
    fs::write(&path, bench_comparison(results)).map_err(|e| Error::io(&path, e))
}
