//! Sample data model, CSV/manifest I/O, per-channel normalization and
//! stratified splitting.
//!
//! A sample file is a UTF-8 CSV with one header row of sensor names followed
//! by one row per time step; each column is one sensor channel. Internally a
//! [`ResponseSample`] stores its values channel-major (`data[ch * length + t]`),
//! which is the same layout as [`crate::nn::Tensor3`].

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of sensor channels (PEN-3 array).
pub const DEFAULT_CHANNELS: usize = 10;
/// Default number of time steps per recording (120 s at 1 s interval).
pub const DEFAULT_LENGTH: usize = 120;

/// Sensor column names in array order.
pub const SENSOR_NAMES: [&str; DEFAULT_CHANNELS] = [
    "W1C", "W5S", "W3C", "W6S", "W5C", "W1S", "W1W", "W2S", "W2W", "W3S",
];

/// Significant digits used when serializing sample values.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// One e-nose measurement: `channels` sensor traces of `length` points each.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    channels: usize,
    length: usize,
    data: Vec<f64>,
    pub label: usize,
    pub source_id: String,
}

impl ResponseSample {
    /// Builds a sample from channel-major data.
    pub fn new(
        channels: usize,
        length: usize,
        data: Vec<f64>,
        label: usize,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::dim("sample must have at least one channel and one time step"));
        }
        if data.len() != channels * length {
            return Err(Error::dim(format!(
                "expected {} values ({channels} channels x {length} points), found {}",
                channels * length,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "non-finite value at channel {}, time step {}",
                pos / length,
                pos % length
            )));
        }
        Ok(Self {
            channels,
            length,
            data,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Channel-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.length..(ch + 1) * self.length]
    }

    pub fn value(&self, ch: usize, t: usize) -> f64 {
        self.data[ch * self.length + t]
    }
}

/// Maps one channel trace through `(x - mean) / (max - min)`.
///
/// A constant trace has no range and maps to all zeros.
pub fn normalize_channel(trace: &[f64], out: &mut [f64]) {
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let (min, max) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    if range > 0.0 {
        for (o, &v) in out.iter_mut().zip(trace) {
            *o = (v - mean) / range;
        }
    } else {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Zero-center normalizes every channel of a sample independently.
pub fn zero_center_normalize(sample: &ResponseSample) -> ResponseSample {
    let mut data = vec![0.0; sample.data.len()];
    for ch in 0..sample.channels {
        let span = ch * sample.length..(ch + 1) * sample.length;
        normalize_channel(&sample.data[span.clone()], &mut data[span]);
    }
    ResponseSample {
        data,
        ..sample.clone()
    }
}

/// Class-probability vector over `K` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector(Vec<f64>);

impl LabelVector {
    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::LabelRange {
                label: class,
                num_classes,
            });
        }
        let mut probs = vec![0.0; num_classes];
        probs[class] = 1.0;
        Ok(Self(probs))
    }

    /// Wraps a soft distribution; entries must lie in `[0, 1]` and sum to 1
    /// within `1e-9`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::dim("label vector must be non-empty"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidSample("probability outside [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSample(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_probs_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one_hot(&self) -> bool {
        self.0.iter().filter(|&&p| p == 1.0).count() == 1
            && self.0.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Index of the largest entry; the first one wins on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Disjoint train/test index sets over a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Ordered sample collection with optional split bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ResponseSample>,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(samples: Vec<ResponseSample>, num_classes: usize, class_names: Vec<String>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        if !class_names.is_empty() && class_names.len() != num_classes {
            return Err(Error::Config(format!(
                "{} class names given for {num_classes} classes",
                class_names.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.label >= num_classes) {
            return Err(Error::LabelRange {
                label: s.label,
                num_classes,
            });
        }
        if let Some(first) = samples.first() {
            let dims = (first.channels, first.length);
            if let Some(s) = samples.iter().find(|s| (s.channels, s.length) != dims) {
                return Err(Error::dim(format!(
                    "sample {} is {}x{}, expected {}x{}",
                    s.source_id, s.channels, s.length, dims.0, dims.1
                )));
            }
        }
        let class_names = if class_names.is_empty() {
            (0..num_classes).map(|k| format!("class{k}")).collect()
        } else {
            class_names
        };
        Ok(Self {
            samples,
            num_classes,
            class_names,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(channels, length)` of the samples, or the defaults when empty.
    pub fn sample_dims(&self) -> (usize, usize) {
        self.samples
            .first()
            .map(|s| (s.channels, s.length))
            .unwrap_or((DEFAULT_CHANNELS, DEFAULT_LENGTH))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Copy of the dataset with every sample zero-center normalized.
    pub fn normalized(&self) -> Dataset {
        Dataset {
            samples: self.samples.iter().map(zero_center_normalize).collect(),
            ..self.clone()
        }
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        let n = self.samples.len();
        let mut seen = vec![false; n];
        for &i in split.train.iter().chain(&split.test) {
            if i >= n || seen[i] {
                return Err(Error::Config(format!("split index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("split does not cover every sample".into()));
        }
        self.split = Some(split);
        Ok(self)
    }

    pub fn test_indices(&self) -> Result<&[usize]> {
        self.split
            .as_ref()
            .map(|s| s.test.as_slice())
            .ok_or_else(|| Error::Config("dataset has no split".into()))
    }
}

/// Computes a per-class stratified split.
///
/// Each class contributes `round(class_size * test_fraction)` test samples
/// (capped so at least one training sample remains). Indices come back
/// sorted; the choice within a class is a seeded shuffle.
pub fn compute_stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    if let Some((k, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 2) {
        return Err(Error::Stratification(format!(
            "class {k} has {} samples, at least 2 are required",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in by_class {
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).min(members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Returns a copy of `ds` carrying a fresh stratified split.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<Dataset> {
    let split = compute_stratified_split(ds, test_fraction, seed)?;
    Ok(Dataset {
        split: Some(split),
        ..ds.clone()
    })
}

/// Read access to the training portion of a split dataset.
///
/// Trainers and classifiers consume data only through this trait, so a
/// wrapper can observe exactly which samples a fit touched.
pub trait SplitView {
    fn num_classes(&self) -> usize;
    fn train_indices(&self) -> Result<Vec<usize>>;
    fn sample(&self, index: usize) -> &ResponseSample;
}

impl SplitView for Dataset {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn train_indices(&self) -> Result<Vec<usize>> {
        self.split
            .as_ref()
            .map(|s| s.train.clone())
            .ok_or_else(|| Error::Config("dataset has no split".into()))
    }

    fn sample(&self, index: usize) -> &ResponseSample {
        &self.samples[index]
    }
}

fn sensor_header(channels: usize) -> Vec<String> {
    if channels == DEFAULT_CHANNELS {
        SENSOR_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..channels).map(|c| format!("S{c}")).collect()
    }
}

pub(crate) fn format_value(v: f64) -> String {
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
}

/// Writes a sample as a time-major CSV with a sensor-name header.
pub fn save_sample(sample: &ResponseSample, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(sensor_header(sample.channels)).map_err(csv_err)?;
    let mut row = Vec::with_capacity(sample.channels);
    for t in 0..sample.length {
        row.clear();
        row.extend((0..sample.channels).map(|ch| format_value(sample.value(ch, t))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a default-geometry (10 x 120) sample file.
pub fn load_sample(path: &Path, label: usize) -> Result<ResponseSample> {
    load_sample_with(path, label, DEFAULT_CHANNELS, DEFAULT_LENGTH)
}

/// Loads a sample file with `length` data rows of `channels` columns.
pub fn load_sample_with(path: &Path, label: usize, channels: usize, length: usize) -> Result<ResponseSample> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header_len = reader.headers().map_err(csv_err)?.len();
    if header_len != channels {
        return Err(Error::dim(format!(
            "{}: expected {channels} columns, found {header_len}",
            path.display()
        )));
    }
    let mut data = vec![0.0; channels * length];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != channels {
            return Err(Error::dim(format!(
                "{}: expected {channels} columns, found {} in row {}",
                path.display(),
                record.len(),
                rows + 1
            )));
        }
        if rows < length {
            for (ch, cell) in record.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    row: rows + 1,
                    col: ch + 1,
                    msg: format!("{}: cannot parse {cell:?} as a number", path.display()),
                })?;
                data[ch * length + rows] = v;
            }
        }
        rows += 1;
    }
    if rows != length {
        return Err(Error::dim(format!("expected {length} rows, found {rows}")));
    }
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ResponseSample::new(channels, length, data, label, source_id)
}

/// On-disk dataset index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_classes: usize,
    pub class_names: Vec<String>,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_length")]
    pub length: usize,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: usize,
}

fn default_channels() -> usize {
    DEFAULT_CHANNELS
}

fn default_length() -> usize {
    DEFAULT_LENGTH
}

/// Loads a manifest and every sample it lists. Relative sample paths are
/// resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let samples = manifest
        .samples
        .iter()
        .map(|entry| {
            if entry.label >= manifest.num_classes {
                return Err(Error::LabelRange {
                    label: entry.label,
                    num_classes: manifest.num_classes,
                });
            }
            let p = PathBuf::from(&entry.path);
            let p = if p.is_absolute() { p } else { base.join(p) };
            load_sample_with(&p, entry.label, manifest.channels, manifest.length)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, manifest.num_classes, manifest.class_names)
}

/// Writes every sample as `<source_id>.csv` under `out_dir` plus a
/// `manifest.json` listing them. Returns the manifest path.
pub fn save_dataset(ds: &Dataset, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (channels, length) = ds.sample_dims();
    let mut entries = Vec::with_capacity(ds.len());
    for s in &ds.samples {
        let name = format!("{}.csv", s.source_id);
        save_sample(s, &out_dir.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            label: s.label,
        });
    }
    let manifest = Manifest {
        num_classes: ds.num_classes,
        class_names: ds.class_names.clone(),
        channels,
        length,
        samples: entries,
    };
    let path = out_dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
