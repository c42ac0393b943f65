//! Experiment configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Every key is optional; see
//! [`ExperimentConfig::default`] for the values used when one is absent.
//!
//! ```text
//! [dataset]
//! kind = synth
//!
//! [federation]
//! strategy = sfedca
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sfedca_core::fed::{Aggregation, FederationConfig};
use sfedca_core::metrics::EnergyModel;
use sfedca_core::selection::{SelectionConfig, Strategy};
use sfedca_core::snn::{LayerSpec, NetworkConfig, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key {key:?} in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: {key}: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Constraint(String),
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "dataset",
        &[
            "kind", "classes", "train_per_class", "test_per_class", "dim", "separation",
            "train_images", "train_labels", "test_images", "test_labels", "max_train",
            "max_test", "train_csv", "test_csv",
        ],
    ),
    ("partition", &["kind", "alpha", "shards_per_client", "n1", "n2"]),
    ("model", &["hidden", "layers"]),
    ("neuron", &["timesteps", "threshold", "reset", "surrogate_alpha"]),
    (
        "federation",
        &["strategy", "clients", "candidates", "selected", "rounds", "aggregation", "seed", "threads"],
    ),
    ("training", &["epochs", "learning_rate", "batch_size", "backward_cost"]),
    ("evaluation", &["noise_rate", "targets"]),
];

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian blobs; train and test come from the same centres.
    Synth { classes: usize, train_per_class: usize, test_per_class: usize, dim: usize, separation: f64 },
    /// IDX image/label pairs. `max_*` keep only the first samples.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        max_train: Option<usize>,
        max_test: Option<usize>,
    },
    /// CSV files as written by `sfedca export`.
    Csv { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionSpec {
    Dirichlet { alpha: f64 },
    DirichletFull { alpha: f64 },
    Shards { per_client: usize },
    ClassImbalanced { n1: usize, n2: usize, alpha: f64 },
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub partition: PartitionSpec,
    /// Explicit architecture. When absent an MLP `input-hidden..-classes`
    /// is built once the data shape is known.
    pub layers: Option<Vec<LayerSpec>>,
    pub hidden: Vec<usize>,
    pub timesteps: usize,
    pub threshold: f64,
    pub reset: f64,
    pub surrogate_alpha: f64,
    pub strategy: Strategy,
    pub clients: usize,
    pub candidates: usize,
    pub selected: usize,
    pub rounds: usize,
    pub aggregation: Aggregation,
    pub seed: u64,
    /// Worker threads for client work; 0 uses every core, 1 runs serially.
    pub threads: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub backward_cost: f64,
    pub noise_rate: f64,
    pub targets: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Synth {
                classes: 10,
                train_per_class: 600,
                test_per_class: 100,
                dim: 20,
                separation: 3.0,
            },
            partition: PartitionSpec::Dirichlet { alpha: 0.3 },
            layers: None,
            hidden: vec![100],
            timesteps: NetworkConfig::DEFAULT_TIMESTEPS,
            threshold: NetworkConfig::DEFAULT_THRESHOLD,
            reset: NetworkConfig::DEFAULT_RESET,
            surrogate_alpha: NetworkConfig::DEFAULT_ALPHA,
            strategy: Strategy::SFedCa,
            clients: 100,
            candidates: 10,
            selected: 2,
            rounds: 300,
            aggregation: Aggregation::Weighted,
            seed: 0,
            threads: 0,
            epochs: 5,
            learning_rate: 0.1,
            batch_size: 128,
            backward_cost: EnergyModel::default().backward_multiplier,
            noise_rate: 0.0,
            targets: Vec::new(),
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: HashMap<(String, String), Entry>,
    base: PathBuf,
}

impl Raw {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn get<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.opt(section, key)?.unwrap_or(default))
    }

    fn opt<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        self.take(section, key)
            .map(|e| {
                e.value.parse().map_err(|_| ConfigError::Value {
                    line: e.line,
                    key: key.into(),
                    msg: format!("cannot parse {:?} as {}", e.value, short_type::<T>()),
                })
            })
            .transpose()
    }

    fn path(&mut self, section: &str, key: &str) -> Result<PathBuf, ConfigError> {
        match self.take(section, key) {
            Some(e) => Ok(self.base.join(e.value)),
            None => Err(ConfigError::Constraint(format!("[{section}] {key} is required"))),
        }
    }
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    name.rsplit("::").next().unwrap_or(name)
}

fn value_err(line: usize, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { line, key: key.into(), msg: msg.into() }
}

fn parse_list<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<Vec<T>, ConfigError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| value_err(e.line, key, format!("bad list item {s:?}"))))
        .collect()
}

/// Parses `dense:784-100-10` or `conv:IC-OC-K-H-W[-POOL]` items joined by `;`.
pub fn parse_layers(text: &str) -> Result<Vec<LayerSpec>, String> {
    let mut layers = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (kind, dims) = item.split_once(':').ok_or_else(|| format!("layer {item:?} has no kind"))?;
        let dims: Vec<usize> = dims
            .split('-')
            .map(|d| d.trim().parse().map_err(|_| format!("bad size {d:?} in {item:?}")))
            .collect::<Result<_, _>>()?;
        match kind.trim() {
            "dense" => {
                if dims.len() < 2 {
                    return Err(format!("{item:?}: dense needs at least two widths"));
                }
                layers.extend(dims.windows(2).map(|w| LayerSpec::Dense { inputs: w[0], outputs: w[1] }));
            }
            "conv" => match dims[..] {
                [ic, oc, k, h, w] | [ic, oc, k, h, w, _] => layers.push(LayerSpec::Conv {
                    in_channels: ic,
                    out_channels: oc,
                    kernel: k,
                    height: h,
                    width: w,
                    pool: dims.get(5).copied().unwrap_or(1),
                }),
                _ => return Err(format!("{item:?}: conv takes in-out-kernel-height-width[-pool]")),
            },
            other => return Err(format!("unknown layer kind {other:?}")),
        }
    }
    if layers.is_empty() {
        return Err("no layers given".into());
    }
    Ok(layers)
}

fn format_layers(layers: &[LayerSpec]) -> String {
    layers
        .iter()
        .map(|l| match *l {
            LayerSpec::Dense { inputs, outputs } => format!("dense:{inputs}-{outputs}"),
            LayerSpec::Conv { in_channels, out_channels, kernel, height, width, pool } => {
                format!("conv:{in_channels}-{out_channels}-{kernel}-{height}-{width}-{pool}")
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn tokenize(text: &str, base: PathBuf) -> Result<Raw, ConfigError> {
    let mut entries = HashMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("unterminated section {content:?}") })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Syntax { line, msg: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected key = value, got {content:?}") })?;
        let key = key.trim();
        let sec = section
            .clone()
            .ok_or_else(|| ConfigError::Syntax { line, msg: format!("key {key:?} before any [section]") })?;
        let known = KEYS.iter().find(|(s, _)| *s == sec).map_or(&[][..], |(_, k)| k);
        if !known.contains(&key) {
            return Err(ConfigError::UnknownKey { line, section: sec, key: key.into() });
        }
        let prev = entries.insert((sec.clone(), key.to_string()), Entry { line, value: value.trim().into() });
        if let Some(prev) = prev {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("duplicate key {key:?} (first set on line {})", prev.line),
            });
        }
    }
    Ok(Raw { entries, base })
}

fn from_raw(mut raw: Raw) -> Result<ExperimentConfig, ConfigError> {
    let d = ExperimentConfig::default();
    let kind = raw.take("dataset", "kind");
    let dataset = match kind.as_ref().map_or("synth", |e| e.value.as_str()) {
        "synth" => DatasetSpec::Synth {
            classes: raw.get("dataset", "classes", 10)?,
            train_per_class: raw.get("dataset", "train_per_class", 600)?,
            test_per_class: raw.get("dataset", "test_per_class", 100)?,
            dim: raw.get("dataset", "dim", 20)?,
            separation: raw.get("dataset", "separation", 3.0)?,
        },
        "idx" => DatasetSpec::Idx {
            train_images: raw.path("dataset", "train_images")?,
            train_labels: raw.path("dataset", "train_labels")?,
            test_images: raw.path("dataset", "test_images")?,
            test_labels: raw.path("dataset", "test_labels")?,
            max_train: raw.opt("dataset", "max_train")?,
            max_test: raw.opt("dataset", "max_test")?,
        },
        "csv" => DatasetSpec::Csv { train: raw.path("dataset", "train_csv")?, test: raw.path("dataset", "test_csv")? },
        other => {
            let line = kind.as_ref().map_or(0, |e| e.line);
            return Err(value_err(line, "kind", format!("unknown dataset kind {other:?} (synth, idx, csv)")));
        }
    };

    let kind = raw.take("partition", "kind");
    let alpha = raw.get("partition", "alpha", 0.3)?;
    let partition = match kind.as_ref().map_or("dir", |e| e.value.as_str()) {
        "dir" => PartitionSpec::Dirichlet { alpha },
        "dir_full" => PartitionSpec::DirichletFull { alpha },
        "shards" => PartitionSpec::Shards { per_client: raw.get("partition", "shards_per_client", 2)? },
        "ci" => {
            let n1 = raw.opt("partition", "n1")?;
            let n2 = raw.opt("partition", "n2")?;
            match (n1, n2) {
                (Some(n1), Some(n2)) => PartitionSpec::ClassImbalanced { n1, n2, alpha },
                _ => return Err(ConfigError::Constraint("partition kind ci needs n1 and n2".into())),
            }
        }
        other => {
            let line = kind.as_ref().map_or(0, |e| e.line);
            return Err(value_err(line, "kind", format!("unknown partition {other:?} (dir, dir_full, shards, ci)")));
        }
    };

    let hidden = match raw.take("model", "hidden") {
        Some(e) => parse_list(&e, "hidden")?,
        None => d.hidden.clone(),
    };
    let layers = match raw.take("model", "layers") {
        Some(e) => Some(parse_layers(&e.value).map_err(|m| value_err(e.line, "layers", m))?),
        None => None,
    };

    let strategy = match raw.take("federation", "strategy") {
        None => d.strategy,
        Some(e) => match e.value.as_str() {
            "sfedca" => Strategy::SFedCa,
            "random" => Strategy::Random,
            "full" => Strategy::Full,
            other => return Err(value_err(e.line, "strategy", format!("unknown strategy {other:?} (sfedca, random, full)"))),
        },
    };
    let aggregation = match raw.take("federation", "aggregation") {
        None => d.aggregation,
        Some(e) => match e.value.as_str() {
            "weighted" => Aggregation::Weighted,
            "uniform" => Aggregation::Uniform,
            other => return Err(value_err(e.line, "aggregation", format!("unknown aggregation {other:?} (weighted, uniform)"))),
        },
    };
    let targets = match raw.take("evaluation", "targets") {
        Some(e) => parse_list(&e, "targets")?,
        None => d.targets.clone(),
    };

    let cfg = ExperimentConfig {
        dataset,
        partition,
        layers,
        hidden,
        timesteps: raw.get("neuron", "timesteps", d.timesteps)?,
        threshold: raw.get("neuron", "threshold", d.threshold)?,
        reset: raw.get("neuron", "reset", d.reset)?,
        surrogate_alpha: raw.get("neuron", "surrogate_alpha", d.surrogate_alpha)?,
        strategy,
        clients: raw.get("federation", "clients", d.clients)?,
        candidates: raw.get("federation", "candidates", d.candidates)?,
        selected: raw.get("federation", "selected", d.selected)?,
        rounds: raw.get("federation", "rounds", d.rounds)?,
        aggregation,
        seed: raw.get("federation", "seed", d.seed)?,
        threads: raw.get("federation", "threads", d.threads)?,
        epochs: raw.get("training", "epochs", d.epochs)?,
        learning_rate: raw.get("training", "learning_rate", d.learning_rate)?,
        batch_size: raw.get("training", "batch_size", d.batch_size)?,
        backward_cost: raw.get("training", "backward_cost", d.backward_cost)?,
        noise_rate: raw.get("evaluation", "noise_rate", d.noise_rate)?,
        targets,
    };
    // every remaining key is known but irrelevant to the chosen kinds
    if let Some(((section, key), e)) = raw.entries.iter().min_by_key(|(_, e)| e.line) {
        return Err(value_err(e.line, key, format!("not used by the selected [{section}] kind")));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses config text. Relative dataset paths resolve against `base`.
pub fn parse_str(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    from_raw(tokenize(text, base.to_path_buf())?)
}

/// Reads and parses a config file; relative paths resolve against its
/// directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_str(&text, path.parent().unwrap_or(Path::new(".")))
}

impl ExperimentConfig {
    /// Input length implied by the dataset spec, if it is known without
    /// reading data.
    fn declared_input(&self) -> Option<(usize, usize)> {
        match self.dataset {
            DatasetSpec::Synth { classes, dim, .. } => Some((dim, classes)),
            _ => None,
        }
    }

    /// Checks every constraint that can be checked before loading data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = |e: sfedca_core::Error| ConfigError::Constraint(e.to_string());
        if let DatasetSpec::Synth { classes, train_per_class, test_per_class, dim, separation } = self.dataset {
            if classes < 2 || train_per_class == 0 || test_per_class == 0 || dim == 0 {
                return Err(ConfigError::Constraint(
                    "synthetic data needs classes >= 2 and positive sizes".into(),
                ));
            }
            if !(separation >= 0.0 && separation.is_finite()) {
                return Err(ConfigError::Constraint("separation must be finite and non-negative".into()));
            }
        }
        match self.partition {
            PartitionSpec::Dirichlet { alpha }
            | PartitionSpec::DirichletFull { alpha }
            | PartitionSpec::ClassImbalanced { alpha, .. }
                if !(alpha > 0.0 && alpha.is_finite()) =>
            {
                return Err(ConfigError::Constraint(format!("alpha must be positive, got {alpha}")));
            }
            PartitionSpec::Shards { per_client: 0 } => {
                return Err(ConfigError::Constraint("shards_per_client must be positive".into()));
            }
            _ => {}
        }
        for t in &self.targets {
            if !(0.0..=1.0).contains(t) {
                return Err(ConfigError::Constraint(format!("target accuracy {t} outside [0, 1]")));
            }
        }
        let (input, classes) = match (self.declared_input(), &self.layers) {
            (Some(ic), _) => ic,
            (None, Some(layers)) => (layers[0].input_len(), layers[layers.len() - 1].output_len()),
            // data shape unknown until load; check everything else
            (None, None) => (1, 2),
        };
        self.federation(input, classes).map_err(c)?.validate().map_err(c)?;
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: 0,
        }
        .validate()
        .map_err(c)?;
        Ok(())
    }

    /// Network for data with `input` features and `classes` categories.
    pub fn network(&self, input: usize, classes: usize) -> sfedca_core::Result<NetworkConfig> {
        let mut net = match &self.layers {
            Some(layers) => NetworkConfig::new(layers.clone())?,
            None => {
                let widths: Vec<usize> =
                    std::iter::once(input).chain(self.hidden.iter().copied()).chain([classes]).collect();
                NetworkConfig::mlp(&widths)?
            }
        };
        net.timesteps = self.timesteps;
        net.threshold = self.threshold;
        net.reset = self.reset;
        net.surrogate_alpha = self.surrogate_alpha;
        net.validate()?;
        if net.input_len() != input || net.classes() != classes {
            return Err(sfedca_core::Error::InvalidConfig(format!(
                "model maps {} inputs to {} classes but the data has {input} features and {classes} classes",
                net.input_len(),
                net.classes()
            )));
        }
        Ok(net)
    }

    /// Core federation config for data with the given shape.
    pub fn federation(&self, input: usize, classes: usize) -> sfedca_core::Result<FederationConfig> {
        Ok(FederationConfig {
            network: self.network(input, classes)?,
            selection: SelectionConfig {
                strategy: self.strategy,
                n_clients: self.clients,
                candidates: self.candidates,
                selected: self.selected,
            },
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            rounds: self.rounds,
            aggregation: self.aggregation,
            noise_rate: self.noise_rate,
            energy: EnergyModel { backward_multiplier: self.backward_cost },
            seed: self.seed,
        })
    }
}

fn list<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes the resolved config in the input format, so the output parses
/// back to the same value.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[dataset]")?;
        match &self.dataset {
            DatasetSpec::Synth { classes, train_per_class, test_per_class, dim, separation } => {
                writeln!(f, "kind = synth\nclasses = {classes}\ntrain_per_class = {train_per_class}")?;
                writeln!(f, "test_per_class = {test_per_class}\ndim = {dim}\nseparation = {separation}")?;
            }
            DatasetSpec::Idx { train_images, train_labels, test_images, test_labels, max_train, max_test } => {
                writeln!(f, "kind = idx")?;
                writeln!(f, "train_images = {}\ntrain_labels = {}", train_images.display(), train_labels.display())?;
                writeln!(f, "test_images = {}\ntest_labels = {}", test_images.display(), test_labels.display())?;
                if let Some(n) = max_train {
                    writeln!(f, "max_train = {n}")?;
                }
                if let Some(n) = max_test {
                    writeln!(f, "max_test = {n}")?;
                }
            }
            DatasetSpec::Csv { train, test } => {
                writeln!(f, "kind = csv\ntrain_csv = {}\ntest_csv = {}", train.display(), test.display())?;
            }
        }
        writeln!(f, "\n[partition]")?;
        match self.partition {
            PartitionSpec::Dirichlet { alpha } => writeln!(f, "kind = dir\nalpha = {alpha}")?,
            PartitionSpec::DirichletFull { alpha } => writeln!(f, "kind = dir_full\nalpha = {alpha}")?,
            PartitionSpec::Shards { per_client } => writeln!(f, "kind = shards\nshards_per_client = {per_client}")?,
            PartitionSpec::ClassImbalanced { n1, n2, alpha } => {
                writeln!(f, "kind = ci\nn1 = {n1}\nn2 = {n2}\nalpha = {alpha}")?
            }
        }
        writeln!(f, "\n[model]\nhidden = {}", list(&self.hidden))?;
        if let Some(layers) = &self.layers {
            writeln!(f, "layers = {}", format_layers(layers))?;
        }
        writeln!(f, "\n[neuron]\ntimesteps = {}\nthreshold = {}", self.timesteps, self.threshold)?;
        writeln!(f, "reset = {}\nsurrogate_alpha = {}", self.reset, self.surrogate_alpha)?;
        writeln!(f, "\n[federation]\nstrategy = {}", self.strategy.name())?;
        writeln!(f, "clients = {}\ncandidates = {}\nselected = {}", self.clients, self.candidates, self.selected)?;
        let agg = match self.aggregation {
            Aggregation::Weighted => "weighted",
            Aggregation::Uniform => "uniform",
        };
        writeln!(f, "rounds = {}\naggregation = {agg}\nseed = {}\nthreads = {}", self.rounds, self.seed, self.threads)?;
        writeln!(f, "\n[training]\nepochs = {}\nlearning_rate = {}", self.epochs, self.learning_rate)?;
        writeln!(f, "batch_size = {}\nbackward_cost = {}", self.batch_size, self.backward_cost)?;
        writeln!(f, "\n[evaluation]\nnoise_rate = {}", self.noise_rate)?;
        if !self.targets.is_empty() {
            writeln!(f, "targets = {}", list(&self.targets))?;
        }
        Ok(())
    }
}
