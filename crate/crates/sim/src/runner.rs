use std::fs;
use std::io::BufReader;
use std::path::Path;

use sfedca_core::data::{
    partition_class_imbalanced, partition_dirichlet, partition_dirichlet_full, partition_shards,
    synth_blobs, ClientPartition, Dataset,
};
use sfedca_core::fed::{Executor, Federation, FederationConfig, RoundRecord, Serial};
use sfedca_core::metrics::selected_distribution;
use sfedca_core::rng::{derive_seed, Purpose};
use sfedca_core::snn::NetworkParams;

use crate::config::{ConfigError, DatasetSpec, ExperimentConfig, PartitionSpec};
use crate::csvdata::{self, CsvError};
use crate::idx::{self, IdxError};
use crate::output::{self, Summary};
use crate::parallel::Rayon;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Core(#[from] sfedca_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Data, partition and core config, all validated.
#[derive(Debug)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub partition: ClientPartition,
    pub federation: FederationConfig,
}

#[derive(Debug)]
pub struct Outcome {
    pub params: NetworkParams,
    pub history: Vec<RoundRecord>,
    /// Per-client class histograms of the training partition.
    pub histograms: Vec<Vec<usize>>,
}

fn with_classes(ds: Dataset, classes: usize) -> Result<Dataset, sfedca_core::Error> {
    if ds.classes() == classes {
        return Ok(ds);
    }
    Dataset::new(ds.samples().to_vec(), ds.labels().to_vec(), classes, ds.name.clone())
}

fn first(ds: Dataset, limit: Option<usize>) -> Result<Dataset, sfedca_core::Error> {
    match limit {
        Some(n) if n < ds.len() => ds.select(&(0..n).collect::<Vec<_>>()),
        _ => Ok(ds),
    }
}

fn read_csv(path: &Path) -> Result<Dataset, RunError> {
    let file = fs::File::open(path).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    Ok(csvdata::read_dataset(BufReader::new(file), &name)?)
}

/// Loads or generates the train and test sets. Both end up with the same
/// class count.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset), RunError> {
    let (train, test) = match &cfg.dataset {
        &DatasetSpec::Synth { classes, train_per_class, test_per_class, dim, separation } => {
            // one draw split in two keeps train and test on the same centres
            let seed = derive_seed(cfg.seed, Purpose::Data, 0, 0);
            let all = synth_blobs(classes, train_per_class + test_per_class, dim, separation, seed)?;
            let cut = classes * train_per_class;
            let train = all.select(&(0..cut).collect::<Vec<_>>())?;
            let test = all.select(&(cut..all.len()).collect::<Vec<_>>())?;
            (train, test)
        }
        DatasetSpec::Idx { train_images, train_labels, test_images, test_labels, max_train, max_test } => (
            first(idx::load_idx(train_images, train_labels)?, *max_train)?,
            first(idx::load_idx(test_images, test_labels)?, *max_test)?,
        ),
        DatasetSpec::Csv { train, test } => (read_csv(train)?, read_csv(test)?),
    };
    let classes = train.classes().max(test.classes());
    Ok((with_classes(train, classes)?, with_classes(test, classes)?))
}

pub fn partition(cfg: &ExperimentConfig, train: &Dataset) -> Result<ClientPartition, sfedca_core::Error> {
    let seed = derive_seed(cfg.seed, Purpose::Partition, 0, 0);
    let n = cfg.clients;
    match cfg.partition {
        PartitionSpec::Dirichlet { alpha } => partition_dirichlet(train, n, alpha, seed),
        PartitionSpec::DirichletFull { alpha } => partition_dirichlet_full(train, n, alpha, seed),
        PartitionSpec::Shards { per_client } => partition_shards(train, n, per_client, seed),
        PartitionSpec::ClassImbalanced { n1, n2, alpha } => partition_class_imbalanced(train, n, n1, n2, alpha, seed),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, RunError> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    let federation = cfg.federation(train.sample_len(), train.classes())?;
    federation.validate()?;
    let partition = partition(cfg, &train)?;
    Ok(Prepared { train, test, partition, federation })
}

fn execute_with<E: Executor + Sync>(prepared: &Prepared, exec: &E) -> Result<Outcome, RunError> {
    let fed = Federation::new(prepared.federation.clone(), &prepared.train, &prepared.partition, &prepared.test)?;
    let (params, history) = fed.run(exec)?;
    Ok(Outcome { params, history, histograms: prepared.partition.class_histograms(&prepared.train) })
}

/// Runs the federation with `threads` workers (1 runs on the calling thread).
pub fn execute(prepared: &Prepared, threads: usize) -> Result<Outcome, RunError> {
    if threads == 1 {
        execute_with(prepared, &Serial)
    } else {
        execute_with(prepared, &Rayon::new(threads)?)
    }
}

/// Output file names with their contents.
pub type Files = Vec<(&'static str, String)>;

/// Every output file for a finished run.
pub fn render(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(Summary, Files), RunError> {
    let classes = outcome.histograms.first().map_or(0, Vec::len);
    let trace = selected_distribution(&outcome.history, &outcome.histograms)?;
    let summary = Summary::new(cfg.strategy, cfg.seed, &outcome.history, &cfg.targets);
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n";
    let files = vec![
        ("history.csv", output::history_csv(&outcome.history)),
        ("energy.csv", output::energy_csv(&outcome.history)),
        ("distribution.csv", output::distribution_csv(&trace)),
        ("credits.csv", output::credits_csv(&outcome.history, classes)),
        ("summary.json", json),
    ];
    Ok((summary, files))
}

/// Prepares, runs and writes all outputs into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Summary, RunError> {
    let prepared = prepare(cfg)?;
    let outcome = execute(&prepared, cfg.threads)?;
    let (summary, files) = render(cfg, &outcome)?;
    output::write_atomically(out_dir, &files)
        .map_err(|source| RunError::Io { path: out_dir.display().to_string(), source })?;
    Ok(summary)
}

/// Writes the train and test sets as `train.csv` and `test.csv`.
pub fn export(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(usize, usize), RunError> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    let render = |ds: &Dataset| {
        let mut buf = Vec::new();
        csvdata::write_dataset(ds, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    };
    output::write_atomically(out_dir, &[("train.csv", render(&train)), ("test.csv", render(&test))])
        .map_err(|source| RunError::Io { path: out_dir.display().to_string(), source })?;
    Ok((train.len(), test.len()))
}
