//! Weighted aggregation and the federation round loop.
//!
//! Per-client work (firing-rate passes and local training) is handed to an
//! [`Executor`], which may run it on any number of threads. Every client's
//! randomness comes from its own `(seed, purpose, round, client)` stream
//! and results are reduced in client-id order, so the history does not
//! depend on the schedule.

use alloc::format;
use alloc::vec::Vec;
use core::time::Duration;

use crate::data::{add_gaussian_noise, ClientPartition, Dataset};
use crate::error::{invalid, Error, Result};
use crate::metrics::{correct_count, EnergyLedger, EnergyModel};
use crate::rng::{derive_seed, stream, Purpose};
use crate::selection::{
    firing_rate_difference, mean_firing_rates_with_stats, random_selection, sample_candidates,
    select_top_p, CreditRecord, SelectionConfig, Strategy,
};
use crate::snn::{train_local_with_stats, NetworkConfig, NetworkParams, TrainConfig};

/// How selected models are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Weighted by local dataset size, `p_k = |D_k| / sum |D_j|`.
    #[default]
    Weighted,
    /// Plain mean.
    Uniform,
}

/// Elementwise weighted mean of `(model, |D_k|)` pairs, reduced in the
/// order given.
pub fn aggregate(models: &[(&NetworkParams, f64)], mode: Aggregation) -> Result<NetworkParams> {
    let (first, _) = models.first().ok_or(Error::Empty("model list"))?;
    for (m, w) in models {
        first.check_like(m)?;
        if !(*w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("aggregation weight must be positive, got {w}")));
        }
    }
    let weight = |w: f64| match mode {
        Aggregation::Weighted => w,
        Aggregation::Uniform => 1.0,
    };
    let total: f64 = models.iter().map(|(_, w)| weight(*w)).sum();
    let mut out = first.zeros_like();
    for (m, w) in models {
        let w = weight(*w);
        for (o, v) in out.iter_mut().zip(m.iter()) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
    if !out.is_finite() {
        return Err(Error::NonFinite("aggregated weights"));
    }
    Ok(out)
}

/// Runs independent per-client jobs. Implementations must return results
/// in input order.
pub trait Executor {
    /// Applies `job` to every id and collects the results in order.
    fn map<T, F>(&self, ids: &[usize], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Time since some fixed origin, if the platform has a clock.
    fn now(&self) -> Option<Duration> {
        None
    }
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, ids: &[usize], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        ids.iter().map(|&i| job(i)).collect()
    }
}

/// Everything that defines a federation run apart from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    /// Network architecture and neuron constants.
    pub network: NetworkConfig,
    /// Selection strategy and `N`, `S`, `P`.
    pub selection: SelectionConfig,
    /// Local SGD step size.
    pub learning_rate: f64,
    /// Local epochs per round.
    pub epochs: usize,
    /// Local mini-batch size.
    pub batch_size: usize,
    /// Number of rounds.
    pub rounds: usize,
    /// Aggregation weighting.
    pub aggregation: Aggregation,
    /// Relative norm of Gaussian noise added to the test set.
    pub noise_rate: f64,
    /// Energy accounting model.
    pub energy: EnergyModel,
    /// Master seed.
    pub seed: u64,
}

impl FederationConfig {
    /// Checks every constraint that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.selection.validate()?;
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: 0,
        }
        .validate()?;
        if self.rounds == 0 {
            return Err(invalid("rounds must be >= 1"));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return Err(invalid("noise rate must be finite and non-negative"));
        }
        if !(self.energy.backward_multiplier >= 0.0 && self.energy.backward_multiplier.is_finite()) {
            return Err(invalid("backward cost multiplier must be non-negative"));
        }
        Ok(())
    }
}

/// The server's model and round counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    /// Current global model `W^r`.
    pub global: NetworkParams,
    /// Index of the next round to run.
    pub round: usize,
}

/// Audit trail of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index, from 0.
    pub round: usize,
    /// Clients that trained this round (the candidate set for sfedca).
    pub candidates: Vec<usize>,
    /// Credits of every candidate (sfedca only), in candidate order.
    pub credits: Vec<CreditRecord>,
    /// Aggregated clients, best credit first for sfedca.
    pub selected: Vec<usize>,
    /// Test accuracy of the aggregated model.
    pub test_accuracy: f64,
    /// Operations spent on client work this round.
    pub train_energy: EnergyLedger,
    /// Time spent on the round, zero without a clock.
    pub wallclock: Duration,
}

/// Client data, test data and configuration of one federation.
#[derive(Debug)]
pub struct Federation<'a> {
    config: FederationConfig,
    train: &'a Dataset,
    partition: &'a ClientPartition,
    test: Dataset,
}

struct ClientWork {
    params: NetworkParams,
    credit: Option<CreditRecord>,
    energy: EnergyLedger,
}

impl<'a> Federation<'a> {
    /// Validates the config against the data. Test-set noise, if any, is
    /// applied here once.
    pub fn new(
        config: FederationConfig,
        train: &'a Dataset,
        partition: &'a ClientPartition,
        test: &Dataset,
    ) -> Result<Self> {
        config.validate()?;
        if partition.n_clients() != config.selection.n_clients {
            return Err(invalid(format!(
                "partition has {} clients, config expects {}",
                partition.n_clients(),
                config.selection.n_clients
            )));
        }
        partition.check()?;
        if partition.pool.last().is_some_and(|&i| i >= train.len()) {
            return Err(invalid("partition indexes past the end of the training set"));
        }
        for d in [train, test] {
            if d.sample_len() != config.network.input_len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("samples of length {}", config.network.input_len()),
                    actual: format!("length {}", d.sample_len()),
                });
            }
            if d.classes() != config.network.classes() {
                return Err(invalid(format!(
                    "dataset has {} classes but the network outputs {}",
                    d.classes(),
                    config.network.classes()
                )));
            }
        }
        if test.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let test = add_gaussian_noise(test, config.noise_rate, derive_seed(config.seed, Purpose::Noise, 0, 0))?;
        Ok(Self { config, train, partition, test })
    }

    /// The run's configuration.
    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    /// The evaluation set (with noise applied).
    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    /// Round-0 server state with seeded initial weights.
    pub fn initial_state(&self) -> ServerState {
        let mut rng = stream(self.config.seed, Purpose::Init, 0, 0);
        ServerState { global: NetworkParams::init(&self.config.network, &mut rng), round: 0 }
    }

    fn train_config(&self, round: usize, client: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.config.learning_rate,
            epochs: self.config.epochs,
            batch_size: self.config.batch_size,
            seed: derive_seed(self.config.seed, Purpose::Train, round as u64, client as u64),
        }
    }

    fn client_work(&self, global: &NetworkParams, round: usize, client: usize, credits: bool) -> Result<ClientWork> {
        let net = &self.config.network;
        let data = self.train.subset(&self.partition.assignments[client]);
        let mut energy = EnergyLedger::default();
        let before = if credits {
            let (rates, stats) = mean_firing_rates_with_stats(global, &data, net)?;
            energy.add(self.config.energy.forward(net, &stats));
            Some(rates)
        } else {
            None
        };
        let (params, stats) = train_local_with_stats(global, &data, &self.train_config(round, client), net)?;
        energy.add(self.config.energy.training(net, &stats));
        let credit = match before {
            Some(rates_before) => {
                let (rates_after, stats) = mean_firing_rates_with_stats(&params, &data, net)?;
                energy.add(self.config.energy.forward(net, &stats));
                let delta_r = firing_rate_difference(&rates_before, &rates_after)?;
                Some(CreditRecord { client_id: client, delta_r, rates_before, rates_after })
            }
            None => None,
        };
        Ok(ClientWork { params, credit, energy })
    }

    /// Accuracy of `params` on the evaluation set, split across the executor.
    pub fn evaluate<E: Executor + Sync>(&self, params: &NetworkParams, exec: &E) -> Result<f64> {
        const CHUNK: usize = 256;
        let chunks: Vec<usize> = (0..self.test.len().div_ceil(CHUNK)).collect();
        let counts = exec.map(&chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(self.test.len());
            let idx: Vec<usize> = (lo..hi).collect();
            correct_count(params, &self.test.subset(&idx), &self.config.network)
        });
        let mut correct = 0;
        for c in counts {
            correct += c?;
        }
        Ok(correct as f64 / self.test.len() as f64)
    }

    /// One round: pick who trains, run client work, select, aggregate and
    /// evaluate. The input state is not modified.
    pub fn run_round<E: Executor + Sync>(&self, server: &ServerState, exec: &E) -> Result<(ServerState, RoundRecord)> {
        let start = exec.now();
        let sel = &self.config.selection;
        let round = server.round;
        let draw_seed = derive_seed(self.config.seed, Purpose::Candidates, round as u64, 0);
        let (candidates, with_credits) = match sel.strategy {
            Strategy::SFedCa => (sample_candidates(sel.n_clients, sel.candidates, draw_seed)?, true),
            Strategy::Random => (random_selection(sel.n_clients, sel.selected, draw_seed)?, false),
            Strategy::Full => ((0..sel.n_clients).collect(), false),
        };

        let results = exec.map(&candidates, |k| self.client_work(&server.global, round, k, with_credits));
        let mut work = Vec::with_capacity(results.len());
        for r in results {
            work.push(r?);
        }
        let mut train_energy = EnergyLedger::default();
        work.iter().for_each(|w| train_energy.add(w.energy));
        let credits: Vec<CreditRecord> = work.iter().filter_map(|w| w.credit.clone()).collect();

        let selected = match sel.strategy {
            Strategy::SFedCa => select_top_p(&credits, sel.selected)?,
            _ => candidates.clone(),
        };
        let mut chosen: Vec<usize> = selected
            .iter()
            .map(|id| candidates.iter().position(|c| c == id).expect("selected from candidates"))
            .collect();
        chosen.sort_by_key(|&i| candidates[i]);
        let models: Vec<(&NetworkParams, f64)> = chosen
            .iter()
            .map(|&i| (&work[i].params, self.partition.assignments[candidates[i]].len() as f64))
            .collect();
        let global = aggregate(&models, self.config.aggregation)?;
        let test_accuracy = self.evaluate(&global, exec)?;
        let wallclock = match (start, exec.now()) {
            (Some(a), Some(b)) => b.saturating_sub(a),
            _ => Duration::ZERO,
        };
        let record = RoundRecord { round, candidates, credits, selected, test_accuracy, train_energy, wallclock };
        Ok((ServerState { global, round: round + 1 }, record))
    }

    /// Runs every configured round from the seeded initial model and
    /// returns the final model with the full history.
    pub fn run<E: Executor + Sync>(&self, exec: &E) -> Result<(NetworkParams, Vec<RoundRecord>)> {
        let mut state = self.initial_state();
        let mut history = Vec::with_capacity(self.config.rounds);
        for _ in 0..self.config.rounds {
            let (next, record) = self.run_round(&state, exec)?;
            history.push(record);
            state = next;
        }
        Ok((state.global, history))
    }
}

/// Validates, runs every round and returns the history.
pub fn run_federation<E: Executor + Sync>(
    config: FederationConfig,
    train: &Dataset,
    partition: &ClientPartition,
    test: &Dataset,
    exec: &E,
) -> Result<Vec<RoundRecord>> {
    Federation::new(config, train, partition, test)?.run(exec).map(|(_, h)| h)
}

/// Sum of every round's client-work ledger.
pub fn total_energy(history: &[RoundRecord]) -> EnergyLedger {
    let mut total = EnergyLedger::default();
    history.iter().for_each(|r| total.add(r.train_energy));
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn scalar(v: f64) -> NetworkParams {
        NetworkParams { weights: vec![Tensor::new(vec![1, 1], vec![v]).unwrap()] }
    }

    #[test]
    fn aggregate_examples() {
        let (a, b) = (scalar(1.0), scalar(3.0));
        let out = aggregate(&[(&a, 1.0), (&b, 1.0)], Aggregation::Weighted).unwrap();
        assert_eq!(out.weights[0].values()[0], 2.0);
        let out = aggregate(&[(&a, 3.0), (&b, 1.0)], Aggregation::Weighted).unwrap();
        assert_eq!(out.weights[0].values()[0], 1.5);
        let out = aggregate(&[(&a, 3.0), (&b, 1.0)], Aggregation::Uniform).unwrap();
        assert_eq!(out.weights[0].values()[0], 2.0);
    }

    #[test]
    fn aggregate_errors() {
        let a = scalar(1.0);
        assert_eq!(aggregate(&[], Aggregation::Weighted), Err(Error::Empty("model list")));
        assert!(aggregate(&[(&a, 0.0)], Aggregation::Weighted).is_err());
        let cfg = NetworkConfig::mlp(&[2, 2]).unwrap();
        let b = NetworkParams::zeros(&cfg);
        assert!(aggregate(&[(&a, 1.0), (&b, 1.0)], Aggregation::Weighted).is_err());
    }

    #[test]
    fn serial_executor_keeps_order() {
        assert_eq!(Serial.map(&[3, 1, 2], |i| i * 10), vec![30, 10, 20]);
        assert_eq!(Serial.now(), None);
    }
}
