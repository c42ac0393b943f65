//! Client credits from firing-rate differences, and the selection
//! strategies.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataView;
use crate::error::{invalid, Error, Result};
use crate::snn::{simulate, NetworkConfig, NetworkParams, SpikeMode, WorkStats};

/// Mean firing rate of a client's data under one model, one entry per
/// category, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringRateVector(pub Vec<f64>);

impl FiringRateVector {
    /// Rates indexed by category.
    pub fn rates(&self) -> &[f64] {
        &self.0
    }

    /// Category count.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for a zero-category vector.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One candidate's credit for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditRecord {
    /// Client id.
    pub client_id: usize,
    /// Sum of squared per-category rate changes.
    pub delta_r: f64,
    /// Rates under the broadcast global model.
    pub rates_before: FiringRateVector,
    /// Rates under the locally trained model.
    pub rates_after: FiringRateVector,
}

/// Which clients are aggregated each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Sample `S` candidates, train them all, keep the `P` with the
    /// largest firing-rate difference.
    SFedCa,
    /// Sample `P` clients uniformly, train and keep them.
    Random,
    /// Train and aggregate every client.
    Full,
}

impl Strategy {
    /// Lower-case name used in configs and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::SFedCa => "sfedca",
            Strategy::Random => "random",
            Strategy::Full => "full",
        }
    }
}

/// Population and selection sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionConfig {
    /// Strategy.
    pub strategy: Strategy,
    /// Client count `N`.
    pub n_clients: usize,
    /// Candidate count `S` (used by [`Strategy::SFedCa`]).
    pub candidates: usize,
    /// Selected count `P`.
    pub selected: usize,
}

impl SelectionConfig {
    /// Checks `P <= S <= N` for sfedca and `P <= N` for random.
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 || self.candidates == 0 || self.selected == 0 {
            return Err(invalid("N, S and P must be positive"));
        }
        match self.strategy {
            Strategy::SFedCa => {
                if self.selected > self.candidates {
                    return Err(invalid(format!(
                        "P ≤ S violated: P = {} > S = {}",
                        self.selected, self.candidates
                    )));
                }
                if self.candidates > self.n_clients {
                    return Err(invalid(format!(
                        "S ≤ N violated: S = {} > N = {}",
                        self.candidates, self.n_clients
                    )));
                }
            }
            Strategy::Random => {
                if self.selected > self.n_clients {
                    return Err(invalid(format!(
                        "P ≤ N violated: P = {} > N = {}",
                        self.selected, self.n_clients
                    )));
                }
            }
            Strategy::Full => {}
        }
        Ok(())
    }
}

/// Per-category mean of the per-sample firing rate (layer-averaged
/// fraction of neurons firing per step). Categories the client does not
/// hold get rate 0.
pub fn mean_firing_rates(
    params: &NetworkParams,
    data: &DataView<'_>,
    config: &NetworkConfig,
) -> Result<FiringRateVector> {
    mean_firing_rates_with_stats(params, data, config).map(|(r, _)| r)
}

/// [`mean_firing_rates`] plus the inference work it took.
pub fn mean_firing_rates_with_stats(
    params: &NetworkParams,
    data: &DataView<'_>,
    config: &NetworkConfig,
) -> Result<(FiringRateVector, WorkStats)> {
    if data.is_empty() {
        return Err(Error::Empty("client dataset"));
    }
    params.check(config)?;
    let classes = data.classes();
    let widths = config.widths();
    let denom: Vec<f64> = widths.iter().map(|w| (w * config.timesteps) as f64).collect();
    let mut sums = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    let mut stats = WorkStats { samples: 0, layer_spikes: vec![0; widths.len()] };
    for (sample, label) in data.iter() {
        let trace = simulate(params, sample.values(), config, SpikeMode::Hard)?;
        let mut rate = 0.0;
        for (l, layer) in trace.spikes.iter().enumerate() {
            let fired = layer.values().iter().filter(|&&o| o != 0.0).count();
            stats.layer_spikes[l] += fired as u64;
            rate += fired as f64 / denom[l];
        }
        sums[label] += rate / widths.len() as f64;
        counts[label] += 1;
        stats.samples += 1;
    }
    let rates = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok((FiringRateVector(rates), stats))
}

/// `sum_c (after_c - before_c)^2`.
pub fn firing_rate_difference(before: &FiringRateVector, after: &FiringRateVector) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rates", before.len()),
            actual: format!("{} rates", after.len()),
        });
    }
    Ok(before.0.iter().zip(&after.0).map(|(b, a)| (a - b) * (a - b)).sum())
}

/// `count` distinct ids from `0..n` by a partial Fisher-Yates shuffle.
///
/// Draws are prefix-stable: for the same seed, a smaller `count` yields a
/// prefix of a larger one.
fn sample_without_replacement(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        ids.swap(i, j);
    }
    ids.truncate(count);
    ids
}

/// Uniformly samples `s` candidate ids out of `n` clients.
pub fn sample_candidates(n: usize, s: usize, round_seed: u64) -> Result<Vec<usize>> {
    if s > n {
        return Err(invalid(format!("cannot sample {s} candidates from {n} clients")));
    }
    Ok(sample_without_replacement(n, s, round_seed))
}

/// Uniformly samples `p` ids out of `n`. Uses the same draw as
/// [`sample_candidates`], so with a shared seed the random baseline picks
/// the first `p` of the candidates sfedca would have seen.
pub fn random_selection(n: usize, p: usize, round_seed: u64) -> Result<Vec<usize>> {
    if p > n {
        return Err(invalid(format!("cannot select {p} of {n} clients")));
    }
    Ok(sample_without_replacement(n, p, round_seed))
}

/// The `p` clients with the largest `delta_r`, best first; equal credits
/// go to the lower client id.
pub fn select_top_p(credits: &[CreditRecord], p: usize) -> Result<Vec<usize>> {
    if p > credits.len() {
        return Err(invalid(format!("cannot select {p} of {} candidates", credits.len())));
    }
    let mut ranked: Vec<(f64, usize)> = credits.iter().map(|c| (c.delta_r, c.client_id)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(p).map(|(_, id)| id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::Tensor;

    fn credit(id: usize, d: f64) -> CreditRecord {
        CreditRecord {
            client_id: id,
            delta_r: d,
            rates_before: FiringRateVector(vec![]),
            rates_after: FiringRateVector(vec![]),
        }
    }

    #[test]
    fn difference_examples() {
        let r = FiringRateVector(vec![0.1, 0.2, 0.3]);
        assert_eq!(firing_rate_difference(&r, &r).unwrap(), 0.0);
        let d = firing_rate_difference(
            &FiringRateVector(vec![0.0, 0.0]),
            &FiringRateVector(vec![0.3, 0.4]),
        )
        .unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let d = firing_rate_difference(&r, &FiringRateVector(vec![0.2, 0.2, 0.5])).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
        assert!(firing_rate_difference(&r, &FiringRateVector(vec![0.0])).is_err());
    }

    #[test]
    fn top_p_examples() {
        let credits = [credit(1, 3.55), credit(2, 5.76), credit(3, 9.63)];
        assert_eq!(select_top_p(&credits, 2).unwrap(), vec![3, 2]);
        let flat = [credit(5, 1.0), credit(2, 1.0), credit(9, 1.0)];
        assert_eq!(select_top_p(&flat, 2).unwrap(), vec![2, 5]);
        assert_eq!(select_top_p(&credits, 3).unwrap().len(), 3);
        assert!(select_top_p(&credits, 4).is_err());
    }

    #[test]
    fn candidate_sampling() {
        let mut all = sample_candidates(7, 7, 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        let one = sample_candidates(7, 1, 3).unwrap();
        assert!(one.len() == 1 && one[0] < 7);
        assert_eq!(sample_candidates(100, 10, 42).unwrap(), sample_candidates(100, 10, 42).unwrap());
        assert!(sample_candidates(3, 4, 0).is_err());
        // prefix property shared with random selection
        let s = sample_candidates(100, 10, 8).unwrap();
        assert_eq!(random_selection(100, 2, 8).unwrap(), s[..2].to_vec());
        assert!(random_selection(3, 4, 0).is_err());
    }

    #[test]
    fn selection_config_constraints() {
        let mut cfg = SelectionConfig { strategy: Strategy::SFedCa, n_clients: 100, candidates: 10, selected: 20 };
        let err = cfg.validate().unwrap_err();
        assert!(alloc::format!("{err}").contains("P ≤ S"));
        cfg.selected = 2;
        assert!(cfg.validate().is_ok());
        cfg.candidates = 101;
        assert!(cfg.validate().is_err());
        cfg.strategy = Strategy::Random;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn quiescent_and_saturated_rates() {
        let cfg = NetworkConfig::mlp(&[2, 1]).unwrap();
        let d = Dataset::new(
            vec![Tensor::from_vec(vec![1.0, 1.0]), Tensor::from_vec(vec![2.0, 0.5])],
            vec![0, 0],
            2,
            "t",
        )
        .unwrap();
        let zero = NetworkParams::zeros(&cfg);
        assert_eq!(mean_firing_rates(&zero, &d.view(), &cfg).unwrap().0, vec![0.0, 0.0]);
        // current >= threshold every step: the single neuron always fires
        let hot = NetworkParams { weights: vec![Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap()] };
        let r = mean_firing_rates(&hot, &d.view(), &cfg).unwrap();
        assert_eq!(r.0, vec![1.0, 0.0]);
        assert_eq!(r, mean_firing_rates(&hot, &d.view(), &cfg).unwrap());
    }
}
