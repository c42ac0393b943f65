//! Accuracy, convergence and energy accounting, plus tracking of which
//! categories the selected clients contribute.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{add_gaussian_noise, DataView, Dataset};
use crate::error::{Error, Result};
use crate::fed::RoundRecord;
use crate::snn::{simulate, NetworkConfig, NetworkParams, SpikeMode, WorkStats};

/// Energy per multiply-accumulate, in picojoules.
pub const PJ_PER_FLOP: f64 = 4.6;
/// Energy per spike-driven accumulate, in picojoules.
pub const PJ_PER_SOP: f64 = 0.9;

/// Operation counts accumulated over some amount of work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyLedger {
    /// Multiply-accumulate operations.
    pub flops: u64,
    /// Spike-driven accumulate operations.
    pub sops: u64,
}

impl EnergyLedger {
    /// Adds another ledger's counts.
    pub fn add(&mut self, other: EnergyLedger) {
        self.flops += other.flops;
        self.sops += other.sops;
    }

    /// `4.6 pJ * flops + 0.9 pJ * sops`.
    pub fn picojoules(&self) -> f64 {
        energy_pj(self)
    }
}

/// `4.6 pJ * flops + 0.9 pJ * sops`.
pub fn energy_pj(ledger: &EnergyLedger) -> f64 {
    PJ_PER_FLOP * ledger.flops as f64 + PJ_PER_SOP * ledger.sops as f64
}

/// Synaptic operations of a layer whose inputs fire at `rate`:
/// `rate * T * flops`, rounded to the nearest integer.
pub fn sops(rate: f64, timesteps: usize, flops: u64) -> u64 {
    libm::round(rate * timesteps as f64 * flops as f64) as u64
}

/// Converts spike counts into operation counts.
///
/// The first layer sees the real-valued input once per sample and is
/// charged as one dense pass of MACs. Every later layer is charged
/// `rate_in * T * flops` SOPs, where `rate_in` is the measured firing
/// rate of the layer feeding it; in count form that is
/// `spikes_in * flops / input_width`. Training passes cost
/// `1 + backward_multiplier` times the forward count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Backward cost relative to one forward pass.
    pub backward_multiplier: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { backward_multiplier: 2.0 }
    }
}

impl EnergyModel {
    /// Operation counts of the inference passes summarised by `stats`.
    pub fn forward(&self, config: &NetworkConfig, stats: &WorkStats) -> EnergyLedger {
        let flops = config.count_flops();
        let mut ledger = EnergyLedger { flops: stats.samples * flops[0], sops: 0 };
        for l in 1..config.layers.len() {
            let spikes_in = stats.layer_spikes[l - 1] as u128;
            let width_in = config.layers[l].input_len() as u128;
            let num = spikes_in * flops[l] as u128;
            ledger.sops += ((2 * num + width_in) / (2 * width_in)) as u64;
        }
        ledger
    }

    /// Operation counts of the training passes summarised by `stats`.
    pub fn training(&self, config: &NetworkConfig, stats: &WorkStats) -> EnergyLedger {
        let fwd = self.forward(config, stats);
        let k = 1.0 + self.backward_multiplier;
        EnergyLedger {
            flops: libm::round(fwd.flops as f64 * k) as u64,
            sops: libm::round(fwd.sops as f64 * k) as u64,
        }
    }
}

/// Index of the largest probability, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Number of correctly classified samples in `data`.
pub fn correct_count(params: &NetworkParams, data: &DataView<'_>, config: &NetworkConfig) -> Result<usize> {
    params.check(config)?;
    let mut correct = 0;
    for (sample, label) in data.iter() {
        let trace = simulate(params, sample.values(), config, SpikeMode::Hard)?;
        if argmax(&trace.probs) == label {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Fraction of `test` classified correctly (argmax of class
/// probabilities, lowest class id on ties).
pub fn test_accuracy(params: &NetworkParams, test: &DataView<'_>, config: &NetworkConfig) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    Ok(correct_count(params, test, config)? as f64 / test.len() as f64)
}

/// First round whose test accuracy reaches `target`, if any.
pub fn rounds_to_target(history: &[RoundRecord], target: f64) -> Option<usize> {
    first_reaching(history.iter().map(|r| r.test_accuracy), target)
}

/// [`rounds_to_target`] over a bare accuracy sequence.
pub fn first_reaching(accuracies: impl IntoIterator<Item = f64>, target: f64) -> Option<usize> {
    accuracies.into_iter().position(|a| a >= target)
}

/// Accuracy of `params` on `test` with Gaussian noise of each relative
/// norm in `rates` added (see [`add_gaussian_noise`]).
pub fn noise_sweep(
    params: &NetworkParams,
    test: &Dataset,
    config: &NetworkConfig,
    rates: &[f64],
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    rates
        .iter()
        .map(|&rate| {
            let noisy = add_gaussian_noise(test, rate, seed)?;
            Ok((rate, test_accuracy(params, &noisy.view(), config)?))
        })
        .collect()
}

/// Running per-category sample counts held by the selected clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionTrace {
    /// `cumulative[r][c]`: class-`c` samples over every client selected in
    /// rounds `0..=r` (a client selected twice counts twice).
    pub cumulative: Vec<Vec<u64>>,
}

impl DistributionTrace {
    /// Normalised cumulative proportions for round `r`.
    pub fn proportions(&self, r: usize) -> Vec<f64> {
        let row = &self.cumulative[r];
        let total: u64 = row.iter().sum();
        row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
    }
}

/// Accumulates the class histograms of each round's selected clients.
pub fn selected_distribution(
    history: &[RoundRecord],
    histograms: &[Vec<usize>],
) -> Result<DistributionTrace> {
    let classes = histograms.first().map_or(0, Vec::len);
    let mut running = vec![0u64; classes];
    let mut cumulative = Vec::with_capacity(history.len());
    for record in history {
        for &k in &record.selected {
            let h = histograms.get(k).ok_or(Error::UnknownClient(k))?;
            if h.len() != classes {
                return Err(Error::ShapeMismatch {
                    expected: format!("{classes} classes"),
                    actual: format!("{} classes for client {k}", h.len()),
                });
            }
            for (r, &c) in running.iter_mut().zip(h) {
                *r += c as u64;
            }
        }
        cumulative.push(running.clone());
    }
    Ok(DistributionTrace { cumulative })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sops_examples() {
        assert_eq!(sops(0.0, 12, 78400), 0);
        assert_eq!(sops(1.0, 12, 1000), 12000);
        assert_eq!(sops(0.1, 12, 78400), 94080);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_pj(&EnergyLedger { flops: 0, sops: 0 }), 0.0);
        assert_eq!(energy_pj(&EnergyLedger { flops: 1, sops: 0 }), 4.6);
        assert_eq!(energy_pj(&EnergyLedger { flops: 0, sops: 10 }), 9.0);
    }

    #[test]
    fn first_crossing() {
        let acc = [0.3, 0.55, 0.52, 0.6];
        assert_eq!(first_reaching(acc, 0.5), Some(1));
        assert_eq!(first_reaching(acc, 0.99), None);
        assert_eq!(first_reaching(acc, 0.0), Some(0));
    }

    #[test]
    fn ledger_from_counts_matches_rate_formula() {
        let cfg = NetworkConfig::mlp(&[784, 100, 10]).unwrap();
        // 10 samples, hidden layer fired 1200 times: rate 0.1 over T = 12
        let stats = WorkStats { samples: 10, layer_spikes: vec![1200, 37] };
        let e = EnergyModel::default().forward(&cfg, &stats);
        assert_eq!(e.flops, 784_000);
        assert_eq!(e.sops, 10 * sops(0.1, 12, 1000));
        let t = EnergyModel::default().training(&cfg, &stats);
        assert_eq!(t, EnergyLedger { flops: 3 * e.flops, sops: 3 * e.sops });
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.25, 0.25, 0.5]), 2);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1; 10]), 0);
    }
}
