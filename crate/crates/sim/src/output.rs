//! Result files. Every CSV has one header line and one row per round.
//! Lists inside a field are space separated. Floats use the shortest
//! representation that round-trips, so reruns are byte-identical.
//!
//! | file | columns |
//! |------|---------|
//! | `history.csv` | round, candidates, credits, selected, test_accuracy, flops, sops |
//! | `energy.csv` | round, flops, sops, pj, cumulative_pj |
//! | `distribution.csv` | round, count_0.., proportion_0.. |
//! | `credits.csv` | round, client_id, delta_r, before_0.., after_0.. (one row per candidate) |

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sfedca_core::fed::{total_energy, RoundRecord};
use sfedca_core::metrics::{energy_pj, rounds_to_target, DistributionTrace};
use sfedca_core::selection::Strategy;

fn join<T: ToString>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn history_csv(history: &[RoundRecord]) -> String {
    let mut out = String::from("round,candidates,credits,selected,test_accuracy,flops,sops\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            join(&r.candidates, " "),
            join(r.credits.iter().map(|c| c.delta_r), " "),
            join(&r.selected, " "),
            r.test_accuracy,
            r.train_energy.flops,
            r.train_energy.sops
        );
    }
    out
}

pub fn energy_csv(history: &[RoundRecord]) -> String {
    let mut out = String::from("round,flops,sops,pj,cumulative_pj\n");
    let mut cumulative = 0.0;
    for r in history {
        let pj = energy_pj(&r.train_energy);
        cumulative += pj;
        let _ = writeln!(out, "{},{},{},{pj},{cumulative}", r.round, r.train_energy.flops, r.train_energy.sops);
    }
    out
}

pub fn distribution_csv(trace: &DistributionTrace) -> String {
    let classes = trace.cumulative.first().map_or(0, Vec::len);
    let mut out = String::from("round");
    (0..classes).for_each(|c| {
        let _ = write!(out, ",count_{c}");
    });
    (0..classes).for_each(|c| {
        let _ = write!(out, ",proportion_{c}");
    });
    out.push('\n');
    for (r, row) in trace.cumulative.iter().enumerate() {
        let _ = writeln!(out, "{r},{},{}", join(row, ","), join(trace.proportions(r), ","));
    }
    out
}

pub fn credits_csv(history: &[RoundRecord], classes: usize) -> String {
    let mut out = String::from("round,client_id,delta_r");
    (0..classes).for_each(|c| {
        let _ = write!(out, ",before_{c}");
    });
    (0..classes).for_each(|c| {
        let _ = write!(out, ",after_{c}");
    });
    out.push('\n');
    for r in history {
        for c in &r.credits {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.round,
                c.client_id,
                c.delta_r,
                join(c.rates_before.rates(), ","),
                join(c.rates_after.rates(), ",")
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub target: f64,
    /// First round (from 0) at or above `target`.
    pub round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub strategy: String,
    pub rounds: usize,
    pub seed: u64,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub rounds_to_target: Vec<TargetReport>,
    pub total_flops: u64,
    pub total_sops: u64,
    pub total_pj: f64,
}

impl Summary {
    pub fn new(strategy: Strategy, seed: u64, history: &[RoundRecord], targets: &[f64]) -> Self {
        let energy = total_energy(history);
        Self {
            strategy: strategy.name().into(),
            rounds: history.len(),
            seed,
            final_accuracy: history.last().map_or(0.0, |r| r.test_accuracy),
            best_accuracy: history.iter().map(|r| r.test_accuracy).fold(0.0, f64::max),
            rounds_to_target: targets
                .iter()
                .map(|&target| TargetReport { target, round: rounds_to_target(history, target) })
                .collect(),
            total_flops: energy.flops,
            total_sops: energy.sops,
            total_pj: energy.picojoules(),
        }
    }
}

/// Writes every `(name, contents)` pair into `dir`. All files are staged
/// as hidden temporaries first and only renamed into place once every one
/// was written, so a failure leaves no partial results.
pub fn write_atomically(dir: &Path, files: &[(&str, String)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if let Some((name, _)) = files.iter().find(|(name, _)| dir.join(name).is_dir()) {
        return Err(io::Error::new(io::ErrorKind::AlreadyExists, format!("{name} exists and is a directory")));
    }
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, contents) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            let _ = fs::remove_file(&tmp);
            cleanup(&staged);
            return Err(e);
        }
        staged.push((tmp, dir.join(name)));
    }
    for (i, (tmp, dest)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, dest) {
            cleanup(&staged[i..]);
            return Err(e);
        }
    }
    Ok(())
}
