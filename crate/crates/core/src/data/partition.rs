//! Non-IID client partitioners: `Dir(alpha)`, `Dir_N(alpha)`, shards and
//! class-imbalanced `CI(n1:n2; alpha)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use super::Dataset;
use crate::error::{invalid, Error, Result};

/// How many times a Dirichlet draw is repeated before giving up on a
/// partition that leaves some client empty (or too small).
pub const MAX_REDRAWS: usize = 100;

/// Assignment of dataset indices to clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientPartition {
    /// Sample indices held by each client.
    pub assignments: Vec<Vec<usize>>,
    /// Sorted indices the partition is expected to cover. Equal to every
    /// dataset index except for the subsampled class-imbalanced pool.
    pub pool: Vec<usize>,
}

impl ClientPartition {
    /// Client count `N`.
    pub fn n_clients(&self) -> usize {
        self.assignments.len()
    }

    /// `|D_k|` per client.
    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    /// Per-client class histograms against `dataset`.
    pub fn class_histograms(&self, dataset: &Dataset) -> Vec<Vec<usize>> {
        self.assignments
            .iter()
            .map(|idx| {
                let mut h = vec![0; dataset.classes()];
                for &i in idx {
                    h[dataset.labels()[i]] += 1;
                }
                h
            })
            .collect()
    }

    /// Checks disjointness, exact coverage of [`Self::pool`] and that no
    /// client is empty.
    pub fn check(&self) -> Result<()> {
        if let Some(k) = self.assignments.iter().position(Vec::is_empty) {
            return Err(Error::Partition(format!("client {k} is empty")));
        }
        let mut all: Vec<usize> = self.assignments.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Partition("a sample is assigned to two clients".into()));
        }
        if all != self.pool {
            return Err(Error::Partition("assignments do not cover the pool".into()));
        }
        Ok(())
    }
}

/// Integer split of `total` proportional to `weights`: floors first, then
/// the leftover units go to the largest fractional parts (lower index on
/// ties). The result always sums to `total`.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if !(sum > 0.0 && sum.is_finite()) {
        // degenerate weights: spread evenly
        let n = weights.len();
        return (0..n).map(|i| total / n + usize::from(i < total % n)).collect();
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| libm::floor(*e) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked positive");
    let draws: Vec<f64> = (0..n).map(|_| rng.sample(gamma)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        // every gamma draw underflowed; concentrate on one random client
        let mut p = vec![0.0; n];
        p[rng.random_range(0..n)] = 1.0;
        p
    }
}

fn check_common(dataset: &Dataset, n_clients: usize, alpha: f64) -> Result<()> {
    if n_clients == 0 {
        return Err(invalid("need at least one client"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("Dirichlet alpha must be positive and finite"));
    }
    if dataset.len() < n_clients {
        return Err(Error::Partition(format!(
            "{} samples cannot fill {n_clients} nonempty clients",
            dataset.len()
        )));
    }
    Ok(())
}

fn shuffled_by_class(dataset: &Dataset, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class = dataset.indices_by_class();
    for idx in &mut by_class {
        idx.shuffle(rng);
    }
    by_class
}

fn full_pool(dataset: &Dataset) -> Vec<usize> {
    (0..dataset.len()).collect()
}

/// Cuts `items` into consecutive chunks of the given sizes.
fn cut(items: &[usize], sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(items[start..start + s].to_vec());
        start += s;
    }
    out
}

/// `Dir(alpha)`: for every class, client shares are drawn from a
/// symmetric Dirichlet and that class's samples are split accordingly.
/// Both client sizes and class mixes end up unbalanced.
pub fn partition_dirichlet(
    dataset: &Dataset,
    n_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<ClientPartition> {
    check_common(dataset, n_clients, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(dataset, &mut rng);
    for _ in 0..MAX_REDRAWS {
        let mut assignments = vec![Vec::new(); n_clients];
        for idx in by_class.iter().filter(|idx| !idx.is_empty()) {
            let shares = dirichlet(&mut rng, alpha, n_clients);
            let counts = largest_remainder(&shares, idx.len());
            for (client, chunk) in cut(idx, &counts).into_iter().enumerate() {
                assignments[client].extend(chunk);
            }
        }
        if assignments.iter().all(|a| !a.is_empty()) {
            return Ok(ClientPartition { assignments, pool: full_pool(dataset) });
        }
    }
    Err(Error::Partition(format!(
        "some client stayed empty after {MAX_REDRAWS} Dirichlet draws"
    )))
}

/// `Dir_N(alpha)`: client sizes follow one Dirichlet draw while every
/// client's class mix follows the global one, so every client holds
/// every category.
///
/// Each client first receives one sample of each class; the remaining
/// samples are split by the Dirichlet shares, laid out in a
/// proportionally interleaved class order and cut into consecutive
/// chunks, which keeps each chunk's mix close to the global mix. No
/// redraw is needed, since the reserve already covers every class.
pub fn partition_dirichlet_full(
    dataset: &Dataset,
    n_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<ClientPartition> {
    check_common(dataset, n_clients, alpha)?;
    let classes = dataset.classes();
    let counts = dataset.class_counts();
    if let Some(c) = counts.iter().position(|&n| n < n_clients) {
        return Err(Error::Partition(format!(
            "class {c} has {} samples, fewer than the {n_clients} clients that must all hold it",
            counts[c]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(dataset, &mut rng);

    // every client keeps its C reserved samples; only the rest follows
    // the Dirichlet shares
    let spare = dataset.len() - n_clients * classes;
    let sizes: Vec<usize> = largest_remainder(&dirichlet(&mut rng, alpha, n_clients), spare)
        .into_iter()
        .map(|s| s + classes)
        .collect();

    let mut assignments: Vec<Vec<usize>> = (0..n_clients)
        .map(|k| by_class.iter().map(|idx| idx[k]).collect())
        .collect();

    // interleave the leftovers so every prefix tracks the global mix
    let leftover: Vec<&[usize]> = by_class.iter().map(|idx| &idx[n_clients..]).collect();
    let total: usize = leftover.iter().map(|l| l.len()).sum();
    let mut taken = vec![0usize; classes];
    let mut sequence = Vec::with_capacity(total);
    for step in 1..=total {
        let pick = (0..classes)
            .filter(|&c| taken[c] < leftover[c].len())
            .max_by(|&a, &b| {
                let da = step as f64 * leftover[a].len() as f64 / total as f64 - taken[a] as f64;
                let db = step as f64 * leftover[b].len() as f64 / total as f64 - taken[b] as f64;
                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal).then(b.cmp(&a))
            })
            .expect("leftover samples remain");
        sequence.push(leftover[pick][taken[pick]]);
        taken[pick] += 1;
    }
    let rest: Vec<usize> = sizes.iter().map(|s| s - classes).collect();
    for (a, chunk) in assignments.iter_mut().zip(cut(&sequence, &rest)) {
        a.extend(chunk);
    }
    Ok(ClientPartition { assignments, pool: full_pool(dataset) })
}

/// Label shards: every client receives `shards_per_client` label-pure
/// shards with pairwise different labels.
///
/// The `shards_per_client * N` shards are spread over the present labels
/// in proportion to their counts (at least one each, at most `N` each),
/// each label's samples are shuffled and cut into equal shards, and
/// client `k` takes shards `k, k + N, k + 2N, ..` of the label-sorted
/// shard list before client ids are shuffled.
pub fn partition_shards(
    dataset: &Dataset,
    n_clients: usize,
    shards_per_client: usize,
    seed: u64,
) -> Result<ClientPartition> {
    if n_clients == 0 || shards_per_client == 0 {
        return Err(invalid("client and shard counts must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(dataset, &mut rng);
    let present: Vec<usize> = (0..dataset.classes()).filter(|&c| !by_class[c].is_empty()).collect();
    let total_shards = shards_per_client * n_clients;
    if present.len() < shards_per_client {
        return Err(Error::Partition(format!(
            "{} distinct labels cannot give each client {shards_per_client} different labels",
            present.len()
        )));
    }
    if present.len() > total_shards {
        return Err(Error::Partition(format!(
            "{} labels need more than the {total_shards} available shards",
            present.len()
        )));
    }
    let cap = |c: usize| by_class[c].len().min(n_clients);
    if present.iter().map(|&c| cap(c)).sum::<usize>() < total_shards {
        return Err(Error::Partition(format!(
            "too few distinct labels to cut {total_shards} shards with no label repeated per client"
        )));
    }

    // one shard per label, the rest proportional to label size
    let weights: Vec<f64> = present.iter().map(|&c| by_class[c].len() as f64).collect();
    let extra = largest_remainder(&weights, total_shards - present.len());
    let mut shards: Vec<usize> = extra.iter().map(|e| e + 1).collect();
    // move shards away from labels over their cap
    while let Some(over) = (0..present.len()).find(|&i| shards[i] > cap(present[i])) {
        let under = (0..present.len())
            .filter(|&i| shards[i] < cap(present[i]))
            .max_by(|&a, &b| {
                let ra = weights[a] / shards[a] as f64;
                let rb = weights[b] / shards[b] as f64;
                ra.partial_cmp(&rb).unwrap_or(core::cmp::Ordering::Equal).then(b.cmp(&a))
            })
            .expect("total capacity checked above");
        shards[over] -= 1;
        shards[under] += 1;
    }

    let mut shard_list: Vec<Vec<usize>> = Vec::with_capacity(total_shards);
    for (i, &c) in present.iter().enumerate() {
        let idx = &by_class[c];
        let m = shards[i];
        let sizes: Vec<usize> = (0..m).map(|j| idx.len() / m + usize::from(j < idx.len() % m)).collect();
        shard_list.extend(cut(idx, &sizes));
    }

    let mut clients: Vec<usize> = (0..n_clients).collect();
    clients.shuffle(&mut rng);
    let mut assignments = vec![Vec::new(); n_clients];
    for (slot, &client) in clients.iter().enumerate() {
        for s in 0..shards_per_client {
            assignments[client].extend_from_slice(&shard_list[slot + s * n_clients]);
        }
    }
    Ok(ClientPartition { assignments, pool: full_pool(dataset) })
}

/// `CI(n1:n2; alpha)`: the global pool keeps `n1` samples of each class
/// in the first half of class ids and `n2` of each in the second half;
/// every client gets one sample of a shuffle of that pool and the rest
/// is split by one `Dir(alpha)` draw.
pub fn partition_class_imbalanced(
    dataset: &Dataset,
    n_clients: usize,
    n1: usize,
    n2: usize,
    alpha: f64,
    seed: u64,
) -> Result<ClientPartition> {
    let classes = dataset.classes();
    if !classes.is_multiple_of(2) {
        return Err(invalid(format!("class-imbalanced split needs an even class count, got {classes}")));
    }
    if !(n1 >= n2 && n2 >= 1) {
        return Err(invalid("class-imbalanced split needs n1 >= n2 >= 1"));
    }
    if n_clients == 0 {
        return Err(invalid("need at least one client"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("Dirichlet alpha must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(dataset, &mut rng);
    let mut pool = Vec::with_capacity(classes / 2 * (n1 + n2));
    for (c, idx) in by_class.iter().enumerate() {
        let want = if c < classes / 2 { n1 } else { n2 };
        if idx.len() < want {
            return Err(Error::Partition(format!(
                "class {c} has {} samples but {want} were requested",
                idx.len()
            )));
        }
        pool.extend_from_slice(&idx[..want]);
    }
    if pool.len() < n_clients {
        return Err(Error::Partition(format!(
            "pool of {} samples cannot fill {n_clients} clients",
            pool.len()
        )));
    }
    let mut order = pool.clone();
    order.shuffle(&mut rng);
    pool.sort_unstable();
    let sizes: Vec<usize> = largest_remainder(&dirichlet(&mut rng, alpha, n_clients), order.len() - n_clients)
        .into_iter()
        .map(|s| s + 1)
        .collect();
    Ok(ClientPartition { assignments: cut(&order, &sizes), pool })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::Tensor;

    fn labelled(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                samples.push(Tensor::from_vec(vec![c as f64]));
                labels.push(c);
            }
        }
        Dataset::new(samples, labels, counts.len(), "labelled").unwrap()
    }

    fn entropy(h: &[usize]) -> f64 {
        let n: usize = h.iter().sum();
        h.iter()
            .filter(|&&x| x > 0)
            .map(|&x| {
                let p = x as f64 / n as f64;
                -p * p.ln()
            })
            .sum()
    }

    #[test]
    fn largest_remainder_conserves() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.7, 0.3], 0), vec![0, 0]);
    }

    #[test]
    fn dirichlet_concentration_limit() {
        let d = labelled(&[500; 10]);
        let p = partition_dirichlet(&d, 2, 1e6, 3).unwrap();
        p.check().unwrap();
        for h in p.class_histograms(&d) {
            for &x in &h {
                assert!((x as f64 - 250.0).abs() <= 5.0, "{h:?}");
            }
        }
    }

    #[test]
    fn smaller_alpha_is_more_skewed() {
        let d = labelled(&[600; 10]);
        let mean_entropy = |alpha: f64| {
            let p = partition_dirichlet(&d, 100, alpha, 17).unwrap();
            let h = p.class_histograms(&d);
            h.iter().map(|x| entropy(x)).sum::<f64>() / h.len() as f64
        };
        assert!(mean_entropy(0.3) < mean_entropy(10.0));
    }

    #[test]
    fn dirichlet_full_covers_every_label() {
        let d = labelled(&[80, 120, 100]);
        let p = partition_dirichlet_full(&d, 10, 0.5, 1).unwrap();
        p.check().unwrap();
        for h in p.class_histograms(&d) {
            assert!(h.iter().all(|&x| x > 0), "{h:?}");
        }
        let even = partition_dirichlet_full(&d, 10, 1e6, 1).unwrap();
        for s in even.sizes() {
            assert!((s as f64 - 30.0).abs() <= 0.3 + 1.0, "size {s}");
        }
        assert!(partition_dirichlet_full(&labelled(&[5, 50]), 10, 1.0, 0).is_err());
    }

    #[test]
    fn dirichlet_full_mirrors_global_mix() {
        let d = labelled(&[3000, 1000]);
        let p = partition_dirichlet_full(&d, 5, 1e6, 2).unwrap();
        for h in p.class_histograms(&d) {
            let share = h[0] as f64 / (h[0] + h[1]) as f64;
            assert!((share - 0.75).abs() < 0.01, "{h:?}");
        }
    }

    #[test]
    fn shards_examples() {
        let d = labelled(&[100; 10]);
        let p = partition_shards(&d, 5, 2, 4).unwrap();
        p.check().unwrap();
        assert!(p.sizes().iter().all(|&s| s == 200));
        for h in p.class_histograms(&d) {
            assert_eq!(h.iter().filter(|&&x| x > 0).count(), 2);
        }
        assert!(partition_shards(&labelled(&[10, 0, 0]), 3, 2, 0).is_err());
        // one label would need more shards than there are clients
        assert!(partition_shards(&labelled(&[1000, 1]), 5, 2, 0).is_err());
    }

    #[test]
    fn class_imbalanced_pool_ratio() {
        let d = labelled(&[400; 10]);
        let p = partition_class_imbalanced(&d, 8, 300, 100, 0.3, 5).unwrap();
        p.check().unwrap();
        let mut totals = vec![0; 10];
        for h in p.class_histograms(&d) {
            for (t, x) in totals.iter_mut().zip(h) {
                *t += x;
            }
        }
        assert_eq!(totals, vec![300, 300, 300, 300, 300, 100, 100, 100, 100, 100]);
        assert!(partition_class_imbalanced(&d, 8, 500, 100, 0.3, 5).is_err());
        assert!(partition_class_imbalanced(&labelled(&[10; 3]), 2, 2, 1, 0.3, 5).is_err());
    }

    #[test]
    fn partitions_are_seed_deterministic() {
        let d = synth_blobs(4, 50, 2, 1.0, 0).unwrap();
        assert_eq!(
            partition_dirichlet(&d, 5, 0.5, 9).unwrap(),
            partition_dirichlet(&d, 5, 0.5, 9).unwrap()
        );
        assert_eq!(partition_shards(&d, 4, 2, 9).unwrap(), partition_shards(&d, 4, 2, 9).unwrap());
    }

    #[test]
    fn skewed_draws_succeed_at_full_scale() {
        // Dir(0.3) over 100 clients leaves some share under one sample in
        // practically every draw, so sizes must not rely on rejection
        let d = labelled(&[6000; 10]);
        for seed in 0..3 {
            let p = partition_dirichlet_full(&d, 100, 0.3, seed).unwrap();
            assert!(p.sizes().iter().all(|&s| s >= 10));
            let p = partition_class_imbalanced(&d, 100, 3000, 1000, 0.3, seed).unwrap();
            assert!(p.sizes().iter().all(|&s| s >= 1));
            assert_eq!(p.pool.len(), 20000);
        }
    }
}
