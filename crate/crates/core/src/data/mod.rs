//! In-memory labelled datasets, synthetic data, noise injection and the
//! non-IID client partitioners.

mod partition;

pub use partition::{
    largest_remainder, partition_class_imbalanced, partition_dirichlet, partition_dirichlet_full,
    partition_shards, ClientPartition, MAX_REDRAWS,
};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Labelled samples over `classes` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Tensor>,
    labels: Vec<usize>,
    classes: usize,
    /// Free-form name, used in reports.
    pub name: String,
}

impl Dataset {
    /// Checks that samples and labels line up, labels are in range and
    /// every sample has the same shape.
    pub fn new(
        samples: Vec<Tensor>,
        labels: Vec<usize>,
        classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(invalid(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(invalid(format!("label {bad} out of range for {classes} classes")));
        }
        if let Some(first) = samples.first() {
            if let Some(odd) = samples.iter().find(|s| s.shape() != first.shape()) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", first.shape()),
                    actual: format!("{:?}", odd.shape()),
                });
            }
        }
        Ok(Self { samples, labels, classes, name: name.into() })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Category count `C`.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// All samples.
    pub fn samples(&self) -> &[Tensor] {
        &self.samples
    }

    /// All labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Flattened length of one sample (0 for an empty dataset).
    pub fn sample_len(&self) -> usize {
        self.samples.first().map_or(0, Tensor::len)
    }

    /// Samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Indices of each class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    /// New dataset made of the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(invalid(format!("index {bad} out of range for {} samples", self.len())));
        }
        Ok(Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            name: self.name.clone(),
        })
    }

    /// View over the whole dataset.
    pub fn view(&self) -> DataView<'_> {
        DataView { dataset: self, indices: None }
    }

    /// View over a subset of indices.
    pub fn subset<'a>(&'a self, indices: &'a [usize]) -> DataView<'a> {
        DataView { dataset: self, indices: Some(indices) }
    }
}

/// Borrowed window onto a dataset: either all of it or an index list.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    dataset: &'a Dataset,
    indices: Option<&'a [usize]>,
}

impl<'a> DataView<'a> {
    /// Number of samples in the view.
    pub fn len(&self) -> usize {
        self.indices.map_or(self.dataset.len(), <[usize]>::len)
    }

    /// True for an empty view.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Category count of the underlying dataset.
    pub fn classes(&self) -> usize {
        self.dataset.classes
    }

    /// The `i`-th `(sample, label)` pair of the view.
    pub fn get(&self, i: usize) -> (&'a Tensor, usize) {
        let j = self.indices.map_or(i, |idx| idx[i]);
        (&self.dataset.samples[j], self.dataset.labels[j])
    }

    /// Iterates `(sample, label)` pairs in view order.
    pub fn iter(&self) -> impl Iterator<Item = (&'a Tensor, usize)> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Samples per class in the view.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for (_, y) in self.iter() {
            counts[y] += 1;
        }
        counts
    }
}

/// `classes` isotropic unit-variance Gaussian clusters of `n_per_class`
/// points each in `dim` dimensions, with centres pairwise `separation`
/// apart.
///
/// When `dim >= classes` the centres are `separation / sqrt(2)` times the
/// first `classes` unit vectors, so they are exactly equidistant. With
/// fewer dimensions the centres sit on seeded random directions at the
/// same radius, which only makes them approximately equidistant.
/// Labels cycle `0, 1, .., C-1, 0, ..`.
pub fn synth_blobs(
    classes: usize,
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(invalid("synthetic data needs at least 2 classes"));
    }
    if n_per_class == 0 || dim == 0 {
        return Err(invalid("n_per_class and dim must be positive"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(invalid("separation must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = separation / core::f64::consts::SQRT_2;
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            if dim >= classes {
                let mut v = vec![0.0; dim];
                v[c] = radius;
                v
            } else {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
                v.iter_mut().for_each(|x| *x *= radius / norm.max(f64::MIN_POSITIVE));
                v
            }
        })
        .collect();
    let total = classes * n_per_class;
    let mut samples = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let c = i % classes;
        let values = centres[c].iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
        samples.push(Tensor::from_vec(values));
        labels.push(c);
    }
    Dataset::new(samples, labels, classes, format!("blobs-c{classes}-d{dim}"))
}

/// Adds Gaussian noise scaled per sample so that
/// `||noise|| = rate * ||sample||`. A zero rate returns an identical copy
/// and all-zero samples are left unchanged.
pub fn add_gaussian_noise(dataset: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(invalid("noise rate must be finite and non-negative"));
    }
    let mut out = dataset.clone();
    if rate == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in &mut out.samples {
        let noise: Vec<f64> = (0..sample.len()).map(|_| rng.sample(StandardNormal)).collect();
        let target = rate * sample.l2_norm();
        let noise_norm = libm::sqrt(noise.iter().map(|x| x * x).sum());
        if target == 0.0 || noise_norm == 0.0 {
            continue;
        }
        let scale = target / noise_norm;
        for (x, n) in sample.values_mut().iter_mut().zip(&noise) {
            *x += n * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let d = synth_blobs(3, 100, 4, 5.0, 9).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.class_counts(), vec![100, 100, 100]);
        assert_eq!(d, synth_blobs(3, 100, 4, 5.0, 9).unwrap());
        assert_ne!(d, synth_blobs(3, 100, 4, 5.0, 10).unwrap());
        assert!(synth_blobs(1, 10, 4, 5.0, 0).is_err());
    }

    #[test]
    fn well_separated_blobs_are_centroid_separable() {
        // nearest-centroid oracle using empirical class means
        for classes in [3, 5] {
            let d = synth_blobs(classes, 200, 5, 10.0, 4).unwrap();
            let mut means = vec![vec![0.0; 5]; classes];
            for (x, &y) in d.samples().iter().zip(d.labels()) {
                for (m, v) in means[y].iter_mut().zip(x.values()) {
                    *m += v / 200.0;
                }
            }
            let correct = d
                .samples()
                .iter()
                .zip(d.labels())
                .filter(|(x, &y)| {
                    let dist = |m: &Vec<f64>| {
                        m.iter().zip(x.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    };
                    let best = (0..classes)
                        .min_by(|&a, &b| dist(&means[a]).partial_cmp(&dist(&means[b])).unwrap())
                        .unwrap();
                    best == y
                })
                .count();
            assert_eq!(correct, d.len(), "classes={classes}");
        }
    }

    #[test]
    fn noise_has_requested_relative_norm() {
        let d = synth_blobs(3, 20, 6, 3.0, 1).unwrap();
        let same = add_gaussian_noise(&d, 0.0, 5).unwrap();
        assert_eq!(same, d);
        let noisy = add_gaussian_noise(&d, 0.5, 5).unwrap();
        assert_eq!(noisy.labels(), d.labels());
        for (a, b) in noisy.samples().iter().zip(d.samples()) {
            let diff: f64 = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!((diff / b.l2_norm() - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_sample_is_left_alone() {
        let d = Dataset::new(vec![Tensor::from_vec(vec![0.0; 4])], vec![0], 2, "z").unwrap();
        assert_eq!(add_gaussian_noise(&d, 0.5, 1).unwrap(), d);
        assert!(add_gaussian_noise(&d, -0.1, 1).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = Tensor::from_vec(vec![1.0]);
        assert!(Dataset::new(vec![x.clone()], vec![2], 2, "bad").is_err());
        assert!(Dataset::new(vec![x.clone()], vec![], 2, "bad").is_err());
        let y = Tensor::from_vec(vec![1.0, 2.0]);
        assert!(Dataset::new(vec![x, y], vec![0, 1], 2, "bad").is_err());
    }

    #[test]
    fn views() {
        let d = synth_blobs(2, 3, 2, 1.0, 0).unwrap();
        let idx = [5, 0, 2];
        let v = d.subset(&idx);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get(0).1, d.labels()[5]);
        assert_eq!(v.class_counts().iter().sum::<usize>(), 3);
        assert_eq!(d.view().len(), 6);
    }
}
