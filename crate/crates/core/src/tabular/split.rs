//! Seeded, stratified train/validation/test splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::table::Table;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    /// Train, validation and test fractions; must sum to 1.
    pub fractions: [f64; 3],
    pub n_repeats: usize,
    /// Draw the test part once and re-split only train/validation per repeat.
    pub fixed_test: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            fractions: [0.6, 0.2, 0.2],
            n_repeats: 1,
            fixed_test: false,
        }
    }
}

/// Row indices of one repeat, each part sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split(table: &Table, spec: &SplitSpec) -> Result<Vec<SplitIndices>> {
    split_labels(table.labels(), spec)
}

/// Part sizes by largest remainder so they sum to `n` exactly.
fn part_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[k] += 1;
        rest -= 1;
    }
    sizes
}

/// Splits `pool` (row indices) into parts of the given fractions, stratified on `labels`.
fn stratified(
    labels: &[u8],
    pool: &[usize],
    fractions: &[f64],
    rng: &mut rng::Rng,
) -> Result<Vec<Vec<usize>>> {
    let n = pool.len();
    let mut pos: Vec<usize> = pool.iter().copied().filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = pool.iter().copied().filter(|&i| labels[i] == 0).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let n1 = pos.len();
    let sizes = part_sizes(n, fractions);
    // positives per part: rounded share for all but the first part, which takes the rest
    let mut pos_counts = vec![0usize; sizes.len()];
    for k in 1..sizes.len() {
        pos_counts[k] = ((sizes[k] * n1) as f64 / n as f64).round() as usize;
    }
    let taken: usize = pos_counts[1..].iter().sum();
    if taken > n1 {
        return Err(Error::Stratification(
            "not enough positives for the requested parts".into(),
        ));
    }
    pos_counts[0] = n1 - taken;
    let mut parts = Vec::with_capacity(sizes.len());
    let (mut pi, mut ni) = (0, 0);
    for (k, &size) in sizes.iter().enumerate() {
        let p = pos_counts[k];
        if p > size || ni + (size - p) > neg.len() {
            return Err(Error::Stratification(format!(
                "part {k} cannot hold {p} positives in {size} rows"
            )));
        }
        let mut part: Vec<usize> = pos[pi..pi + p].to_vec();
        part.extend_from_slice(&neg[ni..ni + size - p]);
        pi += p;
        ni += size - p;
        if part.iter().all(|&i| labels[i] == 1) || part.iter().all(|&i| labels[i] == 0) {
            return Err(Error::Stratification(format!(
                "split part {k} of size {size} would contain a single class"
            )));
        }
        part.sort_unstable();
        parts.push(part);
    }
    Ok(parts)
}

/// Stratified splits on a label vector; the same seed gives identical indices.
pub fn split_labels(labels: &[u8], spec: &SplitSpec) -> Result<Vec<SplitIndices>> {
    let total: f64 = spec.fractions.iter().sum();
    if spec.fractions.iter().any(|&f| !(0.0..=1.0).contains(&f) || f == 0.0)
        || (total - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(format!(
            "split fractions must be positive and sum to 1, got {:?}",
            spec.fractions
        )));
    }
    if spec.n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be at least 1"));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut out = Vec::with_capacity(spec.n_repeats);
    if spec.fixed_test {
        let mut r = rng::stream(spec.seed, "split-test");
        let outer = stratified(
            labels,
            &all,
            &[1.0 - spec.fractions[2], spec.fractions[2]],
            &mut r,
        )?;
        let (rest, test) = (&outer[0], &outer[1]);
        let tv = spec.fractions[0] + spec.fractions[1];
        for rep in 0..spec.n_repeats {
            let mut r = rng::substream(spec.seed, "split-repeat", rep as u64);
            let parts = stratified(
                labels,
                rest,
                &[spec.fractions[0] / tv, spec.fractions[1] / tv],
                &mut r,
            )?;
            out.push(SplitIndices {
                train: parts[0].clone(),
                valid: parts[1].clone(),
                test: test.clone(),
            });
        }
    } else {
        for rep in 0..spec.n_repeats {
            let mut r = rng::substream(spec.seed, "split-repeat", rep as u64);
            let mut parts = stratified(labels, &all, &spec.fractions, &mut r)?.into_iter();
            out.push(SplitIndices {
                train: parts.next().unwrap(),
                valid: parts.next().unwrap(),
                test: parts.next().unwrap(),
            });
        }
    }
    Ok(out)
}
