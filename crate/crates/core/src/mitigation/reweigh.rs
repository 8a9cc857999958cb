use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weights `W[y][z] = P(y)·P(z) / P(y, z)` from empirical frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReweighTable {
    pub w: [[f64; 2]; 2],
    /// Cell counts `[y][z]`.
    pub counts: [[usize; 2]; 2],
}

impl ReweighTable {
    pub fn weight(&self, y: u8, z: u8) -> f64 {
        self.w[y as usize][z as usize]
    }
}

/// Reweighing table and the matching per-sample weights.
pub fn reweigh(labels: &[u8], group: &[u8]) -> Result<(ReweighTable, Vec<f64>)> {
    if labels.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: group.len(),
        });
    }
    let mut counts = [[0usize; 2]; 2];
    for (&y, &z) in labels.iter().zip(group) {
        if y > 1 || z > 1 {
            return Err(Error::invalid("labels and groups must be binary"));
        }
        counts[y as usize][z as usize] += 1;
    }
    let n = labels.len();
    let mut w = [[0.0; 2]; 2];
    for y in 0..2 {
        for z in 0..2 {
            if counts[y][z] == 0 {
                return Err(Error::EmptyCell(format!("no samples with Y={y}, Z={z}")));
            }
            let ny = counts[y][0] + counts[y][1];
            let nz = counts[0][z] + counts[1][z];
            // integer products keep exact cases exact
            w[y][z] = (ny * nz) as f64 / (n * counts[y][z]) as f64;
        }
    }
    let table = ReweighTable { w, counts };
    let per_sample = labels.iter().zip(group).map(|(&y, &z)| table.weight(y, z)).collect();
    Ok((table, per_sample))
}
