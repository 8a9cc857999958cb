//! Group fairness gaps under the convention that `Ŷ = 0` (credit granted) is the
//! favorable outcome and `Z = 1` marks the unprivileged group.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scores with labels, an optional binary group and optional sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [u8],
    pub group: Option<&'a [u8]>,
    pub weights: Option<&'a [f64]>,
}

impl<'a> EvalFrame<'a> {
    pub fn new(
        scores: &'a [f64],
        labels: &'a [u8],
        group: Option<&'a [u8]>,
        weights: Option<&'a [f64]>,
    ) -> Result<Self> {
        let n = scores.len();
        for len in [labels.len()]
            .into_iter()
            .chain(group.map(<[u8]>::len))
            .chain(weights.map(<[f64]>::len))
        {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if weights.is_some_and(|w| w.iter().any(|&v| !(v >= 0.0 && v.is_finite()))) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        Ok(Self {
            scores,
            labels,
            group,
            weights,
        })
    }
}

/// Weighted counts indexed `[z][y][ŷ]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellCounts(pub [[[f64; 2]; 2]; 2]);

impl CellCounts {
    fn sum(&self, z: usize, y: Option<usize>, yhat: Option<usize>) -> f64 {
        let mut s = 0.0;
        for yy in 0..2 {
            for pp in 0..2 {
                if y.is_none_or(|v| v == yy) && yhat.is_none_or(|v| v == pp) {
                    s += self.0[z][yy][pp];
                }
            }
        }
        s
    }
}

/// Group-conditional rates, `None` where the conditioning cell is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    /// `P(Ŷ=0 | Z)`.
    pub favorable: Option<f64>,
    /// `P(Ŷ=0 | Z, Y=y)` for `y = 0, 1`.
    pub favorable_given_label: [Option<f64>; 2],
    /// `P(Y=0 | Z, Ŷ=i)` for `i = 0, 1`.
    pub good_given_prediction: [Option<f64>; 2],
}

/// Signed differences (unprivileged minus privileged).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedGaps {
    pub dpd: Option<f64>,
    /// `D_i` for `i = 0, 1`; `D_0` is the signed equal-opportunity gap.
    pub odds: [Option<f64>; 2],
    /// Predictive-value differences for `Ŷ = 0, 1`.
    pub predictive_value: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub dpd: Option<f64>,
    pub eod: Option<f64>,
    pub aod: Option<f64>,
    pub apvd: Option<f64>,
    pub signed: SignedGaps,
    /// Rates for `Z = 0` and `Z = 1`.
    pub group_rates: [GroupRates; 2],
    pub cells: CellCounts,
    /// `None` when the report was built from predictions directly.
    pub threshold: Option<f64>,
    /// One entry per empty conditioning cell.
    pub diagnostics: Vec<String>,
}

impl FairnessReport {
    /// Value of a metric by its short name (`dpd`, `eod`, `aod`, `apvd`).
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "dpd" => self.dpd,
            "eod" => self.eod,
            "aod" => self.aod,
            "apvd" => self.apvd,
            _ => None,
        }
    }
}

/// Fairness gaps of the thresholded scores (`Ŷ = 1` iff score ≥ threshold).
pub fn fairness_report(frame: &EvalFrame<'_>, threshold: f64) -> Result<FairnessReport> {
    let preds: Vec<u8> = frame.scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let group = frame
        .group
        .ok_or_else(|| Error::invalid("fairness metrics need a group vector"))?;
    let mut r = fairness_from_predictions(&preds, frame.labels, group, frame.weights)?;
    r.threshold = Some(threshold);
    Ok(r)
}

/// Fairness gaps of given binary predictions.
pub fn fairness_from_predictions(
    predictions: &[u8],
    labels: &[u8],
    group: &[u8],
    weights: Option<&[f64]>,
) -> Result<FairnessReport> {
    let n = predictions.len();
    for len in [labels.len(), group.len()].into_iter().chain(weights.map(<[f64]>::len)) {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let mut cells = CellCounts::default();
    for i in 0..n {
        let (z, y, p) = (group[i], labels[i], predictions[i]);
        if z > 1 || y > 1 || p > 1 {
            return Err(Error::invalid(format!("non-binary group/label/prediction at row {i}")));
        }
        cells.0[z as usize][y as usize][p as usize] += weights.map_or(1.0, |w| w[i]);
    }
    if cells.sum(0, None, None) == 0.0 || cells.sum(1, None, None) == 0.0 {
        return Err(Error::EmptyCell("both groups must be non-empty".into()));
    }

    let mut diagnostics = Vec::new();
    let mut ratio = |num: f64, den: f64, what: String| {
        if den > 0.0 {
            Some(num / den)
        } else {
            diagnostics.push(format!("empty cell {what}: count 0"));
            None
        }
    };
    let mut rates = [GroupRates::default(); 2];
    for (z, r) in rates.iter_mut().enumerate() {
        r.favorable = ratio(
            cells.sum(z, None, Some(0)),
            cells.sum(z, None, None),
            format!("Z={z}"),
        );
        for y in 0..2 {
            r.favorable_given_label[y] = ratio(
                cells.0[z][y][0],
                cells.sum(z, Some(y), None),
                format!("Z={z},Y={y}"),
            );
        }
        for p in 0..2 {
            r.good_given_prediction[p] = ratio(
                cells.0[z][0][p],
                cells.sum(z, None, Some(p)),
                format!("Z={z},Yhat={p}"),
            );
        }
    }
    let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    let signed = SignedGaps {
        dpd: diff(rates[1].favorable, rates[0].favorable),
        odds: [0, 1].map(|y| {
            diff(
                rates[1].favorable_given_label[y],
                rates[0].favorable_given_label[y],
            )
        }),
        predictive_value: [0, 1].map(|p| {
            diff(
                rates[1].good_given_prediction[p],
                rates[0].good_given_prediction[p],
            )
        }),
    };
    let mean = |a: [Option<f64>; 2]| Some(((a[0]? + a[1]?) / 2.0).abs());
    Ok(FairnessReport {
        dpd: signed.dpd.map(f64::abs),
        eod: signed.odds[0].map(f64::abs),
        aod: mean(signed.odds),
        apvd: mean(signed.predictive_value),
        signed,
        group_rates: rates,
        cells,
        threshold: None,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_predictions_are_fair() {
        // identical label and prediction patterns in both groups
        let y = [0, 0, 1, 1, 0, 0, 1, 1];
        let p = [0, 1, 0, 1, 0, 1, 0, 1];
        let z = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = fairness_from_predictions(&p, &y, &z, None).unwrap();
        assert_eq!(r.dpd, Some(0.0));
        assert_eq!(r.eod, Some(0.0));
        assert_eq!(r.aod, Some(0.0));
        assert_eq!(r.apvd, Some(0.0));
    }

    #[test]
    fn acceptance_gap_gives_dpd() {
        let z: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        // group 0 accepts 8/10, group 1 accepts 6/10
        let p: Vec<u8> = (0..20)
            .map(|i| if i < 10 { u8::from(i >= 8) } else { u8::from(i >= 16) })
            .collect();
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let r = fairness_from_predictions(&p, &y, &z, None).unwrap();
        assert!((r.dpd.unwrap() - 0.2).abs() < 1e-15);
        assert!(r.signed.dpd.unwrap() < 0.0);
    }

    #[test]
    fn empty_cell_is_reported_not_zero() {
        let y = [0, 0, 0, 1];
        let p = [0, 1, 0, 1];
        let z = [0, 0, 1, 1];
        let r = fairness_from_predictions(&p, &y, &z, None).unwrap();
        // Z=0 has no Y=1 rows
        assert!(r.aod.is_none());
        assert!(r.eod.is_some());
        assert!(r.diagnostics.iter().any(|d| d.contains("Z=0,Y=1")));
    }

    #[test]
    fn threshold_convention() {
        let frame = EvalFrame::new(&[0.2, 0.6, 0.2, 0.6], &[0, 1, 0, 1], Some(&[0, 0, 1, 1]), None)
            .unwrap();
        let r = fairness_report(&frame, 0.6).unwrap();
        assert_eq!(r.group_rates[0].favorable, Some(0.5));
        assert_eq!(r.threshold, Some(0.6));
    }
}
