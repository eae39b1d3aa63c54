use serde::{Deserialize, Serialize};

use super::{check_binary, check_len, FairnessError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub s: u8,
    pub y: u8,
    pub count: usize,
    /// `P(s, y)`.
    pub joint: f64,
    /// `P(s | y)`.
    pub conditional: f64,
    /// Weight given to every row in this cell after normalisation.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightingPlan {
    /// Observed `(s, y)` cells ordered by `(s, y)`.
    pub cells: Vec<CellStat>,
    pub weights: Vec<f64>,
    /// Factor applied to the raw `1 / P(s|y)` weights so they sum to `n`.
    pub normalization: f64,
}

/// Instance weights `1 / P(s_i | y_i)`, rescaled to sum to `n`.
pub fn reweigh(y: &[u8], s: &[u8]) -> Result<ReweightingPlan, FairnessError> {
    check_len("sensitive", y.len(), s.len())?;
    check_binary("labels", y)?;
    check_binary("sensitive", s)?;
    let n = y.len();
    if n == 0 {
        return Err(FairnessError::Empty);
    }
    let mut count = [[0usize; 2]; 2]; // [s][y]
    for (&yi, &si) in y.iter().zip(s) {
        count[si as usize][yi as usize] += 1;
    }
    let nf = n as f64;
    let joint = |si: usize, yi: usize| count[si][yi] as f64 / nf;
    let p_y = |yi: usize| (count[0][yi] + count[1][yi]) as f64 / nf;
    let conditional = |si: usize, yi: usize| joint(si, yi) / p_y(yi);

    let raw: Vec<f64> = y
        .iter()
        .zip(s)
        .map(|(&yi, &si)| 1.0 / conditional(si as usize, yi as usize))
        .collect();
    let normalization = nf / raw.iter().sum::<f64>();
    let weights: Vec<f64> = raw.iter().map(|w| w * normalization).collect();

    let mut cells = Vec::new();
    for si in 0..2 {
        for yi in 0..2 {
            if count[si][yi] > 0 {
                cells.push(CellStat {
                    s: si as u8,
                    y: yi as u8,
                    count: count[si][yi],
                    joint: joint(si, yi),
                    conditional: conditional(si, yi),
                    weight: normalization / conditional(si, yi),
                });
            }
        }
    }
    Ok(ReweightingPlan {
        cells,
        weights,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_row_example() {
        let plan = reweigh(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        let expected = [0.5714, 1.7143, 0.8571, 0.8571];
        for (w, e) in plan.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-4, "{w} vs {e}");
        }
        assert!((plan.normalization - 4.0 / 7.0).abs() < 1e-15);
        assert!((plan.weights.iter().sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_is_identity() {
        let y = [0, 0, 1, 1, 0, 1, 0, 1];
        let s = [0, 1, 0, 1, 1, 0, 0, 1];
        let plan = reweigh(&y, &s).unwrap();
        assert!(plan.weights.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn single_group_is_uniform() {
        let plan = reweigh(&[0, 1, 1], &[1, 1, 1]).unwrap();
        assert!(plan.weights.iter().all(|&w| (w - 1.0).abs() < 1e-15));
        assert_eq!(plan.cells.len(), 2);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(reweigh(&[], &[]), Err(FairnessError::Empty)));
    }
}
