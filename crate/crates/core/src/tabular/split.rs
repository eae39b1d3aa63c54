use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataTable, TabularError};

/// Stratification key combining label and audited attribute.
pub fn composite_key(y: u8, s: u8) -> u8 {
    2 * y + s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            fractions: [0.6, 0.2, 0.2],
            seed: 42,
        }
    }
}

impl SplitPlan {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), TabularError> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(*f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(TabularError::InvalidFractions(self.fractions.to_vec()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: DataTable,
    pub validation: DataTable,
    pub test: DataTable,
    /// Row positions (in the source table) of train, validation and test.
    pub positions: [Vec<usize>; 3],
}

impl Split {
    /// Serializable record of which source rows landed where.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "train": self.train.row_ids,
            "validation": self.validation.row_ids,
            "test": self.test.row_ids,
        })
    }

    pub fn fingerprint(&self) -> String {
        crate::hashing::content_hash(&self.manifest()).expect("manifest serializes")
    }
}

/// Largest-remainder allocation of `n` items over `fractions`, with every
/// part guaranteed at least one item when `n >= fractions.len()`.
pub fn allocate_counts(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // Stable sort keeps lower indices first on equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    for &k in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[k] += 1;
        remaining -= 1;
    }
    if n >= fractions.len() {
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..counts.len())
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("non-empty");
            counts[donor] -= 1;
            counts[empty] += 1;
        }
    }
    counts
}

/// Split into train/validation/test, stratified on `z = 2*y + s`.
///
/// Each stratum is shuffled with a single seeded stream (strata visited in
/// increasing `z`) and sliced contiguously. Partitions keep source order.
pub fn stratified_split(table: &DataTable, plan: &SplitPlan) -> Result<Split, TabularError> {
    plan.validate()?;
    if table.n_rows() < 10 {
        return Err(TabularError::TooFewRows(table.n_rows()));
    }
    let y = table.labels();
    let s = table.sensitive();
    let mut strata: [Vec<usize>; 4] = Default::default();
    for i in 0..table.n_rows() {
        strata[composite_key(y[i], s[i]) as usize].push(i);
    }
    for (z, members) in strata.iter().enumerate() {
        if !members.is_empty() && members.len() < 3 {
            return Err(TabularError::StratumTooSmall {
                z: z as u8,
                count: members.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for members in strata.iter_mut() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let counts = allocate_counts(members.len(), &plan.fractions);
        let mut start = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    Ok(Split {
        train: table.select(&parts[0]),
        validation: table.select(&parts[1]),
        test: table.select(&parts[2]),
        positions: parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Cell, ColumnSchema, Schema};

    fn table_with_strata(counts: [usize; 4]) -> DataTable {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("x"),
            ColumnSchema::sensitive("s"),
            ColumnSchema::target("y"),
        ])
        .unwrap();
        let mut rows = Vec::new();
        for (z, &n) in counts.iter().enumerate() {
            for k in 0..n {
                let (y, s) = ((z / 2) as f64, (z % 2) as f64);
                rows.push(vec![Cell::Number(k as f64), Cell::Number(s), Cell::Number(y)]);
            }
        }
        DataTable::new(schema, rows).unwrap()
    }

    #[test]
    fn composite_key_values() {
        assert_eq!(composite_key(1, 1), 3);
        assert_eq!(composite_key(0, 0), 0);
        assert_eq!(composite_key(1, 0), 2);
    }

    #[test]
    fn balanced_hundred_rows_split_exactly() {
        let t = table_with_strata([25, 25, 25, 25]);
        let split = stratified_split(&t, &SplitPlan::default()).unwrap();
        assert_eq!(split.train.n_rows(), 60);
        assert_eq!(split.validation.n_rows(), 20);
        assert_eq!(split.test.n_rows(), 20);
        for part in [&split.train, &split.validation, &split.test] {
            let y = part.labels();
            let s = part.sensitive();
            let mut per = [0usize; 4];
            for i in 0..part.n_rows() {
                per[composite_key(y[i], s[i]) as usize] += 1;
            }
            let expected = part.n_rows() / 4;
            assert_eq!(per, [expected; 4]);
        }
    }

    #[test]
    fn same_seed_same_partitions() {
        let t = table_with_strata([30, 11, 17, 40]);
        let a = stratified_split(&t, &SplitPlan::default()).unwrap();
        let b = stratified_split(&t, &SplitPlan::default()).unwrap();
        assert_eq!(a.positions, b.positions);
        let c = stratified_split(&t, &SplitPlan::with_seed(7)).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn tiny_stratum_is_rejected() {
        let t = table_with_strata([10, 2, 10, 10]);
        assert!(matches!(
            stratified_split(&t, &SplitPlan::default()),
            Err(TabularError::StratumTooSmall { z: 1, count: 2 })
        ));
    }

    #[test]
    fn three_row_stratum_reaches_every_partition() {
        assert_eq!(allocate_counts(3, &[0.6, 0.2, 0.2]), vec![1, 1, 1]);
        assert_eq!(allocate_counts(4, &[0.6, 0.2, 0.2]), vec![2, 1, 1]);
        assert_eq!(allocate_counts(25, &[0.6, 0.2, 0.2]), vec![15, 5, 5]);
        assert_eq!(allocate_counts(7, &[0.6, 0.2, 0.2]), vec![4, 2, 1]);
    }

    #[test]
    fn too_few_rows() {
        let t = table_with_strata([3, 3, 3, 0]);
        assert!(matches!(
            stratified_split(&t, &SplitPlan::default()),
            Err(TabularError::TooFewRows(9))
        ));
    }
}
