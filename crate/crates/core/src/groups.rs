//! Group partitions of coordinate indices and group-level primitives.
//!
//! A [`GroupPartition`] is a disjoint cover of `[0, n)` by nonempty index
//! sets; a [`GroupVector`] is a real vector of length `n` tied to one. Groups
//! are stored as explicit index lists so block-structured and arbitrary
//! partitions share one code path.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for deciding whether a group counts as nonzero:
/// solver outputs are never exactly zero.
pub const DEFAULT_SPARSITY_TOL: f64 = 1e-8;

/// Disjoint cover of the coordinates `[0, n)` by ordered nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Build a partition, validating disjointness and exact coverage of `[0, n)`.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("n must be positive".into()));
        }
        if groups.is_empty() {
            return Err(Error::InvalidPartition("need at least one group".into()));
        }
        let mut seen = vec![false; n];
        let mut covered = 0usize;
        for (gi, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidPartition(format!("group {gi} is empty")));
            }
            for &idx in g {
                if idx >= n {
                    return Err(Error::InvalidPartition(format!(
                        "group {gi} contains index {idx} >= n = {n}"
                    )));
                }
                if seen[idx] {
                    return Err(Error::InvalidPartition(format!(
                        "index {idx} appears in more than one group"
                    )));
                }
                seen[idx] = true;
                covered += 1;
            }
        }
        if covered != n {
            return Err(Error::InvalidPartition(format!(
                "groups cover {covered} of {n} coordinates"
            )));
        }
        Ok(Self { n, groups })
    }

    /// One group containing every coordinate.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(n, vec![(0..n).collect()])
    }

    /// Every coordinate its own group.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
    }

    /// Partition of the entries of a `rows x cols` matrix (flattened row-major,
    /// entry (r, c) at index `r * cols + c`) into `block_size x block_size`
    /// tiles, tiles ordered row-major. Edges that do not divide evenly become
    /// smaller ragged groups.
    pub fn blocks(rows: usize, cols: usize, block_size: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || block_size == 0 {
            return Err(Error::InvalidPartition(
                "rows, cols and block_size must be positive".into(),
            ));
        }
        let tiles_r = rows.div_ceil(block_size);
        let tiles_c = cols.div_ceil(block_size);
        let mut groups = Vec::with_capacity(tiles_r * tiles_c);
        for tr in 0..tiles_r {
            for tc in 0..tiles_c {
                let r0 = tr * block_size;
                let c0 = tc * block_size;
                let r1 = (r0 + block_size).min(rows);
                let c1 = (c0 + block_size).min(cols);
                let mut g = Vec::with_capacity((r1 - r0) * (c1 - c0));
                for r in r0..r1 {
                    for c in c0..c1 {
                        g.push(r * cols + c);
                    }
                }
                groups.push(g);
            }
        }
        Self::new(rows * cols, groups)
    }

    /// Number of coordinates.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of groups.
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// The index list of group `i`.
    pub fn group(&self, i: usize) -> &[usize] {
        &self.groups[i]
    }

    /// All groups in order.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Per-group Euclidean norms of a raw coefficient slice.
    pub fn group_norms_of(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        Ok(self
            .groups
            .iter()
            .map(|g| g.iter().map(|&i| values[i] * values[i]).sum::<f64>().sqrt())
            .collect())
    }
}

/// Serializable partition description used inside config files: either an
/// explicit list of index lists or a `{"block": {...}}` shorthand expanded
/// deterministically in row-major tile order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PartitionSpec {
    Block { block: BlockSpec },
    Explicit(Vec<Vec<usize>>),
}

/// Block-tiling shorthand for partitioning a 2D matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlockSpec {
    pub rows: usize,
    pub cols: usize,
    pub block_size: usize,
}

impl PartitionSpec {
    /// Expand the description into a validated partition. Explicit specs must
    /// state the coordinate count they cover.
    pub fn build(&self) -> Result<GroupPartition> {
        match self {
            PartitionSpec::Block { block } => {
                GroupPartition::blocks(block.rows, block.cols, block.block_size)
            }
            PartitionSpec::Explicit(groups) => {
                let n = groups.iter().flatten().count();
                GroupPartition::new(n, groups.clone())
            }
        }
    }
}

/// A real vector of length `partition.n()` tied to its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupVector {
    partition: Arc<GroupPartition>,
    values: Vec<f64>,
}

impl GroupVector {
    pub fn new(partition: Arc<GroupPartition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.n() {
            return Err(Error::DimensionMismatch {
                expected: partition.n(),
                got: values.len(),
            });
        }
        Ok(Self { partition, values })
    }

    pub fn zeros(partition: Arc<GroupPartition>) -> Self {
        let n = partition.n();
        Self {
            partition,
            values: vec![0.0; n],
        }
    }

    pub fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Per-group Euclidean norms; entry `i` is the norm of the restriction to
    /// group `i`.
    pub fn group_norms(&self) -> Vec<f64> {
        self.partition
            .groups()
            .iter()
            .map(|g| norm2_over(&self.values, g))
            .collect()
    }

    /// Number of groups whose norm exceeds `tol`.
    pub fn group_sparsity(&self, tol: f64) -> usize {
        self.group_norms().iter().filter(|&&nrm| nrm > tol).count()
    }

    /// Zero out every coordinate outside the union of the named groups.
    pub fn restrict(&self, group_set: &[usize]) -> Result<GroupVector> {
        let t = self.partition.num_groups();
        let mut out = vec![0.0; self.values.len()];
        for &g in group_set {
            if g >= t {
                return Err(Error::GroupIndexOutOfRange { index: g, t });
            }
            for &i in self.partition.group(g) {
                out[i] = self.values[i];
            }
        }
        GroupVector::new(self.partition.clone(), out)
    }
}

fn norm2_over(values: &[f64], indices: &[usize]) -> f64 {
    indices
        .iter()
        .map(|&i| values[i] * values[i])
        .sum::<f64>()
        .sqrt()
}

/// Indices of the `k` largest scores, ties broken by lower index first.
/// The returned indices are sorted ascending.
pub fn top_k_groups(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    let t = scores.len();
    if k > t {
        return Err(Error::KExceedsGroupCount { k, t });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..t).collect();
    // stable sort by descending score keeps lower indices first on ties
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut picked: Vec<usize> = order.into_iter().take(k).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Argmax over scores with lowest-index tie-breaking.
pub fn argmax_lowest(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some((i, s)),
            Some((_, bs)) if s > bs => best = Some((i, s)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

/// Argmin over scores with lowest-index tie-breaking.
pub fn argmin_lowest(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some((i, s)),
            Some((_, bs)) if s < bs => best = Some((i, s)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_group_partition() -> Arc<GroupPartition> {
        Arc::new(GroupPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap())
    }

    #[test]
    fn rejects_overlap_gap_and_empty() {
        assert!(GroupPartition::new(4, vec![vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(GroupPartition::new(4, vec![vec![0, 1], vec![3]]).is_err());
        assert!(GroupPartition::new(4, vec![vec![0, 1, 2, 3], vec![]]).is_err());
        assert!(GroupPartition::new(4, vec![vec![0, 1], vec![2, 4]]).is_err());
        assert!(GroupPartition::new(0, vec![vec![]]).is_err());
    }

    #[test]
    fn group_norms_on_zero_vector_are_zero() {
        let p = two_group_partition();
        let v = GroupVector::zeros(p);
        assert_eq!(v.group_norms(), vec![0.0, 0.0]);
    }

    #[test]
    fn group_norms_direct_values() {
        // sqrt(3^2+4^2) = 5, sqrt(0^2+1^2) = 1
        let p = two_group_partition();
        let v = GroupVector::new(p, vec![3.0, 4.0, 0.0, 1.0]).unwrap();
        let norms = v.group_norms();
        assert!((norms[0] - 5.0).abs() < 1e-15);
        assert!((norms[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_group_norm_is_full_norm() {
        let p = Arc::new(GroupPartition::single(3).unwrap());
        let v = GroupVector::new(p, vec![1.0, 2.0, 2.0]).unwrap();
        assert_eq!(v.group_norms(), vec![3.0]);
    }

    #[test]
    fn group_sparsity_with_tolerance() {
        let p = two_group_partition();
        let zero = GroupVector::zeros(p.clone());
        assert_eq!(zero.group_sparsity(0.0), 0);
        let v = GroupVector::new(p, vec![3.0, 4.0, 0.0, 1.0]).unwrap();
        assert_eq!(v.group_sparsity(0.0), 2);
        assert_eq!(v.group_sparsity(2.0), 1);
    }

    #[test]
    fn top_k_selects_largest_and_breaks_ties_low() {
        assert_eq!(top_k_groups(&[1.0, 5.0, 3.0], 1).unwrap(), vec![1]);
        assert_eq!(top_k_groups(&[2.0, 2.0, 1.0], 1).unwrap(), vec![0]);
        assert_eq!(top_k_groups(&[1.0, 5.0, 3.0], 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            top_k_groups(&[1.0], 2),
            Err(Error::KExceedsGroupCount { .. })
        ));
    }

    #[test]
    fn restrict_keeps_named_groups_only() {
        let p = two_group_partition();
        let v = GroupVector::new(p, vec![3.0, 4.0, 0.0, 1.0]).unwrap();
        assert_eq!(v.restrict(&[0, 1]).unwrap().values(), v.values());
        assert_eq!(v.restrict(&[]).unwrap().values(), &[0.0; 4]);
        assert_eq!(v.restrict(&[1]).unwrap().values(), &[0.0, 0.0, 0.0, 1.0]);
        assert!(v.restrict(&[2]).is_err());
    }

    #[test]
    fn restrict_is_idempotent() {
        let p = two_group_partition();
        let v = GroupVector::new(p, vec![3.0, 4.0, 0.5, 1.0]).unwrap();
        let once = v.restrict(&[1]).unwrap();
        let twice = once.restrict(&[1]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn block_partition_row_major_tiles() {
        // 4x4 matrix, 2x2 tiles -> 4 groups in row-major tile order
        let p = GroupPartition::blocks(4, 4, 2).unwrap();
        assert_eq!(p.num_groups(), 4);
        assert_eq!(p.group(0), &[0, 1, 4, 5]);
        assert_eq!(p.group(1), &[2, 3, 6, 7]);
        assert_eq!(p.group(2), &[8, 9, 12, 13]);
        assert_eq!(p.group(3), &[10, 11, 14, 15]);
    }

    #[test]
    fn block_partition_ragged_edges() {
        // 3x5 with block 2: tile grid is 2x3, edge tiles smaller
        let p = GroupPartition::blocks(3, 5, 2).unwrap();
        assert_eq!(p.num_groups(), 6);
        assert_eq!(p.group(0), &[0, 1, 5, 6]);
        assert_eq!(p.group(2), &[4, 9]); // last column tile: width 1
        assert_eq!(p.group(5), &[14]); // bottom-right corner: 1x1
        let total: usize = p.groups().iter().map(|g| g.len()).sum();
        assert_eq!(total, 15);
    }

    #[test]
    fn partition_spec_roundtrip() {
        let spec: PartitionSpec =
            serde_json::from_str(r#"{"block": {"rows": 4, "cols": 4, "block_size": 2}}"#).unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.num_groups(), 4);

        let spec: PartitionSpec = serde_json::from_str(r#"[[0, 1], [2, 3]]"#).unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.num_groups(), 2);
        assert_eq!(p.n(), 4);
    }
}
