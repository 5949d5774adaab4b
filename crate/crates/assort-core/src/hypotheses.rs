//! Null sets for hypotheses about the optimal assortment.
//!
//! Because the optimal assortment is the prefix {1, …, K*}, any property of
//! the assortment is equivalent to "K* ∈ K₀" for some K₀ ⊆ {1, …, n}. The
//! builders here translate common merchandising questions into their K₀;
//! [`PropertySet::from_predicate`] covers everything else.

use crate::error::{Error, Result};

/// A null set K₀ ⊆ {1, …, n} with a human-readable label for reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertySet {
    n: usize,
    members: Vec<usize>,
    label: String,
}

impl PropertySet {
    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>, label: impl Into<String>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.iter().any(|&k| k == 0 || k > n) {
            return Err(Error::InvalidInput(format!(
                "null-set members must lie in 1..={n}"
            )));
        }
        Ok(PropertySet { n, members, label: label.into() })
    }

    /// K₀ = {k ∈ 1..=n : pred(k)}.
    pub fn from_predicate(n: usize, label: impl Into<String>, pred: impl Fn(usize) -> bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        Self::from_members(n, (1..=n).filter(|&k| pred(k)), label)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members.binary_search(&k).is_ok()
    }

    /// An empty K₀ is a degenerate null: the test rejects it unconditionally.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// min_{k ∈ K₀} |j − k|; how far an assortment size sits from the null.
    /// Returns None for an empty null set.
    pub fn distance(&self, j: usize) -> Option<usize> {
        self.members.iter().map(|&k| k.abs_diff(j)).min()
    }
}

fn check_group(n: usize, a: &[usize]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidInput("product group must be nonempty".into()));
    }
    if a.iter().any(|&i| i == 0 || i > n) {
        return Err(Error::InvalidInput(format!("product group members must lie in 1..={n}")));
    }
    Ok(())
}

/// Null: product i is *not* offered in the optimal assortment. Membership of
/// a prefix means i ∉ {1..K*} ⟺ K* ≤ i−1, so K₀ = {1, …, i−1}. For i = 1 the
/// null is empty (product 1 is always in the optimal assortment).
pub fn product_excluded(n: usize, i: usize) -> Result<PropertySet> {
    if i == 0 || i > n {
        return Err(Error::InvalidInput(format!("product index {i} must lie in 1..={n}")));
    }
    PropertySet::from_members(n, 1..i, format!("product {i} excluded"))
}

/// Null: the group A is *not entirely* contained in the optimal assortment.
/// A ⊆ {1..K*} ⟺ K* ≥ max(A), so K₀ = {1, …, max(A)−1}.
pub fn group_not_contained(n: usize, a: &[usize]) -> Result<PropertySet> {
    check_group(n, a)?;
    let max = *a.iter().max().unwrap();
    PropertySet::from_members(n, 1..max, format!("group not contained (max {max})"))
}

/// Null: the optimal assortment stays inside A. {1..k} ⊆ A exactly when every
/// index up to k belongs to A, so K₀ is the longest prefix contained in A.
pub fn contained_in(n: usize, a: &[usize]) -> Result<PropertySet> {
    check_group(n, a)?;
    let set: std::collections::HashSet<usize> = a.iter().copied().collect();
    let mut members = Vec::new();
    for k in 1..=n {
        if !set.contains(&k) {
            break;
        }
        members.push(k);
    }
    PropertySet::from_members(n, members, "assortment contained in group")
}

/// Null: products from A make up more than q percent of the optimal
/// assortment. The comparison |{1..k} ∩ A|·100 > q·k is evaluated in exact
/// integer arithmetic, so boundary fractions (e.g. exactly q%) are never
/// misclassified by rounding.
pub fn share_exceeds(n: usize, a: &[usize], q_percent: u32) -> Result<PropertySet> {
    check_group(n, a)?;
    if q_percent > 100 {
        return Err(Error::InvalidInput(format!("share threshold {q_percent} must be <= 100")));
    }
    let set: std::collections::HashSet<usize> = a.iter().copied().collect();
    let mut count: u64 = 0;
    let mut members = Vec::new();
    for k in 1..=n {
        if set.contains(&k) {
            count += 1;
        }
        if count * 100 > u64::from(q_percent) * k as u64 {
            members.push(k);
        }
    }
    PropertySet::from_members(n, members, format!("group share exceeds {q_percent}%"))
}

/// A partition of {1, …, n} into disjoint blocks (brands, suppliers, …).
/// Blocks may be empty; together they must cover every product exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("partition needs at least one block".into()));
        }
        let mut seen = vec![false; n + 1];
        for block in &blocks {
            for &i in block {
                if i == 0 || i > n {
                    return Err(Error::InvalidInput(format!(
                        "partition member {i} must lie in 1..={n}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidInput(format!(
                        "partition blocks overlap at product {i}"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = (1..=n).find(|&i| !seen[i]) {
            return Err(Error::InvalidInput(format!(
                "partition does not cover product {missing}"
            )));
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(Partition { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }
}

/// Null: the first block of the partition has (weakly) the largest presence
/// in the optimal assortment: |{1..k} ∩ A₁| = max_j |{1..k} ∩ A_j|.
pub fn leading_block(partition: &Partition) -> Result<PropertySet> {
    let n = partition.n();
    let blocks = partition.blocks();
    let mut counts = vec![0usize; blocks.len()];
    let mut block_of = vec![usize::MAX; n + 1];
    for (j, block) in blocks.iter().enumerate() {
        for &i in block {
            block_of[i] = j;
        }
    }
    let mut members = Vec::new();
    for k in 1..=n {
        counts[block_of[k]] += 1;
        let max = *counts.iter().max().unwrap();
        if counts[0] == max {
            members.push(k);
        }
    }
    PropertySet::from_members(n, members, "first block leads")
}

/// Null: at least `n0` blocks have a product in the optimal assortment.
/// Block j intersects {1..k} exactly when min(A_j) ≤ k, so the count of
/// represented blocks is a step function of k.
pub fn blocks_represented(partition: &Partition, n0: usize) -> Result<PropertySet> {
    let n = partition.n();
    let blocks = partition.blocks();
    if n0 > blocks.len() {
        return Err(Error::InvalidInput(format!(
            "cannot require {n0} represented blocks from a partition with {} blocks",
            blocks.len()
        )));
    }
    // Empty blocks have no minimum and can never be represented.
    let mins: Vec<usize> = blocks.iter().filter_map(|b| b.first().copied()).collect();
    let mut members = Vec::new();
    for k in 1..=n {
        let represented = mins.iter().filter(|&&m| m <= k).count();
        if represented >= n0 {
            members.push(k);
        }
    }
    PropertySet::from_members(n, members, format!("at least {n0} blocks represented"))
}
