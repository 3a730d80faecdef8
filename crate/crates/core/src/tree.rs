//! Single-feature CART with Gini impurity, grown best-first.
//!
//! Used to place predicate thresholds and, during refinement, to propose new
//! ones from the records behind a duplicated condition.

/// A split chosen while growing the tree, with its impurity decrease
/// (in count units: `n·G(parent) − n_l·G(left) − n_r·G(right)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub threshold: f64,
    pub gain: f64,
}

/// Leaf of the growing tree: a half-open index range into the sorted samples.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Leaf {
    pub start: usize,
    pub end: usize,
}

/// `n − Σc²/n`, i.e. `n·G` for Gini impurity `G`.
fn impurity_mass(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|c| c * c).sum::<f64>() / n
}

pub(crate) struct SortedSamples {
    values: Vec<f64>,
    labels: Vec<usize>,
    n_labels: usize,
}

impl SortedSamples {
    pub fn new(samples: impl IntoIterator<Item = (f64, usize)>) -> Self {
        let mut pairs: Vec<(f64, usize)> = samples.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n_labels = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
        let (values, labels) = pairs.into_iter().unzip();
        Self {
            values,
            labels,
            n_labels,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Best midpoint split of a leaf, if any split strictly lowers impurity.
    /// Ties go to the lowest threshold.
    fn best_split(&self, leaf: Leaf) -> Option<(usize, Split)> {
        let n = (leaf.end - leaf.start) as f64;
        let mut total = vec![0.0; self.n_labels];
        for &l in &self.labels[leaf.start..leaf.end] {
            total[l] += 1.0;
        }
        let parent = impurity_mass(&total, n);
        let eps = 1e-10 * n.max(1.0);
        let mut left = vec![0.0; self.n_labels];
        let mut right = total;
        let mut best: Option<(usize, Split)> = None;
        for i in leaf.start + 1..leaf.end {
            let l = self.labels[i - 1];
            left[l] += 1.0;
            right[l] -= 1.0;
            if self.values[i - 1] == self.values[i] {
                continue;
            }
            let nl = (i - leaf.start) as f64;
            let gain = parent - impurity_mass(&left, nl) - impurity_mass(&right, n - nl);
            if gain > eps && best.is_none_or(|(_, b)| gain > b.gain + eps) {
                let threshold = midpoint(self.values[i - 1], self.values[i]);
                best = Some((i, Split { threshold, gain }));
            }
        }
        best
    }

    /// Grows the tree best-first until it has `max_leaves` leaves or no leaf
    /// can be split with positive gain. Returns the splits in the order they
    /// were made, plus the final leaves.
    pub fn grow(&self, max_leaves: usize) -> (Vec<Split>, Vec<Leaf>) {
        let mut leaves = vec![Leaf {
            start: 0,
            end: self.len(),
        }];
        let mut cached: Vec<Option<(usize, Split)>> = vec![self.best_split(leaves[0])];
        let mut splits = Vec::new();
        while leaves.len() < max_leaves {
            let pick = cached
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|(_, s)| (i, s)))
                .max_by(|a, b| {
                    a.1.gain
                        .total_cmp(&b.1.gain)
                        .then(b.1.threshold.total_cmp(&a.1.threshold))
                });
            let Some((leaf_idx, split)) = pick else { break };
            let (cut, _) = cached[leaf_idx].expect("picked leaf has a split");
            let leaf = leaves[leaf_idx];
            let left = Leaf {
                start: leaf.start,
                end: cut,
            };
            let right = Leaf {
                start: cut,
                end: leaf.end,
            };
            leaves[leaf_idx] = left;
            cached[leaf_idx] = self.best_split(left);
            leaves.push(right);
            cached.push(self.best_split(right));
            splits.push(split);
        }
        leaves.sort_by_key(|l| l.start);
        (splits, leaves)
    }

    pub fn leaf_values(&self, leaf: Leaf) -> &[f64] {
        &self.values[leaf.start..leaf.end]
    }
}

/// Split value between two adjacent distinct values `a < b`; always in
/// `[a, b)` so that `a` falls left and `b` right under `s > t`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Splits of a single-feature Gini tree with at most `max_leaves` leaves,
/// in the order they were made (largest impurity decrease first among the
/// candidates available at each step).
pub fn gini_splits(samples: impl IntoIterator<Item = (f64, usize)>, max_leaves: usize) -> Vec<Split> {
    SortedSamples::new(samples).grow(max_leaves).0
}
