//! Counting invariants over histograms.
//!
//! A [`ConstraintSet`] lists index subsets of `[0, d)`; a release preserves
//! the set when every subset sum of the output equals that of the input.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intlinalg::IntMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub indices: Vec<usize>,
}

/// Subset-sum invariants on a histogram of length `dimension`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraintSet")]
pub struct ConstraintSet {
    dimension: usize,
    constraints: Vec<Constraint>,
}

#[derive(Deserialize)]
struct RawConstraintSet {
    dimension: usize,
    constraints: Vec<Constraint>,
}

impl TryFrom<RawConstraintSet> for ConstraintSet {
    type Error = Error;

    fn try_from(raw: RawConstraintSet) -> Result<Self> {
        ConstraintSet::new(raw.dimension, raw.constraints)
    }
}

impl ConstraintSet {
    pub fn new(dimension: usize, constraints: Vec<Constraint>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidConstraint("dimension must be positive".into()));
        }
        for (l, c) in constraints.iter().enumerate() {
            let mut seen = vec![false; dimension];
            for &i in &c.indices {
                if i >= dimension {
                    return Err(Error::InvalidConstraint(format!(
                        "constraint {l}: index {i} outside [0, {dimension})"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidConstraint(format!("constraint {l}: duplicate index {i}")));
                }
            }
        }
        Ok(Self { dimension, constraints })
    }

    /// Unlabelled constraints from raw index lists.
    pub fn from_subsets(dimension: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        let constraints = subsets
            .into_iter()
            .map(|indices| Constraint { label: None, indices })
            .collect();
        Self::new(dimension, constraints)
    }

    /// A single invariant on the grand total.
    pub fn total(dimension: usize) -> Result<Self> {
        Self::partition(&[dimension])
    }

    /// Consecutive groups of the given sizes, each with a preserved total.
    pub fn partition(group_sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut constraints = Vec::with_capacity(group_sizes.len());
        for (g, &size) in group_sizes.iter().enumerate() {
            if size == 0 {
                return Err(Error::InvalidConstraint(format!("group {g} is empty")));
            }
            constraints.push(Constraint {
                label: Some(format!("group {g}")),
                indices: (start..start + size).collect(),
            });
            start += size;
        }
        Self::new(start, constraints)
    }

    /// Row and column margins of an `rows x cols` table stored row-major.
    /// Row constraints come first, then column constraints.
    pub fn table_margins(rows: usize, cols: usize) -> Result<Self> {
        let mut constraints = Vec::with_capacity(rows + cols);
        for i in 0..rows {
            constraints.push(Constraint {
                label: Some(format!("row {i}")),
                indices: (0..cols).map(|j| i * cols + j).collect(),
            });
        }
        for j in 0..cols {
            constraints.push(Constraint {
                label: Some(format!("col {j}")),
                indices: (0..rows).map(|i| i * cols + j).collect(),
            });
        }
        Self::new(rows * cols, constraints)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// `k x d` 0/1 matrix; row `l` marks membership in subset `l`.
    pub fn incidence_matrix(&self) -> IntMatrix {
        let mut a = IntMatrix::zeros(self.constraints.len(), self.dimension);
        for (l, c) in self.constraints.iter().enumerate() {
            for &i in &c.indices {
                a.set(l, i, BigInt::from(1));
            }
        }
        a
    }

    /// Indices of the constraints kept by [`full_rank_reduce`](Self::full_rank_reduce).
    pub fn independent_rows(&self) -> Vec<usize> {
        let a = self.incidence_matrix();
        let mut echelon: Vec<(usize, Vec<BigInt>)> = Vec::new();
        let mut kept = Vec::new();
        for l in 0..a.rows() {
            let mut row = a.row(l).to_vec();
            for (pc, prow) in &echelon {
                if row[*pc].is_zero() {
                    continue;
                }
                let (f, g) = (prow[*pc].clone(), row[*pc].clone());
                for (x, p) in row.iter_mut().zip(prow) {
                    *x = &*x * &f - p * &g;
                }
                normalize_content(&mut row);
            }
            if let Some(pc) = row.iter().position(|x| !x.is_zero()) {
                echelon.push((pc, row));
                kept.push(l);
            }
        }
        kept
    }

    /// Incidence matrix with linearly dependent rows dropped, keeping the
    /// earliest independent ones, together with the rank.
    pub fn full_rank_reduce(&self) -> (IntMatrix, usize) {
        let kept = self.independent_rows();
        let rank = kept.len();
        (self.incidence_matrix().select_rows(&kept), rank)
    }

    /// Subset sums of `x`.
    pub fn margins(&self, x: &Histogram) -> Result<Vec<i64>> {
        self.margins_of(x.values())
    }

    /// Subset sums of any integer vector, e.g. a release or a noise draw.
    pub fn margins_of(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(self
            .constraints
            .iter()
            .map(|c| c.indices.iter().map(|&i| x[i]).sum())
            .collect())
    }

    /// True iff `x` and `y` agree on every subset sum.
    pub fn equivalent(&self, x: &Histogram, y: &[i64]) -> Result<bool> {
        Ok(self.margins(x)? == self.margins_of(y)?)
    }
}

fn normalize_content(row: &mut [BigInt]) {
    let g = row.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if g.is_zero() || g == BigInt::from(1) {
        return;
    }
    let g = g.abs();
    for x in row.iter_mut() {
        *x = &*x / &g;
    }
}

/// Non-negative integer counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct Histogram(Vec<i64>);

impl Histogram {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0) {
            return Err(Error::NegativeCount { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<i64>> for Histogram {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Histogram> for Vec<i64> {
    fn from(h: Histogram) -> Self {
        h.0
    }
}

/// An `(epsilon, delta)` privacy spend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
}

impl Budget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && delta >= 0.0 && epsilon.is_finite() && delta.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "budget ({epsilon}, {delta}) must be finite and non-negative"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// Sequential composition: epsilons and deltas add.
pub fn budget_compose(budgets: &[Budget]) -> Budget {
    budgets.iter().fold(Budget::default(), |acc, b| Budget {
        epsilon: acc.epsilon + b.epsilon,
        delta: acc.delta + b.delta,
    })
}

/// Record of spends. It does not enforce a cap.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<(String, Budget)>,
}

impl BudgetLedger {
    pub fn record(&mut self, label: impl Into<String>, spend: Budget) {
        self.entries.push((label.into(), spend));
    }

    pub fn entries(&self) -> &[(String, Budget)] {
        &self.entries
    }

    pub fn total(&self) -> Budget {
        let spends: Vec<Budget> = self.entries.iter().map(|(_, b)| *b).collect();
        budget_compose(&spends)
    }
}
