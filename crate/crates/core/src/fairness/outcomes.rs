use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a sensitive-attribute group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Non-negative rational `num / den` with `den > 0`, used so that rates derived
/// from counts compare and subtract without rounding.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain(format!("ratio {num}/0 has a zero denominator")));
        }
        Ok(Self { num, den })
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Value in percentage points, rounded once.
    pub fn to_points(self) -> f64 {
        (self.num as u128 * 100) as f64 / self.den as f64
    }

    /// `|self - other|`, reduced to lowest terms.
    pub fn abs_diff(self, other: Ratio) -> Ratio {
        let a = self.num as u128 * other.den as u128;
        let b = other.num as u128 * self.den as u128;
        let num = a.abs_diff(b);
        let den = self.den as u128 * other.den as u128;
        let g = gcd(num, den).max(1);
        // Reduced terms fit in u64 whenever either input denominator is below 2^32.
        Ratio {
            num: (num / g) as u64,
            den: (den / g) as u64,
        }
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Counts for one group. "Positive" refers to the designated positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub n: u64,
    pub pos_pred: u64,
    pub tp: u64,
    pub pos_true: u64,
    pub correct: u64,
}

impl GroupCounts {
    fn validate(&self, g: GroupId) -> Result<()> {
        let ok = self.pos_pred <= self.n
            && self.pos_true <= self.n
            && self.tp <= self.pos_pred.min(self.pos_true)
            && self.correct <= self.n;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("inconsistent counts for group {g}: {self:?}")))
        }
    }
}

/// Per-group prediction tables: the sufficient statistic for every group metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedOutcomes {
    positive_class: usize,
    groups: BTreeMap<GroupId, GroupCounts>,
}

impl GroupedOutcomes {
    pub fn new(positive_class: usize, groups: BTreeMap<GroupId, GroupCounts>) -> Result<Self> {
        for (&g, c) in &groups {
            c.validate(g)?;
        }
        Ok(Self {
            positive_class,
            groups,
        })
    }

    pub fn positive_class(&self) -> usize {
        self.positive_class
    }

    pub fn groups(&self) -> &BTreeMap<GroupId, GroupCounts> {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.groups.values().map(|c| c.n).sum()
    }

    /// Overall accuracy across all groups.
    pub fn accuracy(&self) -> Result<Ratio> {
        let correct = self.groups.values().map(|c| c.correct).sum();
        Ratio::new(correct, self.total())
    }
}

/// Counts predictions per group for the given positive class.
pub fn tabulate(
    preds: &[usize],
    labels: &[usize],
    groups: &[GroupId],
    positive_class: usize,
) -> Result<GroupedOutcomes> {
    if labels.len() != preds.len() {
        return Err(Error::dim("tabulate labels", preds.len(), labels.len()));
    }
    if groups.len() != preds.len() {
        return Err(Error::dim("tabulate groups", preds.len(), groups.len()));
    }
    if preds.is_empty() {
        return Err(Error::Domain("cannot tabulate zero samples".into()));
    }
    let mut table: BTreeMap<GroupId, GroupCounts> = BTreeMap::new();
    for ((&p, &y), &g) in preds.iter().zip(labels).zip(groups) {
        let c = table.entry(g).or_default();
        let pp = p == positive_class;
        let pt = y == positive_class;
        c.n += 1;
        c.pos_pred += pp as u64;
        c.pos_true += pt as u64;
        c.tp += (pp && pt) as u64;
        c.correct += (p == y) as u64;
    }
    GroupedOutcomes::new(positive_class, table)
}
