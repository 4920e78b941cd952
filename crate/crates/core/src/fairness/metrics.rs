//! Group fairness gaps.
//!
//! * statistical parity: gap in `P(pred = pos | group)`
//! * equal opportunity: gap in `P(pred = pos | label = pos, group)`
//! * accuracy gap: `max_a acc_a - min_a acc_a`
//!
//! The multi-group forms take the maximum over all group pairs, which equals
//! the spread between the largest and smallest rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::outcomes::{GroupCounts, GroupId, GroupedOutcomes, Ratio};
use crate::error::{Error, Result};

/// A max-pairwise gap and the `(lowest-rate, highest-rate)` groups realizing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub value: f64,
    pub pair: (GroupId, GroupId),
}

fn rates(
    outcomes: &GroupedOutcomes,
    rate: &'static str,
    f: impl Fn(&GroupCounts) -> (u64, u64),
) -> Result<Vec<(GroupId, Ratio)>> {
    let mut undefined = Vec::new();
    let mut out = Vec::with_capacity(outcomes.len());
    for (&g, c) in outcomes.groups() {
        let (num, den) = f(c);
        match Ratio::new(num, den) {
            Ok(r) => out.push((g, r)),
            Err(_) => undefined.push(g),
        }
    }
    if undefined.is_empty() {
        Ok(out)
    } else {
        Err(Error::UndefinedRate {
            rate,
            groups: undefined,
        })
    }
}

fn acceptance(c: &GroupCounts) -> (u64, u64) {
    (c.pos_pred, c.n)
}

fn true_positive(c: &GroupCounts) -> (u64, u64) {
    (c.tp, c.pos_true)
}

fn require_exactly_two(outcomes: &GroupedOutcomes) -> Result<()> {
    match outcomes.len() {
        2 => Ok(()),
        n if n < 2 => Err(Error::InsufficientGroups { needed: 2, found: n }),
        n => Err(Error::Domain(format!(
            "binary metric given {n} groups; use the multi-group form"
        ))),
    }
}

fn spread(rates: &[(GroupId, Ratio)]) -> Result<PairGap> {
    if rates.len() < 2 {
        return Err(Error::InsufficientGroups {
            needed: 2,
            found: rates.len(),
        });
    }
    let (mut lo, mut hi) = (rates[0], rates[0]);
    for &r in &rates[1..] {
        if r.1 < lo.1 {
            lo = r;
        }
        if r.1 > hi.1 {
            hi = r;
        }
    }
    Ok(PairGap {
        value: lo.1.abs_diff(hi.1).to_f64(),
        pair: (lo.0, hi.0),
    })
}

/// `|P(pred=pos | g1) - P(pred=pos | g0)|` for exactly two groups.
pub fn sp_binary(outcomes: &GroupedOutcomes) -> Result<f64> {
    require_exactly_two(outcomes)?;
    let r = rates(outcomes, "acceptance rate", acceptance)?;
    Ok(r[1].1.abs_diff(r[0].1).to_f64())
}

/// `|TPR(g1) - TPR(g0)|` for exactly two groups.
pub fn eo_binary(outcomes: &GroupedOutcomes) -> Result<f64> {
    require_exactly_two(outcomes)?;
    let r = rates(outcomes, "true positive rate", true_positive)?;
    Ok(r[1].1.abs_diff(r[0].1).to_f64())
}

pub fn sp_multigroup(outcomes: &GroupedOutcomes) -> Result<PairGap> {
    if outcomes.len() < 2 {
        return Err(Error::InsufficientGroups {
            needed: 2,
            found: outcomes.len(),
        });
    }
    spread(&rates(outcomes, "acceptance rate", acceptance)?)
}

pub fn eo_multigroup(outcomes: &GroupedOutcomes) -> Result<PairGap> {
    if outcomes.len() < 2 {
        return Err(Error::InsufficientGroups {
            needed: 2,
            found: outcomes.len(),
        });
    }
    spread(&rates(outcomes, "true positive rate", true_positive)?)
}

/// Per-group accuracies and their spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccGap {
    /// `max - min` of `acc_by_group`, computed on the floats.
    pub delta_acc: f64,
    /// The same gap as an exact ratio.
    pub delta_acc_exact: Ratio,
    pub acc_by_group: BTreeMap<GroupId, f64>,
    pub acc_exact: BTreeMap<GroupId, Ratio>,
}

pub fn acc_gap(outcomes: &GroupedOutcomes) -> Result<AccGap> {
    if outcomes.is_empty() {
        return Err(Error::InsufficientGroups { needed: 1, found: 0 });
    }
    let acc = rates(outcomes, "accuracy", |c| (c.correct, c.n))?;
    let lo = acc.iter().map(|a| a.1).min().expect("non-empty");
    let hi = acc.iter().map(|a| a.1).max().expect("non-empty");
    let acc_by_group: BTreeMap<GroupId, f64> = acc.iter().map(|&(g, r)| (g, r.to_f64())).collect();
    let max = acc_by_group.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = acc_by_group.values().copied().fold(f64::INFINITY, f64::min);
    Ok(AccGap {
        delta_acc: max - min,
        delta_acc_exact: hi.abs_diff(lo),
        acc_by_group,
        acc_exact: acc.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(u32, GroupCounts)]) -> GroupedOutcomes {
        GroupedOutcomes::new(1, rows.iter().map(|&(g, c)| (GroupId(g), c)).collect()).unwrap()
    }

    fn acc_rows(n: u64, pos_pred: &[u64]) -> GroupedOutcomes {
        let rows: Vec<_> = pos_pred
            .iter()
            .enumerate()
            .map(|(g, &p)| {
                (
                    g as u32,
                    GroupCounts {
                        n,
                        pos_pred: p,
                        ..Default::default()
                    },
                )
            })
            .collect();
        table(&rows)
    }

    fn tpr_rows(pos_true: u64, tp: &[u64]) -> GroupedOutcomes {
        let rows: Vec<_> = tp
            .iter()
            .enumerate()
            .map(|(g, &tp)| {
                (
                    g as u32,
                    GroupCounts {
                        n: pos_true,
                        pos_pred: tp,
                        tp,
                        pos_true,
                        correct: tp,
                    },
                )
            })
            .collect();
        table(&rows)
    }

    #[test]
    fn parity_examples() {
        assert_eq!(sp_binary(&acc_rows(4, &[2, 2])).unwrap(), 0.0);
        let t = table(&[
            (0, GroupCounts { n: 2, pos_pred: 1, ..Default::default() }),
            (1, GroupCounts { n: 4, pos_pred: 3, ..Default::default() }),
        ]);
        assert_eq!(sp_binary(&t).unwrap(), 0.25);
        assert_eq!(sp_binary(&acc_rows(4, &[0, 4])).unwrap(), 1.0);
    }

    #[test]
    fn empty_group_is_undefined() {
        let t = table(&[
            (0, GroupCounts::default()),
            (1, GroupCounts { n: 4, pos_pred: 3, ..Default::default() }),
        ]);
        assert!(matches!(sp_binary(&t), Err(Error::UndefinedRate { .. })));
        assert!(sp_binary(&acc_rows(4, &[1, 2, 3])).is_err());
    }

    #[test]
    fn opportunity_examples() {
        assert_eq!(eo_binary(&tpr_rows(4, &[3, 3])).unwrap(), 0.0);
        assert_eq!(eo_binary(&tpr_rows(4, &[1, 3])).unwrap(), 0.5);
    }

    #[test]
    fn missing_positives_name_the_group() {
        let t = table(&[
            (0, GroupCounts { n: 4, pos_pred: 1, tp: 1, pos_true: 2, correct: 3 }),
            (1, GroupCounts { n: 4, pos_pred: 2, tp: 0, pos_true: 0, correct: 2 }),
        ]);
        match eo_binary(&t) {
            Err(Error::UndefinedRate { groups, .. }) => assert_eq!(groups, vec![GroupId(1)]),
            other => panic!("expected undefined TPR, got {other:?}"),
        }
    }

    #[test]
    fn multigroup_parity_finds_extreme_pair() {
        let gap = sp_multigroup(&acc_rows(10, &[2, 5, 9])).unwrap();
        assert!((gap.value - 0.7).abs() < 1e-15);
        assert_eq!(gap.pair, (GroupId(0), GroupId(2)));
        assert_eq!(sp_multigroup(&acc_rows(10, &[4, 4, 4])).unwrap().value, 0.0);
    }

    #[test]
    fn multigroup_opportunity() {
        let gap = eo_multigroup(&tpr_rows(4, &[3, 1, 2])).unwrap();
        assert_eq!(gap.value, 0.5);
        assert_eq!(gap.pair, (GroupId(1), GroupId(0)));
        assert_eq!(eo_multigroup(&tpr_rows(4, &[2, 2, 2])).unwrap().value, 0.0);
    }

    #[test]
    fn multigroup_reports_every_group_without_positives() {
        let t = table(&[
            (0, GroupCounts { n: 3, ..Default::default() }),
            (1, GroupCounts { n: 3, pos_true: 1, tp: 1, pos_pred: 1, correct: 3 }),
            (2, GroupCounts { n: 3, ..Default::default() }),
        ]);
        match eo_multigroup(&t) {
            Err(Error::UndefinedRate { groups, .. }) => assert_eq!(groups, vec![GroupId(0), GroupId(2)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_groups_degenerate_to_binary() {
        let t = tpr_rows(7, &[2, 5]);
        assert_eq!(sp_multigroup(&t).unwrap().value.to_bits(), sp_binary(&t).unwrap().to_bits());
        assert_eq!(eo_multigroup(&t).unwrap().value.to_bits(), eo_binary(&t).unwrap().to_bits());
    }

    #[test]
    fn insufficient_groups() {
        assert!(matches!(
            sp_multigroup(&acc_rows(3, &[1])),
            Err(Error::InsufficientGroups { found: 1, .. })
        ));
    }

    #[test]
    fn accuracy_gap_examples() {
        let correct = |c: &[u64]| {
            let rows: Vec<_> = c
                .iter()
                .enumerate()
                .map(|(g, &k)| (g as u32, GroupCounts { n: 10, correct: k, ..Default::default() }))
                .collect();
            table(&rows)
        };
        let gap = acc_gap(&correct(&[9, 6, 7])).unwrap();
        assert!((gap.delta_acc - 0.3).abs() < 1e-15);
        assert_eq!(gap.delta_acc_exact, Ratio::new(3, 10).unwrap());
        assert_eq!(acc_gap(&correct(&[4])).unwrap().delta_acc, 0.0);
        let empty = table(&[(0, GroupCounts::default())]);
        assert!(matches!(acc_gap(&empty), Err(Error::UndefinedRate { .. })));
    }
}
