//! Per-epoch, per-group accuracy and the asymmetric-convergence diagnostics
//! computed from it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{GroupId, Ratio};

/// Default collapse threshold, as a fraction (10 points).
pub const DEFAULT_COLLAPSE_DELTA: f64 = 0.10;

/// Fraction of a group's own maximum that counts as saturated.
pub const SATURATION_FRACTION: (u64, u64) = (95, 100);

/// Append-only accuracy matrix `acc[epoch][group]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    roster: Vec<GroupId>,
    rows: Vec<Vec<Ratio>>,
}

impl Trajectory {
    pub fn new(roster: Vec<GroupId>) -> Result<Self> {
        if roster.is_empty() {
            return Err(Error::Sequencing("roster is empty".into()));
        }
        let unique: BTreeSet<_> = roster.iter().collect();
        if unique.len() != roster.len() {
            return Err(Error::Sequencing("roster lists a group twice".into()));
        }
        Ok(Self { roster, rows: Vec::new() })
    }

    pub fn roster(&self) -> &[GroupId] {
        &self.roster
    }

    /// Number of recorded epochs.
    pub fn epochs(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, epoch: usize) -> &[Ratio] {
        &self.rows[epoch]
    }

    /// Accuracy of `group` over all epochs.
    pub fn column(&self, group: GroupId) -> Option<Vec<Ratio>> {
        let j = self.roster.iter().position(|&g| g == group)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Appends row `epoch`, which must equal the current length. The groups
    /// must match the roster exactly.
    pub fn record_epoch(&mut self, epoch: usize, acc_by_group: &BTreeMap<GroupId, Ratio>) -> Result<()> {
        if epoch != self.rows.len() {
            return Err(Error::Sequencing(format!(
                "expected epoch {}, got {epoch}",
                self.rows.len()
            )));
        }
        if acc_by_group.len() != self.roster.len() || self.roster.iter().any(|g| !acc_by_group.contains_key(g)) {
            let got: Vec<String> = acc_by_group.keys().map(|g| g.to_string()).collect();
            return Err(Error::Sequencing(format!(
                "epoch {epoch}: groups [{}] do not match the roster",
                got.join(", ")
            )));
        }
        let row: Vec<Ratio> = self.roster.iter().map(|g| acc_by_group[g]).collect();
        if let Some((g, a)) = self.roster.iter().zip(&row).find(|(_, a)| a.num > a.den) {
            return Err(Error::Domain(format!("epoch {epoch}: accuracy {} for group {g} exceeds 1", a.to_f64())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Long format: `epoch,group,accuracy`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["epoch", "group", "accuracy"])?;
        for (e, row) in self.rows.iter().enumerate() {
            for (g, a) in self.roster.iter().zip(row) {
                w.write_record([e.to_string(), g.to_string(), a.to_f64().to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn analyze(&self, delta: f64) -> Result<AsymmetryReport> {
        let first = self
            .rows
            .first()
            .ok_or_else(|| Error::Domain("cannot analyze an empty trajectory".into()))?;
        let lo = *first.iter().min().expect("non-empty roster");
        let hi = *first.iter().max().expect("non-empty roster");
        let gap = hi.abs_diff(lo);

        let (sn, sd) = SATURATION_FRACTION;
        let mut saturation_epoch = BTreeMap::new();
        let mut collapse_events = Vec::new();
        for (j, &g) in self.roster.iter().enumerate() {
            let col: Vec<Ratio> = self.rows.iter().map(|r| r[j]).collect();
            let max = *col.iter().max().expect("at least one epoch");
            // a >= (sn / sd) * max, cross-multiplied.
            let sat = col
                .iter()
                .position(|a| {
                    a.num as u128 * max.den as u128 * sd as u128 >= sn as u128 * max.num as u128 * a.den as u128
                })
                .expect("the maximum itself qualifies");
            saturation_epoch.insert(g, sat);
            for e in 1..col.len() {
                if col[e] < col[e - 1] {
                    let drop = col[e - 1].abs_diff(col[e]);
                    if drop.to_f64() >= delta {
                        collapse_events.push(CollapseEvent {
                            group: g,
                            epoch: e,
                            drop: drop.to_f64(),
                            drop_exact: drop,
                        });
                    }
                }
            }
        }
        collapse_events.sort_by_key(|c| (c.epoch, c.group));
        let max_sat = *saturation_epoch.values().max().expect("non-empty roster");
        let min_sat = *saturation_epoch.values().min().expect("non-empty roster");
        Ok(AsymmetryReport {
            epoch0_gap: gap.to_f64(),
            epoch0_gap_exact: gap,
            saturation_epoch,
            collapse_events,
            effort_ratio: max_sat as f64 / min_sat.max(1) as f64,
            delta,
        })
    }
}

/// A fall of at least δ between epoch `epoch - 1` and `epoch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub group: GroupId,
    pub epoch: usize,
    pub drop: f64,
    pub drop_exact: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    /// Max minus min accuracy at epoch 0, as a fraction.
    pub epoch0_gap: f64,
    pub epoch0_gap_exact: Ratio,
    /// First epoch reaching 95% of the group's own maximum.
    pub saturation_epoch: BTreeMap<GroupId, usize>,
    pub collapse_events: Vec<CollapseEvent>,
    /// Largest saturation epoch over the smallest (clamped to at least 1).
    pub effort_ratio: f64,
    pub delta: f64,
}

impl AsymmetryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Percent with two decimals, as printed in published tables.
    fn pct(hundredths: u64) -> Ratio {
        Ratio::new(hundredths, 10_000).unwrap()
    }

    fn build(columns: &[&[u64]]) -> Trajectory {
        let roster: Vec<GroupId> = (0..columns.len() as u32).map(GroupId).collect();
        let mut t = Trajectory::new(roster.clone()).unwrap();
        for e in 0..columns[0].len() {
            let row = roster.iter().zip(columns).map(|(&g, c)| (g, pct(c[e]))).collect();
            t.record_epoch(e, &row).unwrap();
        }
        t
    }

    // Spike-ResNet19 with TET on the original RFW data: African, Caucasian, Indian, Asian.
    const RFW_SRN19_TET: [&[u64]; 4] = [
        &[7985, 8901, 9613, 9417, 9309, 9062, 9681, 9692, 9635, 9782],
        &[4716, 4945, 6786, 8134, 7664, 8528, 8105, 7584, 7937, 8458],
        &[450, 6124, 6721, 5841, 7295, 7756, 7004, 7476, 8421, 6672],
        &[6615, 7460, 7242, 8012, 8143, 7139, 8611, 8897, 8508, 9115],
    ];

    #[test]
    fn published_matrix_round_trips() {
        let t = build(&RFW_SRN19_TET);
        assert_eq!(t.epochs(), 10);
        assert_eq!(t.column(GroupId(2)).unwrap()[0], pct(450));
        assert_eq!(t.row(9)[0], pct(9782));
    }

    #[test]
    fn published_epoch0_gap() {
        let r = build(&RFW_SRN19_TET).analyze(DEFAULT_COLLAPSE_DELTA).unwrap();
        assert_eq!(r.epoch0_gap_exact, pct(7535));
        assert_eq!(r.epoch0_gap_exact.to_points(), 75.35);
    }

    #[test]
    fn published_collapse_event() {
        // VGGSNN without TET, dataclean, Caucasian.
        let t = build(&[&[4673, 8057, 8122, 8394, 6918, 8102, 8627, 8320, 8558, 9058]]);
        let r = t.analyze(0.10).unwrap();
        assert_eq!(r.collapse_events.len(), 1);
        let ev = &r.collapse_events[0];
        assert_eq!((ev.group, ev.epoch), (GroupId(0), 4));
        assert_eq!(ev.drop_exact, pct(1476));
    }

    #[test]
    fn constant_trajectory() {
        let t = build(&[&[5000; 6], &[7000; 6]]);
        let r = t.analyze(0.0).unwrap();
        assert_eq!(r.epoch0_gap_exact, pct(2000));
        assert!(r.collapse_events.is_empty());
        assert!(r.saturation_epoch.values().all(|&e| e == 0));
        assert_eq!(r.effort_ratio, 0.0);
    }

    #[test]
    fn delta_extremes() {
        let t = build(&RFW_SRN19_TET);
        assert!(t.analyze(f64::INFINITY).unwrap().collapse_events.is_empty());
        let strict: usize = RFW_SRN19_TET
            .iter()
            .map(|c| c.windows(2).filter(|w| w[1] < w[0]).count())
            .sum();
        assert_eq!(t.analyze(0.0).unwrap().collapse_events.len(), strict);
    }

    #[test]
    fn saturation_and_effort() {
        // Group 0 saturates at once; group 1 needs until epoch 4.
        let t = build(&[&[9000, 9100, 9200, 9200, 9200], &[1000, 3000, 5000, 8000, 9000]]);
        let r = t.analyze(0.10).unwrap();
        assert_eq!(r.saturation_epoch[&GroupId(0)], 0);
        assert_eq!(r.saturation_epoch[&GroupId(1)], 4);
        assert_eq!(r.effort_ratio, 4.0);
    }

    #[test]
    fn sequencing_errors() {
        let mut t = build(&[&[5000, 5000, 5000]]);
        let row: BTreeMap<_, _> = [(GroupId(0), pct(5000))].into();
        assert!(matches!(t.record_epoch(5, &row), Err(Error::Sequencing(_))));
        let wrong: BTreeMap<_, _> = [(GroupId(1), pct(5000))].into();
        assert!(matches!(t.record_epoch(3, &wrong), Err(Error::Sequencing(_))));
        t.record_epoch(3, &row).unwrap();
        assert_eq!(t.epochs(), 4);
    }

    #[test]
    fn first_append() {
        let mut t = Trajectory::new(vec![GroupId(0)]).unwrap();
        t.record_epoch(0, &[(GroupId(0), pct(1))].into()).unwrap();
        assert_eq!(t.epochs(), 1);
        assert!(Trajectory::new(vec![]).is_err());
        assert!(Trajectory::new(vec![GroupId(0)]).unwrap().analyze(0.1).is_err());
    }

    #[test]
    fn long_csv() {
        let mut buf = Vec::new();
        build(&[&[5000, 2500], &[1000, 1000]]).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,group,accuracy\n0,0,0.5\n0,1,0.1\n1,0,0.25\n1,1,0.1\n"
        );
    }
}
