//! Asymmetric convergence diagnostics on a hand-written accuracy matrix.

use std::collections::BTreeMap;

use spikefair::fairness::{GroupId, Ratio};
use spikefair::trajectory::{Trajectory, DEFAULT_COLLAPSE_DELTA};

fn main() -> spikefair::Result<()> {
    // Percent with two decimals; group 1 starts far behind and wobbles.
    let columns: [&[u64]; 3] = [
        &[8100, 8800, 9200, 9300, 9350, 9400],
        &[1500, 4200, 6900, 5600, 8000, 8700],
        &[6200, 7400, 8100, 8600, 8800, 8900],
    ];
    let roster: Vec<GroupId> = (0..3).map(GroupId).collect();
    let mut t = Trajectory::new(roster.clone())?;
    for e in 0..columns[0].len() {
        let row: BTreeMap<GroupId, Ratio> = roster
            .iter()
            .zip(columns)
            .map(|(&g, c)| Ok((g, Ratio::new(c[e], 10_000)?)))
            .collect::<spikefair::Result<_>>()?;
        t.record_epoch(e, &row)?;
    }
    let report = t.analyze(DEFAULT_COLLAPSE_DELTA)?;
    println!("epoch-0 gap: {:.2} points", report.epoch0_gap_exact.to_points());
    for (g, e) in &report.saturation_epoch {
        println!("group {g} saturates at epoch {e}");
    }
    for c in &report.collapse_events {
        println!("collapse: group {} at epoch {}, -{:.2} points", c.group, c.epoch, c.drop_exact.to_points());
    }
    println!("effort ratio {}", report.effort_ratio);
    t.write_csv(std::io::stdout().lock())
}
