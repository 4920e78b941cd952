//! Group fairness metrics from predictions, labels and group ids.

use spikefair::fairness::{acc_gap, fairness_reports, tabulate, write_reports_csv, GroupId, ALL_METRICS};

fn main() -> spikefair::Result<()> {
    // Three groups of eight samples; group 2 is mostly misclassified.
    let labels = [1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0];
    let preds = [1, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0];
    let groups: Vec<GroupId> = (0..24).map(|i| GroupId(i / 8)).collect();

    let table = tabulate(&preds, &labels, &groups, 1)?;
    let gap = acc_gap(&table)?;
    println!("delta_acc = {:.2} points", gap.delta_acc_exact.to_points());
    for (g, a) in &gap.acc_by_group {
        println!("  group {g}: {a:.3}");
    }

    let reports = fairness_reports(&preds, &labels, &groups, 2, Some(1), &ALL_METRICS)?;
    write_reports_csv(&reports, std::io::stdout().lock())
}
