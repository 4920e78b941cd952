use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{acc_gap, eo_multigroup, sp_multigroup};
use super::outcomes::{tabulate, GroupId, GroupedOutcomes};
use crate::error::Result;
use crate::snn::FairPenaltyConfig;

/// Which gaps to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sp,
    Eo,
    Acc,
}

pub const ALL_METRICS: [Metric; 3] = [Metric::Sp, Metric::Eo, Metric::Acc];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub sp: bool,
    pub eo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub positive_class: usize,
    pub delta_sp: Option<f64>,
    pub delta_eo: Option<f64>,
    pub delta_acc: f64,
    pub acc_by_group: BTreeMap<GroupId, f64>,
    pub argmax_pair_sp: Option<(GroupId, GroupId)>,
    pub argmax_pair_eo: Option<(GroupId, GroupId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<Violations>,
}

impl FairnessReport {
    /// Computes the requested metrics. An undefined requested metric is an error.
    pub fn from_outcomes(outcomes: &GroupedOutcomes, metrics: &[Metric]) -> Result<Self> {
        let acc = acc_gap(outcomes)?;
        let sp = metrics.contains(&Metric::Sp).then(|| sp_multigroup(outcomes)).transpose()?;
        let eo = metrics.contains(&Metric::Eo).then(|| eo_multigroup(outcomes)).transpose()?;
        Ok(Self {
            positive_class: outcomes.positive_class(),
            delta_sp: sp.map(|g| g.value),
            delta_eo: eo.map(|g| g.value),
            delta_acc: acc.delta_acc,
            acc_by_group: acc.acc_by_group,
            argmax_pair_sp: sp.map(|g| g.pair),
            argmax_pair_eo: eo.map(|g| g.pair),
            violations: None,
        })
    }

    pub fn with_tolerances(mut self, cfg: &FairPenaltyConfig) -> Self {
        self.violations = Some(Violations {
            sp: self.delta_sp.is_some_and(|d| d > cfg.tau_sp),
            eo: self.delta_eo.is_some_and(|d| d > cfg.tau_eo),
        });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub(crate) fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "positive_class",
            "delta_sp",
            "delta_eo",
            "delta_acc",
            "argmax_pair_sp",
            "argmax_pair_eo",
        ]
        .map(String::from)
        .to_vec();
        h.extend(self.acc_by_group.keys().map(|g| format!("acc_group_{g}")));
        if self.violations.is_some() {
            h.push("violates_sp".into());
            h.push("violates_eo".into());
        }
        h
    }

    pub(crate) fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let pair = |p: Option<(GroupId, GroupId)>| p.map(|(a, b)| format!("{a}-{b}")).unwrap_or_default();
        let mut row = vec![
            self.positive_class.to_string(),
            opt(self.delta_sp),
            opt(self.delta_eo),
            self.delta_acc.to_string(),
            pair(self.argmax_pair_sp),
            pair(self.argmax_pair_eo),
        ];
        row.extend(self.acc_by_group.values().map(|a| a.to_string()));
        if let Some(v) = self.violations {
            row.push(v.sp.to_string());
            row.push(v.eo.to_string());
        }
        row
    }

    /// Header plus one data row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_reports_csv(std::slice::from_ref(self), out)
    }
}

/// One header (taken from the first report) and one row per report.
pub fn write_reports_csv<W: Write>(reports: &[FairnessReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if let Some(first) = reports.first() {
        w.write_record(first.csv_header())?;
    }
    for r in reports {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Reports for one designated positive class, or for every class when none is
/// designated (equal opportunity depends on the orientation).
pub fn fairness_reports(
    preds: &[usize],
    labels: &[usize],
    groups: &[GroupId],
    classes: usize,
    positive_class: Option<usize>,
    metrics: &[Metric],
) -> Result<Vec<FairnessReport>> {
    let orientations: Vec<usize> = match positive_class {
        Some(k) => vec![k],
        None => (0..classes).collect(),
    };
    orientations
        .into_iter()
        .map(|k| FairnessReport::from_outcomes(&tabulate(preds, labels, groups, k)?, metrics))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> FairnessReport {
        let groups: Vec<GroupId> = [0, 0, 0, 1, 1, 1].map(GroupId).to_vec();
        let preds = [1, 1, 0, 0, 1, 0];
        let labels = [1, 0, 0, 1, 1, 0];
        FairnessReport::from_outcomes(&tabulate(&preds, &labels, &groups, 1).unwrap(), &ALL_METRICS).unwrap()
    }

    #[test]
    fn json_uses_fixed_field_names() {
        let v: serde_json::Value = serde_json::from_str(&sample_report().to_json().unwrap()).unwrap();
        for key in [
            "delta_sp",
            "delta_eo",
            "delta_acc",
            "acc_by_group",
            "argmax_pair_sp",
            "argmax_pair_eo",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn csv_is_one_row() {
        let mut buf = Vec::new();
        sample_report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("positive_class,delta_sp,delta_eo,delta_acc"));
    }

    #[test]
    fn both_orientations_when_unconfigured() {
        let groups: Vec<GroupId> = [0, 0, 1, 1].map(GroupId).to_vec();
        let reports = fairness_reports(&[1, 0, 1, 1], &[1, 0, 0, 1], &groups, 2, None, &ALL_METRICS).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].positive_class, 0);
        // SP is symmetric in the orientation for binary tasks; EO is not.
        assert_eq!(reports[0].delta_sp, reports[1].delta_sp);
        assert_ne!(reports[0].delta_eo, reports[1].delta_eo);
    }

    #[test]
    fn tolerance_violations() {
        let cfg = FairPenaltyConfig {
            tau_sp: 0.5,
            tau_eo: 0.0,
            mu: 1.0,
            positive_class: 1,
        };
        let r = sample_report().with_tolerances(&cfg);
        assert_eq!(r.violations, Some(Violations { sp: false, eo: true }));
    }
}
