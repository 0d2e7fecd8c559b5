use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
}

impl MetricReport {
    pub fn new(task: impl Into<String>, metric: &str, value: f64, cfg: &TrainConfig) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "metric {metric} = {value}");
        MetricReport {
            task: task.into(),
            metric: metric.to_string(),
            value,
            config: cfg
                .to_pairs()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            seed: cfg.seed,
        }
    }
}

pub fn to_jsonl(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    out
}

/// One sweep point: the swept value and the metrics at that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub auc: f64,
    pub ap: f64,
    pub best_epoch: usize,
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},auc,ap,best_epoch\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.value, r.auc, r.ap, r.best_epoch);
    }
    out
}

pub fn sweep_reports(label: &str, rows: &[SweepRow], cfg: &TrainConfig) -> Vec<MetricReport> {
    rows.iter()
        .flat_map(|r| {
            let task = format!("lp/{label}={}", r.value);
            [
                MetricReport::new(task.clone(), "auc", r.auc, cfg),
                MetricReport::new(task, "ap", r.ap, cfg),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub auc: f64,
    pub ap: f64,
    pub best_epoch: usize,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,auc,ap,best_epoch\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.variant, r.auc, r.ap, r.best_epoch);
    }
    out
}
