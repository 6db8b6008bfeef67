//! Directory-level evaluation of predicted tuples against ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::build::{load_tuple, LabeledClip, TUPLE_FILE};
use super::classify::InteractionKind;
use crate::geometry::Point2;
use crate::metrics::{ade, auc_judd, cc, dtw_full, sim, FixationSet, MetricReport};
use crate::trajectory::{normalize_for_eval, EVAL_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Report DTW divided by warping-path length in the `dtw` field.
    pub normalize_dtw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<InteractionKind>,
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub means: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dtw_normalized_by_path: bool,
    pub instances: Vec<InstanceReport>,
    pub aggregate: BTreeMap<String, Aggregate>,
}

/// Fixations for AUC-Judd: annotated keypoints when present, otherwise the
/// peak pixels of the ground-truth heatmap.
pub fn fixations_for(gt: &LabeledClip) -> FixationSet {
    let (w, h) = (gt.heatmap.width(), gt.heatmap.height());
    let points = match &gt.tuple.keypoints {
        Some(k) => k.clone(),
        None => {
            let peak = gt.heatmap.max();
            gt.heatmap
                .values()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v == peak)
                .map(|(i, _)| Point2::new((i % w) as f64, (i / w) as f64))
                .collect()
        }
    };
    FixationSet::new(points, w, h)
}

/// Scores one prediction against one ground truth. Metrics that cannot be
/// computed are left empty and their error is recorded.
pub fn evaluate_pair(id: &str, pred: &LabeledClip, gt: &LabeledClip, opts: EvalOptions) -> InstanceReport {
    let mut m = MetricReport::default();
    let mut errors = Vec::new();
    let mut keep = |name: &str, r: Result<f64, crate::metrics::MetricError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    m.sim = keep("sim", sim(&pred.heatmap, &gt.heatmap));
    m.cc = keep("cc", cc(&pred.heatmap, &gt.heatmap));
    m.auc_j = keep("auc_j", auc_judd(&pred.heatmap, &fixations_for(gt)));

    let p = normalize_for_eval(&pred.fit.params, EVAL_SAMPLES);
    let g = normalize_for_eval(&gt.fit.params, EVAL_SAMPLES);
    m.ade = keep("ade", ade(&p, &g));
    match dtw_full(&p, &g) {
        Ok(r) => {
            m.dtw_normalized = Some(r.normalized());
            m.dtw = Some(if opts.normalize_dtw { r.normalized() } else { r.cost });
        }
        Err(e) => errors.push(format!("dtw: {e}")),
    }
    InstanceReport { id: id.to_string(), group: Some(gt.tuple.interaction.kind), metrics: m, errors }
}

fn mean_report(items: &[&InstanceReport]) -> Aggregate {
    fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = vals.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
    let it = || items.iter().map(|r| r.metrics);
    Aggregate {
        count: items.len(),
        means: MetricReport {
            sim: mean(it().map(|m| m.sim)),
            cc: mean(it().map(|m| m.cc)),
            auc_j: mean(it().map(|m| m.auc_j)),
            ade: mean(it().map(|m| m.ade)),
            dtw: mean(it().map(|m| m.dtw)),
            dtw_normalized: mean(it().map(|m| m.dtw_normalized)),
        },
    }
}

fn tuple_dirs(root: &Path) -> std::io::Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(root)?
        .filter_map(Result::ok)
        .filter(|e| e.path().join(TUPLE_FILE).is_file())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    names.sort();
    Ok(names)
}

/// Pairs every ground-truth tuple directory with the same-named directory
/// under `pred_dir` and aggregates overall and per interaction kind.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, opts: EvalOptions) -> std::io::Result<EvalReport> {
    let mut instances = Vec::new();
    for name in tuple_dirs(gt_dir)? {
        let gt = match load_tuple(&gt_dir.join(&name)) {
            Ok(g) => g,
            Err(e) => {
                instances.push(InstanceReport { id: name, group: None, metrics: MetricReport::default(), errors: vec![format!("ground truth: {e}")] });
                continue;
            }
        };
        match load_tuple(&pred_dir.join(&name)) {
            Ok(pred) => instances.push(evaluate_pair(&name, &pred, &gt, opts)),
            Err(e) => instances.push(InstanceReport {
                id: name,
                group: Some(gt.tuple.interaction.kind),
                metrics: MetricReport::default(),
                errors: vec![format!("prediction: {e}")],
            }),
        }
    }
    let scored: Vec<&InstanceReport> = instances.iter().filter(|r| r.errors.is_empty()).collect();
    let mut aggregate = BTreeMap::new();
    aggregate.insert("all".to_string(), mean_report(&scored));
    for (key, kind) in [("hand_object", InteractionKind::HandObject), ("tool_object", InteractionKind::ToolObject)] {
        let group: Vec<&InstanceReport> = scored.iter().copied().filter(|r| r.group == Some(kind)).collect();
        if !group.is_empty() {
            aggregate.insert(key.to_string(), mean_report(&group));
        }
    }
    Ok(EvalReport { dtw_normalized_by_path: opts.normalize_dtw, instances, aggregate })
}
