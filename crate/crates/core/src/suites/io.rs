//! Columnar CSV serialization for datasets, plus the JSON sidecar echoing
//! the generating spec.
//!
//! One row per sample: features, label, expert predictions, region tag,
//! then the full η and α vectors. Floats carry 17 significant digits so
//! the file round-trips; '.' decimal, no locale.

use std::io;
use std::path::Path;

use serde::Serialize;

use super::{LabeledDataset, SuiteSpec};
use crate::textio::{fmt_f64, write_atomic};

/// Render the dataset as CSV text.
pub fn dataset_csv(ds: &LabeledDataset) -> String {
    let d = ds.meta.feature_dim();
    let k = ds.meta.num_classes;
    let j = ds.meta.num_experts;

    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    header.extend((0..j).map(|e| format!("m{e}")));
    header.push("region".into());
    header.extend((0..k).map(|c| format!("eta{c}")));
    header.extend((0..j).map(|e| format!("alpha{e}")));

    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');

    for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
        let mut row: Vec<String> = sample.features.iter().map(|&x| fmt_f64(x)).collect();
        row.push(sample.label.to_string());
        row.extend(sample.expert_preds.iter().map(|m| m.to_string()));
        row.push(gt.region.tag());
        row.extend(gt.class_posterior.iter().map(|&x| fmt_f64(x)));
        row.extend(gt.expert_utility.iter().map(|&x| fmt_f64(x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    spec: &'a SuiteSpec,
    feature_dim: usize,
    rows: usize,
}

/// JSON sidecar describing the dataset.
pub fn dataset_sidecar_json(ds: &LabeledDataset) -> String {
    let sidecar =
        Sidecar { spec: &ds.meta, feature_dim: ds.meta.feature_dim(), rows: ds.len() };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialization");
    json.push('\n');
    json
}

/// Write `<stem>.csv` and `<stem>.json` atomically under `dir`.
pub fn write_dataset(ds: &LabeledDataset, dir: &Path, stem: &str) -> io::Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), &dataset_csv(ds))?;
    write_atomic(&dir.join(format!("{stem}.json")), &dataset_sidecar_json(ds))
}
