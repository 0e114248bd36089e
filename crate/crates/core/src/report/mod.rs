//! Run-directory bookkeeping and chart rendering.
//!
//! Analysis modules append rows through [`CsvLog`]; [`render_run`] turns every
//! known metrics CSV into a fixed-size SVG under `charts/` and records the
//! charts (and any skipped series) in the run's [`RunManifest`].

mod chart;
mod csvlog;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

pub use chart::{collect_series, render_chart, render_svg, ChartOutcome, ChartSpec, Series, Table, HEIGHT, WIDTH};
pub use csvlog::{fmt_num, CsvLog};
pub use manifest::{RunManifest, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderSummary {
    pub charts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn spec(run_dir: &Path, csv: &Path, name: &str, x: &str, y: &[&str], group: Option<&str>, title: &str) -> ChartSpec {
    ChartSpec {
        source: csv.to_path_buf(),
        x: x.into(),
        y: y.iter().map(|s| s.to_string()).collect(),
        group_by: group.map(str::to_string),
        filter: Vec::new(),
        title: title.into(),
        output: run_dir.join("charts").join(format!("{name}.svg")),
    }
}

/// One chart spec per known CSV in `<run>/metrics`, in file-name order.
pub fn chart_specs(run_dir: &Path) -> Result<Vec<ChartSpec>> {
    let metrics = run_dir.join("metrics");
    let mut names: Vec<String> = fs::read_dir(&metrics)
        .map_err(|e| Error::io(&metrics, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for name in names {
        let csv = metrics.join(&name);
        let stem = name.trim_end_matches(".csv");
        match stem {
            "train_loss" => out.push(spec(run_dir, &csv, stem, "step", &["loss"], None, "Training loss")),
            "val" => out.push(spec(run_dir, &csv, stem, "epoch", &["loss", "accuracy"], None, "Validation")),
            "intdim" => out.push(spec(run_dir, &csv, stem, "step", &["estimate"], Some("layer"), "Intrinsic dimension")),
            "hessian" => {
                let mut l1 = spec(run_dir, &csv, "hessian_lambda1", "step", &["lambda_1"], Some("split"), "Top Hessian eigenvalue");
                l1.filter.push(("component".into(), "all".into()));
                let mut tr = spec(run_dir, &csv, "hessian_trace", "step", &["trace"], Some("split"), "Hessian trace");
                tr.filter.push(("component".into(), "all".into()));
                let mut comp = spec(run_dir, &csv, "hessian_components", "step", &["lambda_1"], Some("component"), "Top eigenvalue by component (train)");
                comp.filter.push(("split".into(), "train".into()));
                let mut al = spec(run_dir, &csv, "hessian_alignment", "step", &["grad_alignment"], Some("split"), "Gradient alignment");
                al.filter.push(("component".into(), "all".into()));
                out.extend([l1, tr, comp, al]);
            }
            "pos_accuracy" => out.push(spec(run_dir, &csv, stem, "step", &["accuracy"], Some("tag"), "Accuracy by POS")),
            "role_accuracy" => out.push(spec(run_dir, &csv, stem, "step", &["accuracy"], Some("role"), "Accuracy by semantic role")),
            "misalignment" => out.push(spec(
                run_dir,
                &csv,
                stem,
                "step",
                &["exact", "type_correct_token_wrong", "type_wrong"],
                None,
                "Prediction alignment",
            )),
            s if s.starts_with("probes_") => {
                let title = format!("Probe confidence ({})", &s["probes_".len()..]);
                out.push(spec(run_dir, &csv, &format!("{s}_confidence"), "step", &["confidence"], Some("label"), &title));
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Renders every chart for a run and, when a manifest exists, registers the
/// charts and warnings in it.
pub fn render_run(run_dir: &Path) -> Result<RenderSummary> {
    let mut summary = RenderSummary::default();
    for spec in chart_specs(run_dir)? {
        let out = render_chart(&spec)?;
        summary.charts.extend(out.written);
        summary.warnings.extend(out.warnings);
    }
    if run_dir.join(MANIFEST_FILE).is_file() {
        let mut m = RunManifest::load(run_dir)?;
        for c in &summary.charts {
            if let Ok(rel) = c.strip_prefix(run_dir) {
                m.register(&rel.to_string_lossy());
            }
        }
        for w in &summary.warnings {
            m.warn(w.clone());
        }
        m.save(run_dir)?;
    }
    Ok(summary)
}
