//! Plot-ready CSV and JSON artifacts for an [`EvalReport`].
//!
//! | file             | columns                                          |
//! |------------------|--------------------------------------------------|
//! | `layers.csv`     | `tap,layer_name,feature_len,pca_dims,accuracy`   |
//! | `roc_<tap>.csv`  | `fmr,tpr`, one row per ROC sweep point           |
//! | `boxplot.csv`    | `config,min,q1,median,q3,max`                    |
//! | `report.json`    | the full report                                  |
//!
//! The ROC and boxplot files describe the best tap; an empty sweep writes
//! header-only `layers.csv` and `boxplot.csv` and no ROC file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, FiveNumber, RocPoint};
use crate::model::TapIndex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPoint {
    pub tap: TapIndex,
    pub layer_name: String,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocSeries {
    pub name: String,
    pub points: Vec<RocPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub config: String,
    pub stats: FiveNumber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotBundle {
    pub layer_curve: Vec<LayerPoint>,
    pub roc_series: Vec<RocSeries>,
    pub boxplot_stats: Vec<BoxplotRow>,
}

impl PlotBundle {
    pub fn from_report(report: &EvalReport) -> Self {
        let layer_curve = report
            .taps
            .iter()
            .map(|t| LayerPoint { tap: t.tap, layer_name: t.layer_name.clone(), accuracy: t.accuracy })
            .collect();
        let (roc_series, boxplot_stats) = match &report.best {
            Some(best) => {
                let name = format!("{}_tap{}", report.model, best.tap);
                (
                    vec![RocSeries { name: name.clone(), points: best.roc.points.clone() }],
                    vec![BoxplotRow { config: name, stats: best.subsplit.summary }],
                )
            }
            None => (vec![], vec![]),
        };
        Self { layer_curve, roc_series, boxplot_stats }
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("CSV encoding failed: {e}")))
}

fn write(path: PathBuf, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

pub fn to_json(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes the report files into `out_dir` and returns their paths in writing order.
pub fn emit(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    let layers = csv_bytes(
        &["tap", "layer_name", "feature_len", "pca_dims", "accuracy"],
        report.taps.iter().map(|t| {
            vec![
                t.tap.to_string(),
                t.layer_name.clone(),
                t.feature_len.to_string(),
                t.pca_dims.to_string(),
                t.accuracy.to_string(),
            ]
        }),
    )?;
    write(out_dir.join("layers.csv"), &layers, &mut files)?;

    if let Some(best) = &report.best {
        let roc = csv_bytes(
            &["fmr", "tpr"],
            best.roc.points.iter().map(|p| vec![p.fmr.to_string(), p.tpr.to_string()]),
        )?;
        write(out_dir.join(format!("roc_{}.csv", best.tap)), &roc, &mut files)?;
    }

    let bundle = PlotBundle::from_report(report);
    let boxplot = csv_bytes(
        &["config", "min", "q1", "median", "q3", "max"],
        bundle.boxplot_stats.iter().map(|b| {
            let s = b.stats;
            vec![
                b.config.clone(),
                s.min.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
            ]
        }),
    )?;
    write(out_dir.join("boxplot.csv"), &boxplot, &mut files)?;

    write(out_dir.join("report.json"), to_json(report)?.as_bytes(), &mut files)?;
    Ok(files)
}
