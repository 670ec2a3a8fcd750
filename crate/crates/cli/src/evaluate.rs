use std::path::{Path, PathBuf};

use fim_core::eval::MetricReport;
use fim_core::scene::{ScenarioKind, SceneContext};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{
    read_json, read_scene, write_bytes, write_json, ForecastFile, FORMAT_VERSION,
};
use crate::runtime::{collect_scene_files, create_dir, scene_id};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub k: usize,
    pub min_ade: f64,
    pub min_fde: f64,
    pub miss_rate: f64,
    pub brier: f64,
    pub brier_min_fde: f64,
}

impl From<MetricReport> for Metrics {
    fn from(r: MetricReport) -> Self {
        Metrics {
            k: r.k,
            min_ade: r.min_ade,
            min_fde: r.min_fde,
            miss_rate: r.miss_rate,
            brier: r.brier,
            brier_min_fde: r.brier_min_fde,
        }
    }
}

impl From<Metrics> for MetricReport {
    fn from(m: Metrics) -> Self {
        MetricReport {
            k: m.k,
            min_ade: m.min_ade,
            min_fde: m.min_fde,
            miss_rate: m.miss_rate,
            brier: m.brier,
            brier_min_fde: m.brier_min_fde,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneMetrics {
    pub scene: String,
    pub kind: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KindMetrics {
    pub kind: String,
    pub scenes: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub version: u32,
    pub scenes: Vec<SceneMetrics>,
    pub by_kind: Vec<KindMetrics>,
    pub aggregate: Option<Metrics>,
    pub skipped: Vec<String>,
}

/// Metrics of one forecast against its scene, in the target frame.
pub fn score(
    scene: &SceneContext,
    modes: &[Vec<fim_core::Point>],
    probs: &[f64],
) -> fim_core::Result<MetricReport> {
    let normalized = scene.normalize_to_target()?;
    MetricReport::for_scene(modes, probs, &normalized.gt_future)
}

pub fn aggregate(rows: &[SceneMetrics]) -> (Option<Metrics>, Vec<KindMetrics>) {
    let all: Vec<MetricReport> = rows.iter().map(|r| r.metrics.into()).collect();
    let total = MetricReport::aggregate(&all).ok().map(Metrics::from);
    let by_kind = ScenarioKind::ALL
        .iter()
        .filter_map(|k| {
            let of_kind: Vec<MetricReport> = rows
                .iter()
                .filter(|r| r.kind == k.as_str())
                .map(|r| r.metrics.into())
                .collect();
            MetricReport::aggregate(&of_kind).ok().map(|m| KindMetrics {
                kind: k.as_str().to_string(),
                scenes: of_kind.len(),
                metrics: m.into(),
            })
        })
        .collect();
    (total, by_kind)
}

/// Aligned text table, one row per labelled metric set.
pub fn table(rows: &[(String, Metrics)]) -> String {
    let k = rows.first().map_or(6, |r| r.1.k);
    let headers = [
        "".to_string(),
        format!("minADE_{k}"),
        format!("minFDE_{k}"),
        format!("MR_{k}"),
        format!("brier-minFDE_{k}"),
        "Brier".to_string(),
    ];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|(label, m)| {
            [
                label.clone(),
                format!("{:.4}", m.min_ade),
                format!("{:.4}", m.min_fde),
                format!("{:.4}", m.miss_rate),
                format!("{:.4}", m.brier_min_fde),
                format!("{:.4}", m.brier),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..6)
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([headers[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |c: &[String]| {
        let mut s = format!("{:<w$}", c[0], w = widths[0]);
        for i in 1..6 {
            s.push_str(&format!("  {:>w$}", c[i], w = widths[i]));
        }
        s.push('\n');
        s
    };
    let mut out = line(&headers);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
    out.push('\n');
    for c in &cells {
        out.push_str(&line(c));
    }
    out
}

/// Evaluates every scene in `scenes` against `<id>.forecast.json` in
/// `forecasts`. Writes the report even when some forecasts are missing;
/// those are listed as skipped and turn the result into an error.
pub fn run(forecasts: &Path, scenes: &Path, out: &Path) -> CliResult<EvalReport> {
    let paths = collect_scene_files(&[PathBuf::from(scenes)])?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for path in &paths {
        let id = scene_id(path);
        let fpath = forecasts.join(format!("{id}.forecast.json"));
        if !fpath.is_file() {
            skipped.push(id);
            continue;
        }
        let scene = read_scene(path)?;
        let forecast: ForecastFile = read_json(&fpath)?;
        let report = score(&scene, &forecast.mode_points(), &forecast.probs())
            .map_err(|e| CliError::core(e).with("scene", path.display().to_string()))?;
        rows.push(SceneMetrics {
            scene: id,
            kind: scene.kind.as_str().to_string(),
            metrics: report.into(),
        });
    }
    let (total, by_kind) = aggregate(&rows);
    let report = EvalReport {
        version: FORMAT_VERSION,
        scenes: rows,
        by_kind,
        aggregate: total,
        skipped,
    };

    create_dir(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    let mut labelled: Vec<(String, Metrics)> = report
        .by_kind
        .iter()
        .map(|k| (format!("{} ({})", k.kind, k.scenes), k.metrics))
        .collect();
    if let Some(t) = report.aggregate {
        labelled.push((format!("all ({})", report.scenes.len()), t));
    }
    write_bytes(&out.join("metrics.txt"), table(&labelled).as_bytes())?;

    if !report.skipped.is_empty() {
        return Err(CliError::new(
            "missing_forecast",
            format!("{} scene(s) had no forecast", report.skipped.len()),
        )
        .with("skipped", report.skipped.clone()));
    }
    Ok(report)
}
