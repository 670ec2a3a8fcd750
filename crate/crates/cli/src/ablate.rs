use std::path::{Path, PathBuf};

use fim_core::eval::MetricReport;
use fim_core::pipeline::{forecast_scene, forecast_vanilla};
use fim_core::scene::SceneContext;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::evaluate::{aggregate, score, table, KindMetrics, Metrics, SceneMetrics};
use crate::formats::{read_scene, write_bytes, write_json, ParamsFile, FORMAT_VERSION};
use crate::runtime::{collect_scene_files, create_dir, scene_id, train_params};

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub reasoning: bool,
    pub demo_horizon_factor: f64,
}

/// Full pipeline at each demonstration horizon, plus the reasoning-free
/// baseline.
pub fn default_variants() -> Vec<Variant> {
    let full = |f: f64, name: &str| Variant {
        name: name.to_string(),
        reasoning: true,
        demo_horizon_factor: f,
    };
    vec![
        Variant {
            name: "no_reasoning".to_string(),
            reasoning: false,
            demo_horizon_factor: 1.0,
        },
        full(1.0, "full"),
        full(1.5, "full_h1.5"),
        full(2.0, "full_h2.0"),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VariantReport {
    pub name: String,
    pub reasoning: bool,
    pub demo_horizon_factor: f64,
    pub aggregate: Metrics,
    pub by_kind: Vec<KindMetrics>,
    pub scenes: Vec<SceneMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Delta {
    pub variant: String,
    pub baseline: String,
    pub brier_min_fde: f64,
    pub brier_min_fde_baseline: f64,
    /// `(baseline - variant) / baseline`; positive is an improvement.
    pub brier_min_fde_improvement: f64,
    pub brier: f64,
    pub brier_baseline: f64,
    pub brier_improvement: f64,
    /// Scenes where the variant's brier-minFDE is strictly lower.
    pub paired_wins: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AblationReport {
    pub version: u32,
    pub scene_count: usize,
    pub variants: Vec<VariantReport>,
    pub deltas: Vec<Delta>,
}

fn relative(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - value) / baseline
    }
}

pub fn delta(variant: &VariantReport, baseline: &VariantReport) -> Delta {
    let (v, b) = (variant.aggregate, baseline.aggregate);
    let paired_wins = variant
        .scenes
        .iter()
        .zip(&baseline.scenes)
        .filter(|(x, y)| x.metrics.brier_min_fde < y.metrics.brier_min_fde)
        .count();
    Delta {
        variant: variant.name.clone(),
        baseline: baseline.name.clone(),
        brier_min_fde: v.brier_min_fde,
        brier_min_fde_baseline: b.brier_min_fde,
        brier_min_fde_improvement: relative(b.brier_min_fde, v.brier_min_fde),
        brier: v.brier,
        brier_baseline: b.brier,
        brier_improvement: relative(b.brier, v.brier),
        paired_wins,
    }
}

/// Scores one variant on every scene, in scene order.
pub fn run_variant(
    cfg: &RunConfig,
    variant: &Variant,
    scenes: &[(String, SceneContext)],
) -> CliResult<(VariantReport, Option<ParamsFile>)> {
    let mut vcfg = cfg.clone();
    vcfg.forecast.demo_horizon_factor = variant.demo_horizon_factor;
    let f = &vcfg.forecast;
    let params = if variant.reasoning {
        let (p, diag, n) = train_params(f)?;
        let file = ParamsFile::new(&p, &diag, f.demo_horizon_factor, n);
        Some((p, file))
    } else {
        None
    };
    let rows = scenes
        .par_iter()
        .map(|(id, scene)| -> CliResult<SceneMetrics> {
            let report: MetricReport = match &params {
                Some((p, _)) => {
                    let out = forecast_scene(scene, p, f)?;
                    score(scene, &out.forecast.modes, &out.forecast.probs)?
                }
                None => {
                    let fc = forecast_vanilla(scene, f)?;
                    score(scene, &fc.modes, &fc.probs)?
                }
            };
            Ok(SceneMetrics {
                scene: id.clone(),
                kind: scene.kind.as_str().to_string(),
                metrics: report.into(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (total, by_kind) = aggregate(&rows);
    let report = VariantReport {
        name: variant.name.clone(),
        reasoning: variant.reasoning,
        demo_horizon_factor: variant.demo_horizon_factor,
        aggregate: total.ok_or_else(|| CliError::new("input", "no scenes to evaluate"))?,
        by_kind,
        scenes: rows,
    };
    Ok((report, params.map(|(_, f)| f)))
}

pub fn run_on(
    cfg: &RunConfig,
    scenes: &[(String, SceneContext)],
    variants: &[Variant],
) -> CliResult<(AblationReport, Vec<(String, ParamsFile)>)> {
    let mut reports = Vec::new();
    let mut params = Vec::new();
    for v in variants {
        log::info!("ablation variant {}", v.name);
        let (r, p) = run_variant(cfg, v, scenes)?;
        reports.push(r);
        if let Some(p) = p {
            params.push((v.name.clone(), p));
        }
    }
    let baseline = reports.iter().find(|r| !r.reasoning);
    let deltas = match baseline {
        Some(b) => reports
            .iter()
            .filter(|r| r.reasoning)
            .map(|r| delta(r, b))
            .collect(),
        None => Vec::new(),
    };
    Ok((
        AblationReport {
            version: FORMAT_VERSION,
            scene_count: scenes.len(),
            variants: reports,
            deltas,
        },
        params,
    ))
}

pub fn render_table(report: &AblationReport) -> String {
    let rows: Vec<(String, Metrics)> = report
        .variants
        .iter()
        .map(|v| (v.name.clone(), v.aggregate))
        .collect();
    let mut out = table(&rows);
    if !report.deltas.is_empty() {
        out.push('\n');
        let w = report
            .deltas
            .iter()
            .map(|d| d.variant.len())
            .max()
            .unwrap_or(0)
            .max(7);
        out.push_str(&format!(
            "{:<w$}  {:>22}  {:>15}  {:>11}\n",
            "variant", "d brier-minFDE vs base", "d Brier vs base", "paired wins"
        ));
        for d in &report.deltas {
            out.push_str(&format!(
                "{:<w$}  {:>21.2}%  {:>14.2}%  {:>5}/{:<5}\n",
                d.variant,
                100.0 * d.brier_min_fde_improvement,
                100.0 * d.brier_improvement,
                d.paired_wins,
                report.scene_count
            ));
        }
    }
    out
}

pub fn load_scenes(dir: &Path) -> CliResult<Vec<(String, SceneContext)>> {
    let paths = collect_scene_files(&[PathBuf::from(dir)])?;
    if paths.is_empty() {
        return Err(
            CliError::new("input", "no scene files found").with("path", dir.display().to_string())
        );
    }
    paths
        .iter()
        .map(|p| read_scene(p).map(|s| (scene_id(p), s)))
        .collect()
}

pub fn run(cfg: &RunConfig, scenes_dir: &Path, out: &Path) -> CliResult<AblationReport> {
    let scenes = load_scenes(scenes_dir)?;
    let (report, params) = run_on(cfg, &scenes, &default_variants())?;
    create_dir(out)?;
    write_bytes(&out.join("config.txt"), cfg.to_text().as_bytes())?;
    write_json(&out.join("ablation.json"), &report)?;
    write_bytes(&out.join("ablation.txt"), render_table(&report).as_bytes())?;
    for (name, p) in &params {
        write_json(&out.join(format!("params_{name}.json")), p)?;
    }
    Ok(report)
}
