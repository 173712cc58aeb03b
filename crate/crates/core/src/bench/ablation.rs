//! Tracker variants run side by side on one sequence, and a throughput probe.

use std::fmt::{self, Write as _};
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptation::TrackerConfig;
use crate::bench::metrics::{evaluate, EvalReport};
use crate::error::{Error, Result};
use crate::geometry::CostKind;
use crate::mot_io::{tracks_to_frames, SequenceBundle};
use crate::postprocess::{postprocess, PostprocessMode};
use crate::scene_features::analyze_scene;
use crate::tracker::{track_sequence, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    /// Online tracking with the given first-stage cost and IoU second stage.
    Cost(CostKind),
    /// The full online tracker.
    Default,
    /// The marginal timeout set equal to the central one.
    SameTimeout,
    /// Thresholds pinned to their base values regardless of crowd size.
    FixedHyperparameters,
    /// Default tracking, then short-track removal and a fixed interpolation window.
    SimpleOffline,
    /// Default tracking, then scene-dependent refinement.
    AdvancedOffline,
}

impl AblationMode {
    /// The five variants compared in the innovation study.
    pub const INNOVATIONS: [AblationMode; 5] = [
        AblationMode::Default,
        AblationMode::SameTimeout,
        AblationMode::FixedHyperparameters,
        AblationMode::SimpleOffline,
        AblationMode::AdvancedOffline,
    ];

    /// One row per first-stage cost kind.
    pub fn cost_grid() -> Vec<AblationMode> {
        CostKind::ALL.iter().map(|&k| AblationMode::Cost(k)).collect()
    }

    pub fn all() -> Vec<AblationMode> {
        let mut modes = Self::cost_grid();
        modes.extend(Self::INNOVATIONS);
        modes
    }

    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(kind) = lower.strip_prefix("cost:") {
            return Ok(AblationMode::Cost(kind.parse()?));
        }
        match lower.as_str() {
            "default" => Ok(AblationMode::Default),
            "same-timeout" => Ok(AblationMode::SameTimeout),
            "fixed-hyperparameters" | "fixed" => Ok(AblationMode::FixedHyperparameters),
            "simple-offline" => Ok(AblationMode::SimpleOffline),
            "advanced-offline" => Ok(AblationMode::AdvancedOffline),
            _ => Err(Error::invalid(format!("unknown ablation mode `{s}`"))),
        }
    }

    fn configure(self, base: &TrackerConfig) -> TrackerConfig {
        let mut cfg = base.clone();
        match self {
            AblationMode::Cost(kind) => {
                cfg.first_cost = kind;
                cfg.second_cost = CostKind::Iou;
            }
            AblationMode::SameTimeout => cfg.timeout_marginal = cfg.timeout_central,
            AblationMode::FixedHyperparameters => {
                cfg.hth_m = 0.0;
                cfg.nth_m = 0.0;
                cfg.mth_m = 0.0;
            }
            AblationMode::Default | AblationMode::SimpleOffline | AblationMode::AdvancedOffline => {}
        }
        cfg
    }

    /// Runs this variant and returns its tracks.
    pub fn run(self, bundle: &SequenceBundle, base: &TrackerConfig) -> Result<Vec<Track>> {
        let cfg = self.configure(base);
        let tracks = track_sequence(&cfg, &bundle.meta, &bundle.detections)?;
        let mode = match self {
            AblationMode::SimpleOffline => PostprocessMode::Simple,
            AblationMode::AdvancedOffline => PostprocessMode::Advanced,
            _ => return Ok(tracks),
        };
        let profile = analyze_scene(&cfg, &bundle.detections, bundle.keypoint_samples.as_deref());
        Ok(postprocess(tracks, &cfg, &profile, bundle.meta.frame_rate, mode))
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AblationMode::Cost(kind) => write!(f, "cost:{kind}"),
            AblationMode::Default => f.write_str("default"),
            AblationMode::SameTimeout => f.write_str("same-timeout"),
            AblationMode::FixedHyperparameters => f.write_str("fixed-hyperparameters"),
            AblationMode::SimpleOffline => f.write_str("simple-offline"),
            AblationMode::AdvancedOffline => f.write_str("advanced-offline"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub report: EvalReport,
}

/// Evaluates every mode against the bundle's ground truth. Rows come back
/// in the order of `modes`.
pub fn ablate(
    bundle: &SequenceBundle,
    base: &TrackerConfig,
    modes: &[AblationMode],
    iou_threshold: f64,
) -> Result<Vec<AblationRow>> {
    let gt = bundle
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("sequence `{}` has no ground truth", bundle.name)))?;
    modes
        .par_iter()
        .map(|&mode| {
            let tracks = mode.run(bundle, base)?;
            let report = evaluate(gt, &tracks_to_frames(&tracks), iou_threshold);
            Ok(AblationRow { mode, report })
        })
        .collect()
}

const HEADER: [&str; 8] = ["mode", "MOTA", "IDF1", "IDSW", "FP", "FN", "GT", "IDTP"];

fn cells(row: &AblationRow) -> [String; 8] {
    let r = &row.report;
    [
        row.mode.to_string(),
        format!("{:.4}", r.mota),
        format!("{:.4}", r.idf1),
        r.id_switches.to_string(),
        r.false_positives.to_string(),
        r.false_negatives.to_string(),
        r.gt_count.to_string(),
        r.idtp.to_string(),
    ]
}

pub fn to_csv(rows: &[AblationRow]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&cells(row).join(","));
        out.push('\n');
    }
    out
}

/// Plain-text table with left-aligned names and right-aligned numbers.
pub fn to_table(rows: &[AblationRow]) -> String {
    let body: Vec<[String; 8]> = rows.iter().map(cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &[String]| {
        for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&HEADER.map(String::from));
    for r in &body {
        line(r);
    }
    out
}

/// Median frames per second of the online tracker over `repetitions` full
/// runs with detections already in memory. `None` for an empty sequence or
/// zero repetitions.
pub fn throughput(bundle: &SequenceBundle, config: &TrackerConfig, repetitions: usize) -> Result<Option<f64>> {
    let frames = bundle.detections.len();
    if frames == 0 || repetitions == 0 {
        return Ok(None);
    }
    let mut rates = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let tracks = track_sequence(config, &bundle.meta, &bundle.detections)?;
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(tracks);
        rates.push(if secs > 0.0 { frames as f64 / secs } else { f64::INFINITY });
    }
    rates.sort_by(f64::total_cmp);
    let mid = rates.len() / 2;
    let median = if rates.len() % 2 == 1 { rates[mid] } else { (rates[mid - 1] + rates[mid]) / 2.0 };
    Ok(Some(median))
}
