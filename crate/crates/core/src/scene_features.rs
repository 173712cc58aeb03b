//! Whole-video scene descriptors: fixed vs moving camera and deep vs shallow
//! scene. Both are decided from a handful of frames sampled uniformly
//! through the video.

use crate::adaptation::TrackerConfig;
use crate::error::{Error, Result};
use crate::tracker::Detection;

/// Number of frames (or frame pairs) sampled per video.
pub const SAMPLE_COUNT: usize = 5;

/// A keypoint matched between two consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointMatch {
    pub prev: (f64, f64),
    pub cur: (f64, f64),
}

impl KeypointMatch {
    pub fn new(prev: (f64, f64), cur: (f64, f64)) -> Result<Self> {
        if ![prev.0, prev.1, cur.0, cur.1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite keypoint coordinate"));
        }
        Ok(Self { prev, cur })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneProfile {
    pub fixed_camera: bool,
    pub deep_scene: bool,
    pub depth_scores: Vec<f64>,
    pub stationary_votes: Vec<bool>,
}

pub fn displacement(m: &KeypointMatch) -> f64 {
    (m.cur.0 - m.prev.0).hypot(m.cur.1 - m.prev.1)
}

/// A frame pair shows a stationary camera when at least one keypoint moved
/// less than `threshold` pixels. No matches means no evidence.
pub fn frame_pair_is_stationary(matches: &[KeypointMatch], threshold: f64) -> bool {
    matches.iter().any(|m| displacement(m) < threshold)
}

/// Strict majority of per-sample stationary votes.
pub fn majority(votes: &[bool]) -> Result<bool> {
    if votes.is_empty() {
        return Err(Error::invalid("camera classification needs at least one sample"));
    }
    let yes = votes.iter().filter(|&&v| v).count();
    Ok(2 * yes > votes.len())
}

/// Votes over up to five sampled frame pairs. Returns the verdict and the
/// individual votes.
pub fn classify_camera(samples: &[Vec<KeypointMatch>], threshold: f64) -> Result<(bool, Vec<bool>)> {
    let votes: Vec<bool> = samples
        .iter()
        .map(|s| frame_pair_is_stationary(s, threshold))
        .collect();
    Ok((majority(&votes)?, votes))
}

/// `|mean − midrange| / midrange` of object heights. Lies in `[0, 1)`;
/// near zero when heights are spread evenly, approaching one when nearly
/// all objects share the maximum height and one is tiny.
pub fn depth_score(heights: &[f64]) -> Result<f64> {
    if heights.len() < 2 {
        return Err(Error::invalid("depth score needs at least two heights"));
    }
    if heights.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
        return Err(Error::invalid("heights must be positive"));
    }
    let (lo, hi) = heights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)));
    let midrange = (hi + lo) / 2.0;
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    Ok((mean - midrange).abs() / midrange)
}

/// Averages the depth scores of the usable samples (two or more heights)
/// and compares against `threshold`. No usable sample means shallow.
pub fn classify_depth(samples: &[Vec<f64>], threshold: f64) -> (bool, Vec<f64>) {
    let scores: Vec<f64> = samples
        .iter()
        .filter(|s| s.len() >= 2)
        .filter_map(|s| depth_score(s).ok())
        .collect();
    if scores.is_empty() {
        return (false, scores);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    (mean > threshold, scores)
}

/// Zero-based indices of the sampled frames for a video of `total` frames:
/// `⌊k·(total − 1)/5⌋` for `k = 0..5`. Each index also names the first frame
/// of a keypoint pair whose second frame is its successor.
pub fn sample_indices(total: usize) -> Vec<usize> {
    if total == 0 {
        return Vec::new();
    }
    (0..SAMPLE_COUNT).map(|k| k * (total - 1) / SAMPLE_COUNT).collect()
}

/// Builds the profile of one video.
///
/// `frames[i]` holds the detections of frame `i + 1`; depth uses detections
/// scoring above the crowd threshold in the sampled frames. Without keypoint
/// data the camera is taken to be moving.
pub fn analyze_scene(
    config: &TrackerConfig,
    frames: &[Vec<Detection>],
    keypoints: Option<&[Vec<KeypointMatch>]>,
) -> SceneProfile {
    let cth = config.crowd_threshold();
    let height_samples: Vec<Vec<f64>> = sample_indices(frames.len())
        .into_iter()
        .map(|i| {
            frames[i]
                .iter()
                .filter(|d| d.score > cth && d.bbox.height() > 0.0)
                .map(|d| d.bbox.height())
                .collect()
        })
        .collect();
    let (deep_scene, depth_scores) = classify_depth(&height_samples, config.depth_threshold);

    let (fixed_camera, stationary_votes) = match keypoints {
        Some(samples) => classify_camera(samples, config.stationary_displacement_px)
            .unwrap_or((false, Vec::new())),
        None => (false, Vec::new()),
    };
    SceneProfile {
        fixed_camera,
        deep_scene,
        depth_scores,
        stationary_votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shift(dx: f64, dy: f64) -> KeypointMatch {
        KeypointMatch::new((100.0, 100.0), (100.0 + dx, 100.0 + dy)).unwrap()
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(displacement(&shift(0.0, 0.0)), 0.0);
        assert_eq!(displacement(&shift(3.0, 4.0)), 5.0);
        assert!(KeypointMatch::new((f64::NAN, 0.0), (0.0, 0.0)).is_err());
    }

    #[test]
    fn stationary_rule() {
        assert!(frame_pair_is_stationary(&[shift(4.9, 0.0), shift(30.0, 0.0)], 5.0));
        assert!(!frame_pair_is_stationary(&[shift(5.0, 0.0), shift(6.0, 0.0)], 5.0));
        assert!(!frame_pair_is_stationary(&[], 5.0));
    }

    #[test]
    fn voting() {
        assert!(majority(&[true, true, true, false, false]).unwrap());
        assert!(!majority(&[false; 5]).unwrap());
        assert!(majority(&[true, true, false]).unwrap());
        assert!(!majority(&[true, false]).unwrap());
        assert!(majority(&[]).is_err());
        assert!(classify_camera(&[], 5.0).is_err());
        let (fixed, votes) = classify_camera(&[vec![shift(1.0, 0.0)], vec![], vec![shift(2.0, 2.0)]], 5.0).unwrap();
        assert!(fixed);
        assert_eq!(votes, vec![true, false, true]);
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth_score(&[100.0, 100.0, 100.0]).unwrap(), 0.0);
        assert_eq!(depth_score(&[10.0, 100.0]).unwrap(), 0.0);
        let s = depth_score(&[10.0, 100.0, 100.0, 100.0]).unwrap();
        assert!((s - 22.5 / 55.0).abs() < 1e-12);
        assert!((s - 0.409091).abs() < 1e-6);
        assert!(depth_score(&[10.0]).is_err());
        assert!(depth_score(&[10.0, 0.0]).is_err());
    }

    #[test]
    fn depth_classification() {
        let (deep, scores) = classify_depth(&vec![vec![50.0, 50.0]; 5], 0.5);
        assert!(!deep);
        assert_eq!(scores, vec![0.0; 5]);
        // Samples with fewer than two heights are skipped.
        let (deep, scores) = classify_depth(&[vec![10.0], vec![]], 0.5);
        assert!(!deep && scores.is_empty());
    }

    #[test]
    fn approaches_one_for_a_single_tiny_object() {
        let mut h = vec![100.0; 999];
        h.push(1e-6);
        let s = depth_score(&h).unwrap();
        assert!(s > 0.99 && s < 1.0);
    }

    #[test]
    fn sample_index_rule() {
        assert_eq!(sample_indices(600), vec![0, 119, 239, 359, 479]);
        assert_eq!(sample_indices(3), vec![0, 0, 0, 1, 1]);
        assert!(sample_indices(0).is_empty());
    }

    proptest! {
        #[test]
        fn depth_in_unit_interval_and_scale_free(
            h in proptest::collection::vec(0.01..1000.0f64, 2..40),
            k in 0.01..100.0f64,
        ) {
            let s = depth_score(&h).unwrap();
            prop_assert!((0.0..1.0).contains(&s));
            let scaled: Vec<f64> = h.iter().map(|v| v * k).collect();
            prop_assert!((depth_score(&scaled).unwrap() - s).abs() < 1e-12);
            let mut rev = h.clone();
            rev.reverse();
            prop_assert!((depth_score(&rev).unwrap() - s).abs() < 1e-12);
        }

        #[test]
        fn extra_stationary_vote_never_flips_to_moving(votes in proptest::collection::vec(any::<bool>(), 1..6)) {
            let before = majority(&votes).unwrap();
            let mut more = votes.clone();
            if let Some(v) = more.iter_mut().find(|v| !**v) {
                *v = true;
            }
            prop_assert!(!before || majority(&more).unwrap());
        }
    }
}
