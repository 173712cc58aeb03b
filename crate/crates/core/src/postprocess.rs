//! Offline refinement of finished tracks: short-track removal followed by
//! linear interpolation of short gaps.

use std::fmt;
use std::str::FromStr;

use crate::adaptation::{round_frames, TrackerConfig};
use crate::error::{Error, Result};
use crate::scene_features::SceneProfile;
use crate::tracker::{Observation, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostprocessParams {
    /// Minimum number of observed frames for a track to be kept.
    pub n_min: u32,
    /// Longest frame gap that is filled by interpolation.
    pub n_dti: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostprocessMode {
    /// One interpolation window for every scene.
    Simple,
    /// Interpolation window picked from camera motion and scene depth.
    Advanced,
}

impl FromStr for PostprocessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(PostprocessMode::Simple),
            "advanced" => Ok(PostprocessMode::Advanced),
            other => Err(Error::invalid(format!("unknown postprocess mode `{other}`"))),
        }
    }
}

impl fmt::Display for PostprocessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PostprocessMode::Simple => "simple",
            PostprocessMode::Advanced => "advanced",
        })
    }
}

/// Index into `TrackerConfig::cd` for a (fixed camera, deep scene) pair.
pub fn quadrant(fixed_camera: bool, deep_scene: bool) -> usize {
    match (fixed_camera, deep_scene) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

pub fn compute_params(config: &TrackerConfig, profile: &SceneProfile, frame_rate: f64) -> PostprocessParams {
    let cd = config.cd[quadrant(profile.fixed_camera, profile.deep_scene)];
    PostprocessParams {
        n_min: round_frames(config.cm * frame_rate),
        n_dti: round_frames(cd * frame_rate),
    }
}

/// Scene-independent parameters: the widest interpolation window of the four
/// cases.
pub fn simple_params(config: &TrackerConfig, frame_rate: f64) -> PostprocessParams {
    let cd = config.cd.iter().copied().fold(0.0, f64::max);
    PostprocessParams {
        n_min: round_frames(config.cm * frame_rate),
        n_dti: round_frames(cd * frame_rate),
    }
}

/// Keeps tracks with at least `n_min` observed frames.
pub fn remove_short_tracks(tracks: Vec<Track>, n_min: u32) -> Vec<Track> {
    tracks
        .into_iter()
        .filter(|t| t.observed_len() >= n_min as usize)
        .collect()
}

/// Fills every gap of `2..=n_dti` frames between consecutive entries with
/// linearly interpolated boxes, flagged synthetic with score 0. Longer gaps
/// are left alone.
pub fn interpolate_gaps(track: &Track, n_dti: u32) -> Track {
    let mut history: Vec<Observation> = Vec::with_capacity(track.history.len());
    for pair in track.history.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        history.push(*a);
        let gap = b.frame - a.frame;
        if gap > 1 && gap <= n_dti {
            for f in a.frame + 1..b.frame {
                let t = f64::from(f - a.frame) / f64::from(gap);
                history.push(Observation {
                    frame: f,
                    bbox: a.bbox.lerp(&b.bbox, t),
                    score: 0.0,
                    synthetic: true,
                });
            }
        }
    }
    if let Some(last) = track.history.last() {
        history.push(*last);
    }
    Track {
        id: track.id,
        status: track.status,
        history,
    }
}

pub fn apply(tracks: Vec<Track>, params: PostprocessParams) -> Vec<Track> {
    remove_short_tracks(tracks, params.n_min)
        .iter()
        .map(|t| interpolate_gaps(t, params.n_dti))
        .collect()
}

/// Removes short tracks, then interpolates gaps. `Simple` ignores `profile`.
pub fn postprocess(
    tracks: Vec<Track>,
    config: &TrackerConfig,
    profile: &SceneProfile,
    frame_rate: f64,
    mode: PostprocessMode,
) -> Vec<Track> {
    let params = match mode {
        PostprocessMode::Simple => simple_params(config, frame_rate),
        PostprocessMode::Advanced => compute_params(config, profile, frame_rate),
    };
    apply(tracks, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{default_config, Profile};
    use crate::geometry::BoundingBox;
    use crate::tracker::TrackStatus;
    use proptest::prelude::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn obs(frame: u32, bbox: BoundingBox) -> Observation {
        Observation { frame, bbox, score: 0.9, synthetic: false }
    }

    fn track(id: u64, history: Vec<Observation>) -> Track {
        Track { id, status: TrackStatus::Active, history }
    }

    fn profile(fixed: bool, deep: bool) -> SceneProfile {
        SceneProfile { fixed_camera: fixed, deep_scene: deep, ..Default::default() }
    }

    #[test]
    fn params_per_quadrant() {
        let c = default_config(Profile::Mot17);
        assert_eq!(compute_params(&c, &profile(true, false), 30.0), PostprocessParams { n_min: 30, n_dti: 30 });
        assert_eq!(compute_params(&c, &profile(false, true), 30.0).n_dti, 3);
        assert_eq!(compute_params(&c, &profile(true, true), 30.0).n_dti, 21);
        assert_eq!(compute_params(&c, &profile(false, false), 30.0).n_dti, 21);
        let c = default_config(Profile::Mot20);
        for (f, d) in [(true, true), (true, false), (false, true), (false, false)] {
            assert_eq!(compute_params(&c, &profile(f, d), 25.0), PostprocessParams { n_min: 38, n_dti: 13 });
        }
        assert_eq!(simple_params(&default_config(Profile::Mot17), 30.0).n_dti, 30);
    }

    #[test]
    fn short_track_rule() {
        let b = bx(0.0, 0.0, 10.0, 10.0);
        let short = track(1, (1..=5).map(|f| obs(f, b)).collect());
        let exact = track(2, (1..=30).map(|f| obs(f, b)).collect());
        let kept = remove_short_tracks(vec![short.clone(), exact.clone()], 30);
        assert_eq!(kept.iter().map(|t| t.id).collect::<Vec<_>>(), vec![2]);
        assert_eq!(remove_short_tracks(vec![short, exact], 0).len(), 2);
    }

    #[test]
    fn interpolation_example() {
        let t = track(1, vec![obs(10, bx(0.0, 0.0, 10.0, 10.0)), obs(13, bx(6.0, 0.0, 16.0, 10.0))]);
        let filled = interpolate_gaps(&t, 3);
        let frames: Vec<_> = filled.history.iter().map(|o| o.frame).collect();
        assert_eq!(frames, vec![10, 11, 12, 13]);
        let expect = [bx(2.0, 0.0, 12.0, 10.0), bx(4.0, 0.0, 14.0, 10.0)];
        for (o, e) in filled.history[1..3].iter().zip(expect) {
            assert!(o.synthetic && o.score == 0.0);
            for (p, q) in [(o.bbox.x1(), e.x1()), (o.bbox.y1(), e.y1()), (o.bbox.x2(), e.x2()), (o.bbox.y2(), e.y2())] {
                assert!((p - q).abs() < 1e-9);
            }
        }
        // Gap of n_dti + 1 frames is left open.
        assert_eq!(interpolate_gaps(&t, 2), t);
        let consecutive = track(2, vec![obs(1, bx(0.0, 0.0, 1.0, 1.0)), obs(2, bx(1.0, 0.0, 2.0, 1.0))]);
        assert_eq!(interpolate_gaps(&consecutive, 10), consecutive);
    }

    #[test]
    fn gating_is_per_gap() {
        let b = bx(0.0, 0.0, 10.0, 10.0);
        let t = track(1, vec![obs(1, b), obs(4, b), obs(20, b)]);
        let filled = interpolate_gaps(&t, 5);
        let frames: Vec<_> = filled.history.iter().map(|o| o.frame).collect();
        assert_eq!(frames, vec![1, 2, 3, 4, 20]);
    }

    #[test]
    fn composite() {
        let c = default_config(Profile::Mot17);
        assert!(postprocess(vec![], &c, &profile(true, false), 30.0, PostprocessMode::Advanced).is_empty());

        let b = bx(100.0, 100.0, 140.0, 200.0);
        let fp = track(1, (50..53).map(|f| obs(f, b)).collect());
        let mut hist: Vec<_> = (1..=40).map(|f| obs(f, b.translate(f as f64, 0.0))).collect();
        hist.extend((51..=90).map(|f| obs(f, b.translate(f as f64, 0.0))));
        let real = track(2, hist);
        let out = postprocess(vec![fp, real], &c, &profile(true, false), 30.0, PostprocessMode::Advanced);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].history.len(), 90);

        // Moving camera: Cd3/Cd4 windows are shorter than the simple one.
        let gapped = track(3, vec![obs(1, b), obs(25, b), obs(26, b)]);
        let mut cfg = c.clone();
        cfg.cm = 0.0;
        let adv = postprocess(vec![gapped.clone()], &cfg, &profile(false, false), 30.0, PostprocessMode::Advanced);
        let simple = postprocess(vec![gapped], &cfg, &profile(false, false), 30.0, PostprocessMode::Simple);
        assert!(adv[0].history.len() < simple[0].history.len());
        assert_eq!(simple[0].history.len(), 26);
    }

    fn arb_track() -> impl Strategy<Value = Track> {
        proptest::collection::vec((1u32..12, -50.0..50.0f64, -50.0..50.0f64, 1.0..40.0f64, 1.0..40.0f64), 1..12)
            .prop_map(|steps| {
                let mut frame = 0;
                let history = steps
                    .into_iter()
                    .map(|(gap, x, y, w, h)| {
                        frame += gap;
                        obs(frame, bx(x, y, x + w, y + h))
                    })
                    .collect();
                track(7, history)
            })
    }

    proptest! {
        #[test]
        fn interpolation_properties(t in arb_track(), n in 0u32..15, extra in 0u32..5) {
            let once = interpolate_gaps(&t, n);
            prop_assert_eq!(interpolate_gaps(&once, n), once.clone());
            let originals: Vec<_> = once.history.iter().filter(|o| !o.synthetic).copied().collect();
            prop_assert_eq!(originals, t.history.clone());
            let wider = interpolate_gaps(&t, n + extra);
            let frames = |tr: &Track| tr.history.iter().map(|o| o.frame).collect::<std::collections::BTreeSet<_>>();
            prop_assert!(frames(&once).is_subset(&frames(&wider)));
            prop_assert!(once.history.windows(2).all(|w| w[0].frame < w[1].frame));
        }
    }
}
