//! Online tracking loop.
//!
//! Each frame runs, in order: expiry of lost tracks, score-based split of the
//! detections, BBSI association of the whole track pool (active and lost)
//! against definite detections, track birth, IoU association of the leftover
//! tracks against possible detections, and loss bookkeeping. There is no
//! motion model: a track is always represented by its last observed box.

use crate::adaptation::{
    adaptive_thresholds, derive_video_params, FrameThresholds, SceneMetadata, TrackerConfig,
    VideoParams,
};
use crate::assignment::solve;
use crate::error::{Error, Result};
use crate::geometry::{cost_matrix, BoundingBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!("detection score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, score })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Active,
    LostAtCenter,
    LostAtMargin,
}

/// One entry of a track's history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
    /// Filled in offline rather than observed.
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub status: TrackStatus,
    /// Frame-ordered; never empty.
    pub history: Vec<Observation>,
}

impl Track {
    fn start(id: u64, frame: u32, det: &Detection) -> Self {
        Self {
            id,
            status: TrackStatus::Active,
            history: vec![Observation {
                frame,
                bbox: det.bbox,
                score: det.score,
                synthetic: false,
            }],
        }
    }

    fn last(&self) -> &Observation {
        self.history.last().expect("tracks are created with one observation")
    }

    pub fn last_box(&self) -> BoundingBox {
        self.last().bbox
    }

    pub fn last_frame(&self) -> u32 {
        self.last().frame
    }

    pub fn last_score(&self) -> f64 {
        self.last().score
    }

    /// Number of observed (non-synthetic) frames.
    pub fn observed_len(&self) -> usize {
        self.history.iter().filter(|o| !o.synthetic).count()
    }

    fn activate(&mut self, frame: u32, det: &Detection) {
        self.status = TrackStatus::Active;
        self.history.push(Observation {
            frame,
            bbox: det.bbox,
            score: det.score,
            synthetic: false,
        });
    }
}

/// Marginal when the box center is strictly closer than the margin to any
/// frame edge; a center exactly on the margin line is central.
pub fn classify_loss_location(
    bbox: &BoundingBox,
    width: f64,
    height: f64,
    h_margin: f64,
    v_margin: f64,
) -> TrackStatus {
    let (cx, cy) = bbox.center();
    let marginal = cx < h_margin || cx > width - h_margin || cy < v_margin || cy > height - v_margin;
    if marginal {
        TrackStatus::LostAtMargin
    } else {
        TrackStatus::LostAtCenter
    }
}

/// What happened during one [`Tracker::step`], for diagnostics and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub thresholds: Option<FrameThresholds>,
    pub pruned: Vec<u64>,
    pub first_stage: Vec<(u64, usize)>,
    pub second_stage: Vec<(u64, usize)>,
    pub spawned: Vec<u64>,
    pub newly_lost: Vec<u64>,
    /// Detections above LTH that were neither matched nor spawned.
    pub dropped: Vec<usize>,
}

/// Tracker state for one video.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    scene: SceneMetadata,
    params: VideoParams,
    active: Vec<Track>,
    lost: Vec<Track>,
    retired: Vec<Track>,
    next_id: u64,
    frame_no: u32,
    last_report: StepReport,
}

impl Tracker {
    pub fn new(config: TrackerConfig, scene: SceneMetadata) -> Result<Self> {
        scene.validate()?;
        config.validate()?;
        let params = derive_video_params(&config, &scene);
        Ok(Self {
            config,
            scene,
            params,
            active: Vec::new(),
            lost: Vec::new(),
            retired: Vec::new(),
            next_id: 1,
            frame_no: 0,
            last_report: StepReport::default(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn scene(&self) -> &SceneMetadata {
        &self.scene
    }

    pub fn params(&self) -> &VideoParams {
        &self.params
    }

    pub fn active(&self) -> &[Track] {
        &self.active
    }

    pub fn lost(&self) -> &[Track] {
        &self.lost
    }

    pub fn frame_no(&self) -> u32 {
        self.frame_no
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn last_report(&self) -> &StepReport {
        &self.last_report
    }

    /// Drops lost tracks whose absence exceeds their timeout (strictly).
    /// Returns the ids removed.
    pub fn prune_lost(&mut self, frame_no: u32) -> Vec<u64> {
        let VideoParams {
            central_timeout,
            marginal_timeout,
            ..
        } = self.params;
        let mut removed = Vec::new();
        let mut kept = Vec::with_capacity(self.lost.len());
        for track in self.lost.drain(..) {
            let age = frame_no.saturating_sub(track.last_frame());
            let timeout = match track.status {
                TrackStatus::LostAtMargin => marginal_timeout,
                _ => central_timeout,
            };
            if age > timeout {
                removed.push(track.id);
                self.retired.push(track);
            } else {
                kept.push(track);
            }
        }
        self.lost = kept;
        removed
    }

    /// Processes one frame and returns the tracks active in it.
    pub fn step(&mut self, detections: &[Detection], frame_no: u32) -> Result<&[Track]> {
        if frame_no <= self.frame_no {
            return Err(Error::invalid(format!(
                "frame {frame_no} does not follow frame {}",
                self.frame_no
            )));
        }
        self.frame_no = frame_no;
        let mut report = StepReport {
            pruned: self.prune_lost(frame_no),
            ..StepReport::default()
        };

        let mut pool: Vec<Track> = Vec::with_capacity(self.active.len() + self.lost.len());
        pool.append(&mut self.active);
        pool.append(&mut self.lost);

        let thresholds = adaptive_thresholds(&self.config, detections.iter().map(|d| d.score));
        report.thresholds = Some(thresholds);
        let mut definite = Vec::new();
        let mut possible = Vec::new();
        for (i, d) in detections.iter().enumerate() {
            if d.score > thresholds.high {
                definite.push(i);
            } else if d.score > self.config.lth {
                possible.push(i);
            }
        }

        // Index into `detections` matched to each pool entry.
        let mut assigned: Vec<Option<usize>> = vec![None; pool.len()];
        let mut late = vec![false; pool.len()];
        let mut unmatched_pool: Vec<usize> = Vec::new();
        let mut newborn: Vec<usize> = Vec::new();

        if !pool.is_empty() {
            let track_boxes: Vec<BoundingBox> = pool.iter().map(Track::last_box).collect();
            let det_boxes: Vec<BoundingBox> = definite.iter().map(|&i| detections[i].bbox).collect();
            let costs = cost_matrix(&track_boxes, &det_boxes, self.config.first_cost);
            let result = solve(&costs, thresholds.max_first_cost)?;
            for m in &result.matches {
                assigned[m.row] = Some(definite[m.col]);
                report.first_stage.push((pool[m.row].id, definite[m.col]));
            }
            unmatched_pool = result.unmatched_rows;
            newborn.extend(result.unmatched_cols.iter().map(|&c| definite[c]));
        } else {
            newborn.extend(definite.iter().copied());
        }

        if !unmatched_pool.is_empty() && !possible.is_empty() {
            let track_boxes: Vec<BoundingBox> =
                unmatched_pool.iter().map(|&p| pool[p].last_box()).collect();
            let det_boxes: Vec<BoundingBox> = possible.iter().map(|&i| detections[i].bbox).collect();
            let costs = cost_matrix(&track_boxes, &det_boxes, self.config.second_cost);
            let result = solve(&costs, self.config.mth2)?;
            for m in &result.matches {
                let p = unmatched_pool[m.row];
                assigned[p] = Some(possible[m.col]);
                late[p] = true;
                report.second_stage.push((pool[p].id, possible[m.col]));
            }
            report
                .dropped
                .extend(result.unmatched_cols.iter().map(|&c| possible[c]));
        } else {
            report.dropped.extend(possible.iter().copied());
        }

        let mut active = Vec::with_capacity(pool.len() + newborn.len());
        let mut second = Vec::new();
        let mut lost = Vec::new();
        for ((mut track, slot), late) in pool.into_iter().zip(assigned).zip(late) {
            match slot {
                Some(det) => {
                    track.activate(frame_no, &detections[det]);
                    if late {
                        second.push(track);
                    } else {
                        active.push(track);
                    }
                }
                None => {
                    if track.status == TrackStatus::Active {
                        track.status = classify_loss_location(
                            &track.last_box(),
                            self.scene.width,
                            self.scene.height,
                            self.params.h_margin,
                            self.params.v_margin,
                        );
                        report.newly_lost.push(track.id);
                    }
                    lost.push(track);
                }
            }
        }

        for det in newborn {
            let d = &detections[det];
            if d.score >= thresholds.new_track {
                let id = self.next_id;
                self.next_id += 1;
                active.push(Track::start(id, frame_no, d));
                report.spawned.push(id);
            } else {
                report.dropped.push(det);
            }
        }
        active.append(&mut second);
        report.dropped.sort_unstable();

        self.active = active;
        self.lost = lost;
        self.last_report = report;
        Ok(&self.active)
    }

    /// Every track created so far: active, lost and expired.
    pub fn into_tracks(self) -> Vec<Track> {
        let mut all = self.retired;
        all.extend(self.lost);
        all.extend(self.active);
        all.sort_by_key(|t| t.id);
        all
    }
}

/// Runs a tracker over frame-indexed detections (`frames[i]` holds frame
/// `i + 1`) and returns every track created.
pub fn track_sequence(
    config: &TrackerConfig,
    scene: &SceneMetadata,
    frames: &[Vec<Detection>],
) -> Result<Vec<Track>> {
    let mut tracker = Tracker::new(config.clone(), *scene)?;
    for (i, dets) in frames.iter().enumerate() {
        tracker.step(dets, i as u32 + 1)?;
    }
    Ok(tracker.into_tracks())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{default_config, Profile};

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn det(b: BoundingBox, s: f64) -> Detection {
        Detection::new(b, s).unwrap()
    }

    fn hd() -> SceneMetadata {
        SceneMetadata::new(30.0, 1920.0, 1080.0).unwrap()
    }

    fn tracker() -> Tracker {
        Tracker::new(default_config(Profile::Mot17), hd()).unwrap()
    }

    fn ids(tracks: &[Track]) -> Vec<u64> {
        tracks.iter().map(|t| t.id).collect()
    }

    #[test]
    fn new_tracker_derives_params() {
        let t = tracker();
        assert_eq!(t.params().central_timeout, 30);
        assert_eq!(t.params().marginal_timeout, 21);
        assert!((t.params().h_margin - 192.0).abs() < 1e-9);
        assert!((t.params().v_margin - 108.0).abs() < 1e-9);
        assert_eq!(t.next_id(), 1);
        assert!(t.active().is_empty() && t.lost().is_empty());

        let small = Tracker::new(
            default_config(Profile::Mot17),
            SceneMetadata { frame_rate: 10.0, width: 640.0, height: 480.0 },
        )
        .unwrap();
        let p = small.params();
        assert_eq!((p.central_timeout, p.marginal_timeout), (10, 7));
        assert!((p.h_margin - 64.0).abs() < 1e-9 && (p.v_margin - 48.0).abs() < 1e-9);

        let bad = SceneMetadata { frame_rate: 0.0, width: 640.0, height: 480.0 };
        assert!(Tracker::new(default_config(Profile::Mot17), bad).is_err());
    }

    #[test]
    fn detection_score_range() {
        assert!(Detection::new(bx(0.0, 0.0, 1.0, 1.0), 1.2).is_err());
        assert!(Detection::new(bx(0.0, 0.0, 1.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn spawns_then_keeps_ids() {
        let mut t = tracker();
        let a = bx(500.0, 400.0, 560.0, 520.0);
        let b = bx(900.0, 300.0, 960.0, 420.0);
        let dets = [det(a, 0.95), det(b, 0.95)];
        assert_eq!(ids(t.step(&dets, 1).unwrap()), vec![1, 2]);
        let out = t.step(&dets, 2).unwrap();
        assert_eq!(ids(out), vec![1, 2]);
        assert!(out.iter().all(|t| t.status == TrackStatus::Active && t.history.len() == 2));
    }

    #[test]
    fn frame_numbers_must_increase() {
        let mut t = tracker();
        t.step(&[], 3).unwrap();
        assert!(t.step(&[], 3).is_err());
        assert!(t.step(&[], 2).is_err());
        assert!(t.step(&[], 4).is_ok());
    }

    #[test]
    fn disappear_and_reappear_within_timeout() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        t.step(&[det(a, 0.95)], 1).unwrap();
        assert!(t.step(&[], 2).unwrap().is_empty());
        assert_eq!(t.lost()[0].status, TrackStatus::LostAtCenter);
        assert_eq!(t.lost()[0].last_box(), a);
        let moved = a.translate(20.0, 0.0);
        let out = t.step(&[det(moved, 0.95)], 3).unwrap();
        assert_eq!(ids(out), vec![1]);
        assert_eq!(out[0].status, TrackStatus::Active);
        assert_eq!(out[0].history.iter().map(|o| o.frame).collect::<Vec<_>>(), vec![1, 3]);
        assert!(t.lost().is_empty());
    }

    #[test]
    fn prune_boundaries() {
        let mut t = tracker();
        // Central track and marginal track lost after frame 1.
        let central = bx(900.0, 400.0, 960.0, 520.0);
        let marginal = bx(10.0, 400.0, 70.0, 520.0);
        t.step(&[det(central, 0.95), det(marginal, 0.95)], 1).unwrap();
        t.step(&[], 2).unwrap();
        let statuses: Vec<_> = t.lost().iter().map(|t| (t.id, t.status)).collect();
        assert_eq!(
            statuses,
            vec![(1, TrackStatus::LostAtCenter), (2, TrackStatus::LostAtMargin)]
        );
        // MTime = 21: lost 22 frames ago only the marginal one goes.
        assert_eq!(t.clone().prune_lost(1 + 21), Vec::<u64>::new());
        assert_eq!(t.clone().prune_lost(1 + 22), vec![2]);
        // CTime = 30: retained at exactly 30, removed at 31.
        assert_eq!(t.clone().prune_lost(1 + 30), vec![2]);
        assert_eq!(t.clone().prune_lost(1 + 31), vec![1, 2]);
    }

    #[test]
    fn loss_location_rule() {
        let c = |x: f64, y: f64| bx(x - 5.0, y - 5.0, x + 5.0, y + 5.0);
        let cls = |b: BoundingBox| classify_loss_location(&b, 1920.0, 1080.0, 192.0, 108.0);
        assert_eq!(cls(c(960.0, 540.0)), TrackStatus::LostAtCenter);
        assert_eq!(cls(c(100.0, 540.0)), TrackStatus::LostAtMargin);
        assert_eq!(cls(c(192.0, 540.0)), TrackStatus::LostAtCenter);
        assert_eq!(cls(c(1728.0, 540.0)), TrackStatus::LostAtCenter);
        assert_eq!(cls(c(1728.5, 540.0)), TrackStatus::LostAtMargin);
        assert_eq!(cls(c(960.0, 1000.0)), TrackStatus::LostAtMargin);
        assert_eq!(cls(c(960.0, 50.0)), TrackStatus::LostAtMargin);
    }

    #[test]
    fn new_tracks_need_nth() {
        let mut t = tracker();
        // One detection: HTH = 0.82, NTH = 0.70.
        let a = bx(900.0, 400.0, 960.0, 520.0);
        t.step(&[det(a, 0.85)], 1).unwrap();
        assert_eq!(t.active().len(), 1);

        // Ten confident detections: HTH = 0.72, NTH = 0.80. A 0.75 detection
        // is definite but cannot start a track.
        let mut t = tracker();
        let mut dets: Vec<Detection> = (0..9)
            .map(|k| det(bx(100.0 + 150.0 * k as f64, 300.0, 160.0 + 150.0 * k as f64, 420.0), 0.95))
            .collect();
        dets.push(det(bx(800.0, 700.0, 860.0, 820.0), 0.75));
        t.step(&dets, 1).unwrap();
        assert_eq!(t.active().len(), 9);
        assert_eq!(t.last_report().dropped, vec![9]);
    }

    #[test]
    fn low_scores_are_discarded() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        t.step(&[det(a, 0.95)], 1).unwrap();
        // 0.30 is not strictly above LTH.
        t.step(&[det(a, 0.30)], 2).unwrap();
        assert!(t.active().is_empty());
        assert!(t.last_report().dropped.is_empty());
    }

    #[test]
    fn second_stage_recovers_intermediate_detection() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        t.step(&[det(a, 0.95)], 1).unwrap();
        let nudged = a.translate(1.0, 0.0);
        let out = t.step(&[det(nudged, 0.5)], 2).unwrap();
        assert_eq!(ids(out), vec![1]);
        assert_eq!(out[0].last_box(), nudged);
        assert_eq!(out[0].last_score(), 0.5);
        assert_eq!(t.last_report().second_stage, vec![(1, 0)]);
    }

    #[test]
    fn second_stage_reaches_lost_tracks() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        t.step(&[det(a, 0.95)], 1).unwrap();
        t.step(&[], 2).unwrap();
        let out = t.step(&[det(a, 0.5)], 3).unwrap();
        assert_eq!(ids(out), vec![1]);
    }

    #[test]
    fn empty_pool_with_only_possible_detections() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        let out = t.step(&[det(a, 0.5)], 1).unwrap();
        assert!(out.is_empty());
        assert_eq!(t.last_report().dropped, vec![0]);
    }

    #[test]
    fn lost_box_is_not_moved() {
        let mut t = tracker();
        let a = bx(900.5, 400.25, 960.125, 520.0);
        t.step(&[det(a, 0.95)], 1).unwrap();
        for f in 2..10 {
            t.step(&[], f).unwrap();
            assert_eq!(t.lost()[0].last_box(), a);
        }
        let out = t.step(&[det(a, 0.95)], 10).unwrap();
        assert_eq!(out[0].history[0].bbox, a);
    }

    #[test]
    fn into_tracks_collects_everything() {
        let mut t = tracker();
        let a = bx(900.0, 400.0, 960.0, 520.0);
        let b = bx(10.0, 400.0, 70.0, 520.0);
        t.step(&[det(a, 0.95), det(b, 0.95)], 1).unwrap();
        t.step(&[det(a, 0.95)], 2).unwrap();
        t.step(&[det(a, 0.95)], 40).unwrap();
        let all = t.into_tracks();
        assert_eq!(ids(&all), vec![1, 2]);
        assert_eq!(all[1].history.len(), 1);
    }
}
