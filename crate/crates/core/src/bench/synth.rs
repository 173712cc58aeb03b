//! Deterministic synthetic sequences with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adaptation::SceneMetadata;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::mot_io::{LabeledBox, SequenceBundle};
use crate::scene_features::{sample_indices, KeypointMatch};
use crate::tracker::Detection;

/// How starting positions and headings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Uniform positions, uniform headings.
    Scatter,
    /// One horizontal lane per object; motion along the lane.
    Rows,
    /// One vertical lane per object; motion along the lane.
    Columns,
}

/// What happens to an object that reaches the frame border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// The box stops at the border.
    Clamp,
    /// The object leaves the scene for good.
    Retire,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Occlusion {
    /// First affected frame (1-based).
    pub start: u32,
    pub duration: u32,
    /// Object ids (1-based) affected.
    pub ids: Vec<u64>,
    /// `None` removes the detections; `Some(s)` keeps them with score `s`.
    pub score_dip: Option<f64>,
}

impl Occlusion {
    fn covers(&self, frame: u32, id: u64) -> bool {
        frame >= self.start && frame < self.start + self.duration && self.ids.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_objects: usize,
    pub n_frames: u32,
    pub width: f64,
    pub height: f64,
    pub frame_rate: f64,
    pub box_width: (f64, f64),
    pub box_height: (f64, f64),
    /// Speed range in pixels per frame.
    pub speed: (f64, f64),
    /// Standard deviation of the per-coordinate detection noise.
    pub jitter: f64,
    pub detection_score: f64,
    pub occlusions: Vec<Occlusion>,
    /// Expected false positives per frame.
    pub false_positive_rate: f64,
    /// Whole-scene shift per frame from camera motion.
    pub camera_pan: (f64, f64),
    pub layout: Layout,
    pub boundary: Boundary,
    /// Keypoint matches generated per sampled frame pair.
    pub keypoints_per_sample: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_objects: 10,
            n_frames: 300,
            width: 1920.0,
            height: 1080.0,
            frame_rate: 30.0,
            box_width: (40.0, 60.0),
            box_height: (90.0, 140.0),
            speed: (0.5, 2.0),
            jitter: 0.0,
            detection_score: 0.95,
            occlusions: Vec::new(),
            false_positive_rate: 0.0,
            camera_pan: (0.0, 0.0),
            layout: Layout::Scatter,
            boundary: Boundary::Clamp,
            keypoints_per_sample: 40,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        SceneMetadata::new(self.frame_rate, self.width, self.height)?;
        let range = |name: &str, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} range ({lo}, {hi}) is invalid")))
            }
        };
        range("box width", self.box_width)?;
        range("box height", self.box_height)?;
        range("speed", self.speed)?;
        if self.box_width.1 >= self.width || self.box_height.1 >= self.height {
            return Err(Error::invalid("boxes must fit inside the frame"));
        }
        if !(self.jitter >= 0.0 && self.false_positive_rate >= 0.0) {
            return Err(Error::invalid("jitter and false-positive rate must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.detection_score) {
            return Err(Error::invalid("detection score must lie in [0, 1]"));
        }
        for o in &self.occlusions {
            if let Some(s) = o.score_dip {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::invalid(format!("occlusion score dip {s} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> SceneMetadata {
        SceneMetadata {
            frame_rate: self.frame_rate,
            width: self.width,
            height: self.height,
        }
    }
}

/// Generated data for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub meta: SceneMetadata,
    pub ground_truth: Vec<Vec<LabeledBox>>,
    pub detections: Vec<Vec<Detection>>,
    pub keypoints: Vec<Vec<KeypointMatch>>,
}

impl SynthSequence {
    pub fn into_bundle(self, name: impl Into<String>) -> SequenceBundle {
        SequenceBundle {
            name: name.into(),
            meta: self.meta,
            detections: self.detections,
            ground_truth: Some(self.ground_truth),
            keypoint_samples: Some(self.keypoints),
        }
    }
}

struct Object {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
    alive: bool,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Generates a sequence; identical `(spec, seed)` give identical output.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_objects;
    let mut objects: Vec<Object> = (0..n)
        .map(|k| {
            let w = uniform(&mut rng, spec.box_width);
            let h = uniform(&mut rng, spec.box_height);
            let speed = uniform(&mut rng, spec.speed);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lane = (k as f64 + 0.5) / n as f64;
            match spec.layout {
                Layout::Scatter => {
                    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
                    Object {
                        x: rng.gen_range(0.0..spec.width - w),
                        y: rng.gen_range(0.0..spec.height - h),
                        w,
                        h,
                        vx: speed * heading.cos(),
                        vy: speed * heading.sin(),
                        alive: true,
                    }
                }
                Layout::Rows => {
                    // Start on the side that leaves the longest run ahead.
                    let x = if sign > 0.0 {
                        rng.gen_range(0.0..(spec.width - w) * 0.1 + 1.0)
                    } else {
                        spec.width - w - rng.gen_range(0.0..(spec.width - w) * 0.1 + 1.0)
                    };
                    Object {
                        x: x.clamp(0.0, spec.width - w),
                        y: lane * spec.height - h / 2.0,
                        w,
                        h,
                        vx: sign * speed,
                        vy: 0.0,
                        alive: true,
                    }
                }
                Layout::Columns => {
                    let y = if sign > 0.0 {
                        rng.gen_range(0.0..(spec.height - h) * 0.1 + 1.0)
                    } else {
                        spec.height - h - rng.gen_range(0.0..(spec.height - h) * 0.1 + 1.0)
                    };
                    Object {
                        x: lane * spec.width - w / 2.0,
                        y: y.clamp(0.0, spec.height - h),
                        w,
                        h,
                        vx: 0.0,
                        vy: sign * speed,
                        alive: true,
                    }
                }
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).expect("nonnegative sigma");
    let mut ground_truth = Vec::with_capacity(spec.n_frames as usize);
    let mut detections = Vec::with_capacity(spec.n_frames as usize);
    let (pan_x, pan_y) = spec.camera_pan;

    for frame in 1..=spec.n_frames {
        let mut gt_frame = Vec::new();
        let mut det_frame = Vec::new();
        for (k, o) in objects.iter_mut().enumerate() {
            let id = k as u64 + 1;
            if frame > 1 {
                o.x += o.vx + pan_x;
                o.y += o.vy + pan_y;
            }
            let inside = o.x >= 0.0 && o.y >= 0.0 && o.x + o.w <= spec.width && o.y + o.h <= spec.height;
            if !inside {
                match spec.boundary {
                    Boundary::Clamp => {
                        o.x = o.x.clamp(0.0, spec.width - o.w);
                        o.y = o.y.clamp(0.0, spec.height - o.h);
                    }
                    Boundary::Retire => o.alive = false,
                }
            }
            if !o.alive {
                continue;
            }
            let truth = BoundingBox::from_ltwh(o.x, o.y, o.w, o.h)?;
            gt_frame.push(LabeledBox { id, bbox: truth, score: 1.0 });

            let occlusion = spec.occlusions.iter().find(|oc| oc.covers(frame, id));
            let score = match occlusion {
                Some(Occlusion { score_dip: None, .. }) => continue,
                Some(Occlusion { score_dip: Some(s), .. }) => *s,
                None => spec.detection_score,
            };
            let bbox = if spec.jitter > 0.0 {
                let mut c = [truth.x1(), truth.y1(), truth.x2(), truth.y2()];
                for v in &mut c {
                    *v += noise.sample(&mut rng);
                }
                BoundingBox::new(c[0].min(c[2]), c[1].min(c[3]), c[0].max(c[2]), c[1].max(c[3]))?
            } else {
                truth
            };
            det_frame.push(Detection::new(bbox, score)?);
        }

        if spec.false_positive_rate > 0.0 {
            let whole = spec.false_positive_rate.floor() as usize;
            let extra = rng.gen_bool(spec.false_positive_rate.fract()) as usize;
            for _ in 0..whole + extra {
                let w = uniform(&mut rng, spec.box_width);
                let h = uniform(&mut rng, spec.box_height);
                let bbox = BoundingBox::from_ltwh(
                    rng.gen_range(0.0..spec.width - w),
                    rng.gen_range(0.0..spec.height - h),
                    w,
                    h,
                )?;
                det_frame.push(Detection::new(bbox, rng.gen_range(0.3..0.9))?);
            }
        }
        ground_truth.push(gt_frame);
        detections.push(det_frame);
    }

    // Static background points seen through the pan, with sub-pixel noise.
    let keypoints = sample_indices(spec.n_frames as usize)
        .into_iter()
        .map(|_| {
            (0..spec.keypoints_per_sample)
                .map(|_| {
                    let px = rng.gen_range(0.0..spec.width);
                    let py = rng.gen_range(0.0..spec.height);
                    let dx = pan_x + rng.gen_range(-0.5..0.5);
                    let dy = pan_y + rng.gen_range(-0.5..0.5);
                    KeypointMatch { prev: (px, py), cur: (px - dx, py - dy) }
                })
                .collect()
        })
        .collect();

    Ok(SynthSequence {
        meta: spec.meta(),
        ground_truth,
        detections,
        keypoints,
    })
}
