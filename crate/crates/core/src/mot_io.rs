//! MOTChallenge text formats plus a small keypoint-match format.
//!
//! * detections / results: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`
//! * ground truth: `frame,id,bb_left,bb_top,bb_width,bb_height,consider,class,visibility`
//! * `seqinfo.ini`: `key=value` lines under `[Sequence]`
//! * keypoints: `sample_index,prev_x,prev_y,cur_x,cur_y`
//!
//! Per-frame collections are `Vec`s indexed by `frame − 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adaptation::SceneMetadata;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::scene_features::{KeypointMatch, SAMPLE_COUNT};
use crate::tracker::{Detection, Observation, Track, TrackStatus};

/// A box carrying an identity, as found in ground truth and tracker output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub id: u64,
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInfo {
    pub name: Option<String>,
    pub meta: SceneMetadata,
    pub length: Option<u32>,
}

/// Everything known about one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    pub name: String,
    pub meta: SceneMetadata,
    pub detections: Vec<Vec<Detection>>,
    pub ground_truth: Option<Vec<Vec<LabeledBox>>>,
    pub keypoint_samples: Option<Vec<Vec<KeypointMatch>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadOptions {
    /// Divide every score by the file maximum when that maximum exceeds 1.
    pub normalize_scores: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            normalize_scores: true,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
    path: &'a Path,
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn num(&self, idx: usize, name: &str) -> Result<f64> {
        let raw = self
            .fields
            .get(idx)
            .ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| self.err(format!("field `{name}`: `{}` is not a number", raw.trim())))?;
        if !v.is_finite() {
            return Err(self.err(format!("field `{name}` is not finite")));
        }
        Ok(v)
    }

    fn frame(&self) -> Result<u32> {
        let v = self.num(0, "frame")?;
        if v < 1.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return Err(self.err(format!("frame `{v}` must be a positive integer")));
        }
        Ok(v as u32)
    }

    fn ltwh(&self) -> Result<BoundingBox> {
        let (l, t) = (self.num(2, "bb_left")?, self.num(3, "bb_top")?);
        let (w, h) = (self.num(4, "bb_width")?, self.num(5, "bb_height")?);
        BoundingBox::from_ltwh(l, t, w, h).map_err(|e| self.err(e.to_string()))
    }
}

fn rows<'a>(path: &'a Path, text: &'a str) -> impl Iterator<Item = Row<'a>> {
    text.lines().enumerate().filter_map(move |(i, line)| {
        let line = line.trim();
        (!line.is_empty()).then(|| Row {
            line: i + 1,
            fields: line.split(',').collect(),
            path,
        })
    })
}

fn place<T>(frames: &mut Vec<Vec<T>>, frame: u32, item: T) {
    let idx = frame as usize - 1;
    if frames.len() <= idx {
        frames.resize_with(idx + 1, Vec::new);
    }
    frames[idx].push(item);
}

pub fn parse_detections(path: &Path, text: &str, opts: ReadOptions) -> Result<Vec<Vec<Detection>>> {
    let mut raw: Vec<(u32, BoundingBox, f64)> = Vec::new();
    for row in rows(path, text) {
        let frame = row.frame()?;
        let bbox = row.ltwh()?;
        let score = row.num(6, "conf")?;
        if score < 0.0 {
            return Err(row.err(format!("negative score {score}")));
        }
        raw.push((frame, bbox, score));
    }
    let max = raw.iter().map(|r| r.2).fold(0.0, f64::max);
    let scale = if max > 1.0 {
        if !opts.normalize_scores {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("scores up to {max} exceed 1 and normalization is disabled"),
            });
        }
        max
    } else {
        1.0
    };
    let mut frames = Vec::new();
    for (frame, bbox, score) in raw {
        place(&mut frames, frame, Detection::new(bbox, score / scale)?);
    }
    Ok(frames)
}

pub fn read_detections(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Vec<Vec<Detection>>> {
    let path = path.as_ref();
    parse_detections(path, &read_text(path)?, opts)
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<Vec<LabeledBox>>> {
    let mut frames = Vec::new();
    for row in rows(path, text) {
        let frame = row.frame()?;
        let id = row.num(1, "id")?;
        if id < 0.0 || id.fract() != 0.0 {
            return Err(row.err(format!("id `{id}` must be a nonnegative integer")));
        }
        let bbox = row.ltwh()?;
        let score = if row.fields.len() > 6 { row.num(6, "conf")? } else { 1.0 };
        place(&mut frames, frame, LabeledBox { id: id as u64, bbox, score });
    }
    Ok(frames)
}

/// Reads a tracker output file.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<Vec<LabeledBox>>> {
    let path = path.as_ref();
    parse_results(path, &read_text(path)?)
}

/// Reads a ground-truth file, dropping rows flagged as not considered and
/// rows whose class column is present and not 1.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<Vec<LabeledBox>>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut frames = Vec::new();
    for row in rows(path, &text) {
        let frame = row.frame()?;
        let id = row.num(1, "id")?;
        let bbox = row.ltwh()?;
        if row.fields.len() > 6 && row.num(6, "consider")? == 0.0 {
            continue;
        }
        if row.fields.len() > 7 && row.num(7, "class")? != 1.0 {
            continue;
        }
        place(&mut frames, frame, LabeledBox { id: id as u64, bbox, score: 1.0 });
    }
    Ok(frames)
}

/// Flattens tracks into frame-indexed labeled boxes.
pub fn tracks_to_frames(tracks: &[Track]) -> Vec<Vec<LabeledBox>> {
    let mut frames = Vec::new();
    for t in tracks {
        for o in &t.history {
            place(&mut frames, o.frame, LabeledBox { id: t.id, bbox: o.bbox, score: o.score });
        }
    }
    for f in &mut frames {
        f.sort_by_key(|b| b.id);
    }
    frames
}

/// Regroups frame-indexed results into tracks, one per id, in id order.
/// Every observation is taken as real; statuses are `Active`.
pub fn frames_to_tracks(frames: &[Vec<LabeledBox>]) -> Vec<Track> {
    let mut by_id: BTreeMap<u64, Vec<Observation>> = BTreeMap::new();
    for (i, boxes) in frames.iter().enumerate() {
        for b in boxes {
            by_id.entry(b.id).or_default().push(Observation {
                frame: i as u32 + 1,
                bbox: b.bbox,
                score: b.score,
                synthetic: false,
            });
        }
    }
    by_id
        .into_iter()
        .map(|(id, history)| Track { id, status: TrackStatus::Active, history })
        .collect()
}

/// Renders results sorted by frame, then id. Coordinates and scores are
/// written with two decimals.
pub fn format_frames(frames: &[Vec<LabeledBox>]) -> String {
    let mut out = String::new();
    for (i, boxes) in frames.iter().enumerate() {
        let mut sorted: Vec<&LabeledBox> = boxes.iter().collect();
        sorted.sort_by_key(|b| b.id);
        for b in sorted {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
                i + 1,
                b.id,
                b.bbox.x1(),
                b.bbox.y1(),
                b.bbox.width(),
                b.bbox.height(),
                b.score
            );
        }
    }
    out
}

pub fn write_frames(path: impl AsRef<Path>, frames: &[Vec<LabeledBox>]) -> Result<()> {
    write_text(path.as_ref(), &format_frames(frames))
}

pub fn write_results(path: impl AsRef<Path>, tracks: &[Track]) -> Result<()> {
    write_frames(path, &tracks_to_frames(tracks))
}

/// Ground truth in the nine-column layout, every row considered, class 1.
pub fn format_ground_truth(frames: &[Vec<LabeledBox>]) -> String {
    let mut out = String::new();
    for (i, boxes) in frames.iter().enumerate() {
        for b in boxes {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,1,1",
                i + 1,
                b.id,
                b.bbox.x1(),
                b.bbox.y1(),
                b.bbox.width(),
                b.bbox.height()
            );
        }
    }
    out
}

pub fn format_detections(frames: &[Vec<Detection>]) -> String {
    let mut out = String::new();
    for (i, dets) in frames.iter().enumerate() {
        for d in dets {
            let _ = writeln!(
                out,
                "{},-1,{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
                i + 1,
                d.bbox.x1(),
                d.bbox.y1(),
                d.bbox.width(),
                d.bbox.height(),
                d.score
            );
        }
    }
    out
}

pub fn parse_seqinfo(path: &Path, text: &str) -> Result<SequenceInfo> {
    let mut name = None;
    let (mut rate, mut width, mut height, mut length) = (None, None, None, None);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('[') || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let value = value.trim();
        let number = || {
            value.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("`{}`: `{value}` is not a number", key.trim()),
            })
        };
        match key.trim() {
            "name" => name = Some(value.to_string()),
            "frameRate" => rate = Some(number()?),
            "imWidth" => width = Some(number()?),
            "imHeight" => height = Some(number()?),
            "seqLength" => length = Some(number()? as u32),
            _ => {}
        }
    }
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| Error::MissingKey {
            path: path.to_path_buf(),
            key: key.to_string(),
        })
    };
    let meta = SceneMetadata::new(
        need(rate, "frameRate")?,
        need(width, "imWidth")?,
        need(height, "imHeight")?,
    )?;
    Ok(SequenceInfo { name, meta, length })
}

pub fn read_seqinfo(path: impl AsRef<Path>) -> Result<SequenceInfo> {
    let path = path.as_ref();
    parse_seqinfo(path, &read_text(path)?)
}

pub fn format_seqinfo(name: &str, meta: &SceneMetadata, length: u32) -> String {
    format!(
        "[Sequence]\nname={name}\nframeRate={}\nseqLength={length}\nimWidth={}\nimHeight={}\n",
        meta.frame_rate, meta.width, meta.height
    )
}

/// Groups matches by sample index; always returns five lists.
pub fn parse_keypoints(path: &Path, text: &str) -> Result<Vec<Vec<KeypointMatch>>> {
    let mut samples = vec![Vec::new(); SAMPLE_COUNT];
    for row in rows(path, text) {
        let idx = row.num(0, "sample_index")?;
        if idx < 0.0 || idx.fract() != 0.0 || idx >= SAMPLE_COUNT as f64 {
            return Err(row.err(format!("sample index `{idx}` outside 0..{}", SAMPLE_COUNT - 1)));
        }
        let m = KeypointMatch::new(
            (row.num(1, "prev_x")?, row.num(2, "prev_y")?),
            (row.num(3, "cur_x")?, row.num(4, "cur_y")?),
        )?;
        samples[idx as usize].push(m);
    }
    Ok(samples)
}

pub fn read_keypoints(path: impl AsRef<Path>) -> Result<Vec<Vec<KeypointMatch>>> {
    let path = path.as_ref();
    parse_keypoints(path, &read_text(path)?)
}

pub fn format_keypoints(samples: &[Vec<KeypointMatch>]) -> String {
    let mut out = String::new();
    for (k, sample) in samples.iter().enumerate() {
        for m in sample {
            let _ = writeln!(out, "{k},{},{},{},{}", m.prev.0, m.prev.1, m.cur.0, m.cur.1);
        }
    }
    out
}

/// Standard layout of one MOTChallenge sequence directory.
#[derive(Debug, Clone)]
pub struct SequencePaths {
    pub root: PathBuf,
}

impl SequencePaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn detections(&self) -> PathBuf {
        self.root.join("det").join("det.txt")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("gt").join("gt.txt")
    }

    pub fn seqinfo(&self) -> PathBuf {
        self.root.join("seqinfo.ini")
    }

    pub fn keypoints(&self) -> PathBuf {
        self.root.join("keypoints.txt")
    }

    /// Loads detections and metadata, plus ground truth and keypoints when
    /// present.
    pub fn load(&self, opts: ReadOptions) -> Result<SequenceBundle> {
        let info = read_seqinfo(self.seqinfo())?;
        let mut detections = read_detections(self.detections(), opts)?;
        if let Some(len) = info.length {
            if detections.len() > len as usize {
                return Err(Error::invalid(format!(
                    "{}: detections reach frame {} beyond seqLength {len}",
                    self.detections().display(),
                    detections.len()
                )));
            }
            detections.resize_with(len as usize, Vec::new);
        }
        let gt_path = self.ground_truth();
        let ground_truth = if gt_path.exists() { Some(read_ground_truth(gt_path)?) } else { None };
        let kp_path = self.keypoints();
        let keypoint_samples = if kp_path.exists() { Some(read_keypoints(kp_path)?) } else { None };
        let name = info.name.clone().unwrap_or_else(|| {
            self.root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        Ok(SequenceBundle {
            name,
            meta: info.meta,
            detections,
            ground_truth,
            keypoint_samples,
        })
    }

    /// Writes a bundle in the standard layout.
    pub fn save(&self, bundle: &SequenceBundle) -> Result<()> {
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(&self.root.join("det"))?;
        write_text(
            &self.seqinfo(),
            &format_seqinfo(&bundle.name, &bundle.meta, bundle.detections.len() as u32),
        )?;
        write_text(&self.detections(), &format_detections(&bundle.detections))?;
        if let Some(gt) = &bundle.ground_truth {
            mkdir(&self.root.join("gt"))?;
            write_text(&self.ground_truth(), &format_ground_truth(gt))?;
        }
        if let Some(kp) = &bundle.keypoint_samples {
            write_text(&self.keypoints(), &format_keypoints(kp))?;
        }
        Ok(())
    }
}
