//! Tracker hyperparameters and their adaptation to scene metadata.
//!
//! Per-video quantities (timeouts in frames, margins in pixels) scale
//! linearly with frame rate and frame size. Per-frame thresholds move
//! linearly with `log10` of the number of confidently detected objects.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::CostKind;

/// Upper end of the first-stage cost scale, `1 − (−1)/3`.
pub const MAX_FIRST_COST: f64 = 4.0 / 3.0;

/// Built-in parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Mot17,
    Mot20,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mot17" => Ok(Profile::Mot17),
            "mot20" => Ok(Profile::Mot20),
            other => Err(Error::invalid(format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Mot17 => "mot17",
            Profile::Mot20 => "mot20",
        })
    }
}

/// Every tunable of the tracker and of the offline refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Minimum score for intermediate detections (exclusive).
    pub lth: f64,
    /// Maximum second-stage cost.
    pub mth2: f64,
    pub hth0: f64,
    pub hth_m: f64,
    pub nth0: f64,
    pub nth_m: f64,
    pub mth0: f64,
    pub mth_m: f64,
    /// Horizontal margin as a fraction of frame width.
    pub margin_horizontal: f64,
    /// Vertical margin as a fraction of frame height.
    pub margin_vertical: f64,
    /// Revisit timeout, in seconds, for tracks lost in the central area.
    pub timeout_central: f64,
    /// Revisit timeout, in seconds, for tracks lost near the frame border.
    pub timeout_marginal: f64,
    /// Score above which a detection counts toward the crowd size; falls
    /// back to `lth` when unset.
    pub cth: Option<f64>,
    /// Minimum track length coefficient (seconds).
    pub cm: f64,
    /// Interpolation window coefficients for (fixed, deep), (fixed, shallow),
    /// (moving, deep), (moving, shallow).
    pub cd: [f64; 4],
    pub depth_threshold: f64,
    pub stationary_displacement_px: f64,
    pub first_cost: CostKind,
    pub second_cost: CostKind,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        default_config(Profile::Mot17)
    }
}

pub fn default_config(profile: Profile) -> TrackerConfig {
    let mut cfg = TrackerConfig {
        lth: 0.30,
        mth2: 0.10,
        hth0: 0.82,
        hth_m: 0.10,
        nth0: 0.70,
        nth_m: 0.10,
        mth0: 0.50,
        mth_m: 0.05,
        margin_horizontal: 0.10,
        margin_vertical: 0.10,
        timeout_central: 1.00,
        timeout_marginal: 0.70,
        cth: None,
        cm: 1.0,
        cd: [0.7, 1.0, 0.1, 0.7],
        depth_threshold: 0.5,
        stationary_displacement_px: 5.0,
        first_cost: CostKind::Bbsi,
        second_cost: CostKind::Iou,
    };
    if profile == Profile::Mot20 {
        cfg.lth = 0.15;
        cfg.mth2 = 0.30;
        cfg.hth0 = 0.70;
        cfg.hth_m = 0.07;
        cfg.nth0 = 0.55;
        cfg.nth_m = 0.02;
        cfg.mth0 = 0.45;
        cfg.mth_m = 0.05;
        cfg.margin_vertical = 0.15;
        cfg.timeout_marginal = 0.50;
        cfg.cm = 1.5;
        cfg.cd = [0.5; 4];
    }
    cfg
}

/// Config keys accepted by [`TrackerConfig::set`], in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "LTH", "MTH2", "HTH0", "HTHm", "NTH0", "NTHm", "MTH0", "MTHm", "HMargin", "VMargin", "CTime",
    "MTime", "CTH", "Cm", "Cd1", "Cd2", "Cd3", "Cd4", "depth_threshold",
    "stationary_displacement_px", "first_cost", "second_cost",
];

impl TrackerConfig {
    /// Sets one parameter by its symbol name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        if let Some(kind) = match key {
            "first_cost" => Some(&mut self.first_cost),
            "second_cost" => Some(&mut self.second_cost),
            _ => None,
        } {
            *kind = value.parse()?;
            return Ok(());
        }
        let number = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("`{key}`: `{value}` is not a number")))
        };
        if key == "CTH" {
            self.cth = Some(number()?);
            return Ok(());
        }
        let slot = match key {
            "LTH" => &mut self.lth,
            "MTH2" => &mut self.mth2,
            "HTH0" => &mut self.hth0,
            "HTHm" => &mut self.hth_m,
            "NTH0" => &mut self.nth0,
            "NTHm" => &mut self.nth_m,
            "MTH0" => &mut self.mth0,
            "MTHm" => &mut self.mth_m,
            "HMargin" => &mut self.margin_horizontal,
            "VMargin" => &mut self.margin_vertical,
            "CTime" => &mut self.timeout_central,
            "MTime" => &mut self.timeout_marginal,
            "Cm" | "Cm1" | "Cm2" | "Cm3" | "Cm4" => &mut self.cm,
            "Cd1" => &mut self.cd[0],
            "Cd2" => &mut self.cd[1],
            "Cd3" => &mut self.cd[2],
            "Cd4" => &mut self.cd[3],
            "depth_threshold" => &mut self.depth_threshold,
            "stationary_displacement_px" => &mut self.stationary_displacement_px,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        };
        *slot = number()?;
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::invalid(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Serializes to the same `key = value` format [`apply_text`] reads.
    ///
    /// [`apply_text`]: TrackerConfig::apply_text
    pub fn to_text(&self) -> String {
        let nums = [
            self.lth,
            self.mth2,
            self.hth0,
            self.hth_m,
            self.nth0,
            self.nth_m,
            self.mth0,
            self.mth_m,
            self.margin_horizontal,
            self.margin_vertical,
            self.timeout_central,
            self.timeout_marginal,
            self.cm,
            self.cd[0],
            self.cd[1],
            self.cd[2],
            self.cd[3],
            self.depth_threshold,
            self.stationary_displacement_px,
        ];
        let mut out = String::new();
        let keys = CONFIG_KEYS.iter().filter(|k| **k != "CTH");
        for (key, v) in keys.zip(nums) {
            out.push_str(&format!("{key} = {v}\n"));
        }
        if let Some(cth) = self.cth {
            out.push_str(&format!("CTH = {cth}\n"));
        }
        out.push_str(&format!("first_cost = {}\n", self.first_cost));
        out.push_str(&format!("second_cost = {}\n", self.second_cost));
        out
    }

    pub fn crowd_threshold(&self) -> f64 {
        self.cth.unwrap_or(self.lth)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        open_unit("HTH0", self.hth0)?;
        open_unit("NTH0", self.nth0)?;
        if !(self.mth0 > 0.0 && self.mth0 <= MAX_FIRST_COST) {
            return Err(Error::invalid(format!(
                "MTH0 = {} must lie in (0, 4/3]",
                self.mth0
            )));
        }
        if !(0.0..1.0).contains(&self.lth) {
            return Err(Error::invalid(format!("LTH = {} must lie in [0, 1)", self.lth)));
        }
        let nonneg = [
            ("MTH2", self.mth2),
            ("HTHm", self.hth_m),
            ("NTHm", self.nth_m),
            ("MTHm", self.mth_m),
            ("HMargin", self.margin_horizontal),
            ("VMargin", self.margin_vertical),
            ("CTime", self.timeout_central),
            ("MTime", self.timeout_marginal),
            ("CTH", self.crowd_threshold()),
            ("Cm", self.cm),
            ("Cd1", self.cd[0]),
            ("Cd2", self.cd[1]),
            ("Cd3", self.cd[2]),
            ("Cd4", self.cd[3]),
            ("depth_threshold", self.depth_threshold),
            ("stationary_displacement_px", self.stationary_displacement_px),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.margin_horizontal >= 0.5 || self.margin_vertical >= 0.5 {
            return Err(Error::invalid("margins must be below half the frame"));
        }
        Ok(())
    }
}

/// Frame rate and frame size of a video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneMetadata {
    pub frame_rate: f64,
    pub width: f64,
    pub height: f64,
}

impl SceneMetadata {
    pub fn new(frame_rate: f64, width: f64, height: f64) -> Result<Self> {
        let meta = Self {
            frame_rate,
            width,
            height,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frame rate", self.frame_rate),
            ("frame width", self.width),
            ("frame height", self.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rounds to the nearest integer, halves up.
pub fn round_frames(value: f64) -> u32 {
    (value + 0.5).floor().max(0.0) as u32
}

/// Per-video parameters derived from the metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoParams {
    pub central_timeout: u32,
    pub marginal_timeout: u32,
    pub h_margin: f64,
    pub v_margin: f64,
}

pub fn derive_video_params(config: &TrackerConfig, meta: &SceneMetadata) -> VideoParams {
    VideoParams {
        central_timeout: round_frames(config.timeout_central * meta.frame_rate),
        marginal_timeout: round_frames(config.timeout_marginal * meta.frame_rate),
        h_margin: config.margin_horizontal * meta.width,
        v_margin: config.margin_vertical * meta.height,
    }
}

/// Thresholds in force for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameThresholds {
    /// Definite detections score strictly above this.
    pub high: f64,
    /// New tracks need at least this score.
    pub new_track: f64,
    /// Maximum first-stage cost.
    pub max_first_cost: f64,
}

/// `log10` of the crowd size, with an empty crowd treated as one object.
pub fn crowd_level(config: &TrackerConfig, scores: impl IntoIterator<Item = f64>) -> f64 {
    let n = scores.into_iter().filter(|&s| s > config.crowd_threshold()).count();
    (n.max(1) as f64).log10()
}

/// Unclamped linear thresholds for a given crowd level.
pub fn thresholds_at(config: &TrackerConfig, level: f64) -> FrameThresholds {
    FrameThresholds {
        high: config.hth0 - config.hth_m * level,
        new_track: config.nth0 + config.nth_m * level,
        max_first_cost: config.mth0 - config.mth_m * level,
    }
}

/// Per-frame HTH, NTH and MTH1, clamped to `HTH ∈ [LTH, 1)`, `NTH ∈ (0, 1)`
/// and `MTH1 ∈ (0, 4/3]`.
pub fn adaptive_thresholds(
    config: &TrackerConfig,
    scores: impl IntoIterator<Item = f64>,
) -> FrameThresholds {
    let raw = thresholds_at(config, crowd_level(config, scores));
    let below_one = 1.0 - f64::EPSILON;
    FrameThresholds {
        high: raw.high.clamp(config.lth, below_one),
        new_track: raw.new_track.clamp(f64::EPSILON, below_one),
        max_first_cost: raw.max_first_cost.clamp(f64::EPSILON, MAX_FIRST_COST),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(n: usize) -> Vec<f64> {
        vec![0.9; n]
    }

    #[test]
    fn table_values() {
        let a = default_config(Profile::Mot17);
        assert_eq!(a.hth0, 0.82);
        assert_eq!(a.timeout_marginal, 0.70);
        assert_eq!(a.cm, 1.0);
        assert_eq!(a.cd, [0.7, 1.0, 0.1, 0.7]);
        let b = default_config(Profile::Mot20);
        assert_eq!(b.lth, 0.15);
        assert_eq!(b.margin_vertical, 0.15);
        assert_eq!(b.cd, [0.5; 4]);
        assert_eq!(b.cm, 1.5);
        a.validate().unwrap();
        b.validate().unwrap();
        assert!(a.mth0 < 0.66 && b.mth0 < 0.66);
    }

    #[test]
    fn video_params() {
        let c = default_config(Profile::Mot17);
        let p = derive_video_params(&c, &SceneMetadata::new(30.0, 1920.0, 1080.0).unwrap());
        assert_eq!((p.central_timeout, p.marginal_timeout), (30, 21));
        assert!((p.h_margin - 192.0).abs() < 1e-9 && (p.v_margin - 108.0).abs() < 1e-9);
        let p = derive_video_params(&c, &SceneMetadata::new(14.0, 1920.0, 1080.0).unwrap());
        assert_eq!((p.central_timeout, p.marginal_timeout), (14, 10));
        let p = derive_video_params(&c, &SceneMetadata::new(1.0, 10.0, 10.0).unwrap());
        assert_eq!(p.central_timeout, 1);
    }

    #[test]
    fn rounding_ties_up() {
        assert_eq!(round_frames(12.5), 13);
        assert_eq!(round_frames(37.5), 38);
        assert_eq!(round_frames(9.8), 10);
        assert_eq!(round_frames(9.49), 9);
    }

    #[test]
    fn metadata_rejects_non_positive() {
        assert!(SceneMetadata::new(0.0, 10.0, 10.0).is_err());
        assert!(SceneMetadata::new(30.0, -1.0, 10.0).is_err());
        assert!(SceneMetadata::new(30.0, 10.0, f64::NAN).is_err());
    }

    #[test]
    fn thresholds_examples() {
        let c = default_config(Profile::Mot17);
        let t = adaptive_thresholds(&c, scores(1));
        assert_eq!((t.high, t.new_track, t.max_first_cost), (0.82, 0.70, 0.50));
        let t = adaptive_thresholds(&c, scores(0));
        assert_eq!((t.high, t.new_track, t.max_first_cost), (0.82, 0.70, 0.50));
        let t = adaptive_thresholds(&c, scores(10));
        assert!((t.high - 0.72).abs() < 1e-12);
        assert!((t.new_track - 0.80).abs() < 1e-12);
        assert!((t.max_first_cost - 0.45).abs() < 1e-12);
    }

    #[test]
    fn crowd_count_uses_cth_strictly() {
        let c = default_config(Profile::Mot17);
        let level = crowd_level(&c, [0.30, 0.31, 0.1, 0.99]);
        assert!((level - 2f64.log10()).abs() < 1e-15);
    }

    #[test]
    fn clamping() {
        let mut c = default_config(Profile::Mot17);
        c.hth_m = 1.0;
        c.nth_m = 1.0;
        c.mth_m = 1.0;
        let t = adaptive_thresholds(&c, scores(10_000));
        assert_eq!(t.high, c.lth);
        assert!(t.new_track < 1.0 && t.new_track > 0.9);
        assert!(t.max_first_cost > 0.0);
    }

    #[test]
    fn config_text_roundtrip_and_errors() {
        let mut c = default_config(Profile::Mot20);
        c.first_cost = CostKind::Giou;
        let mut d = default_config(Profile::Mot17);
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);

        let mut e = TrackerConfig::default();
        e.apply_text("# comment\nHTH0 = 0.9   # trailing\n\n").unwrap();
        assert_eq!(e.hth0, 0.9);
        assert!(e.apply_text("bogus = 1").is_err());
        assert!(e.apply_text("HTH0 0.9").is_err());
        assert!(e.apply_text("HTH0 = abc").is_err());
    }

    #[test]
    fn validate_ranges() {
        let c = TrackerConfig { hth0: 1.0, ..TrackerConfig::default() };
        assert!(c.validate().is_err());
        let mut c = TrackerConfig { mth0: 0.9, ..TrackerConfig::default() };
        assert!(c.validate().is_ok());
        c.mth0 = 1.5;
        assert!(c.validate().is_err());
        let mut c = TrackerConfig::default();
        c.cd[2] = -0.1;
        assert!(c.validate().is_err());
    }
}
