//! Axis-aligned boxes and the similarity descriptors used for association.
//!
//! Coordinates are continuous pixels with `y` growing downward. All
//! descriptors are symmetric in their two arguments.

use std::fmt;
use std::str::FromStr;

use crate::assignment::CostMatrix;
use crate::error::{Error, Result};

/// Guards the height/width similarity terms of BBSI against `0 / 0`.
pub const BBSI_EPSILON: f64 = 1e-7;

/// Axis-aligned rectangle in corner form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    /// Zero-area boxes are accepted; negative extents and non-finite
    /// coordinates are not.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite box coordinates ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::invalid(format!(
                "negative box extent ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from MOTChallenge `(left, top, width, height)`.
    pub fn from_ltwh(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(left, top, left + width, top + height)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Shifts the box by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Component-wise linear blend `self + t·(other − self)`; `t` in `[0, 1]`
    /// keeps the extents nonnegative.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        Self {
            x1: mix(self.x1, other.x1),
            y1: mix(self.y1, other.y1),
            x2: mix(self.x2, other.x2).max(mix(self.x1, other.x1)),
            y2: mix(self.y2, other.y2).max(mix(self.y1, other.y1)),
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Quantities shared by every descriptor for one box pair.
struct PairGeometry {
    inter_w: f64,
    inter_h: f64,
    inter: f64,
    union: f64,
    enclose_w: f64,
    enclose_h: f64,
    center_dx: f64,
    center_dy: f64,
}

impl PairGeometry {
    #[inline]
    fn of(a: &BoundingBox, b: &BoundingBox) -> Self {
        let inter_w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
        let inter_h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
        let inter = inter_w * inter_h;
        let union = a.area() + b.area() - inter;
        let enclose_w = a.x2.max(b.x2) - a.x1.min(b.x1);
        let enclose_h = a.y2.max(b.y2) - a.y1.min(b.y1);
        // Centers doubled; halved once here.
        let center_dx = ((a.x1 + a.x2) - (b.x1 + b.x2)) / 2.0;
        let center_dy = ((a.y1 + a.y2) - (b.y1 + b.y2)) / 2.0;
        Self {
            inter_w,
            inter_h,
            inter,
            union,
            enclose_w,
            enclose_h,
            center_dx,
            center_dy,
        }
    }

    #[inline]
    fn iou(&self) -> f64 {
        if self.union > 0.0 {
            self.inter / self.union
        } else {
            0.0
        }
    }

    #[inline]
    fn diou(&self) -> f64 {
        let diag = self.enclose_w * self.enclose_w + self.enclose_h * self.enclose_h;
        if diag > 0.0 {
            let dist = self.center_dx * self.center_dx + self.center_dy * self.center_dy;
            self.iou() - dist / diag
        } else {
            self.iou()
        }
    }
}

/// Intersection over union; `0` when both boxes have zero area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    PairGeometry::of(a, b).iou()
}

/// Generalized IoU: IoU minus the share of the enclosing rectangle not
/// covered by the union.
pub fn giou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let g = PairGeometry::of(a, b);
    let enclose = g.enclose_w * g.enclose_h;
    if enclose > 0.0 {
        g.iou() - (enclose - g.union) / enclose
    } else {
        // Both boxes collapse onto the same point or segment.
        0.0
    }
}

/// Distance IoU: IoU minus the squared center distance over the squared
/// diagonal of the enclosing rectangle.
pub fn diou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    PairGeometry::of(a, b).diou()
}

/// Efficient IoU: DIoU with additional width and height difference penalties.
pub fn eiou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let g = PairGeometry::of(a, b);
    let mut value = g.diou();
    let dh = a.height() - b.height();
    let dw = a.width() - b.width();
    if g.enclose_h > 0.0 {
        value -= dh * dh / (g.enclose_h * g.enclose_h);
    }
    if g.enclose_w > 0.0 {
        value -= dw * dw / (g.enclose_w * g.enclose_w);
    }
    value
}

/// Bounding Box Similarity Index, in `(-1, 3]`.
///
/// Sum of three parts:
/// * an approximate DIoU, `IoU − (|Δcx| + |Δcy|) / (h_c + w_c)`, which uses a
///   Manhattan center distance normalized by the enclosing perimeter half;
/// * height similarity `h_eff / (h_eff + |Δh| + ε)` where `h_eff` is the
///   vertical extent of the intersection;
/// * width similarity `w_eff / (w_eff + |Δw| + ε)` with `w_eff` the horizontal
///   extent of the intersection.
///
/// The two similarity terms stay informative when the boxes do not overlap
/// along the other axis, which is what lets BBSI associate disjoint boxes.
pub fn bbsi(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let g = PairGeometry::of(a, b);
    let h_eff = g.inter_h;
    let w_eff = g.inter_w;
    let s_h = h_eff / (h_eff + (a.height() - b.height()).abs() + BBSI_EPSILON);
    let s_w = w_eff / (w_eff + (a.width() - b.width()).abs() + BBSI_EPSILON);
    let perimeter = g.enclose_h + g.enclose_w;
    let s_c = if perimeter > 0.0 {
        (g.center_dx.abs() + g.center_dy.abs()) / perimeter
    } else {
        0.0
    };
    g.iou() - s_c + s_h + s_w
}

/// First-stage association cost `1 − BBSI/3`. Spans `[0, 4/3)`.
pub fn cost_first(a: &BoundingBox, b: &BoundingBox) -> f64 {
    1.0 - bbsi(a, b) / 3.0
}

/// Second-stage association cost `1 − IoU`, in `[0, 1]`.
pub fn cost_second(a: &BoundingBox, b: &BoundingBox) -> f64 {
    1.0 - iou(a, b)
}

/// Association cost family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    /// `1 − BBSI/3`, the first-stage cost.
    Bbsi,
    /// `1 − IoU`, the second-stage cost.
    Iou,
    /// `(1 − GIoU)/2`.
    Giou,
    /// `(1 − DIoU)/2`.
    Diou,
    /// `(1 − EIoU)/4`.
    Eiou,
}

impl CostKind {
    pub const ALL: [CostKind; 5] = [
        CostKind::Iou,
        CostKind::Giou,
        CostKind::Diou,
        CostKind::Eiou,
        CostKind::Bbsi,
    ];

    #[inline]
    pub fn cost(self, a: &BoundingBox, b: &BoundingBox) -> f64 {
        match self {
            CostKind::Bbsi => cost_first(a, b),
            CostKind::Iou => cost_second(a, b),
            CostKind::Giou => (1.0 - giou(a, b)) / 2.0,
            CostKind::Diou => (1.0 - diou(a, b)) / 2.0,
            CostKind::Eiou => (1.0 - eiou(a, b)) / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CostKind::Bbsi => "bbsi",
            CostKind::Iou => "iou",
            CostKind::Giou => "giou",
            CostKind::Diou => "diou",
            CostKind::Eiou => "eiou",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bbsi" | "first" => Ok(CostKind::Bbsi),
            "iou" | "second" => Ok(CostKind::Iou),
            "giou" => Ok(CostKind::Giou),
            "diou" => Ok(CostKind::Diou),
            "eiou" => Ok(CostKind::Eiou),
            other => Err(Error::invalid(format!("unknown cost kind `{other}`"))),
        }
    }
}

/// Cost of every track (rows) against every detection (columns).
pub fn cost_matrix(tracks: &[BoundingBox], detections: &[BoundingBox], kind: CostKind) -> CostMatrix {
    let mut data = Vec::with_capacity(tracks.len() * detections.len());
    for t in tracks {
        data.extend(detections.iter().map(|d| kind.cost(t, d)));
    }
    CostMatrix::from_vec(tracks.len(), detections.len(), data)
        .expect("dimensions match by construction")
}

/// BBSI with the coordinate axes exactly as the equations print them: the
/// "height" overlap is taken from x-coordinates and the "width" overlap from
/// y-coordinates. Kept only to document how it diverges from [`bbsi`].
#[cfg(test)]
pub(crate) fn bbsi_literal_axes(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let g = PairGeometry::of(a, b);
    let h_eff = g.inter_w;
    let w_eff = g.inter_h;
    let s_h = h_eff / (h_eff + (a.height() - b.height()).abs() + BBSI_EPSILON);
    let s_w = w_eff / (w_eff + (a.width() - b.width()).abs() + BBSI_EPSILON);
    let s_c = (g.center_dx.abs() + g.center_dy.abs()) / (g.enclose_h + g.enclose_w);
    g.iou() - s_c + s_h + s_w
}
