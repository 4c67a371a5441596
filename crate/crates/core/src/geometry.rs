//! 2D bounding-box arithmetic: areas, intersection-over-union, and
//! normalization by image dimensions.
//!
//! Boxes live in the image coordinate frame (origin top-left, pixels) in
//! corner form. The center/size form ([`NormalizedBox`]) exists only for
//! feature construction; parsing and matching stay in corner form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },
    #[error("invalid image dimensions {width}x{height}: both must be positive")]
    InvalidDims { width: u32, height: u32 },
    #[error("invalid normalized box (cx={cx}, cy={cy}, w={w}, h={h}): {reason}")]
    InvalidNormalized {
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        reason: &'static str,
    },
}

/// Axis-aligned 2D box in pixel coordinates. Degenerate (zero-area) boxes are
/// legal; negative extents and non-finite coordinates are not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let invalid = |reason| GeometryError::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        if x_min > x_max || y_min > y_max {
            return Err(invalid("negative extent"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Overlap area with `other`; 0 when the boxes are disjoint or only touch.
    pub fn intersection_area(&self, other: &Box2D) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Intersection over union in [0, 1]. Two degenerate boxes (union area 0)
    /// give 0, so a zero-area box never matches anything.
    pub fn iou(&self, other: &Box2D) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Image width/height in pixels, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    width: u32,
    height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDims { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Center/size box expressed as fractions of the image dimensions.
///
/// Values may leave [0, 1] when the source box leaves the image;
/// [`NormalizedBox::in_unit_range`] flags that case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

impl NormalizedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let invalid = |reason| GeometryError::InvalidNormalized { cx, cy, w, h, reason };
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(invalid("values must be finite"));
        }
        if w < 0.0 || h < 0.0 {
            return Err(invalid("negative size"));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// True when the whole box lies inside the image, i.e. every corner
    /// coordinate falls in [0, 1].
    pub fn in_unit_range(&self) -> bool {
        let x0 = self.cx - self.w / 2.0;
        let x1 = self.cx + self.w / 2.0;
        let y0 = self.cy - self.h / 2.0;
        let y1 = self.cy + self.h / 2.0;
        (0.0..=1.0).contains(&x0)
            && (0.0..=1.0).contains(&x1)
            && (0.0..=1.0).contains(&y0)
            && (0.0..=1.0).contains(&y1)
    }
}

/// Convert a pixel box to center/size fractions of the image.
pub fn normalize(b: &Box2D, dims: ImageDims) -> NormalizedBox {
    let w = f64::from(dims.width());
    let h = f64::from(dims.height());
    NormalizedBox {
        cx: (b.x_min + b.x_max) / (2.0 * w),
        cy: (b.y_min + b.y_max) / (2.0 * h),
        w: (b.x_max - b.x_min) / w,
        h: (b.y_max - b.y_min) / h,
    }
}

/// Inverse of [`normalize`] up to floating round-off.
pub fn denormalize(n: &NormalizedBox, dims: ImageDims) -> Box2D {
    let w = f64::from(dims.width());
    let h = f64::from(dims.height());
    // n.w, n.h >= 0 by construction, so the corner ordering always holds.
    Box2D {
        x_min: (n.cx - n.w / 2.0) * w,
        y_min: (n.cy - n.h / 2.0) * h,
        x_max: (n.cx + n.w / 2.0) * w,
        y_max: (n.cy + n.h / 2.0) * h,
    }
}
