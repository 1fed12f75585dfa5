//! Geometric predicates used to select boundary edges, node sets and element regions.

use core::fmt;

pub type Point = [f64; 2];

/// A closed region of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned box `[x0, x1] × [y0, y1]`. Degenerate boxes select edges
    /// lying on a line, e.g. `x0 = x1 = 0` for the left edge.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Closed disk.
    Circle { center: Point, radius: f64 },
    /// Points whose distance to the circle of `radius` is at most `half_width`.
    CircleBand {
        center: Point,
        radius: f64,
        half_width: f64,
    },
}

/// Slack applied to box bounds so that points exactly on a degenerate box are selected.
const BOX_EPS: f64 = 1e-9;

impl Region {
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Region::Rect { x0, x1, y0, y1 }
    }

    pub fn circle(cx: f64, cy: f64, radius: f64) -> Self {
        Region::Circle {
            center: [cx, cy],
            radius,
        }
    }

    pub fn circle_band(cx: f64, cy: f64, radius: f64, half_width: f64) -> Self {
        Region::CircleBand {
            center: [cx, cy],
            radius,
            half_width,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Region::Rect { x0, x1, y0, y1 } => {
                x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite() && x0 <= x1 && y0 <= y1
            }
            Region::Circle { center, radius } => {
                center.iter().all(|c| c.is_finite()) && radius.is_finite() && radius > 0.0
            }
            Region::CircleBand {
                center,
                radius,
                half_width,
            } => {
                center.iter().all(|c| c.is_finite())
                    && radius.is_finite()
                    && radius > 0.0
                    && half_width.is_finite()
                    && half_width > 0.0
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Rect { x0, x1, y0, y1 } => {
                p[0] >= x0 - BOX_EPS && p[0] <= x1 + BOX_EPS && p[1] >= y0 - BOX_EPS && p[1] <= y1 + BOX_EPS
            }
            Region::Circle { center, radius } => dist(p, center) <= radius,
            Region::CircleBand {
                center,
                radius,
                half_width,
            } => libm::fabs(dist(p, center) - radius) <= half_width,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Region::Rect { x0, x1, y0, y1 } => write!(f, "box [{x0}, {x1}] x [{y0}, {y1}]"),
            Region::Circle { center, radius } => {
                write!(f, "circle center ({}, {}) radius {radius}", center[0], center[1])
            }
            Region::CircleBand {
                center,
                radius,
                half_width,
            } => write!(
                f,
                "circle band center ({}, {}) radius {radius} half-width {half_width}",
                center[0], center[1]
            ),
        }
    }
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Twice the signed area of the triangle `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_selects_its_line() {
        let left = Region::rect(0.0, 0.0, 0.0, 1.0);
        assert!(left.contains([0.0, 0.5]));
        assert!(!left.contains([1e-6, 0.5]));
    }

    #[test]
    fn band_and_disk() {
        let band = Region::circle_band(0.5, 0.5, 0.2, 0.01);
        assert!(band.contains([0.7, 0.5]));
        assert!(!band.contains([0.5, 0.5]));
        let disk = Region::circle(0.5, 0.5, 0.2);
        assert!(disk.contains([0.5, 0.5]));
        assert!(!Region::circle(0.0, 0.0, 0.0).is_valid());
    }
}
