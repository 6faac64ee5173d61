//! Bounded convex domains: intervals, axis-aligned boxes and balls.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Hyperrectangle { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("interval ({lo}, {hi}) is empty or unbounded")));
        }
        Ok(Domain::Interval { lo, hi })
    }

    pub fn hyperrectangle(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("hyperrectangle bounds must be non-empty and of equal length"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(invalid(format!("hyperrectangle side ({l}, {u}) is degenerate")));
            }
        }
        Ok(Domain::Hyperrectangle { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Self {
        Domain::Hyperrectangle {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("ball center must be a finite point"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("ball radius {radius} must be positive")));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Hyperrectangle { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Hyperrectangle { .. } => "hyperrectangle",
            Domain::Ball { .. } => "ball",
        }
    }

    /// Open-set membership.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { lo, hi } => x[0] > *lo && x[0] < *hi,
            Domain::Hyperrectangle { lower, upper } => lower
                .iter()
                .zip(upper)
                .zip(x)
                .all(|((l, u), v)| v > l && v < u),
            Domain::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                r2 < radius * radius
            }
        }
    }

    /// The diameter ς.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { lo, hi } => hi - lo,
            Domain::Hyperrectangle { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn inradius(&self) -> f64 {
        match self {
            Domain::Interval { lo, hi } => 0.5 * (hi - lo),
            Domain::Hyperrectangle { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (u - l))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { radius, .. } => *radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Interval { lo, hi } => hi - lo,
            Domain::Hyperrectangle { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| u - l).product()
            }
            Domain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    /// Smallest axis-aligned box containing the closure.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Domain::Hyperrectangle { lower, upper } => (lower.clone(), upper.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Euclidean distance to the boundary (for points inside or outside).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { lo, hi } => {
                let v = x[0];
                if v <= *lo {
                    lo - v
                } else if v >= *hi {
                    v - hi
                } else {
                    (v - lo).min(hi - v)
                }
            }
            Domain::Hyperrectangle { lower, upper } => {
                if self.contains(x) {
                    lower
                        .iter()
                        .zip(upper)
                        .zip(x)
                        .map(|((l, u), v)| (v - l).min(u - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    lower
                        .iter()
                        .zip(upper)
                        .zip(x)
                        .map(|((l, u), v)| {
                            let e = (l - v).max(v - u).max(0.0);
                            e * e
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            Domain::Ball { center, radius } => {
                let r: f64 = center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                (r - radius).abs()
            }
        }
    }

    /// Nearest point of ∂D, written into `out`.
    pub fn project_to_boundary(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        match self {
            Domain::Interval { lo, hi } => {
                out[0] = if (x[0] - lo).abs() <= (hi - x[0]).abs() { *lo } else { *hi };
            }
            Domain::Hyperrectangle { lower, upper } => {
                if self.contains(x) {
                    let mut best = (f64::INFINITY, 0usize, 0.0);
                    for k in 0..x.len() {
                        let dl = x[k] - lower[k];
                        let du = upper[k] - x[k];
                        if dl < best.0 {
                            best = (dl, k, lower[k]);
                        }
                        if du < best.0 {
                            best = (du, k, upper[k]);
                        }
                    }
                    out[best.1] = best.2;
                } else {
                    for k in 0..x.len() {
                        out[k] = x[k].clamp(lower[k], upper[k]);
                    }
                }
            }
            Domain::Ball { center, radius } => {
                let r: f64 = center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                if r == 0.0 {
                    out.copy_from_slice(center);
                    out[0] += radius;
                } else {
                    for k in 0..x.len() {
                        out[k] = center[k] + radius * (x[k] - center[k]) / r;
                    }
                }
            }
        }
    }
}

/// Lebesgue measure of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = 2π/d · V_{d−2}
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Surface measure of the unit sphere S^{d−1}.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_is_open() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(d.contains(&[0.5]));
        assert!(!d.contains(&[0.0]));
        assert!(!d.contains(&[1.0]));
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(b.contains(&[0.6, 0.6]));
        assert!(!b.contains(&[1.0, 0.0]));
    }

    #[test]
    fn diameters_and_volumes() {
        assert_eq!(Domain::unit_cube(2).diameter(), 2f64.sqrt());
        assert_eq!(Domain::ball(vec![0.0; 3], 1.0).unwrap().diameter(), 2.0);
        let v3 = Domain::ball(vec![0.0; 3], 1.0).unwrap().volume();
        assert!((v3 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn projections_land_on_boundary() {
        let dom = Domain::unit_cube(2);
        let mut out = [0.0; 2];
        dom.project_to_boundary(&[0.9, 0.5], &mut out);
        assert_eq!(out, [1.0, 0.5]);
        dom.project_to_boundary(&[1.3, -0.2], &mut out);
        assert_eq!(out, [1.0, 0.0]);
        let ball = Domain::ball(vec![0.0, 0.0], 2.0).unwrap();
        ball.project_to_boundary(&[3.0, 4.0], &mut out);
        assert!((out[0] - 1.2).abs() < 1e-15 && (out[1] - 1.6).abs() < 1e-15);
        assert!((ball.distance_to_boundary(&[0.5, 0.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(vec![0.0], -1.0).is_err());
        assert!(Domain::hyperrectangle(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
