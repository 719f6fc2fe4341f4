//! Clamped cubic spline through anchor points, resampled by arc length.

use super::SimulationError;
use crate::encounter::Point;

/// Spacing of the arc-length table, m.
const RESOLUTION: f64 = 0.05;
/// Anchors closer than this are treated as coincident, m.
const MIN_ANCHOR_GAP: f64 = 1e-3;
/// Longer anchor chords get evenly spaced knots, which keeps straight
/// stretches straight next to a bend.
const MAX_KNOT_GAP: f64 = 5.0;

/// A smooth reference path with an arc-length table.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub anchors: Vec<Point>,
    s: Vec<f64>,
    xy: Vec<Point>,
    /// Unwrapped heading, rad.
    heading: Vec<f64>,
    curvature: Vec<f64>,
}

/// Closest point of a path to some position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    pub index: usize,
    pub point: Point,
    /// Signed distance, positive to the left of the direction of travel.
    pub lateral: f64,
    pub heading: f64,
    pub curvature: f64,
}

/// One coordinate of a clamped cubic spline, as second derivatives at knots.
fn clamped_second_derivatives(u: &[f64], y: &[f64], d0: f64, dn: f64) -> Vec<f64> {
    let n = u.len();
    let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = 2.0 * h[0];
    sup[0] = h[0];
    rhs[0] = 6.0 * ((y[1] - y[0]) / h[0] - d0);
    for i in 1..n - 1 {
        sub[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        sup[i] = h[i];
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    sub[n - 1] = h[n - 2];
    diag[n - 1] = 2.0 * h[n - 2];
    rhs[n - 1] = 6.0 * (dn - (y[n - 1] - y[n - 2]) / h[n - 2]);
    // Thomas algorithm; the system is diagonally dominant.
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - sup[i] * out[i + 1]) / diag[i];
    }
    out
}

/// Value, first and second derivative on knot interval `i` at `u`.
fn eval(u: &[f64], y: &[f64], m: &[f64], i: usize, at: f64) -> (f64, f64, f64) {
    let h = u[i + 1] - u[i];
    let (a, b) = (u[i + 1] - at, at - u[i]);
    let ci = y[i] / h - m[i] * h / 6.0;
    let cj = y[i + 1] / h - m[i + 1] * h / 6.0;
    (
        m[i] * a * a * a / (6.0 * h) + m[i + 1] * b * b * b / (6.0 * h) + ci * a + cj * b,
        -m[i] * a * a / (2.0 * h) + m[i + 1] * b * b / (2.0 * h) - ci + cj,
        (m[i] * a + m[i + 1] * b) / h,
    )
}

fn unit(p: Point, q: Point) -> Point {
    let d = [q[0] - p[0], q[1] - p[1]];
    let n = d[0].hypot(d[1]);
    [d[0] / n, d[1] / n]
}

/// Fit a path through `anchors` in order. End tangents follow the given
/// headings, or the first and last chords when absent.
pub fn fit_path(anchors: &[Point], start_heading: Option<f64>, end_heading: Option<f64>) -> Result<Path, SimulationError> {
    if anchors.len() < 2 {
        return Err(SimulationError::DegenerateAnchors("need at least two anchors".into()));
    }
    if anchors.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(SimulationError::DegenerateAnchors("non-finite anchor".into()));
    }
    for (i, p) in anchors.iter().enumerate() {
        for q in &anchors[i + 1..] {
            if (p[0] - q[0]).hypot(p[1] - q[1]) < MIN_ANCHOR_GAP {
                return Err(SimulationError::DegenerateAnchors(format!(
                    "anchors ({:.3}, {:.3}) coincide",
                    p[0], p[1]
                )));
            }
        }
    }
    let mut knots = vec![anchors[0]];
    for w in anchors.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        let pieces = (len / MAX_KNOT_GAP).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            let f = k as f64 / pieces as f64;
            knots.push([w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])]);
        }
    }
    let knots = knots.as_slice();
    let n = knots.len();
    let mut u = vec![0.0];
    for w in knots.windows(2) {
        u.push(u.last().unwrap() + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let t0 = start_heading.map_or_else(|| unit(knots[0], knots[1]), |h| [h.cos(), h.sin()]);
    let t1 = end_heading.map_or_else(|| unit(knots[n - 2], knots[n - 1]), |h| [h.cos(), h.sin()]);
    let xs: Vec<f64> = knots.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = knots.iter().map(|p| p[1]).collect();
    let mx = clamped_second_derivatives(&u, &xs, t0[0], t1[0]);
    let my = clamped_second_derivatives(&u, &ys, t0[1], t1[1]);

    let mut xy = Vec::new();
    let mut heading = Vec::new();
    let mut curvature = Vec::new();
    for i in 0..n - 1 {
        let pieces = ((u[i + 1] - u[i]) / RESOLUTION).ceil().max(1.0) as usize;
        let last = i == n - 2;
        for k in 0..pieces + usize::from(last) {
            let at = u[i] + (u[i + 1] - u[i]) * k as f64 / pieces as f64;
            let (x, dx, ddx) = eval(&u, &xs, &mx, i, at);
            let (y, dy, ddy) = eval(&u, &ys, &my, i, at);
            xy.push([x, y]);
            heading.push(dy.atan2(dx));
            let speed2 = dx * dx + dy * dy;
            curvature.push((dx * ddy - dy * ddx) / speed2.powf(1.5));
        }
    }
    for i in 1..heading.len() {
        let mut d = heading[i] - heading[i - 1];
        d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        heading[i] = heading[i - 1] + d;
    }
    let mut s = vec![0.0];
    for w in xy.windows(2) {
        s.push(s.last().unwrap() + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    Ok(Path {
        anchors: anchors.to_vec(),
        s,
        xy,
        heading,
        curvature,
    })
}

impl Path {
    pub fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn table_len(&self) -> usize {
        self.s.len()
    }

    /// Position, heading and curvature at arc length `s`, clamped to the ends.
    pub fn pose_at(&self, s: f64) -> (Point, f64, f64) {
        let n = self.s.len();
        let s = s.clamp(0.0, self.length());
        let i = (self.s.partition_point(|v| *v <= s).max(1) - 1).min(n - 2);
        let w = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        let lerp = |a: f64, b: f64| a + w * (b - a);
        (
            [lerp(self.xy[i][0], self.xy[i + 1][0]), lerp(self.xy[i][1], self.xy[i + 1][1])],
            lerp(self.heading[i], self.heading[i + 1]),
            lerp(self.curvature[i], self.curvature[i + 1]),
        )
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.pose_at(s).1
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        self.pose_at(s).2
    }

    fn project_segment(&self, i: usize, p: Point) -> (f64, f64) {
        let (a, b) = (self.xy[i], self.xy[i + 1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let w = if len2 > 0.0 {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = [a[0] + w * d[0], a[1] + w * d[1]];
        ((p[0] - c[0]).hypot(p[1] - c[1]), self.s[i] + w * (self.s[i + 1] - self.s[i]))
    }

    /// Closest point to `p`. With a `hint` index only a window of about
    /// ten metres around it is searched.
    pub fn project(&self, p: Point, hint: Option<usize>) -> Projection {
        let segs = self.s.len() - 1;
        let (lo, hi) = match hint {
            Some(h) => {
                let span = (10.0 / RESOLUTION) as usize;
                (h.saturating_sub(span), (h + span).min(segs))
            }
            None => (0, segs),
        };
        let mut best = (f64::INFINITY, 0.0, lo);
        for i in lo..hi.max(lo + 1).min(segs) {
            let (gap, s) = self.project_segment(i, p);
            if gap < best.0 {
                best = (gap, s, i);
            }
        }
        let (point, heading, curvature) = self.pose_at(best.1);
        let lateral = -(p[0] - point[0]) * heading.sin() + (p[1] - point[1]) * heading.cos();
        Projection {
            s: best.1,
            index: best.2,
            point,
            lateral,
            heading,
            curvature,
        }
    }

    /// Arc length of the point of the path nearest to `p`.
    pub fn arc_length_of(&self, p: Point) -> f64 {
        self.project(p, None).s
    }

    /// Distance from `p` to the path.
    pub fn distance_to(&self, p: Point) -> f64 {
        let pr = self.project(p, None);
        (p[0] - pr.point[0]).hypot(p[1] - pr.point[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn collinear_anchors_give_a_straight_segment() {
        let path = fit_path(&[[0.0, 0.0], [0.0, 10.0], [0.0, 25.0], [0.0, 40.0]], None, None).unwrap();
        assert!((path.length() - 40.0).abs() < 1e-9);
        for k in 0..=40 {
            let (p, h, c) = path.pose_at(k as f64);
            assert!(p[0].abs() < 1e-9 && (h - FRAC_PI_2).abs() < 1e-9 && c.abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_turn() {
        // Northbound, then a left quarter circle of radius 10 to westbound.
        let mut anchors = vec![[0.0, -20.0], [0.0, 0.0]];
        for k in 1..=6 {
            let a = FRAC_PI_2 * k as f64 / 6.0;
            anchors.push([-10.0 + 10.0 * a.cos(), 10.0 * a.sin()]);
        }
        anchors.push([-30.0, 10.0]);
        let path = fit_path(&anchors, Some(FRAC_PI_2), Some(std::f64::consts::PI)).unwrap();
        for a in &anchors {
            assert!(path.distance_to(*a) < 0.1);
        }
        let h0 = path.heading_at(0.0);
        let h1 = path.heading_at(path.length());
        assert!((h1 - h0 - FRAC_PI_2).abs() < 1e-6);
        let mut prev = h0;
        let mut s = 0.0;
        while s <= path.length() {
            let h = path.heading_at(s);
            // Small ripple is allowed where the straight meets the bend.
            assert!(h >= prev - 0.03, "heading turns back at s = {s}");
            prev = h;
            s += 0.25;
        }
        // Mid-arc curvature close to 1/10.
        let mid = path.arc_length_of([-10.0 + 10.0 * (FRAC_PI_2 / 2.0).cos(), 10.0 * (FRAC_PI_2 / 2.0).sin()]);
        assert!((path.curvature_at(mid) - 0.1).abs() < 0.01);
    }

    #[test]
    fn arc_length_is_monotone() {
        let path = fit_path(&[[0.0, 0.0], [5.0, 3.0], [9.0, -2.0], [14.0, 0.0]], None, None).unwrap();
        assert!(path.s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn coincident_anchors_are_rejected() {
        assert!(matches!(
            fit_path(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]], None, None),
            Err(SimulationError::DegenerateAnchors(_))
        ));
        assert!(matches!(fit_path(&[[0.0, 0.0]], None, None), Err(SimulationError::DegenerateAnchors(_))));
    }

    #[test]
    fn projection_sign() {
        let path = fit_path(&[[0.0, 0.0], [10.0, 0.0]], None, None).unwrap();
        let left = path.project([4.0, 0.5], None);
        assert!((left.lateral - 0.5).abs() < 1e-12 && (left.s - 4.0).abs() < 1e-12);
        assert!((path.project([4.0, -0.5], Some(10)).lateral + 0.5).abs() < 1e-12);
    }
}
