//! Marching-squares level sets on a rectangular grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A level-set curve in grid coordinates `(row, column)`, where integer
/// values sit on grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Edge identifier: `(row, col, horizontal)`. A horizontal edge joins
/// `(row, col)` and `(row, col + 1)`; a vertical one joins `(row, col)` and
/// `(row + 1, col)`.
type EdgeKey = (usize, usize, bool);

/// Curves where `z` crosses `level`. `z[i][j]` is the value at row `i`,
/// column `j`; non-finite values are treated as missing and no segment
/// touches them.
pub fn level_set(z: &[Vec<f64>], level: f64) -> Vec<Polyline> {
    let rows = z.len();
    let cols = z.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return Vec::new();
    }
    let above = |i: usize, j: usize| z[i][j] > level;
    let crossing = |e: EdgeKey| -> (f64, f64) {
        let (i, j, horizontal) = e;
        let (a, b) = if horizontal { (z[i][j], z[i][j + 1]) } else { (z[i][j], z[i + 1][j]) };
        let t = ((level - a) / (b - a)).clamp(0.0, 1.0);
        if horizontal {
            (i as f64, j as f64 + t)
        } else {
            (i as f64 + t, j as f64)
        }
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            let corners = [z[i][j], z[i][j + 1], z[i + 1][j + 1], z[i + 1][j]];
            if corners.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let bottom = (i, j, true);
            let right = (i, j + 1, false);
            let top = (i + 1, j, true);
            let left = (i, j, false);
            let code = (above(i, j) as u8)
                | (above(i, j + 1) as u8) << 1
                | (above(i + 1, j + 1) as u8) << 2
                | (above(i + 1, j) as u8) << 3;
            let centre_above = corners.iter().sum::<f64>() / 4.0 > level;
            match code {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if centre_above {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if centre_above {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(&segments).into_iter().map(|(keys, closed)| Polyline { points: keys.into_iter().map(crossing).collect(), closed }).collect()
}

/// Joins segments that share an edge into maximal chains.
fn chain(segments: &[(EdgeKey, EdgeKey)]) -> Vec<(Vec<EdgeKey>, bool)> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(s);
        by_edge.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let next_segment = |edge: &EdgeKey, used: &[bool]| by_edge[edge].iter().copied().find(|&s| !used[s]);
    let mut out = Vec::new();

    // Open chains start at edges touched once, in segment order; the rest
    // are loops.
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&s| by_edge[&segments[s].0].len() == 1 || by_edge[&segments[s].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for s0 in starts {
        if used[s0] {
            continue;
        }
        let (a, b) = segments[s0];
        let (mut path, mut tail) = if by_edge[&a].len() == 1 || by_edge[&b].len() != 1 { (vec![a, b], b) } else { (vec![b, a], a) };
        used[s0] = true;
        while let Some(s) = next_segment(&tail, &used) {
            used[s] = true;
            let (c, d) = segments[s];
            tail = if c == tail { d } else { c };
            path.push(tail);
        }
        let closed = path.len() > 2 && path.first() == path.last();
        out.push((path, closed));
    }
    out
}

/// Maps a fractional grid index onto an axis, interpolating in log space
/// when all axis values are positive.
pub fn axis_position(axis: &[f64], x: f64) -> f64 {
    let i = (x.floor().max(0.0) as usize).min(axis.len().saturating_sub(2));
    if axis.len() < 2 {
        return axis.first().copied().unwrap_or(x);
    }
    let t = x - i as f64;
    let (a, b) = (axis[i], axis[i + 1]);
    if a > 0.0 && b > 0.0 {
        (a.ln() + t * (b.ln() - a.ln())).exp()
    } else {
        a + t * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(n: usize) -> Vec<Vec<f64>> {
        let c = (n as f64 - 1.0) / 2.0;
        (0..n).map(|i| (0..n).map(|j| ((i as f64 - c).powi(2) + (j as f64 - c).powi(2)).sqrt()).collect()).collect()
    }

    #[test]
    fn circle_is_one_closed_loop() {
        let lines = level_set(&radial(11), 3.0);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        for &(x, y) in &lines[0].points {
            let r = ((x - 5.0).powi(2) + (y - 5.0).powi(2)).sqrt();
            assert!((r - 3.0).abs() < 0.2, "r = {r}");
        }
    }

    #[test]
    fn straight_boundary_ends_on_edges() {
        let z: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|j| j as f64).collect()).collect();
        let lines = level_set(&z, 2.5);
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert!(!l.closed);
        assert_eq!(l.points.len(), 5);
        assert!(l.points.iter().all(|p| (p.1 - 2.5).abs() < 1e-12));
        let ends = [l.points[0].0, l.points[4].0];
        assert!(ends.contains(&0.0) && ends.contains(&4.0));
    }

    #[test]
    fn nothing_without_crossing() {
        assert!(level_set(&radial(4), 100.0).is_empty());
        assert!(level_set(&[vec![1.0]], 0.0).is_empty());
    }

    #[test]
    fn log_axis_interpolation() {
        let axis = [0.1, 1.0, 10.0];
        assert!((axis_position(&axis, 0.5) - 0.1f64.sqrt() * 1.0f64.sqrt()).abs() < 1e-12);
        assert!((axis_position(&axis, 2.0) - 10.0).abs() < 1e-12);
        assert!((axis_position(&[0.0, 2.0], 0.25) - 0.5).abs() < 1e-12);
    }
}
