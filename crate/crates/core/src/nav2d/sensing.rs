//! Grid ray casting, simulated range beams and nearest-obstacle queries.

use std::f64::consts::PI;

use super::grid::OccupancyGrid;
use crate::env::EnvError;

/// Distance along the ray at `angle` from `origin` to the first obstacle cell
/// boundary, or `None` if nothing is hit within `max_range`.
///
/// Walks the cells crossed by the ray one boundary at a time
/// (Amanatides–Woo), so the result is exact for the grid geometry.
pub fn raycast(grid: &OccupancyGrid, origin: [f64; 2], angle: f64, max_range: f64) -> Result<Option<f64>, EnvError> {
    if grid.point_in_obstacle(origin) {
        return Err(EnvError::InvalidOrigin);
    }
    let s = grid.cell_size();
    let (dy, dx) = angle.sin_cos();
    let (mut i, mut j) = grid.cell_of(origin);

    let (step_i, mut t_max_x, t_delta_x) = axis_setup(origin[0], dx, i, s);
    let (step_j, mut t_max_y, t_delta_y) = axis_setup(origin[1], dy, j, s);

    loop {
        let t = if t_max_x < t_max_y {
            let t = t_max_x;
            i += step_i;
            t_max_x += t_delta_x;
            t
        } else {
            let t = t_max_y;
            j += step_j;
            t_max_y += t_delta_y;
            t
        };
        if t > max_range {
            return Ok(None);
        }
        if grid.is_obstacle(i, j) {
            return Ok(Some(t));
        }
    }
}

/// `(step, t to first boundary, t between boundaries)` along one axis.
fn axis_setup(o: f64, d: f64, cell: i64, s: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, ((cell + 1) as f64 * s - o) / d, s / d)
    } else if d < 0.0 {
        (-1, (cell as f64 * s - o) / d, -s / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Sensor pose: position plus heading (radians, world frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
}

/// Beam angles evenly spaced across `arc`, centred on `heading`. A single beam
/// points along the heading.
pub fn beam_angles(heading: f64, n_beams: usize, arc: f64) -> Vec<f64> {
    let width = arc / n_beams as f64;
    (0..n_beams).map(|k| heading - 0.5 * arc + (k as f64 + 0.5) * width).collect()
}

/// Normalised range readouts: `distance / max_range` on a hit, `0.0` when the
/// beam sees nothing within range.
pub fn sense_rays(
    grid: &OccupancyGrid,
    pose: Pose,
    n_beams: usize,
    arc: f64,
    max_range: f64,
) -> Result<Vec<f64>, EnvError> {
    if n_beams == 0 {
        return Err(EnvError::InvalidSpace("a range sensor needs at least one beam".into()));
    }
    beam_angles(pose.heading, n_beams, arc)
        .into_iter()
        .map(|a| Ok(raycast(grid, pose.position, a, max_range)?.map_or(0.0, |d| d / max_range)))
        .collect()
}

/// Distance from `p` to the closed region of cell `(i, j)` and the closest
/// point of that region.
fn point_cell_distance(grid: &OccupancyGrid, p: [f64; 2], i: i64, j: i64) -> (f64, [f64; 2]) {
    let [x0, y0, x1, y1] = grid.cell_bounds(i, j);
    let c = [p[0].clamp(x0, x1), p[1].clamp(y0, y1)];
    ((p[0] - c[0]).hypot(p[1] - c[1]), c)
}

/// Bearing folded into `(-π, π]`.
pub fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    let b = (to[1] - from[1]).atan2(to[0] - from[0]);
    if b <= -PI {
        PI
    } else {
        b
    }
}

const TIE_EPS: f64 = 1e-12;

/// Distance and bearing to the closest point of any obstacle cell. Equal
/// distances resolve to the smaller bearing.
///
/// Searches Chebyshev rings of cells around `position`; a cell in ring `r`
/// is at least `(r - 1)` cells away, which bounds how far the search must go.
pub fn nearest_obstacle(grid: &OccupancyGrid, position: [f64; 2]) -> (f64, f64) {
    let (ci, cj) = grid.cell_of(position);
    let s = grid.cell_size();
    let max_ring = grid.width().max(grid.height()) as i64 + 1;
    let mut best: Option<(f64, f64)> = None;

    let consider = |i: i64, j: i64, best: &mut Option<(f64, f64)>| {
        if i < 0 || j < 0 || i as usize >= grid.width() || j as usize >= grid.height() || !grid.is_obstacle(i, j) {
            return;
        }
        let (d, c) = point_cell_distance(grid, position, i, j);
        let b = bearing(position, c);
        *best = match *best {
            None => Some((d, b)),
            Some((bd, bb)) if d < bd - TIE_EPS || ((d - bd).abs() <= TIE_EPS && b < bb) => Some((d.min(bd), b)),
            keep => keep,
        };
    };

    for r in 0..=max_ring {
        if r == 0 {
            consider(ci, cj, &mut best);
        } else {
            for k in -r..=r {
                consider(ci + k, cj - r, &mut best);
                consider(ci + k, cj + r, &mut best);
            }
            for k in (-r + 1)..r {
                consider(ci - r, cj + k, &mut best);
                consider(ci + r, cj + k, &mut best);
            }
        }
        if let Some((d, _)) = best {
            if d + TIE_EPS < r as f64 * s {
                break;
            }
        }
    }
    best.expect("closed grids always contain an obstacle")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav2d::grid::{bundled_map, load_map};

    fn open_room(n: usize) -> OccupancyGrid {
        OccupancyGrid::from_fn(n, n, 1.0, |i, j| i == 0 || j == 0 || i == n - 1 || j == n - 1).unwrap()
    }

    /// Reference: march the ray in 1e-4 m steps until it enters an obstacle cell.
    fn march(grid: &OccupancyGrid, o: [f64; 2], angle: f64, max_range: f64) -> Option<f64> {
        let h = 1e-4;
        let (s, c) = angle.sin_cos();
        let mut t = 0.0;
        while t <= max_range {
            if grid.point_in_obstacle([o[0] + t * c, o[1] + t * s]) {
                return Some(t);
            }
            t += h;
        }
        None
    }

    #[test]
    fn ray_hits_obstacle_column() {
        // Free interior x ∈ [1, 4); obstacle column from x = 4.
        let g = OccupancyGrid::from_fn(8, 6, 1.0, |i, j| i == 0 || j == 0 || j == 5 || i >= 4).unwrap();
        let d = raycast(&g, [2.5, 2.5], 0.0, 10.0).unwrap().unwrap();
        let oracle = march(&g, [2.5, 2.5], 0.0, 10.0).unwrap();
        assert!((d - oracle).abs() < 1e-3);
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn no_hit_within_range() {
        let g = open_room(40);
        let r = raycast(&g, [20.0, 20.0], 0.3, 5.0).unwrap();
        assert_eq!(r, None);
        let readouts = sense_rays(&g, Pose { position: [20.0, 20.0], heading: 0.0 }, 30, 2.0 * PI, 10.0).unwrap();
        assert!(readouts.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjacent_wall_is_closer_than_a_cell() {
        let g = open_room(6);
        let d = raycast(&g, [1.2, 3.0], PI, 10.0).unwrap().unwrap();
        assert!(d < g.cell_size());
    }

    #[test]
    fn origin_inside_obstacle_is_rejected() {
        let g = open_room(6);
        assert_eq!(raycast(&g, [0.5, 3.0], 0.0, 10.0), Err(EnvError::InvalidOrigin));
    }

    #[test]
    fn single_beam_at_half_range() {
        // Wall face at x = 6; beam from x = 1 → 5 m.
        let g = OccupancyGrid::from_fn(8, 5, 1.0, |i, j| i == 0 || j == 0 || j == 4 || i >= 6).unwrap();
        let r = sense_rays(&g, Pose { position: [1.0, 2.5], heading: 0.0 }, 1, 0.5, 10.0).unwrap();
        let oracle = march(&g, [1.0, 2.5], 0.0, 10.0).unwrap() / 10.0;
        assert!((r[0] - oracle).abs() < 1e-4);
        assert!((r[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_beams_is_an_error() {
        let g = open_room(6);
        assert!(sense_rays(&g, Pose { position: [3.0, 3.0], heading: 0.0 }, 0, PI, 10.0).is_err());
    }

    #[test]
    fn raycast_agrees_with_marching_on_bundled_map() {
        let m = bundled_map(4).unwrap();
        let origins = [[3.3, 3.7], [16.2, 16.9], [28.1, 2.4], [12.6, 22.2]];
        for o in origins {
            for k in 0..36 {
                let a = k as f64 * PI / 18.0 + 0.013;
                let d = raycast(&m.grid, o, a, 50.0).unwrap();
                let e = march(&m.grid, o, a, 50.0);
                match (d, e) {
                    (Some(d), Some(e)) => assert!((d - e).abs() <= 1e-3, "{o:?} {a}: {d} vs {e}"),
                    (None, None) => {}
                    other => panic!("{o:?} {a}: {other:?}"),
                }
            }
        }
    }

    /// Reference: every obstacle cell, exhaustively.
    fn brute_nearest(grid: &OccupancyGrid, p: [f64; 2]) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (i, j) in grid.obstacle_cells() {
            let (d, c) = point_cell_distance(grid, p, i as i64, j as i64);
            let b = bearing(p, c);
            if d < best.0 - TIE_EPS || ((d - best.0).abs() <= TIE_EPS && b < best.1) {
                best = (d.min(best.0), b);
            }
        }
        best
    }

    #[test]
    fn flat_wall_two_meters_away() {
        // Only the left wall is within reach: wall face at x = 1, agent at x = 3.
        let g = OccupancyGrid::from_fn(12, 12, 1.0, |i, j| i == 0 || j == 0 || i == 11 || j == 11).unwrap();
        let (d, b) = nearest_obstacle(&g, [3.0, 6.0]);
        assert_eq!(brute_nearest(&g, [3.0, 6.0]), (d, b));
        assert!((d - 2.0).abs() < 1e-12);
        assert!((b - PI).abs() < 1e-12);
    }

    #[test]
    fn touching_boundary_is_zero() {
        let g = open_room(6);
        let (d, _) = nearest_obstacle(&g, [1.0, 3.0]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn equidistant_walls_resolve_to_smaller_bearing() {
        // Corridor one cell tall: walls below (bearing -π/2) and above (π/2).
        let g = load_map("#######\n#.....#\n#######\n").unwrap();
        let (d, b) = nearest_obstacle(&g, [3.5, 1.5]);
        assert!((d - 0.5).abs() < 1e-12);
        assert!((b + PI / 2.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn ring_search_matches_brute_force_on_bundled_maps() {
        use rand::Rng;
        let mut rng = crate::env::RngState::new(8);
        for k in 0..crate::nav2d::MAP_COUNT {
            let g = &bundled_map(k).unwrap().grid;
            let mut n = 0;
            while n < 200 {
                let p = [rng.random_range(0.0..32.0), rng.random_range(0.0..32.0)];
                if g.point_in_obstacle(p) {
                    continue;
                }
                n += 1;
                assert_eq!(nearest_obstacle(g, p), brute_nearest(g, p), "map {k} at {p:?}");
            }
        }
    }
}
