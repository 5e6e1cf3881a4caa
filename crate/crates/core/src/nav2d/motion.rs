//! Disc agent kinematics on an occupancy grid.

use super::grid::OccupancyGrid;

/// True when the open disc of `radius` around `center` overlaps an obstacle
/// cell. Touching at exactly `radius` is not an overlap.
pub fn disc_overlaps_obstacle(grid: &OccupancyGrid, center: [f64; 2], radius: f64) -> bool {
    let s = grid.cell_size();
    let i0 = ((center[0] - radius) / s).floor() as i64;
    let i1 = ((center[0] + radius) / s).floor() as i64;
    let j0 = ((center[1] - radius) / s).floor() as i64;
    let j1 = ((center[1] + radius) / s).floor() as i64;
    for j in j0..=j1 {
        for i in i0..=i1 {
            if !grid.is_obstacle(i, j) {
                continue;
            }
            let [x0, y0, x1, y1] = grid.cell_bounds(i, j);
            let dx = center[0] - center[0].clamp(x0, x1);
            let dy = center[1] - center[1].clamp(y0, y1);
            if dx * dx + dy * dy < radius * radius {
                return true;
            }
        }
    }
    false
}

/// Moves the agent by `velocity · dt`, one axis at a time (x then y). An axis
/// whose move would make the disc overlap an obstacle is cancelled and the
/// step reports a collision; the other axis still slides.
pub fn integrate_motion(
    grid: &OccupancyGrid,
    position: [f64; 2],
    radius: f64,
    velocity: [f64; 2],
    dt: f64,
) -> ([f64; 2], bool) {
    let mut p = position;
    let mut collided = false;
    for axis in 0..2 {
        let delta = velocity[axis] * dt;
        if delta == 0.0 {
            continue;
        }
        let mut candidate = p;
        candidate[axis] += delta;
        if disc_overlaps_obstacle(grid, candidate, radius) {
            collided = true;
        } else {
            p = candidate;
        }
    }
    (p, collided)
}
