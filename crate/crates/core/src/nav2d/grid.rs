//! Occupancy grids and the map asset format.
//!
//! Cell `(i, j)` covers `x ∈ [i·s, (i+1)·s)`, `y ∈ [j·s, (j+1)·s)` where `s` is
//! the cell size and `j` is the text row (row 0 is the first line of the grid
//! block). A map file is a manifest block, a `---` separator and the grid:
//!
//! ```text
//! name = Map0
//! goal0 = 27.5 27.5
//! goal1 = 4.5 27.5
//! goal2 = 27.5 4.5
//! ---
//! ########
//! #......#
//! ########
//! ```

use once_cell::sync::Lazy;

use crate::env::EnvError;

pub const CELL_SIZE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    /// Row-major, `cells[j * width + i]`, `true` = obstacle.
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// Builds a grid from a cell predicate. Fails unless the border is closed and
    /// at least one cell is free.
    pub fn from_fn(
        width: usize,
        height: usize,
        cell_size: f64,
        mut obstacle: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, EnvError> {
        if width == 0 || height == 0 {
            return Err(EnvError::MalformedMap("empty grid".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(EnvError::MalformedMap(format!("cell size {cell_size} must be positive")));
        }
        let mut cells = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                cells.push(obstacle(i, j));
            }
        }
        let grid = Self { width, height, cell_size, cells };
        grid.check()?;
        Ok(grid)
    }

    fn check(&self) -> Result<(), EnvError> {
        for j in 0..self.height {
            for i in 0..self.width {
                let border = i == 0 || j == 0 || i + 1 == self.width || j + 1 == self.height;
                if border && !self.cells[j * self.width + i] {
                    return Err(EnvError::MalformedMap(format!("border cell ({i}, {j}) is free")));
                }
            }
        }
        if self.free_count() == 0 {
            return Err(EnvError::MalformedMap("no free cell".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Metric extent `(width, height)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.cell_size, self.height as f64 * self.cell_size)
    }

    /// Out-of-range indices count as obstacles.
    pub fn is_obstacle(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return true;
        }
        self.cells[j as usize * self.width + i as usize]
    }

    pub fn cell_of(&self, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / self.cell_size).floor() as i64, (p[1] / self.cell_size).floor() as i64)
    }

    pub fn point_in_obstacle(&self, p: [f64; 2]) -> bool {
        let (i, j) = self.cell_of(p);
        self.is_obstacle(i, j)
    }

    /// Closed metric region `[x0, x1] × [y0, y1]` of a cell.
    pub fn cell_bounds(&self, i: i64, j: i64) -> [f64; 4] {
        let s = self.cell_size;
        [i as f64 * s, j as f64 * s, (i + 1) as f64 * s, (j + 1) as f64 * s]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.cell_size, (j as f64 + 0.5) * self.cell_size]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |j| (0..self.width).map(move |i| (i, j)))
            .filter(|&(i, j)| !self.cells[j * self.width + i])
    }

    pub fn obstacle_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |j| (0..self.width).map(move |i| (i, j)))
            .filter(|&(i, j)| self.cells[j * self.width + i])
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| !c).count()
    }

    pub fn free_fraction(&self) -> f64 {
        self.free_count() as f64 / self.cells.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for j in 0..self.height {
            for i in 0..self.width {
                s.push(if self.cells[j * self.width + i] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

/// Parses a rectangular block of `#` (obstacle) and `.` (free) rows.
pub fn load_map(text: &str) -> Result<OccupancyGrid, EnvError> {
    load_map_with_cell_size(text, CELL_SIZE)
}

pub fn load_map_with_cell_size(text: &str, cell_size: f64) -> Result<OccupancyGrid, EnvError> {
    let rows: Vec<&str> = text.lines().map(|l| l.trim_end()).filter(|l| !l.is_empty()).collect();
    let Some(first) = rows.first() else {
        return Err(EnvError::MalformedMap("no rows".into()));
    };
    let width = first.chars().count();
    let mut cells = Vec::with_capacity(width * rows.len());
    for (j, row) in rows.iter().enumerate() {
        let len = row.chars().count();
        if len != width {
            return Err(EnvError::MalformedMap(format!("row {j} has {len} cells, expected {width}")));
        }
        for (i, c) in row.chars().enumerate() {
            cells.push(match c {
                '#' => true,
                '.' => false,
                other => return Err(EnvError::MalformedMap(format!("unexpected character {other:?} at ({i}, {j})"))),
            });
        }
    }
    OccupancyGrid::from_fn(width, rows.len(), cell_size, |i, j| cells[j * width + i])
}

/// A map plus its three goal coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct MapAsset {
    pub name: String,
    pub goals: [[f64; 2]; 3],
    pub grid: OccupancyGrid,
}

pub fn parse_map_asset(text: &str) -> Result<MapAsset, EnvError> {
    let (head, body) =
        text.split_once("\n---\n").ok_or_else(|| EnvError::MalformedMap("missing `---` separator".into()))?;
    let mut name = None;
    let mut goals: [Option<[f64; 2]>; 3] = [None; 3];
    for line in head.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| EnvError::MalformedMap(format!("manifest line `{line}` is not key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "name" {
            name = Some(value.to_string());
        } else if let Some(idx) = key.strip_prefix("goal") {
            let k: usize = idx.parse().map_err(|_| EnvError::MalformedMap(format!("bad goal key `{key}`")))?;
            let coords: Vec<f64> = value
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| EnvError::MalformedMap(format!("bad coordinates `{value}`")))?;
            if k >= 3 || coords.len() != 2 {
                return Err(EnvError::MalformedMap(format!("bad goal entry `{line}`")));
            }
            goals[k] = Some([coords[0], coords[1]]);
        } else {
            return Err(EnvError::MalformedMap(format!("unknown manifest key `{key}`")));
        }
    }
    let grid = load_map(body)?;
    let name = name.ok_or_else(|| EnvError::MalformedMap("manifest lacks a name".into()))?;
    let mut out = [[0.0; 2]; 3];
    for (k, g) in goals.iter().enumerate() {
        let g = g.ok_or_else(|| EnvError::MalformedMap(format!("manifest lacks goal{k}")))?;
        if grid.point_in_obstacle(g) {
            return Err(EnvError::MalformedMap(format!("goal{k} lies in an obstacle")));
        }
        out[k] = g;
    }
    Ok(MapAsset { name, goals: out, grid })
}

pub const MAP_COUNT: usize = 10;

const MAP_SOURCES: [&str; MAP_COUNT] = [
    include_str!("../../assets/maps/map0.txt"),
    include_str!("../../assets/maps/map1.txt"),
    include_str!("../../assets/maps/map2.txt"),
    include_str!("../../assets/maps/map3.txt"),
    include_str!("../../assets/maps/map4.txt"),
    include_str!("../../assets/maps/map5.txt"),
    include_str!("../../assets/maps/map6.txt"),
    include_str!("../../assets/maps/map7.txt"),
    include_str!("../../assets/maps/map8.txt"),
    include_str!("../../assets/maps/map9.txt"),
];

static BUNDLED: Lazy<Vec<MapAsset>> =
    Lazy::new(|| MAP_SOURCES.iter().map(|src| parse_map_asset(src).expect("bundled map assets are valid")).collect());

/// One of the ten maps shipped with the crate.
pub fn bundled_map(index: usize) -> Option<&'static MapAsset> {
    BUNDLED.get(index)
}

pub fn bundled_map_source(index: usize) -> Option<&'static str> {
    MAP_SOURCES.get(index).copied()
}
