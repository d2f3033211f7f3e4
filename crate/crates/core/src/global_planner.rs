//! Coarse global path on the planner's map: costmap inflation, 8-connected A* and
//! line-of-sight shortcutting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose2D, RobotSpec, Vec2};
use crate::world::OccupancyGrid;

/// Clearance added to the footprint radius when inflating the planner's map.
pub const INFLATION_MARGIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path to the goal on the inflated map")]
    NoPath,
    #[error("start ({0:.2}, {1:.2}) lies in inflated-occupied space")]
    StartOccupied(f64, f64),
    #[error("pose ({0:.2}, {1:.2}) is outside the map")]
    OutOfMap(f64, f64),
}

/// Ordered waypoints of the global plan with cumulative arc length.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalPath {
    pub waypoints: Vec<Pose2D>,
    /// `cumulative[i]` is the arc length from the first waypoint to waypoint `i`.
    pub cumulative: Vec<f64>,
}

impl GlobalPath {
    /// Builds a path through `points`; headings face the next waypoint and the final
    /// heading is `final_heading`. Consecutive duplicate points are dropped.
    pub fn from_points(points: &[Vec2], final_heading: f64) -> Self {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| (q - p).norm() > 0.0) {
                pts.push(*p);
            }
        }
        let mut waypoints = Vec::with_capacity(pts.len());
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                s += (p - pts[i - 1]).norm();
            }
            cumulative.push(s);
            let theta = match pts.get(i + 1) {
                Some(n) => (n.y - p.y).atan2(n.x - p.x),
                None => final_heading,
            };
            waypoints.push(Pose2D::new(p.x, p.y, theta));
        }
        Self {
            waypoints,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(|w| w.position()).collect()
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let n = self.waypoints.len();
        assert!(n > 0, "empty path");
        if n == 1 || s <= 0.0 {
            return self.waypoints[0].position();
        }
        if s >= self.length() {
            return self.waypoints[n - 1].position();
        }
        let k = self.cumulative.partition_point(|c| *c <= s).clamp(1, n - 1);
        let (a, b) = (
            self.waypoints[k - 1].position(),
            self.waypoints[k].position(),
        );
        let seg = self.cumulative[k] - self.cumulative[k - 1];
        a + (b - a) * ((s - self.cumulative[k - 1]) / seg)
    }

    /// Heading of the segment containing arc length `s` (final heading past the end).
    pub fn heading_at(&self, s: f64) -> f64 {
        let n = self.waypoints.len();
        if s >= self.length() || n == 1 {
            return self.waypoints[n - 1].theta;
        }
        let k = self.cumulative.partition_point(|c| *c <= s).clamp(1, n - 1);
        self.waypoints[k - 1].theta
    }

    /// Nearest point on the polyline: `(arc length, distance)`.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let n = self.waypoints.len();
        assert!(n > 0, "empty path");
        let mut best = (0.0, (p - self.waypoints[0].position()).norm());
        for k in 1..n {
            let a = self.waypoints[k - 1].position();
            let b = self.waypoints[k].position();
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let d = (p - (a + ab * t)).norm();
            if d < best.1 {
                best = (
                    self.cumulative[k - 1] + t * (self.cumulative[k] - self.cumulative[k - 1]),
                    d,
                );
            }
        }
        best
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.project(p).1
    }
}

/// Marks every cell whose center lies within `radius` of an occupied cell's center.
pub fn inflate(map: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    assert!(radius >= 0.0, "inflation radius must be non-negative");
    let r = (radius / map.resolution).floor() as i64;
    let r2 = (radius / map.resolution).powi(2) + 1e-9;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dj| (-r..=r).map(move |di| (di, dj)))
        .filter(|(di, dj)| ((di * di + dj * dj) as f64) <= r2)
        .collect();
    let mut out = map.clone();
    let (w, h) = (map.width as i64, map.height as i64);
    for j in 0..h {
        for i in 0..w {
            if !map.occupied(i as usize, j as usize) {
                continue;
            }
            for (di, dj) in &offsets {
                let (x, y) = (i + di, j + dj);
                if x >= 0 && y >= 0 && x < w && y < h {
                    out.set(x as usize, y as usize, true);
                }
            }
        }
    }
    out
}

/// Cell sequence from A* with its move counts; cost is `orthogonal + diagonal·√2` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<(usize, usize)>,
    pub orthogonal: usize,
    pub diagonal: usize,
}

impl GridPath {
    pub fn cost_cells(&self) -> f64 {
        self.orthogonal as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then larger g (deeper node), then lower index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected moves; a diagonal move needs both adjacent orthogonal cells free.
pub fn neighbors(
    map: &OccupancyGrid,
    i: usize,
    j: usize,
) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
    const MOVES: [(i64, i64); 8] = [
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    let (w, h) = (map.width as i64, map.height as i64);
    MOVES.iter().filter_map(move |&(di, dj)| {
        let (x, y) = (i as i64 + di, j as i64 + dj);
        if x < 0 || y < 0 || x >= w || y >= h || map.occupied(x as usize, y as usize) {
            return None;
        }
        let diagonal = di != 0 && dj != 0;
        if diagonal && (map.occupied(x as usize, j) || map.occupied(i, y as usize)) {
            return None;
        }
        Some((x as usize, y as usize, diagonal))
    })
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// A* over free cells with the octile heuristic.
pub fn astar(map: &OccupancyGrid, start: (usize, usize), goal: (usize, usize)) -> Option<GridPath> {
    if map.occupied(goal.0, goal.1) {
        return None;
    }
    let n = map.width * map.height;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let s = map.index(start.0, start.1);
    let t = map.index(goal.0, goal.1);
    g[s] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        idx: s,
    });
    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == t {
            break;
        }
        let (i, j) = (idx % map.width, idx / map.width);
        for (x, y, diag) in neighbors(map, i, j) {
            let k = map.index(x, y);
            if closed[k] {
                continue;
            }
            let step = if diag { std::f64::consts::SQRT_2 } else { 1.0 };
            let cand = g[idx] + step;
            if cand < g[k] {
                g[k] = cand;
                parent[k] = idx;
                open.push(Open {
                    f: cand + octile((x, y), goal),
                    g: cand,
                    idx: k,
                });
            }
        }
    }
    if !closed[t] {
        return None;
    }
    let mut cells = vec![];
    let mut k = t;
    loop {
        cells.push((k % map.width, k / map.width));
        if k == s {
            break;
        }
        k = parent[k];
    }
    cells.reverse();
    let diagonal = cells
        .windows(2)
        .filter(|w| w[0].0 != w[1].0 && w[0].1 != w[1].1)
        .count();
    Some(GridPath {
        orthogonal: cells.len() - 1 - diagonal,
        diagonal,
        cells,
    })
}

/// True when the segment between two cell centers crosses only free cells. Cells touched
/// exactly at a corner are checked on both sides.
pub fn line_of_sight(map: &OccupancyGrid, a: (usize, usize), b: (usize, usize)) -> bool {
    let (mut i, mut j) = (a.0 as i64, a.1 as i64);
    let (ti, tj) = (b.0 as i64, b.1 as i64);
    let (dx, dy) = ((ti - i).abs(), (tj - j).abs());
    let (sx, sy) = ((ti - i).signum(), (tj - j).signum());
    let free = |i: i64, j: i64| !map.occupied(i as usize, j as usize);
    if !free(i, j) {
        return false;
    }
    // Boundary crossings happen at parameters (2k+1)/(2dx) and (2k+1)/(2dy); compare
    // them exactly in integers.
    let (mut kx, mut ky) = (0i64, 0i64);
    while i != ti || j != tj {
        let next_x = if dx == 0 { i64::MAX } else { (2 * kx + 1) * dy };
        let next_y = if dy == 0 { i64::MAX } else { (2 * ky + 1) * dx };
        match next_x.cmp(&next_y) {
            Ordering::Less => {
                i += sx;
                kx += 1;
            }
            Ordering::Greater => {
                j += sy;
                ky += 1;
            }
            Ordering::Equal => {
                if !free(i + sx, j) || !free(i, j + sy) {
                    return false;
                }
                i += sx;
                j += sy;
                kx += 1;
                ky += 1;
            }
        }
        if !free(i, j) {
            return false;
        }
    }
    true
}

/// Greedy farthest-visible shortcutting of a cell path.
pub fn shortcut(map: &OccupancyGrid, cells: &[(usize, usize)]) -> Vec<(usize, usize)> {
    if cells.len() <= 2 {
        return cells.to_vec();
    }
    let mut out = vec![cells[0]];
    let mut i = 0;
    while i < cells.len() - 1 {
        let mut next = i + 1;
        for j in (i + 2..cells.len()).rev() {
            if line_of_sight(map, cells[i], cells[j]) {
                next = j;
                break;
            }
        }
        out.push(cells[next]);
        i = next;
    }
    out
}

fn cell_of(map: &OccupancyGrid, p: &Pose2D) -> Result<(usize, usize), PlanError> {
    map.world_to_cell(p.position())
        .ok_or(PlanError::OutOfMap(p.x, p.y))
}

/// Plans on a map that is already inflated.
pub fn plan_on_inflated(
    inflated: &OccupancyGrid,
    start: &Pose2D,
    goal: &Pose2D,
) -> Result<GlobalPath, PlanError> {
    let s = cell_of(inflated, start)?;
    let g = cell_of(inflated, goal)?;
    if inflated.occupied(s.0, s.1) {
        return Err(PlanError::StartOccupied(start.x, start.y));
    }
    let grid_path = astar(inflated, s, g).ok_or(PlanError::NoPath)?;
    let simplified = shortcut(inflated, &grid_path.cells);
    let points: Vec<Vec2> = simplified
        .iter()
        .map(|(i, j)| inflated.cell_center(*i, *j))
        .collect();
    Ok(GlobalPath::from_points(&points, goal.theta))
}

/// Inflates `map` by the footprint radius plus margin and plans from `start` to `goal`.
pub fn plan(
    map: &OccupancyGrid,
    start: &Pose2D,
    goal: &Pose2D,
    spec: &RobotSpec,
) -> Result<GlobalPath, PlanError> {
    let inflated = inflate(map, spec.footprint_radius + INFLATION_MARGIN);
    plan_on_inflated(&inflated, start, goal)
}
