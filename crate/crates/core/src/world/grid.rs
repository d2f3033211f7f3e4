use serde::{Deserialize, Serialize};

use super::obstacle::Obstacle;
use crate::geometry::{Pose2D, Vec2};

/// Boolean occupancy raster. Cell `(i, j)` covers
/// `[origin.x + i*res, origin.x + (i+1)*res) × [origin.y + j*res, ...)`; the origin heading is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub origin: Pose2D,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        Self {
            resolution,
            width,
            height,
            origin,
            cells: vec![false; width * height],
        }
    }

    /// Rasterizes obstacles over a rectangular extent. A cell is occupied when its
    /// center lies within half a cell of a shape.
    pub fn rasterize<'a>(
        min: Vec2,
        max: Vec2,
        resolution: f64,
        obstacles: impl IntoIterator<Item = &'a Obstacle>,
    ) -> Self {
        let width = ((max.x - min.x) / resolution).ceil().max(1.0) as usize;
        let height = ((max.y - min.y) / resolution).ceil().max(1.0) as usize;
        let mut grid = Self::new(width, height, resolution, Pose2D::new(min.x, min.y, 0.0));
        let obstacles: Vec<&Obstacle> = obstacles.into_iter().collect();
        for j in 0..height {
            for i in 0..width {
                let c = grid.cell_center(i, j);
                if obstacles
                    .iter()
                    .any(|o| o.shape.signed_distance(c) <= resolution * 0.5)
                {
                    grid.set(i, j, true);
                }
            }
        }
        grid
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn occupied(&self, i: usize, j: usize) -> bool {
        self.cells[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = self.index(i, j);
        self.cells[k] = value;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Occupancy at a world point; points off the map count as occupied.
    pub fn occupied_at(&self, p: Vec2) -> bool {
        self.world_to_cell(p)
            .is_none_or(|(i, j)| self.occupied(i, j))
    }

    /// Marks the cells under each point as occupied.
    pub fn mark_points(&mut self, points: &[Vec2]) {
        for p in points {
            if let Some((i, j)) = self.world_to_cell(*p) {
                self.set(i, j, true);
            }
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::obstacle::Shape;

    #[test]
    fn cell_lookup_roundtrip() {
        let g = OccupancyGrid::new(10, 5, 0.5, Pose2D::new(-1.0, 2.0, 0.0));
        assert_eq!(g.world_to_cell(Vec2::new(-1.0, 2.0)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Vec2::new(3.99, 4.49)), Some((9, 4)));
        assert_eq!(g.world_to_cell(Vec2::new(4.0, 3.0)), None);
        let c = g.cell_center(3, 2);
        assert_eq!(g.world_to_cell(c), Some((3, 2)));
    }

    #[test]
    fn rasterize_marks_shapes() {
        let obs = [Obstacle::mapped(Shape::rect(1.0, 1.0, 2.0, 2.0))];
        let g = OccupancyGrid::rasterize(Vec2::zeros(), Vec2::new(4.0, 4.0), 0.5, &obs);
        assert_eq!((g.width, g.height), (8, 8));
        assert!(g.occupied(2, 2) && g.occupied(3, 3));
        assert!(!g.occupied(0, 0) && !g.occupied(6, 6));
        assert!(g.occupied_at(Vec2::new(-1.0, 0.0)));
    }
}
