//! Box obstacles, their voxel rasterization, and the exact Euclidean signed
//! distance field built from it.
//!
//! The field is computed with the separable lower-envelope transform for
//! squared distances (one linear pass per axis), once toward occupied voxels
//! and once toward free voxels. Squared distances stay in integer voxel
//! units until the final square root, so the result matches a brute-force
//! nearest-centre scan.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Vec3;

/// Default cap on the number of voxels a map may rasterize to.
pub const DEFAULT_VOXEL_BUDGET: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("box {index} is degenerate or inverted")]
    DegenerateBox { index: usize },
    #[error("box {index} is not inside the world bounds")]
    BoxOutOfBounds { index: usize },
    #[error("world bounds are degenerate")]
    DegenerateBounds,
    #[error("map needs {needed} voxels, budget is {budget}")]
    VoxelBudgetExceeded { needed: u128, budget: usize },
}

/// Closed axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| {
            !(self.max[i] > self.min[i]) || !self.min[i].is_finite() || !self.max[i].is_finite()
        })
    }

    pub fn volume(&self) -> f64 {
        (self.max - self.min).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub bounds: Aabb,
    pub boxes: Vec<Aabb>,
}

impl ObstacleSet {
    pub fn new(bounds: Aabb, boxes: Vec<Aabb>) -> Result<Self, WorldError> {
        let set = Self { bounds, boxes };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.bounds.is_degenerate() {
            return Err(WorldError::DegenerateBounds);
        }
        for (index, b) in self.boxes.iter().enumerate() {
            if b.is_degenerate() {
                return Err(WorldError::DegenerateBox { index });
            }
            if !self.bounds.contains_box(b) {
                return Err(WorldError::BoxOutOfBounds { index });
            }
        }
        Ok(())
    }
}

/// Grid placement shared by occupancy grids and distance fields.
/// Voxel `(i, j, k)` has its centre at `origin + (idx + 0.5) * resolution`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.resolution
    }

    /// Voxel containing `p`, or `None` when `p` is outside the grid extent.
    #[inline]
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let rel = (p[a] - self.origin[a]) / self.resolution;
            if !(rel >= 0.0) {
                return None;
            }
            // truncation is floor here; +inf saturates and falls through
            let idx = rel as usize;
            // the far face belongs to the last voxel
            out[a] = if idx == self.dims[a] && rel == self.dims[a] as f64 {
                idx - 1
            } else if idx < self.dims[a] {
                idx
            } else {
                return None;
            };
        }
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub geometry: GridGeometry,
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    /// Grid with explicit occupancy; `occupancy.len()` must equal the voxel count.
    pub fn from_occupancy(geometry: GridGeometry, occupancy: Vec<bool>) -> Self {
        assert_eq!(geometry.len(), occupancy.len(), "occupancy length mismatch");
        assert!(!geometry.is_empty() && geometry.resolution > 0.0);
        Self {
            geometry,
            occupancy,
        }
    }

    pub fn is_occupied(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.geometry.index(i, j, k)]
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupancy.iter().filter(|&&o| o).count() as f64 / self.occupancy.len() as f64
    }

    /// One closed box per occupied voxel, covering exactly that voxel.
    pub fn occupied_boxes(&self) -> Vec<Aabb> {
        let g = &self.geometry;
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(idx, _)| {
                let [i, j, k] = g.coords(idx);
                let lo = g.origin + Vec3::new(i as f64, j as f64, k as f64) * g.resolution;
                Aabb::new(lo, lo + Vec3::repeat(g.resolution))
            })
            .collect()
    }
}

fn dims_for(extent: f64, resolution: f64) -> usize {
    let cells = extent / resolution;
    let rounded = cells.round();
    let n = if (cells - rounded).abs() < 1e-9 {
        rounded
    } else {
        cells.ceil()
    };
    (n as usize).max(1)
}

/// Marks a voxel occupied iff its centre lies inside any (closed) box.
pub fn rasterize(
    obs: &ObstacleSet,
    resolution: f64,
    voxel_budget: usize,
) -> Result<VoxelGrid, WorldError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(WorldError::InvalidResolution(resolution));
    }
    obs.validate()?;
    let extent = obs.bounds.max - obs.bounds.min;
    let dims = [0, 1, 2].map(|a| dims_for(extent[a], resolution));
    let needed = dims.iter().map(|&d| d as u128).product::<u128>();
    if needed > voxel_budget as u128 {
        return Err(WorldError::VoxelBudgetExceeded {
            needed,
            budget: voxel_budget,
        });
    }
    let geometry = GridGeometry {
        origin: obs.bounds.min,
        resolution,
        dims,
    };
    let mut occupancy = vec![false; geometry.len()];
    for b in &obs.boxes {
        // voxel index range whose centres can fall inside the box
        let range = |a: usize| {
            let lo = ((b.min[a] - geometry.origin[a]) / resolution - 0.5)
                .ceil()
                .max(0.0) as usize;
            let hi = ((b.max[a] - geometry.origin[a]) / resolution - 0.5).floor();
            let hi = if hi < 0.0 {
                None
            } else {
                Some((hi as usize).min(dims[a] - 1))
            };
            (lo, hi)
        };
        let (ranges, ok): (Vec<_>, Vec<_>) = (0..3)
            .map(|a| {
                let (lo, hi) = range(a);
                match hi {
                    Some(hi) if lo <= hi => ((lo, hi), true),
                    _ => ((0, 0), false),
                }
            })
            .unzip();
        if ok.contains(&false) {
            continue;
        }
        for k in ranges[2].0..=ranges[2].1 {
            for j in ranges[1].0..=ranges[1].1 {
                for i in ranges[0].0..=ranges[0].1 {
                    // exact centre test; the index range is only a prefilter
                    if b.contains(&geometry.center(i, j, k)) {
                        occupancy[geometry.index(i, j, k)] = true;
                    }
                }
            }
        }
    }
    Ok(VoxelGrid {
        geometry,
        occupancy,
    })
}

/// Signed distance per voxel. Positive in free space (distance to the nearest
/// occupied centre), negative inside obstacles (minus the distance to the
/// nearest free centre). `+inf` when there is no obstacle at all.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub geometry: GridGeometry,
    /// Region where queries are answered; everything outside is unsafe.
    pub bounds: Aabb,
    pub distances: Vec<f64>,
}

impl DistanceField {
    #[inline]
    pub fn distance_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.distances[self.geometry.index(i, j, k)]
    }

    /// Nearest-voxel lookup. Outside the bounds returns `-inf`.
    #[inline]
    pub fn query(&self, p: &Vec3) -> f64 {
        query_distance(self, p)
    }
}

/// 1D squared-distance lower envelope (Felzenszwalb and Huttenlocher) over a
/// strided line. `INFINITY` entries are treated as absent sites.
fn envelope_1d(f: &[f64], out: &mut [f64], sites: &mut Vec<usize>, breaks: &mut Vec<f64>) {
    let n = f.len();
    sites.clear();
    breaks.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    breaks.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let (qf, vf) = (q as f64, v as f64);
                    let s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * (qf - vf));
                    if s <= *breaks.last().unwrap() {
                        sites.pop();
                        breaks.pop();
                    } else {
                        sites.push(q);
                        breaks.push(s);
                        break;
                    }
                }
            }
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < sites.len() && breaks[k + 1] < qf {
            k += 1;
        }
        let v = sites[k];
        let d = qf - v as f64;
        *o = d * d + f[v];
    }
}

/// Squared distance (voxel units) from each voxel to the nearest voxel with
/// `target[idx] == true`; `INFINITY` when there is none.
fn squared_transform(geometry: &GridGeometry, target: impl Fn(usize) -> bool) -> Vec<f64> {
    let [nx, ny, nz] = geometry.dims;
    let mut field: Vec<f64> = (0..geometry.len())
        .map(|idx| if target(idx) { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut sites = Vec::with_capacity(longest);
    let mut breaks = Vec::with_capacity(longest);

    let mut pass = |len: usize, stride: usize, starts: &mut dyn Iterator<Item = usize>| {
        for base in starts {
            for t in 0..len {
                line[t] = field[base + t * stride];
            }
            envelope_1d(&line[..len], &mut out[..len], &mut sites, &mut breaks);
            for t in 0..len {
                field[base + t * stride] = out[t];
            }
        }
    };
    pass(nx, 1, &mut (0..ny * nz).map(|r| r * nx));
    pass(
        ny,
        nx,
        &mut (0..nz).flat_map(|k| (0..nx).map(move |i| i + nx * ny * k)),
    );
    pass(nz, nx * ny, &mut (0..nx * ny));
    field
}

pub fn build_esdf(g: &VoxelGrid, bounds: Aabb) -> DistanceField {
    let geometry = g.geometry;
    let to_occupied = squared_transform(&geometry, |idx| g.occupancy[idx]);
    let to_free = squared_transform(&geometry, |idx| !g.occupancy[idx]);
    let res = geometry.resolution;
    let distances = g
        .occupancy
        .iter()
        .enumerate()
        .map(|(idx, &occ)| {
            if occ {
                -to_free[idx].sqrt() * res
            } else {
                to_occupied[idx].sqrt() * res
            }
        })
        .collect();
    DistanceField {
        geometry,
        bounds,
        distances,
    }
}

/// Grid extent as bounds, for grids built without an obstacle set.
pub fn grid_bounds(geometry: &GridGeometry) -> Aabb {
    let extent = Vec3::new(
        geometry.dims[0] as f64,
        geometry.dims[1] as f64,
        geometry.dims[2] as f64,
    ) * geometry.resolution;
    Aabb::new(geometry.origin, geometry.origin + extent)
}

pub fn query_distance(f: &DistanceField, p: &Vec3) -> f64 {
    if !f.bounds.contains(p) {
        return f64::NEG_INFINITY;
    }
    match f.geometry.voxel_of(p) {
        Some([i, j, k]) => f.distance_at(i, j, k),
        None => f64::NEG_INFINITY,
    }
}

/// Strictly more than `clearance` away from every obstacle.
pub fn is_position_free(f: &DistanceField, p: &Vec3, clearance: f64) -> bool {
    query_distance(f, p) > clearance
}

/// Rasterize and build the field in one go.
#[derive(Clone, Debug)]
pub struct World {
    pub obstacles: ObstacleSet,
    pub grid: VoxelGrid,
    pub field: DistanceField,
}

impl World {
    pub fn build(obstacles: ObstacleSet, resolution: f64) -> Result<Self, WorldError> {
        let grid = rasterize(&obstacles, resolution, DEFAULT_VOXEL_BUDGET)?;
        let field = build_esdf(&grid, obstacles.bounds);
        Ok(Self {
            obstacles,
            grid,
            field,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(lo: f64, hi: f64) -> Aabb {
        Aabb::new(Vec3::repeat(lo), Vec3::repeat(hi))
    }

    fn lone_voxel_field() -> DistanceField {
        let obs = ObstacleSet::new(cube(0.0, 5.0), vec![cube(2.0, 3.0)]).unwrap();
        let g = rasterize(&obs, 1.0, DEFAULT_VOXEL_BUDGET).unwrap();
        build_esdf(&g, obs.bounds)
    }

    #[test]
    fn rasterize_trivial_cases() {
        let empty = ObstacleSet::new(cube(0.0, 4.0), vec![]).unwrap();
        let g = rasterize(&empty, 1.0, DEFAULT_VOXEL_BUDGET).unwrap();
        assert_eq!(g.geometry.dims, [4, 4, 4]);
        assert!(g.occupancy.iter().all(|&o| !o));

        let full = ObstacleSet::new(cube(0.0, 4.0), vec![cube(0.0, 4.0)]).unwrap();
        let g = rasterize(&full, 1.0, DEFAULT_VOXEL_BUDGET).unwrap();
        assert!(g.occupancy.iter().all(|&o| o));

        let unit = ObstacleSet::new(cube(0.0, 4.0), vec![cube(0.0, 1.0)]).unwrap();
        let g = rasterize(&unit, 1.0, DEFAULT_VOXEL_BUDGET).unwrap();
        assert_eq!(g.occupancy.iter().filter(|&&o| o).count(), 1);
        assert!(g.is_occupied(0, 0, 0));
    }

    #[test]
    fn rasterize_closed_box_touching_centres() {
        // box face exactly on voxel centres 0.5 and 1.5
        let obs = ObstacleSet::new(cube(0.0, 4.0), vec![cube(0.5, 1.5)]).unwrap();
        let g = rasterize(&obs, 1.0, DEFAULT_VOXEL_BUDGET).unwrap();
        assert_eq!(g.occupancy.iter().filter(|&&o| o).count(), 8);
    }

    #[test]
    fn rasterize_errors() {
        let obs = ObstacleSet::new(cube(0.0, 4.0), vec![]).unwrap();
        assert_eq!(
            rasterize(&obs, 0.0, DEFAULT_VOXEL_BUDGET),
            Err(WorldError::InvalidResolution(0.0))
        );
        assert!(matches!(
            rasterize(&obs, 0.01, 1000),
            Err(WorldError::VoxelBudgetExceeded { .. })
        ));
        assert_eq!(
            ObstacleSet::new(cube(0.0, 4.0), vec![cube(3.0, 5.0)]),
            Err(WorldError::BoxOutOfBounds { index: 0 })
        );
        assert_eq!(
            ObstacleSet::new(cube(0.0, 4.0), vec![cube(1.0, 1.0)]),
            Err(WorldError::DegenerateBox { index: 0 })
        );
    }

    #[test]
    fn esdf_lone_voxel() {
        let f = lone_voxel_field();
        assert_eq!(f.distance_at(3, 2, 2), 1.0);
        assert_eq!(f.distance_at(1, 2, 2), 1.0);
        assert_eq!(f.distance_at(3, 3, 3), 3f64.sqrt());
        assert_eq!(f.distance_at(2, 2, 2), -1.0);
        assert_eq!(f.distance_at(0, 0, 0), 12f64.sqrt());
    }

    #[test]
    fn esdf_all_free_is_infinite() {
        let obs = ObstacleSet::new(cube(0.0, 3.0), vec![]).unwrap();
        let g = rasterize(&obs, 0.5, DEFAULT_VOXEL_BUDGET).unwrap();
        let f = build_esdf(&g, obs.bounds);
        assert!(f.distances.iter().all(|&d| d == f64::INFINITY));
        assert_eq!(query_distance(&f, &Vec3::repeat(1.0)), f64::INFINITY);
        assert!(is_position_free(&f, &Vec3::repeat(1.0), 0.0));
    }

    #[test]
    fn queries() {
        let f = lone_voxel_field();
        assert_eq!(query_distance(&f, &Vec3::new(3.5, 2.5, 2.5)), 1.0);
        assert_eq!(query_distance(&f, &Vec3::new(3.01, 2.99, 2.0)), 1.0);
        assert_eq!(
            query_distance(&f, &Vec3::new(-0.1, 2.0, 2.0)),
            f64::NEG_INFINITY
        );
        assert_eq!(query_distance(&f, &Vec3::new(5.0, 5.0, 5.0)), 12f64.sqrt());
        assert!(!is_position_free(&f, &Vec3::new(2.5, 2.5, 2.5), 0.0));
        assert!(!is_position_free(&f, &Vec3::new(6.0, 2.5, 2.5), 0.0));
        // exactly at clearance is not free
        assert!(!is_position_free(&f, &Vec3::new(3.5, 2.5, 2.5), 1.0));
        assert!(is_position_free(&f, &Vec3::new(3.5, 2.5, 2.5), 0.99));
    }

    #[test]
    fn voxel_of_edges() {
        let g = GridGeometry {
            origin: Vec3::zeros(),
            resolution: 0.5,
            dims: [4, 2, 2],
        };
        assert_eq!(g.voxel_of(&Vec3::new(2.0, 1.0, 1.0)), Some([3, 1, 1]));
        assert_eq!(g.voxel_of(&Vec3::new(2.01, 0.0, 0.0)), None);
        assert_eq!(g.voxel_of(&Vec3::new(0.0, 0.0, 0.0)), Some([0, 0, 0]));
        assert_eq!(g.voxel_of(&Vec3::new(f64::NAN, 0.0, 0.0)), None);
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }
}
