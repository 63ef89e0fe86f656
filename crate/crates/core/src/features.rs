//! Voxelized scene features.
//!
//! A fixed cube is divided into `a x b x c` blocks of equal size. Each block
//! contributes one 3-channel row: the mean of the local coordinates (relative
//! to the block's own min corner) of the points it contains, or zeros when
//! empty. One designated block is overwritten with the *negated* local
//! coordinates of a marker position, so the network can tell the marker
//! apart from scene points (scene rows are non-negative by construction).
//!
//! Two variants share this encoding:
//! - the panoramic feature voxelizes the whole-cell cloud in a BS-centered
//!   cube and marks the mobile station;
//! - the LIDAR-local baseline voxelizes a single scan in an MS-centered cube
//!   and marks the base station.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Scalar;
use crate::scene::{Environment, PointCloud};
use crate::tensor::Tensor;

/// Marker coordinates are clamped to at least this value per axis before
/// negation, so a marker sitting exactly on a block corner still produces a
/// strictly negative row instead of an all-zero (empty-looking) one.
const MARKER_FLOOR_M: f64 = 1e-6;

/// Uniform voxel grid over an axis-aligned cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGridSpec<T> {
    /// Min corner of the cube in the frame of the cloud it voxelizes.
    pub cube_min: Vec3<T>,
    /// Cube extents, meters.
    pub dims: Vec3<T>,
    /// Blocks per axis (a, b, c).
    pub divisions: [usize; 3],
}

impl<T: Scalar> VoxelGridSpec<T> {
    /// BS-centered cube for panoramic features: 200 x 160 x 30 m split into
    /// 40 x 32 x 6 blocks of 5 m. The cube spans x in [-100, 100],
    /// y in [-20, 140], z in [-10, 20] around the BS antenna, covering the
    /// SA rows, the receiver corridor, and the tallest buildings.
    pub fn default_panoramic() -> Self {
        Self {
            cube_min: Vec3::new(T::of(-100.0), T::of(-20.0), T::of(-10.0)),
            dims: Vec3::new(T::of(200.0), T::of(160.0), T::of(30.0)),
            divisions: [40, 32, 6],
        }
    }

    /// MS-centered cube of the same size and resolution for the LIDAR-local
    /// baseline, shifted so both SA rows and the BS stay inside.
    pub fn default_lidar_local() -> Self {
        Self {
            cube_min: Vec3::new(T::of(-100.0), T::of(-80.0), T::of(-5.0)),
            dims: Vec3::new(T::of(200.0), T::of(160.0), T::of(30.0)),
            divisions: [40, 32, 6],
        }
    }

    /// Per-axis block edge lengths.
    pub fn edges(&self) -> Vec3<T> {
        Vec3::new(
            self.dims.x / T::of_usize(self.divisions[0]),
            self.dims.y / T::of_usize(self.divisions[1]),
            self.dims.z / T::of_usize(self.divisions[2]),
        )
    }

    pub fn voxel_count(&self) -> usize {
        self.divisions.iter().product()
    }

    /// Feature length in scalars: a * b * c * 3.
    pub fn feature_len(&self) -> usize {
        self.voxel_count() * 3
    }

    /// Min corner of a block.
    pub fn voxel_origin(&self, idx: [usize; 3]) -> Vec3<T> {
        let e = self.edges();
        Vec3::new(
            self.cube_min.x + T::of_usize(idx[0]) * e.x,
            self.cube_min.y + T::of_usize(idx[1]) * e.y,
            self.cube_min.z + T::of_usize(idx[2]) * e.z,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.divisions.iter().any(|&d| d == 0) {
            return Err(Error::Config("voxel divisions must be positive".into()));
        }
        if self.dims.x <= T::zero() || self.dims.y <= T::zero() || self.dims.z <= T::zero() {
            return Err(Error::Config("cube dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Half-open block membership: axis i maps to `floor((p - cube_min) / edge)`
/// with interval `[k * edge, (k+1) * edge)`. Returns None outside the cube.
pub fn voxel_index<T: Scalar>(point: Vec3<T>, spec: &VoxelGridSpec<T>) -> Option<[usize; 3]> {
    let e = spec.edges();
    let rel = point - spec.cube_min;
    let axes = [
        (rel.x, e.x, spec.divisions[0]),
        (rel.y, e.y, spec.divisions[1]),
        (rel.z, e.z, spec.divisions[2]),
    ];
    let mut idx = [0usize; 3];
    for (slot, (r, edge, div)) in axes.into_iter().enumerate() {
        if r < T::zero() {
            return None;
        }
        let k = (r / edge).floor().to_usize()?;
        if k >= div {
            return None;
        }
        idx[slot] = k;
    }
    Some(idx)
}

/// Voxelized scene feature of shape (a, b, c, 3).
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramicFeature<T> {
    /// Rank-4 tensor (a, b, c, 3).
    pub grid: Tensor<T>,
    /// Block holding the marker: the MS for panoramic features, the BS for
    /// the LIDAR-local variant.
    pub marker_voxel: [usize; 3],
    /// Cloud points that fell outside the cube and were dropped.
    pub dropped_points: usize,
}

impl<T: Scalar> PanoramicFeature<T> {
    pub fn as_slice(&self) -> &[T] {
        self.grid.data()
    }

    pub fn row(&self, idx: [usize; 3]) -> [T; 3] {
        [
            self.grid.at4(idx[0], idx[1], idx[2], 0),
            self.grid.at4(idx[0], idx[1], idx[2], 1),
            self.grid.at4(idx[0], idx[1], idx[2], 2),
        ]
    }
}

/// Shared encoder: voxelizes `points`, then overwrites the marker's block
/// with its negated in-block coordinates.
fn voxelize_with_marker<T: Scalar>(
    points: &[Vec3<T>],
    marker: Vec3<T>,
    spec: &VoxelGridSpec<T>,
) -> Result<PanoramicFeature<T>> {
    spec.validate()?;
    let marker_voxel = voxel_index(marker, spec)
        .ok_or_else(|| Error::OutOfRange("marker position outside the feature cube".into()))?;

    let [a, b, c] = spec.divisions;
    let mut sums = vec![T::zero(); spec.voxel_count() * 3];
    let mut counts = vec![0usize; spec.voxel_count()];
    let mut dropped = 0usize;
    for p in points {
        let Some(idx) = voxel_index(*p, spec) else {
            dropped += 1;
            continue;
        };
        let origin = spec.voxel_origin(idx);
        let local = *p - origin;
        let flat = (idx[0] * b + idx[1]) * c + idx[2];
        // Block assignment is half-open; a boundary point divided onto the
        // lower block can carry local coordinates a rounding error below 0.
        sums[flat * 3] += local.x.max(T::zero());
        sums[flat * 3 + 1] += local.y.max(T::zero());
        sums[flat * 3 + 2] += local.z.max(T::zero());
        counts[flat] += 1;
    }

    let mut grid = Tensor::zeros(&[a, b, c, 3]);
    let data = grid.data_mut();
    for (flat, &count) in counts.iter().enumerate() {
        if count > 0 {
            let n = T::of_usize(count);
            for ch in 0..3 {
                data[flat * 3 + ch] = sums[flat * 3 + ch] / n;
            }
        }
    }

    let origin = spec.voxel_origin(marker_voxel);
    let local = marker - origin;
    let floor = T::of(MARKER_FLOOR_M);
    let flat = (marker_voxel[0] * b + marker_voxel[1]) * c + marker_voxel[2];
    data[flat * 3] = -local.x.max(floor);
    data[flat * 3 + 1] = -local.y.max(floor);
    data[flat * 3 + 2] = -local.z.max(floor);

    Ok(PanoramicFeature {
        grid,
        marker_voxel,
        dropped_points: dropped,
    })
}

/// Panoramic feature: voxelizes the BS-relative cell cloud and marks the MS
/// block with `-(MS local coordinates)`.
pub fn extract_panoramic<T: Scalar>(
    cloud: &PointCloud<T>,
    ms_minus_bs: Vec3<T>,
    spec: &VoxelGridSpec<T>,
) -> Result<PanoramicFeature<T>> {
    voxelize_with_marker(&cloud.points, ms_minus_bs, spec)
}

/// LIDAR-local feature: voxelizes an MS-relative scan in an MS-centered cube
/// and marks the BS block. Mirrors the panoramic encoding so the two feature
/// kinds differ only in what the cloud saw.
pub fn extract_lidar_feature<T: Scalar>(
    scan: &PointCloud<T>,
    bs_minus_ms: Vec3<T>,
    spec: &VoxelGridSpec<T>,
) -> Result<PanoramicFeature<T>> {
    voxelize_with_marker(&scan.points, bs_minus_ms, spec)
}

/// Simulated spinning-scanner parameters. Angles in radians; elevation is
/// measured from the horizontal plane here (a commodity scanner's vertical
/// field of view), not from +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarScanConfig<T> {
    /// Maximum observational distance, meters.
    pub range: T,
    /// Azimuth step; the full circle is divided into `round(2 pi / step)`
    /// equal sectors.
    pub azimuth_step: T,
    pub elevation_min: T,
    pub elevation_max: T,
    pub elevation_step: T,
}

impl<T: Scalar> LidarScanConfig<T> {
    /// 0.2 deg azimuth resolution, -15..+15 deg elevation fan in 2 deg steps.
    pub fn with_range(range: T) -> Self {
        Self {
            range,
            azimuth_step: T::of(0.2_f64.to_radians()),
            elevation_min: T::of((-15.0_f64).to_radians()),
            elevation_max: T::of(15.0_f64.to_radians()),
            elevation_step: T::of(2.0_f64.to_radians()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.range <= T::zero() {
            return Err(Error::Config("lidar range must be positive".into()));
        }
        if self.azimuth_step <= T::zero() || self.elevation_step <= T::zero() {
            return Err(Error::Config("lidar angular steps must be positive".into()));
        }
        if self.elevation_max < self.elevation_min {
            return Err(Error::Config("lidar elevation span is empty".into()));
        }
        Ok(())
    }

    pub fn azimuth_count(&self) -> usize {
        let two_pi = T::of(2.0) * T::PI();
        (two_pi / self.azimuth_step)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1)
    }

    pub fn elevation_count(&self) -> usize {
        let span = self.elevation_max - self.elevation_min;
        ((span / self.elevation_step) + T::of(1e-9))
            .floor()
            .to_usize()
            .unwrap_or(0)
            + 1
    }
}

/// Casts one ray grid from `ms_pos` and keeps the nearest building or ground
/// intersection of each ray within `cfg.range`. Output points are
/// MS-relative.
pub fn simulate_lidar_scan<T: Scalar>(
    env: &Environment<T>,
    ms_pos: Vec3<T>,
    cfg: &LidarScanConfig<T>,
) -> Result<PointCloud<T>> {
    cfg.validate()?;
    if env.point_in_building(ms_pos) {
        return Err(Error::OutOfRange("scanner position inside a building".into()));
    }
    let boxes: Vec<_> = env.buildings.iter().map(|b| b.aabb()).collect();
    let n_az = cfg.azimuth_count();
    let n_el = cfg.elevation_count();
    let two_pi = T::of(2.0) * T::PI();
    let eps = T::of(1e-9);

    let mut points = Vec::new();
    for ei in 0..n_el {
        let elevation = cfg.elevation_min + T::of_usize(ei) * cfg.elevation_step;
        let (sin_e, cos_e) = (elevation.sin(), elevation.cos());
        for ai in 0..n_az {
            let azimuth = T::of_usize(ai) * two_pi / T::of_usize(n_az);
            let dir = Vec3::new(cos_e * azimuth.sin(), cos_e * azimuth.cos(), sin_e);
            let mut nearest = T::infinity();
            for aabb in &boxes {
                if let Some(t) = aabb.ray_entry(ms_pos, dir, eps) {
                    nearest = nearest.min(t);
                }
            }
            if dir.z < T::zero() {
                let t_ground = -ms_pos.z / dir.z;
                if t_ground > eps {
                    nearest = nearest.min(t_ground);
                }
            }
            if nearest <= cfg.range {
                points.push(dir * nearest);
            }
        }
    }
    Ok(PointCloud { points })
}
