//! Procedural generation of randomized cell environments and synthesis of
//! the panoramic point cloud.
//!
//! A cell is a base station watching a corridor of mobile-station positions,
//! flanked by two rows of four square areas (SAs). Each generated
//! environment places five axis-aligned cuboid buildings, one per occupied
//! SA, with the constraint that SA 2 or SA 3 (the mid-row areas straddling
//! the BS-corridor sightline) is occupied, so no environment is a trivial
//! line-of-sight scenario.
//!
//! The point cloud stands in for photogrammetric reconstruction: each
//! exposed building face is sampled on a uniform grid and perturbed with
//! isotropic Gaussian noise emulating reconstruction error.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exposed_faces, Aabb, Rect2, Vec3};
use crate::scalar::Scalar;

/// Catalog building archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuildingType {
    A,
    B,
    C,
}

/// Cuboid building archetype: footprint length (x) by width (y) by height (z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec<T> {
    pub building_type: BuildingType,
    pub length_m: T,
    pub width_m: T,
    pub height_m: T,
}

/// The three-archetype catalog used by the simulation:
/// A 25.6 x 18.5 x 25, B 20 x 14 x 25, C 12 x 9 x 15 (meters).
pub fn building_catalog<T: Scalar>() -> Vec<BuildingSpec<T>> {
    vec![
        BuildingSpec {
            building_type: BuildingType::A,
            length_m: T::of(25.6),
            width_m: T::of(18.5),
            height_m: T::of(25.0),
        },
        BuildingSpec {
            building_type: BuildingType::B,
            length_m: T::of(20.0),
            width_m: T::of(14.0),
            height_m: T::of(25.0),
        },
        BuildingSpec {
            building_type: BuildingType::C,
            length_m: T::of(12.0),
            width_m: T::of(9.0),
            height_m: T::of(15.0),
        },
    ]
}

/// A placed building: base on the ground plane z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building<T> {
    pub spec: BuildingSpec<T>,
    /// Minimum corner; z component is always 0.
    pub min_corner: Vec3<T>,
    /// Square area housing this building, 1-based in 1..=8.
    pub sa_index: u8,
}

impl<T: Scalar> Building<T> {
    pub fn aabb(&self) -> Aabb<T> {
        Aabb::new(
            self.min_corner,
            Vec3::new(
                self.min_corner.x + self.spec.length_m,
                self.min_corner.y + self.spec.width_m,
                self.min_corner.z + self.spec.height_m,
            ),
        )
    }

    pub fn footprint(&self) -> Rect2<T> {
        Rect2::new(
            self.min_corner.x,
            self.min_corner.y,
            self.min_corner.x + self.spec.length_m,
            self.min_corner.y + self.spec.width_m,
        )
    }
}

/// Receiver corridor: evenly spaced positions from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsTrack<T> {
    pub start: Vec3<T>,
    pub end: Vec3<T>,
    pub spacing: T,
}

/// Scalar layout parameters (meters). See [`default_layout`] for the
/// geometry they induce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams<T> {
    /// SA extent along x.
    pub sa_width: T,
    /// SA extent along y.
    pub sa_depth: T,
    /// Gap between SA columns.
    pub sa_gap: T,
    /// Receiver track length.
    pub track_len: T,
    /// Receiver spacing along the track.
    pub spacing: T,
    /// Track distance from the BS along y.
    pub track_y: T,
    /// Far edge of the near SA row along y.
    pub near_row_far_y: T,
    pub bs_height: T,
    pub ms_height: T,
}

impl<T: Scalar> Default for LayoutParams<T> {
    fn default() -> Self {
        Self {
            sa_width: T::of(36.5),
            sa_depth: T::of(35.6),
            sa_gap: T::of(5.0),
            track_len: T::of(80.0),
            spacing: T::of(0.5),
            track_y: T::of(60.0),
            near_row_far_y: T::of(45.0),
            bs_height: T::of(10.0),
            ms_height: T::of(2.0),
        }
    }
}

/// Fixed cell geometry: eight SA rectangles, the BS position, and the
/// receiver track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout<T> {
    /// SA 1..=8 at indices 0..=7: near row west-to-east, then far row.
    pub sa_rects: [Rect2<T>; 8],
    pub bs_position: Vec3<T>,
    pub ms_track: MsTrack<T>,
    pub params: LayoutParams<T>,
}

/// Street-canyon layout: world frame x-east / y-north / z-up, BS at the
/// origin on the ground (antenna at `bs_height`). Four SA columns centered
/// on x = 0, separated by `sa_gap`; the near row ends at `near_row_far_y`
/// and the far row mirrors it across the track line `y = track_y`. The
/// receiver track runs between the rows at `ms_height`. SAs 2 and 3 sit on
/// the BS-track sightline, so occupying either removes trivial LOS.
pub fn layout_from_params<T: Scalar>(params: LayoutParams<T>) -> SceneLayout<T> {
    let four = T::of(4.0);
    let three = T::of(3.0);
    let half = T::of(0.5);
    let two = T::of(2.0);

    let total_w = four * params.sa_width + three * params.sa_gap;
    let x0 = -total_w * half;
    let near_y0 = params.near_row_far_y - params.sa_depth;
    let far_y0 = two * params.track_y - params.near_row_far_y;

    let col = |k: usize| {
        let min_x = x0 + T::of_usize(k) * (params.sa_width + params.sa_gap);
        (min_x, min_x + params.sa_width)
    };
    let mut sa_rects = [Rect2::new(T::zero(), T::zero(), T::zero(), T::zero()); 8];
    for k in 0..4 {
        let (min_x, max_x) = col(k);
        sa_rects[k] = Rect2::new(min_x, near_y0, max_x, params.near_row_far_y);
        sa_rects[k + 4] = Rect2::new(min_x, far_y0, max_x, far_y0 + params.sa_depth);
    }

    let half_track = params.track_len * half;
    SceneLayout {
        sa_rects,
        bs_position: Vec3::new(T::zero(), T::zero(), params.bs_height),
        ms_track: MsTrack {
            start: Vec3::new(-half_track, params.track_y, params.ms_height),
            end: Vec3::new(half_track, params.track_y, params.ms_height),
            spacing: params.spacing,
        },
        params,
    }
}

/// The default cell geometry.
pub fn default_layout<T: Scalar>() -> SceneLayout<T> {
    layout_from_params(LayoutParams::default())
}

impl<T: Scalar> SceneLayout<T> {
    /// Checks the structural invariants: track length matches the params,
    /// SA rectangles are pairwise disjoint, and the track crosses no SA.
    pub fn validate(&self) -> Result<()> {
        let len = self.ms_track.start.distance(self.ms_track.end);
        if (len - self.params.track_len).abs() > T::of(1e-9) {
            return Err(Error::Config(format!(
                "track length {} != configured {}",
                len, self.params.track_len
            )));
        }
        for i in 0..8 {
            for j in (i + 1)..8 {
                if self.sa_rects[i].intersects(&self.sa_rects[j]) {
                    return Err(Error::Config(format!("SA {} and SA {} overlap", i + 1, j + 1)));
                }
            }
        }
        for (i, sa) in self.sa_rects.iter().enumerate() {
            if sa.intersects_segment(
                self.ms_track.start.x,
                self.ms_track.start.y,
                self.ms_track.end.x,
                self.ms_track.end.y,
            ) {
                return Err(Error::Config(format!("receiver track crosses SA {}", i + 1)));
            }
        }
        Ok(())
    }
}

/// A generated cell: fixed layout plus five placed buildings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment<T> {
    pub layout: SceneLayout<T>,
    pub buildings: Vec<Building<T>>,
    pub seed: u64,
}

impl<T: Scalar> Environment<T> {
    /// Structural invariants: exactly five buildings in distinct SAs with
    /// SA 2 or SA 3 occupied, each footprint inside its SA, buildings
    /// pairwise non-overlapping.
    pub fn validate(&self) -> Result<()> {
        if self.buildings.len() != 5 {
            return Err(Error::Generation(format!(
                "expected 5 buildings, got {}",
                self.buildings.len()
            )));
        }
        let mut seen = [false; 8];
        for b in &self.buildings {
            if !(1..=8).contains(&b.sa_index) {
                return Err(Error::Generation(format!("bad SA index {}", b.sa_index)));
            }
            let slot = (b.sa_index - 1) as usize;
            if seen[slot] {
                return Err(Error::Generation(format!("SA {} occupied twice", b.sa_index)));
            }
            seen[slot] = true;
            let sa = &self.layout.sa_rects[slot];
            let fp = b.footprint();
            if fp.min_x < sa.min_x || fp.max_x > sa.max_x || fp.min_y < sa.min_y
                || fp.max_y > sa.max_y
            {
                return Err(Error::Generation(format!(
                    "building footprint leaves SA {}",
                    b.sa_index
                )));
            }
            if b.min_corner.z != T::zero() {
                return Err(Error::Generation("building base off the ground".into()));
            }
        }
        if !seen[1] && !seen[2] {
            return Err(Error::Generation("neither SA 2 nor SA 3 occupied".into()));
        }
        for i in 0..self.buildings.len() {
            for j in (i + 1)..self.buildings.len() {
                if self.buildings[i]
                    .footprint()
                    .intersects(&self.buildings[j].footprint())
                {
                    return Err(Error::Generation(format!(
                        "buildings {} and {} overlap",
                        i, j
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when `p` lies strictly inside any building.
    pub fn point_in_building(&self, p: Vec3<T>) -> bool {
        self.buildings
            .iter()
            .any(|b| b.aabb().contains_interior(p))
    }
}

const REDRAW_CAP: usize = 10_000;

/// Generates one randomized environment, deterministic in `seed`.
///
/// Five distinct SAs are drawn uniformly without replacement and the whole
/// draw is rejected until SA 2 or SA 3 is present. Each occupied SA receives
/// a building with type uniform over the catalog and min-corner uniform over
/// the placements that keep the footprint inside the SA.
pub fn generate_environment<T: Scalar>(
    layout: &SceneLayout<T>,
    catalog: &[BuildingSpec<T>],
    seed: u64,
) -> Result<Environment<T>> {
    if catalog.is_empty() {
        return Err(Error::Config("empty building catalog".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen: Option<Vec<usize>> = None;
    for _ in 0..REDRAW_CAP {
        let mut picks = sample_indices(&mut rng, 8, 5).into_vec();
        picks.sort_unstable();
        if picks.contains(&1) || picks.contains(&2) {
            chosen = Some(picks);
            break;
        }
    }
    let chosen = chosen.ok_or_else(|| {
        Error::Generation(format!(
            "no SA draw satisfied the SA2/SA3 constraint in {REDRAW_CAP} attempts"
        ))
    })?;

    let mut buildings = Vec::with_capacity(5);
    for slot in chosen {
        let sa = &layout.sa_rects[slot];
        let spec = catalog[rng.random_range(0..catalog.len())];
        let x_span = sa.width() - spec.length_m;
        let y_span = sa.depth() - spec.width_m;
        if x_span < T::zero() || y_span < T::zero() {
            return Err(Error::Generation(format!(
                "building type {:?} does not fit SA {}",
                spec.building_type,
                slot + 1
            )));
        }
        let x = sa.min_x + T::of(rng.random_range(0.0..1.0)) * x_span;
        let y = sa.min_y + T::of(rng.random_range(0.0..1.0)) * y_span;
        buildings.push(Building {
            spec,
            min_corner: Vec3::new(x, y, T::zero()),
            sa_index: (slot + 1) as u8,
        });
    }

    let env = Environment {
        layout: layout.clone(),
        buildings,
        seed,
    };
    env.validate()?;
    Ok(env)
}

/// Receiver positions, evenly spaced from track start to end inclusive.
pub fn ms_positions<T: Scalar>(layout: &SceneLayout<T>) -> Result<Vec<Vec3<T>>> {
    let track = &layout.ms_track;
    if track.spacing <= T::zero() {
        return Err(Error::Config("track spacing must be positive".into()));
    }
    let len = track.start.distance(track.end);
    let steps_f = len / track.spacing;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > T::of(1e-9) {
        return Err(Error::Config(format!(
            "spacing {} does not divide track length {}",
            track.spacing, len
        )));
    }
    let n = steps.to_usize().ok_or_else(|| {
        Error::Config("track step count does not fit in usize".into())
    })?;
    let denom = T::of_usize(n.max(1));
    Ok((0..=n)
        .map(|k| track.start.lerp(track.end, T::of_usize(k) / denom))
        .collect())
}

/// Panoramic point cloud. Coordinates are relative to the producer's origin:
/// the BS position for [`synthesize_point_cloud`], the scanning MS position
/// for [`crate::features::simulate_lidar_scan`]. Axes stay parallel to the
/// world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<T> {
    pub points: Vec<Vec3<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples every exposed building face (four walls and the roof) on a
/// uniform grid of `density` points per square meter, then perturbs each
/// point with isotropic zero-mean Gaussian noise of standard deviation
/// `noise_sigma`. Deterministic in `seed`. Output is BS-relative.
pub fn synthesize_point_cloud<T: Scalar>(
    env: &Environment<T>,
    density: T,
    noise_sigma: T,
    seed: u64,
) -> Result<PointCloud<T>> {
    if density <= T::zero() {
        return Err(Error::Config("point density must be positive".into()));
    }
    if noise_sigma < T::zero() {
        return Err(Error::Config("noise sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = if noise_sigma > T::zero() {
        Some(Normal::new(0.0, noise_sigma.to_f64().unwrap()).map_err(|e| {
            Error::Config(format!("bad noise sigma: {e}"))
        })?)
    } else {
        None
    };

    let sqrt_density = density.sqrt();
    let bs = env.layout.bs_position;
    let mut points = Vec::new();
    for building in &env.buildings {
        let aabb = building.aabb();
        for face in exposed_faces(&aabb) {
            let (eu, ev) = face.extents();
            let nu = grid_count(eu, sqrt_density);
            let nv = grid_count(ev, sqrt_density);
            let du = eu / T::of_usize(nu);
            let dv = ev / T::of_usize(nv);
            let half = T::of(0.5);
            for iu in 0..nu {
                let u = face.u_range.0 + (T::of_usize(iu) + half) * du;
                for iv in 0..nv {
                    let v = face.v_range.0 + (T::of_usize(iv) + half) * dv;
                    let mut p = face.point_at(u, v);
                    if let Some(n) = &normal {
                        p.x += T::of(n.sample(&mut rng));
                        p.y += T::of(n.sample(&mut rng));
                        p.z += T::of(n.sample(&mut rng));
                    }
                    points.push(p - bs);
                }
            }
        }
    }
    Ok(PointCloud { points })
}

/// Number of grid cells covering an extent at the given linear density.
pub fn grid_count<T: Scalar>(extent: T, sqrt_density: T) -> usize {
    (extent * sqrt_density)
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_surface_distance;

    #[test]
    fn catalog_matches_table() {
        let cat = building_catalog::<f64>();
        assert_eq!(cat.len(), 3);
        assert_eq!(
            (cat[0].length_m, cat[0].width_m, cat[0].height_m),
            (25.6, 18.5, 25.0)
        );
        assert_eq!(cat[0].building_type, BuildingType::A);
        assert_eq!(
            (cat[1].length_m, cat[1].width_m, cat[1].height_m),
            (20.0, 14.0, 25.0)
        );
        assert_eq!(
            (cat[2].length_m, cat[2].width_m, cat[2].height_m),
            (12.0, 9.0, 15.0)
        );
        let heights: Vec<f64> = cat.iter().map(|s| s.height_m).collect();
        assert_eq!(heights, vec![25.0, 25.0, 15.0]);
    }

    #[test]
    fn default_layout_geometry() {
        let layout = default_layout::<f64>();
        layout.validate().unwrap();
        assert_eq!(layout.bs_position, Vec3::new(0.0, 0.0, 10.0));
        assert_eq!(layout.ms_track.start, Vec3::new(-40.0, 60.0, 2.0));
        assert_eq!(layout.ms_track.end, Vec3::new(40.0, 60.0, 2.0));
        let positions = ms_positions(&layout).unwrap();
        assert_eq!(positions.len(), 161);
    }

    #[test]
    fn mid_row_sas_cover_the_los_corridor() {
        // The swath of BS-to-track sightlines is contained in the rectangle
        // x in [-40, 40], y in [0, 60]; SA 2 and SA 3 must intersect it so
        // their occupancy can break line of sight.
        let layout = default_layout::<f64>();
        let corridor = Rect2::new(-40.0, 0.0, 40.0, 60.0);
        assert!(layout.sa_rects[1].intersects(&corridor));
        assert!(layout.sa_rects[2].intersects(&corridor));
    }

    #[test]
    fn ms_positions_spacing_and_monotonicity() {
        let layout = default_layout::<f64>();
        let pos = ms_positions(&layout).unwrap();
        assert_eq!(pos[0], layout.ms_track.start);
        assert_eq!(*pos.last().unwrap(), layout.ms_track.end);
        for pair in pos.windows(2) {
            assert!((pair[0].distance(pair[1]) - 0.5).abs() < 1e-12);
            assert!(pair[1].x > pair[0].x);
            assert_eq!(pair[1].y, 60.0);
            assert_eq!(pair[1].z, 2.0);
        }
    }

    #[test]
    fn ms_positions_rejects_bad_spacing() {
        let mut layout = default_layout::<f64>();
        layout.ms_track.spacing = -1.0;
        assert!(ms_positions(&layout).is_err());
        layout.ms_track.spacing = 0.7;
        assert!(ms_positions(&layout).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let layout = default_layout::<f64>();
        let catalog = building_catalog();
        let a = generate_environment(&layout, &catalog, 1234).unwrap();
        let b = generate_environment(&layout, &catalog, 1234).unwrap();
        assert_eq!(a, b);
        let c = generate_environment(&layout, &catalog, 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_environments_satisfy_invariants() {
        let layout = default_layout::<f64>();
        let catalog = building_catalog();
        for seed in 0..1000 {
            let env = generate_environment(&layout, &catalog, seed).unwrap();
            env.validate().unwrap();
        }
    }

    /// Conditional occupancy law by brute force: over all 5-subsets of
    /// {1..8} containing 2 or 3, P(SA s occupied) is 0.7 for s in {2, 3}
    /// and 0.6 otherwise.
    fn conditional_occupancy_law() -> [f64; 8] {
        let mut valid = 0usize;
        let mut counts = [0usize; 8];
        for mask in 0u32..256 {
            if mask.count_ones() != 5 {
                continue;
            }
            if mask & 0b110 == 0 {
                continue; // bits 1,2 are SA2, SA3
            }
            valid += 1;
            for s in 0..8 {
                if mask & (1 << s) != 0 {
                    counts[s] += 1;
                }
            }
        }
        let mut law = [0.0; 8];
        for s in 0..8 {
            law[s] = counts[s] as f64 / valid as f64;
        }
        law
    }

    #[test]
    fn sa_occupancy_matches_conditional_uniform_law() {
        let law = conditional_occupancy_law();
        assert!((law[1] - 0.7).abs() < 1e-12);
        assert!((law[0] - 0.6).abs() < 1e-12);

        let layout = default_layout::<f64>();
        let catalog = building_catalog();
        let trials = 10_000usize;
        let mut counts = [0usize; 8];
        for seed in 0..trials as u64 {
            let env = generate_environment(&layout, &catalog, seed).unwrap();
            for b in &env.buildings {
                counts[(b.sa_index - 1) as usize] += 1;
            }
        }
        for s in 0..8 {
            let freq = counts[s] as f64 / trials as f64;
            let sigma = (law[s] * (1.0 - law[s]) / trials as f64).sqrt();
            assert!(
                (freq - law[s]).abs() <= 3.0 * sigma,
                "SA {}: freq {:.4} vs law {:.4} (3 sigma = {:.4})",
                s + 1,
                freq,
                law[s],
                3.0 * sigma
            );
        }
    }

    fn single_building_env(spec_idx: usize, min_corner: Vec3<f64>) -> Environment<f64> {
        let layout = default_layout::<f64>();
        let catalog = building_catalog::<f64>();
        Environment {
            layout,
            buildings: vec![Building {
                spec: catalog[spec_idx],
                min_corner,
                sa_index: 2,
            }],
            seed: 0,
        }
    }

    #[test]
    fn noiseless_cloud_lies_on_the_surface() {
        let env = single_building_env(2, Vec3::new(-6.0, 20.0, 0.0));
        let cloud = synthesize_point_cloud(&env, 1.0, 0.0, 99).unwrap();
        assert!(!cloud.is_empty());
        let bs = env.layout.bs_position;
        let aabb = env.buildings[0].aabb();
        for p in &cloud.points {
            let world = *p + bs;
            assert!(point_surface_distance(world, &aabb) < 1e-9);
            assert!(world.is_finite());
        }
    }

    #[test]
    fn cloud_point_count_tracks_face_areas() {
        // Closed-form count: each face contributes round(eu)*round(ev) cells
        // at density 1. Type C (12 x 9 x 15): walls 2*(12*15) + 2*(9*15),
        // roof 12*9 = 108; total 738.
        let env = single_building_env(2, Vec3::new(-6.0, 20.0, 0.0));
        let cloud = synthesize_point_cloud(&env, 1.0, 0.05, 7).unwrap();
        let expected = 2 * (12 * 15) + 2 * (9 * 15) + 12 * 9;
        assert_eq!(cloud.len(), expected);
        let exposed_area = expected as f64;
        let rel = (cloud.len() as f64 - exposed_area).abs() / exposed_area;
        assert!(rel < 0.05);
    }

    #[test]
    fn cloud_is_deterministic_in_seed() {
        let env = single_building_env(0, Vec3::new(-30.0, 15.0, 0.0));
        let a = synthesize_point_cloud(&env, 1.3, 0.05, 42).unwrap();
        let b = synthesize_point_cloud(&env, 1.3, 0.05, 42).unwrap();
        assert_eq!(a, b);
        let c = synthesize_point_cloud(&env, 1.3, 0.05, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noisy_cloud_stays_near_the_surface() {
        let env = single_building_env(1, Vec3::new(5.0, 12.0, 0.0));
        let sigma = 0.05;
        let cloud = synthesize_point_cloud(&env, 1.0, sigma, 3).unwrap();
        let bs = env.layout.bs_position;
        let aabb = env.buildings[0].aabb();
        for p in &cloud.points {
            // Isotropic 3-D displacement beyond 6 sigma per axis is
            // vanishingly unlikely at this sample count.
            assert!(point_surface_distance(*p + bs, &aabb) < 6.0 * sigma * 3.0_f64.sqrt());
        }
    }

    #[test]
    fn rejects_nonpositive_density() {
        let env = single_building_env(0, Vec3::new(-30.0, 15.0, 0.0));
        assert!(synthesize_point_cloud(&env, 0.0, 0.0, 1).is_err());
        assert!(synthesize_point_cloud(&env, 1.0, -0.1, 1).is_err());
    }
}
