//! Deterministic specular ray tracer.
//!
//! Multipath sets are built with the image method: line-of-sight plus all
//! first- and second-order specular reflections off building faces and,
//! optionally, the ground plane. Every candidate is validated geometrically
//! (reflection points strictly inside their faces, endpoints on the
//! reflective side, every segment unobstructed) before a Friis-style gain
//! with a constant per-bounce reflection coefficient is attached.
//!
//! Diffraction and diffuse scattering are out of scope; the reflection-order
//! cap of two keeps candidate enumeration exhaustive and cheap.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exposed_faces, AxisPlane, FaceRect, Vec3};
use crate::scalar::Scalar;
use crate::scene::Environment;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reflection points closer than this to a face edge are rejected.
const FACE_MARGIN: f64 = 1e-9;

/// Elevation (from +z) and azimuth (from +y toward +x) of a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAngles<T> {
    pub elevation: T,
    pub azimuth: T,
}

impl<T: Scalar> SphericalAngles<T> {
    /// Angles of a (non-zero) direction vector.
    pub fn from_direction(d: Vec3<T>) -> Self {
        let n = d.norm();
        Self {
            elevation: (d.z / n).acos(),
            azimuth: d.x.atan2(d.y),
        }
    }
}

/// One propagation path from transmitter to receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    /// Complex path gain.
    pub gain: Complex<T>,
    /// Angle of departure (direction of the first segment, seen from the tx).
    pub aod: SphericalAngles<T>,
    /// Angle of arrival (direction from the rx toward the incoming wave).
    pub aoa: SphericalAngles<T>,
    /// Total geometric length, meters.
    pub length_m: T,
    /// Number of specular bounces (0 for line of sight).
    pub bounces: u32,
    /// tx, reflection points in order, rx.
    pub vertices: Vec<Vec3<T>>,
}

/// Tracer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig<T> {
    pub carrier_hz: T,
    /// 0, 1, or 2 specular bounces.
    pub max_reflection_order: u32,
    /// Paths kept per link, strongest first.
    pub max_paths: usize,
    /// Constant reflection-coefficient magnitude applied per bounce.
    pub reflection_coeff: T,
    /// Treat the ground plane z = 0 as an additional reflector.
    pub include_ground: bool,
}

impl<T: Scalar> Default for TraceConfig<T> {
    /// 60 GHz carrier, two bounces, 25-path cap, |Gamma| = 0.3 per bounce
    /// (roughly -10.5 dB, concrete-like at mmWave), ground reflections on.
    fn default() -> Self {
        Self {
            carrier_hz: T::of(60e9),
            max_reflection_order: 2,
            max_paths: 25,
            reflection_coeff: T::of(0.3),
            include_ground: true,
        }
    }
}

impl<T: Scalar> TraceConfig<T> {
    pub fn wavelength(&self) -> T {
        T::of(SPEED_OF_LIGHT) / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_paths == 0 {
            return Err(Error::Config("max_paths must be at least 1".into()));
        }
        if self.reflection_coeff <= T::zero() || self.reflection_coeff >= T::one() {
            return Err(Error::Config(
                "reflection coefficient must lie in (0, 1)".into(),
            ));
        }
        if self.max_reflection_order > 2 {
            return Err(Error::Config(
                "reflection orders beyond 2 are not supported".into(),
            ));
        }
        if self.carrier_hz <= T::zero() {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        Ok(())
    }
}

/// Free-space path gain with a constant per-bounce reflection loss:
/// `alpha = lambda / (4 pi L) * gamma^bounces * exp(-j 2 pi L / lambda)`.
pub fn path_gain<T: Scalar>(length_m: T, bounces: u32, cfg: &TraceConfig<T>) -> Complex<T> {
    let lambda = cfg.wavelength();
    let four_pi = T::of(4.0) * T::PI();
    let mut amp = lambda / (four_pi * length_m);
    for _ in 0..bounces {
        amp = amp * cfg.reflection_coeff;
    }
    let phase = -(T::of(2.0) * T::PI()) * length_m / lambda;
    Complex::from_polar(amp, phase)
}

/// True when the open segment (a, b) meets any building box (interior or
/// closed surface). Endpoints that only touch a surface do not block; a
/// mid-segment graze does.
pub fn los_blocked<T: Scalar>(env: &Environment<T>, a: Vec3<T>, b: Vec3<T>) -> bool {
    env.buildings
        .iter()
        .any(|building| building.aabb().intersects_open_segment(a, b))
}

/// Mirror image of `p` across an axis-aligned plane (a building face plane
/// or the ground plane z = 0).
pub fn mirror_point<T: Scalar>(p: Vec3<T>, plane: AxisPlane<T>) -> Vec3<T> {
    plane.mirror(p)
}

/// A reflective surface: a bounded building face or the unbounded ground.
#[derive(Debug, Clone, Copy)]
enum Reflector<T> {
    Face(FaceRect<T>),
    Ground,
}

impl<T: Scalar> Reflector<T> {
    fn plane(&self) -> AxisPlane<T> {
        match self {
            Reflector::Face(f) => f.plane,
            Reflector::Ground => AxisPlane::new(crate::geometry::Axis::Z, T::zero()),
        }
    }

    fn normal_sign(&self) -> T {
        match self {
            Reflector::Face(f) => f.normal_sign,
            Reflector::Ground => T::one(),
        }
    }

    /// Reflection point acceptance: strictly inside the face bounds (with
    /// margin) for building faces; anywhere on the plane for the ground.
    fn admits(&self, p: Vec3<T>) -> bool {
        match self {
            Reflector::Face(f) => f.contains_with_margin(p, T::of(FACE_MARGIN)),
            Reflector::Ground => true,
        }
    }

    /// Same supporting plane (a double bounce across one plane is degenerate).
    fn same_plane(&self, other: &Self) -> bool {
        let a = self.plane();
        let b = other.plane();
        a.axis == b.axis && a.offset == b.offset
    }
}

fn reflectors<T: Scalar>(env: &Environment<T>, cfg: &TraceConfig<T>) -> Vec<Reflector<T>> {
    let mut out = Vec::new();
    for building in &env.buildings {
        for face in exposed_faces(&building.aabb()) {
            out.push(Reflector::Face(face));
        }
    }
    if cfg.include_ground {
        out.push(Reflector::Ground);
    }
    out
}

/// Intersection of segment (a, b) with the plane, strictly between the
/// endpoints. The plane coordinate of the result is set exactly.
fn plane_crossing<T: Scalar>(plane: AxisPlane<T>, a: Vec3<T>, b: Vec3<T>) -> Option<Vec3<T>> {
    let fa = a.axis(plane.axis);
    let fb = b.axis(plane.axis);
    let denom = fb - fa;
    if denom == T::zero() {
        return None;
    }
    let t = (plane.offset - fa) / denom;
    if t <= T::zero() || t >= T::one() {
        return None;
    }
    let mut q = a.lerp(b, t);
    q.set_axis(plane.axis, plane.offset);
    Some(q)
}

/// Both endpooints strictly on the reflective (outward) side of the surface.
fn outward_side<T: Scalar>(r: &Reflector<T>, a: Vec3<T>, b: Vec3<T>) -> bool {
    let plane = r.plane();
    let sign = r.normal_sign();
    sign * plane.signed_distance(a) > T::zero() && sign * plane.signed_distance(b) > T::zero()
}

fn segments_clear<T: Scalar>(env: &Environment<T>, vertices: &[Vec3<T>]) -> bool {
    vertices
        .windows(2)
        .all(|seg| !los_blocked(env, seg[0], seg[1]))
}

fn build_path<T: Scalar>(
    vertices: Vec<Vec3<T>>,
    bounces: u32,
    cfg: &TraceConfig<T>,
) -> Path<T> {
    let length: T = vertices
        .windows(2)
        .map(|seg| seg[0].distance(seg[1]))
        .sum();
    let tx = vertices[0];
    let rx = *vertices.last().unwrap();
    let aod = SphericalAngles::from_direction(vertices[1] - tx);
    let aoa = SphericalAngles::from_direction(vertices[vertices.len() - 2] - rx);
    Path {
        gain: path_gain(length, bounces, cfg),
        aod,
        aoa,
        length_m: length,
        bounces,
        vertices,
    }
}

/// Enumerates the validated multipath set between `tx` and `rx`, strongest
/// `cfg.max_paths` paths first (|gain| descending, enumeration order on ties).
pub fn trace_paths<T: Scalar>(
    env: &Environment<T>,
    tx: Vec3<T>,
    rx: Vec3<T>,
    cfg: &TraceConfig<T>,
) -> Result<Vec<Path<T>>> {
    cfg.validate()?;
    if tx == rx {
        return Err(Error::Config("tx and rx coincide".into()));
    }
    for (name, p) in [("tx", tx), ("rx", rx)] {
        if env.point_in_building(p) {
            return Err(Error::OutOfRange(format!("{name} endpoint inside a building")));
        }
    }

    let surfaces = reflectors(env, cfg);
    let mut paths: Vec<Path<T>> = Vec::new();

    if !los_blocked(env, tx, rx) {
        paths.push(build_path(vec![tx, rx], 0, cfg));
    }

    if cfg.max_reflection_order >= 1 {
        for r in &surfaces {
            if !outward_side(r, tx, rx) {
                continue;
            }
            let image = r.plane().mirror(tx);
            let Some(q) = plane_crossing(r.plane(), image, rx) else {
                continue;
            };
            if !r.admits(q) {
                continue;
            }
            let vertices = vec![tx, q, rx];
            if segments_clear(env, &vertices) {
                paths.push(build_path(vertices, 1, cfg));
            }
        }
    }

    if cfg.max_reflection_order >= 2 {
        for r1 in &surfaces {
            let image1 = r1.plane().mirror(tx);
            for r2 in &surfaces {
                if r1.same_plane(r2) {
                    continue;
                }
                let image2 = r2.plane().mirror(image1);
                let Some(q2) = plane_crossing(r2.plane(), image2, rx) else {
                    continue;
                };
                if !r2.admits(q2) {
                    continue;
                }
                let Some(q1) = plane_crossing(r1.plane(), image1, q2) else {
                    continue;
                };
                if !r1.admits(q1) {
                    continue;
                }
                if !outward_side(r1, tx, q2) || !outward_side(r2, q1, rx) {
                    continue;
                }
                let vertices = vec![tx, q1, q2, rx];
                if segments_clear(env, &vertices) {
                    paths.push(build_path(vertices, 2, cfg));
                }
            }
        }
    }

    // Stable sort keeps enumeration order on exact |gain| ties, so output is
    // deterministic.
    paths.sort_by(|a, b| b.gain.norm_sqr().partial_cmp(&a.gain.norm_sqr()).unwrap());
    paths.truncate(cfg.max_paths);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::geometry::{point_box_distance, Axis};
    use crate::scene::{
        building_catalog, default_layout, generate_environment, Building, BuildingSpec,
        BuildingType,
    };

    fn empty_env() -> Environment<f64> {
        Environment {
            layout: default_layout(),
            buildings: vec![],
            seed: 0,
        }
    }

    fn env_with_box(min: Vec3<f64>, max: Vec3<f64>) -> Environment<f64> {
        Environment {
            layout: default_layout(),
            buildings: vec![Building {
                spec: BuildingSpec {
                    building_type: BuildingType::A,
                    length_m: max.x - min.x,
                    width_m: max.y - min.y,
                    height_m: max.z - min.z,
                },
                min_corner: min,
                sa_index: 2,
            }],
            seed: 0,
        }
    }

    fn no_ground() -> TraceConfig<f64> {
        TraceConfig {
            include_ground: false,
            ..TraceConfig::default()
        }
    }

    #[test]
    fn mirror_point_examples() {
        assert_eq!(
            mirror_point(Vec3::new(1.0, 2.0, 3.0), AxisPlane::new(Axis::Z, 0.0)),
            Vec3::new(1.0, 2.0, -3.0)
        );
        assert_eq!(
            mirror_point(Vec3::new(5.0, 0.0, 2.0), AxisPlane::new(Axis::X, 3.0)),
            Vec3::new(1.0, 0.0, 2.0)
        );
        // Dyadic coordinates keep the double reflection exact.
        let plane = AxisPlane::new(Axis::Y, -7.5);
        let p = Vec3::new(0.25, 1.375, -0.5);
        assert_eq!(mirror_point(mirror_point(p, plane), plane), p);
    }

    #[test]
    fn los_blocked_cases() {
        let a = Vec3::new(-10.0, 0.0, 5.0);
        let b = Vec3::new(10.0, 0.0, 5.0);
        assert!(!los_blocked(&empty_env(), a, b));
        let env = env_with_box(Vec3::new(-2.0, -2.0, 0.0), Vec3::new(2.0, 2.0, 10.0));
        assert!(los_blocked(&env, a, b));
    }

    #[test]
    fn los_grazing_single_point_blocks() {
        // The segment touches the box exactly at the edge point (0, 0, 5),
        // verified against a dense point-sampling oracle.
        let env = env_with_box(Vec3::new(0.0, 0.0, 0.0), Vec3::new(4.0, 4.0, 10.0));
        let a = Vec3::new(-1.0, 1.0, 5.0);
        let b = Vec3::new(1.0, -1.0, 5.0);
        let aabb = env.buildings[0].aabb();
        let samples = 1000usize; // even count: t = 0.5 sampled exactly
        let min_dist = (0..=samples)
            .map(|i| {
                let t = i as f64 / samples as f64;
                point_box_distance(a.lerp(b, t), &aabb)
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_dist, 0.0);
        assert!(los_blocked(&env, a, b));
    }

    #[test]
    fn empty_scene_ground_off_is_los_only() {
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(20.0, 0.0, 10.0);
        let paths = trace_paths(&empty_env(), tx, rx, &no_ground()).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].bounces, 0);
        assert_relative_eq!(paths[0].length_m, 20.0, epsilon = 1e-12);
        assert_eq!(paths[0].vertices, vec![tx, rx]);
    }

    #[test]
    fn ground_bounce_matches_image_length() {
        // Image of the tx across z = 0 sits at (0, 0, -10); the reflected
        // length is |image - rx| = sqrt(20^2 + 20^2).
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(20.0, 0.0, 10.0);
        let paths = trace_paths(&empty_env(), tx, rx, &TraceConfig::default()).unwrap();
        assert_eq!(paths.len(), 2);
        let bounce = paths.iter().find(|p| p.bounces == 1).unwrap();
        assert_relative_eq!(bounce.length_m, 800.0_f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(bounce.vertices[1].z, 0.0);
        assert_relative_eq!(bounce.vertices[1].x, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn wall_reflection_matches_image_length() {
        // Large wall in the x-z plane at y = 10 facing the endpoints.
        let env = env_with_box(Vec3::new(-50.0, 10.0, 0.0), Vec3::new(70.0, 14.0, 30.0));
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(20.0, 0.0, 10.0);
        let cfg = TraceConfig {
            max_reflection_order: 1,
            ..no_ground()
        };
        let paths = trace_paths(&env, tx, rx, &cfg).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].bounces, 0); // LOS is shorter, hence stronger
        let refl = &paths[1];
        assert_eq!(refl.bounces, 1);
        assert_relative_eq!(refl.length_m, 800.0_f64.sqrt(), epsilon = 1e-9);
        assert_eq!(refl.vertices[1], Vec3::new(10.0, 10.0, 10.0));
    }

    #[test]
    fn endpoint_inside_building_errors() {
        let env = env_with_box(Vec3::new(-2.0, -2.0, 0.0), Vec3::new(2.0, 2.0, 10.0));
        let inside = Vec3::new(0.0, 0.0, 5.0);
        let outside = Vec3::new(30.0, 0.0, 5.0);
        assert!(trace_paths(&env, inside, outside, &no_ground()).is_err());
        assert!(trace_paths(&env, outside, inside, &no_ground()).is_err());
        assert!(trace_paths(&env, outside, outside, &no_ground()).is_err());
    }

    #[test]
    fn path_gain_amplitude_law() {
        let cfg = TraceConfig::<f64>::default();
        let lambda = cfg.wavelength();
        let g1 = path_gain(10.0, 0, &cfg);
        assert_relative_eq!(g1.norm(), lambda / (4.0 * std::f64::consts::PI * 10.0));
        let g2 = path_gain(20.0, 0, &cfg);
        assert_relative_eq!(g2.norm(), g1.norm() / 2.0, max_relative = 1e-12);
        let g_bounced = path_gain(10.0, 2, &cfg);
        assert_relative_eq!(g_bounced.norm(), 0.09 * g1.norm(), max_relative = 1e-12);
    }

    #[test]
    fn phase_matches_electrical_length() {
        let cfg = TraceConfig::<f64>::default();
        let lambda = cfg.wavelength();
        for length in [3.7, 20.0, 61.25, 143.9] {
            let g = path_gain(length, 1, &cfg);
            let expected = -2.0 * std::f64::consts::PI * length / lambda;
            let mut diff = (g.arg() - expected) % (2.0 * std::f64::consts::PI);
            if diff > std::f64::consts::PI {
                diff -= 2.0 * std::f64::consts::PI;
            }
            if diff < -std::f64::consts::PI {
                diff += 2.0 * std::f64::consts::PI;
            }
            assert!(diff.abs() < 1e-9, "length {length}: phase diff {diff}");
        }
    }

    #[test]
    fn reciprocity_on_generated_scenes() {
        let layout = default_layout();
        let catalog = building_catalog();
        let cfg = TraceConfig::default();
        for seed in 0..5u64 {
            let env = generate_environment(&layout, &catalog, seed).unwrap();
            let tx = env.layout.bs_position;
            let rx = Vec3::new(-31.0 + 17.0 * seed as f64, 60.0, 2.0);
            let fwd = trace_paths(&env, tx, rx, &cfg).unwrap();
            let rev = trace_paths(&env, rx, tx, &cfg).unwrap();
            assert_eq!(fwd.len(), rev.len());
            let key = |p: &Path<f64>| (p.length_m, p.bounces);
            let mut fwd_sorted = fwd.clone();
            let mut rev_sorted = rev.clone();
            fwd_sorted.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            rev_sorted.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            for (f, r) in fwd_sorted.iter().zip(&rev_sorted) {
                assert!((f.length_m - r.length_m).abs() < 1e-9);
                assert_eq!(f.bounces, r.bounces);
                assert!((f.aod.elevation - r.aoa.elevation).abs() < 1e-9);
                assert!((f.aod.azimuth - r.aoa.azimuth).abs() < 1e-9);
                assert!((f.aoa.elevation - r.aod.elevation).abs() < 1e-9);
                assert!((f.aoa.azimuth - r.aod.azimuth).abs() < 1e-9);
            }
        }
    }

    /// Face normal at a reflection vertex, recovered from the scene.
    fn normal_at(env: &Environment<f64>, v: Vec3<f64>) -> Vec3<f64> {
        if v.z.abs() < 1e-9 {
            return Vec3::new(0.0, 0.0, 1.0);
        }
        for b in &env.buildings {
            for face in exposed_faces(&b.aabb()) {
                if face.plane.signed_distance(v).abs() < 1e-9
                    && face.contains_with_margin(v, 0.0)
                {
                    return face.outward_normal();
                }
            }
        }
        panic!("vertex {v:?} not on any reflector");
    }

    #[test]
    fn reflections_obey_the_specular_law() {
        let layout = default_layout();
        let catalog = building_catalog();
        let cfg = TraceConfig::default();
        let mut checked = 0usize;
        for seed in 0..10u64 {
            let env = generate_environment(&layout, &catalog, seed).unwrap();
            let tx = env.layout.bs_position;
            let rx = Vec3::new(12.5, 60.0, 2.0);
            for path in trace_paths(&env, tx, rx, &cfg).unwrap() {
                for w in 1..path.vertices.len() - 1 {
                    let q = path.vertices[w];
                    let d_in = (q - path.vertices[w - 1]).normalized();
                    let d_out = (path.vertices[w + 1] - q).normalized();
                    let n = normal_at(&env, q);
                    let reflected = d_in - n * (2.0 * d_in.dot(n));
                    assert!((reflected - d_out).norm() < 1e-9);
                    // Incident from the outward side.
                    assert!(d_in.dot(n) < 0.0);
                    checked += 1;
                }
            }
        }
        assert!(checked > 10, "too few reflections exercised: {checked}");
    }

    #[test]
    fn truncation_keeps_the_strongest_paths() {
        let layout = default_layout();
        let catalog = building_catalog();
        let env = generate_environment(&layout, &catalog, 77).unwrap();
        let tx = env.layout.bs_position;
        let rx = Vec3::new(4.5, 60.0, 2.0);
        let all_cfg = TraceConfig {
            max_paths: 10_000,
            ..TraceConfig::default()
        };
        let full = trace_paths(&env, tx, rx, &all_cfg).unwrap();
        assert!(full.len() > 3, "scene too sparse for the truncation test");
        let cut_cfg = TraceConfig {
            max_paths: 3,
            ..TraceConfig::default()
        };
        let cut = trace_paths(&env, tx, rx, &cut_cfg).unwrap();
        assert_eq!(cut.len(), 3);
        for (kept, reference) in cut.iter().zip(full.iter().take(3)) {
            assert_eq!(kept.length_m, reference.length_m);
            assert_eq!(kept.bounces, reference.bounces);
        }
        // Everything dropped is no stronger than everything kept.
        let weakest_kept = cut.last().unwrap().gain.norm();
        for dropped in full.iter().skip(3) {
            assert!(dropped.gain.norm() <= weakest_kept + 1e-18);
        }
    }

    #[test]
    fn path_count_respects_cap() {
        let layout = default_layout();
        let catalog = building_catalog();
        let cfg = TraceConfig::default();
        for seed in 100..120u64 {
            let env = generate_environment(&layout, &catalog, seed).unwrap();
            for x in [-40.0, 0.0, 40.0] {
                let paths =
                    trace_paths(&env, env.layout.bs_position, Vec3::new(x, 60.0, 2.0), &cfg)
                        .unwrap();
                assert!(paths.len() <= 25);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = TraceConfig::<f64>::default();
        cfg.max_paths = 0;
        assert!(cfg.validate().is_err());
        cfg = TraceConfig::default();
        cfg.reflection_coeff = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TraceConfig::default();
        cfg.max_reflection_order = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn path_invariants_hold_on_generated_scenes() {
        let layout = default_layout();
        let catalog = building_catalog();
        let cfg = TraceConfig::default();
        let env = generate_environment(&layout, &catalog, 5).unwrap();
        let paths = trace_paths(&env, env.layout.bs_position, Vec3::new(-8.0, 60.0, 2.0), &cfg)
            .unwrap();
        assert!(!paths.is_empty());
        for p in &paths {
            assert!(p.gain.norm() > 0.0);
            assert!((0.0..=std::f64::consts::PI).contains(&p.aod.elevation));
            assert!((0.0..=std::f64::consts::PI).contains(&p.aoa.elevation));
            assert!(p.aod.azimuth.abs() <= std::f64::consts::PI);
            let seg_len: f64 = p.vertices.windows(2).map(|s| s[0].distance(s[1])).sum();
            assert!((seg_len - p.length_m).abs() < 1e-9);
            assert_eq!(p.vertices.len() as u32, p.bounces + 2);
        }
    }
}
