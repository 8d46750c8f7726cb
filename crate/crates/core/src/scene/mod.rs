//! Indoor scene representation: triangle geometry, broadband acoustic
//! materials, named room regions and the receiver pose.
//!
//! A [`Scene`] is immutable once validated and can be shared freely between
//! rendering workers. Geometry does not need to be watertight; rays that
//! escape through an opening simply report no hit.

mod bvh;
mod format;
mod geom;
mod house;

use std::path::Path;

pub use format::{SceneDocument, SCENE_FORMAT};
pub use geom::{Aabb, Point3, Vec3};
pub use house::{build_house, house10_plan, house10_receiver, shoebox, Door, FloorPlan, RoomSpec};

use bvh::{Bvh, Triangle};

/// Self-intersection bias for every ray query, in meters.
pub const RAY_EPSILON: f64 = 1e-4;

/// Minimum triangle area accepted by validation, in square meters.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Invalid(String),
    #[error("point ({x:.4}, {y:.4}, {z:.4}) is claimed by regions `{first}` and `{second}`")]
    AmbiguousRegion { x: f64, y: f64, z: f64, first: String, second: String },
    #[error("floor plan error: {0}")]
    Plan(String),
}

/// Broadband surface material.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Material {
    #[serde(default)]
    pub name: String,
    /// Fraction of incident energy absorbed per reflection.
    pub absorption: f64,
    /// Fraction of reflected energy scattered diffusely; the rest is specular.
    pub scattering: f64,
}

impl Material {
    pub fn new(name: &str, absorption: f64, scattering: f64) -> Material {
        Material { name: name.to_string(), absorption, scattering }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Surface {
    pub triangles: Vec<[usize; 3]>,
    pub material: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Region {
    pub name: String,
    pub min: Point3,
    pub max: Point3,
}

impl Region {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }

    /// Bounds scaled about the centroid by `shrink` (1.0 leaves them unchanged).
    pub fn shrunk(&self, shrink: f64) -> Aabb {
        self.bounds().scaled(shrink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Receiver {
    pub position: Point3,
    /// Unit facing direction. Stored for reference; the receiver is omnidirectional.
    pub facing: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub point: Point3,
    /// Unit geometric normal, oriented against the incoming ray.
    pub normal: Vec3,
    pub material: usize,
    /// Global triangle index (surface order, then triangle order).
    pub triangle: usize,
}

/// A validated scene ready for ray queries.
#[derive(Debug, Clone)]
pub struct Scene {
    vertices: Vec<Point3>,
    surfaces: Vec<Surface>,
    materials: Vec<Material>,
    regions: Vec<Region>,
    receiver: Receiver,
    bounds: Aabb,
    explicit_bounds: bool,
    triangles: Vec<Triangle>,
    triangle_material: Vec<usize>,
    triangle_normal: Vec<Vec3>,
    bvh: Bvh,
}

impl Scene {
    /// Validate the parts and build the acceleration structure.
    ///
    /// `bounds` defaults to the vertex bounding box; a scene without geometry
    /// must supply it.
    pub fn new(
        vertices: Vec<Point3>,
        surfaces: Vec<Surface>,
        materials: Vec<Material>,
        regions: Vec<Region>,
        receiver: Receiver,
        bounds: Option<Aabb>,
    ) -> Result<Scene, SceneError> {
        let invalid = |msg: String| Err(SceneError::Invalid(msg));

        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return invalid(format!("vertex {v} is not finite"));
        }
        for (i, m) in materials.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.absorption) {
                return invalid(format!("material {i} absorption {} outside [0, 1]", m.absorption));
            }
            if !(0.0..=1.0).contains(&m.scattering) {
                return invalid(format!("material {i} scattering {} outside [0, 1]", m.scattering));
            }
        }

        let mut triangles = Vec::new();
        let mut triangle_material = Vec::new();
        let mut triangle_normal = Vec::new();
        for (si, s) in surfaces.iter().enumerate() {
            if s.material >= materials.len() {
                return invalid(format!(
                    "surface {si} references material {} but only {} are defined",
                    s.material,
                    materials.len()
                ));
            }
            for (ti, tri) in s.triangles.iter().enumerate() {
                if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
                    return invalid(format!("surface {si} triangle {ti} references missing vertex {bad}"));
                }
                let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
                let cross = (b - a).cross(c - a);
                let area = 0.5 * cross.length();
                if area <= MIN_TRIANGLE_AREA {
                    return invalid(format!("surface {si} triangle {ti} is degenerate (area {area:.3e} m²)"));
                }
                triangles.push(Triangle { v0: a, v1: b, v2: c });
                triangle_material.push(s.material);
                triangle_normal.push(cross.normalized());
            }
        }

        let mut names = std::collections::HashSet::new();
        for r in &regions {
            if !(0..3).all(|a| r.min[a] < r.max[a]) {
                return invalid(format!("region `{}` has min >= max on some axis", r.name));
            }
            if !names.insert(r.name.as_str()) {
                return invalid(format!("duplicate region name `{}`", r.name));
            }
        }

        let explicit_bounds = bounds.is_some();
        let bounds = match bounds {
            Some(b) => b,
            None => {
                let mut b = Aabb::empty();
                for &v in &vertices {
                    b.grow(v);
                }
                if vertices.is_empty() {
                    return invalid("scene has no geometry and no explicit bounds".into());
                }
                b
            }
        };
        if !receiver.position.is_finite() || !bounds.contains(receiver.position) {
            return invalid(format!("receiver {:?} lies outside the scene bounds", receiver.position.to_array()));
        }
        let facing_len = receiver.facing.length();
        if (facing_len - 1.0).abs() > 1e-6 {
            return invalid(format!("receiver facing must be a unit vector (length {facing_len})"));
        }

        let bvh = Bvh::build(&triangles);
        Ok(Scene {
            vertices,
            surfaces,
            materials,
            regions,
            receiver,
            bounds,
            explicit_bounds,
            triangles,
            triangle_material,
            triangle_normal,
            bvh,
        })
    }

    /// Scene with no geometry: every ray escapes.
    pub fn free_field(receiver: Point3, bounds: Aabb) -> Result<Scene, SceneError> {
        Scene::new(
            Vec::new(),
            Vec::new(),
            Vec::new(),
            Vec::new(),
            Receiver { position: receiver, facing: Vec3::new(1.0, 0.0, 0.0) },
            Some(bounds),
        )
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn receiver(&self) -> &Receiver {
        &self.receiver
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bounds
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn material(&self, id: usize) -> &Material {
        &self.materials[id]
    }

    /// Same scene with a different receiver pose.
    pub fn with_receiver(&self, receiver: Receiver) -> Result<Scene, SceneError> {
        let mut scene = self.clone();
        if !scene.bounds.contains(receiver.position) {
            return Err(SceneError::Invalid(format!(
                "receiver {:?} lies outside the scene bounds",
                receiver.position.to_array()
            )));
        }
        scene.receiver = receiver;
        Ok(scene)
    }

    /// Nearest hit farther than [`RAY_EPSILON`], accelerated by the BVH.
    pub fn intersect(&self, origin: Point3, direction: Vec3) -> Option<RayHit> {
        self.bvh
            .nearest(&self.triangles, origin, direction, RAY_EPSILON, f64::INFINITY)
            .map(|(t, tri)| self.make_hit(origin, direction, t, tri))
    }

    /// Reference implementation of [`Scene::intersect`] that tests every triangle.
    pub fn intersect_brute_force(&self, origin: Point3, direction: Vec3) -> Option<RayHit> {
        let mut best: Option<(f64, usize)> = None;
        for (i, tri) in self.triangles.iter().enumerate() {
            if let Some(t) = tri.intersect(origin, direction) {
                if t > RAY_EPSILON && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best.map(|(t, tri)| self.make_hit(origin, direction, t, tri))
    }

    /// True if the open segment between `a` and `b` (shortened by
    /// [`RAY_EPSILON`] at both ends) crosses any triangle.
    pub fn occluded(&self, a: Point3, b: Point3) -> bool {
        let d = b - a;
        let len = d.length();
        if len <= 2.0 * RAY_EPSILON {
            return false;
        }
        let dir = d / len;
        self.bvh.any_hit(&self.triangles, a, dir, RAY_EPSILON, len - RAY_EPSILON)
    }

    fn make_hit(&self, origin: Point3, direction: Vec3, t: f64, tri: usize) -> RayHit {
        let n = self.triangle_normal[tri];
        let normal = if n.dot(direction) > 0.0 { -n } else { n };
        RayHit {
            distance: t,
            point: origin + direction * t,
            normal,
            material: self.triangle_material[tri],
            triangle: tri,
        }
    }

    /// Name of the region whose bounds contain `p`, if any.
    ///
    /// Fails if two regions claim the point, which happens only on shared
    /// boundaries of adjacent regions.
    pub fn region_of(&self, p: Point3) -> Result<Option<&str>, SceneError> {
        self.region_of_shrunk(p, 1.0)
    }

    /// As [`Scene::region_of`] with every region first scaled about its centroid.
    pub fn region_of_shrunk(&self, p: Point3, shrink: f64) -> Result<Option<&str>, SceneError> {
        let mut found: Option<&Region> = None;
        for r in &self.regions {
            if r.shrunk(shrink).contains(p) {
                if let Some(first) = found {
                    return Err(SceneError::AmbiguousRegion {
                        x: p.x,
                        y: p.y,
                        z: p.z,
                        first: first.name.clone(),
                        second: r.name.clone(),
                    });
                }
                found = Some(r);
            }
        }
        Ok(found.map(|r| r.name.as_str()))
    }

    pub fn region_index(&self, name: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.name == name)
    }

    pub fn to_document(&self) -> SceneDocument {
        SceneDocument {
            format: SCENE_FORMAT.to_string(),
            vertices: self.vertices.clone(),
            surfaces: self.surfaces.clone(),
            materials: self.materials.clone(),
            regions: self.regions.clone(),
            receiver: self.receiver,
            bounds: self.explicit_bounds.then_some(self.bounds),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })
    }

    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        SceneDocument::parse(text)?.into_scene()
    }
}

/// Read, parse and validate a scene file.
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    Scene::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Scene {
        shoebox(Vec3::new(1.0, 1.0, 1.0), Material::new("wall", 0.5, 0.0), Vec3::new(0.5, 0.5, 0.5))
            .unwrap()
    }

    #[test]
    fn center_ray_hits_wall_at_half_meter() {
        let scene = unit_box();
        let hit = scene.intersect(Vec3::new(0.5, 0.5, 0.5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.distance - 0.5).abs() < 1e-12);
        assert!((hit.normal - Vec3::new(-1.0, 0.0, 0.0)).length() < 1e-12);
        assert!((hit.point.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_box_has_twelve_triangles() {
        assert_eq!(unit_box().triangle_count(), 12);
    }

    #[test]
    fn hits_closer_than_epsilon_are_ignored() {
        let scene = unit_box();
        let origin = Vec3::new(1.0 - 0.5 * RAY_EPSILON, 0.5, 0.5);
        let hit = scene.intersect(origin, Vec3::new(1.0, 0.0, 0.0));
        assert!(hit.is_none());
    }

    #[test]
    fn unknown_material_is_rejected() {
        let doc = unit_box().to_document();
        let mut doc = doc;
        doc.surfaces[0].material = 7;
        doc.materials.push(Material::new("extra", 0.1, 0.1));
        let err = doc.into_scene().unwrap_err();
        assert!(matches!(err, SceneError::Invalid(ref m) if m.contains("material 7")), "{err}");
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let mut doc = unit_box().to_document();
        doc.surfaces[0].triangles[0] = [0, 0, 1];
        assert!(matches!(doc.into_scene(), Err(SceneError::Invalid(_))));
    }

    #[test]
    fn receiver_outside_bounds_is_rejected() {
        let mut doc = unit_box().to_document();
        doc.receiver.position = Vec3::new(2.0, 0.5, 0.5);
        assert!(matches!(doc.into_scene(), Err(SceneError::Invalid(_))));
    }

    #[test]
    fn region_lookup() {
        let scene = unit_box();
        assert_eq!(scene.region_of(Vec3::new(0.5, 0.5, 0.5)).unwrap(), Some("room"));
        assert_eq!(scene.region_of(Vec3::new(1.5, 0.5, 0.5)).unwrap(), None);
        assert_eq!(scene.region_of_shrunk(Vec3::new(0.98, 0.5, 0.5), 0.9).unwrap(), None);
    }

    #[test]
    fn shared_boundary_is_ambiguous() {
        let scene = build_house(
            &FloorPlan {
                height: 3.0,
                rooms: vec![
                    RoomSpec::new("a", [0.0, 0.0], [4.0, 3.0]),
                    RoomSpec::new("b", [4.0, 0.0], [8.0, 3.0]),
                ],
                doors: vec![],
            },
            Material::new("wall", 0.2, 0.2),
            Vec3::new(1.0, 1.5, 1.0),
        )
        .unwrap();
        let err = scene.region_of(Vec3::new(4.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, SceneError::AmbiguousRegion { .. }));
        assert_eq!(scene.region_of(Vec3::new(5.0, 1.0, 1.0)).unwrap(), Some("b"));
    }
}
