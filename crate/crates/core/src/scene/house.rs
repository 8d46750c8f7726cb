//! Procedural floor-plan houses and shoebox rooms.
//!
//! Rooms are axis-aligned boxes on the floor plane (x, z) sharing one ceiling
//! height. Walls shared by two rooms are emitted once. Doors are rectangular
//! holes starting at the floor.

use std::collections::BTreeMap;

use super::{Material, Point3, Receiver, Region, Scene, SceneError, Surface, Vec3};

const COORD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoomSpec {
    pub name: String,
    /// Floor-plane corner `[x, z]` in meters.
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl RoomSpec {
    pub fn new(name: &str, min: [f64; 2], max: [f64; 2]) -> RoomSpec {
        RoomSpec { name: name.to_string(), min, max }
    }

    fn overlaps(&self, other: &RoomSpec) -> bool {
        (0..2).all(|a| self.min[a] < other.max[a] - COORD_TOL && other.min[a] < self.max[a] - COORD_TOL)
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        x > self.min[0] && x < self.max[0] && z > self.min[1] && z < self.max[1]
    }
}

/// Rectangular opening in the wall shared by two rooms.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Door {
    pub between: [String; 2],
    /// Center along the shared wall (absolute coordinate); `None` centers it.
    pub center: Option<f64>,
    pub width: f64,
    pub height: f64,
}

impl Door {
    pub fn new(a: &str, b: &str, center: Option<f64>) -> Door {
        Door { between: [a.to_string(), b.to_string()], center, width: 0.9, height: 2.1 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FloorPlan {
    pub height: f64,
    pub rooms: Vec<RoomSpec>,
    pub doors: Vec<Door>,
}

/// Wall line key: axis the wall is perpendicular to (0 = x, 1 = z) and its
/// quantized coordinate.
type WallKey = (usize, i64);

fn wall_key(axis: usize, coord: f64) -> WallKey {
    (axis, (coord / COORD_TOL).round() as i64)
}

struct WallLine {
    coord: f64,
    /// Spans along the wall, in the other floor axis.
    spans: Vec<(f64, f64)>,
    /// Door openings as (start, end, height).
    doors: Vec<(f64, f64, f64)>,
}

/// The shared wall between two rooms: (perpendicular axis, coordinate, start, end).
fn shared_wall(a: &RoomSpec, b: &RoomSpec) -> Option<(usize, f64, f64, f64)> {
    for axis in 0..2 {
        let other = 1 - axis;
        let touching = if (a.max[axis] - b.min[axis]).abs() < COORD_TOL {
            Some(a.max[axis])
        } else if (b.max[axis] - a.min[axis]).abs() < COORD_TOL {
            Some(a.min[axis])
        } else {
            None
        };
        if let Some(coord) = touching {
            let s0 = a.min[other].max(b.min[other]);
            let s1 = a.max[other].min(b.max[other]);
            if s1 - s0 > COORD_TOL {
                return Some((axis, coord, s0, s1));
            }
        }
    }
    None
}

/// Build a closed multi-room mesh from a floor plan.
pub fn build_house(plan: &FloorPlan, wall_material: Material, receiver: Point3) -> Result<Scene, SceneError> {
    let err = |msg: String| Err(SceneError::Plan(msg));
    if !(plan.height > 0.0) {
        return err(format!("ceiling height {} must be positive", plan.height));
    }
    if plan.rooms.is_empty() {
        return err("floor plan has no rooms".into());
    }
    for r in &plan.rooms {
        if !(r.min[0] < r.max[0] && r.min[1] < r.max[1]) {
            return err(format!("room `{}` has an empty footprint", r.name));
        }
    }
    for (i, a) in plan.rooms.iter().enumerate() {
        for b in &plan.rooms[i + 1..] {
            if a.overlaps(b) {
                return err(format!("rooms `{}` and `{}` overlap", a.name, b.name));
            }
        }
    }

    let room = |name: &str| plan.rooms.iter().find(|r| r.name == name);
    let mut lines: BTreeMap<WallKey, WallLine> = BTreeMap::new();
    for r in &plan.rooms {
        for axis in 0..2 {
            let other = 1 - axis;
            for coord in [r.min[axis], r.max[axis]] {
                lines
                    .entry(wall_key(axis, coord))
                    .or_insert_with(|| WallLine { coord, spans: Vec::new(), doors: Vec::new() })
                    .spans
                    .push((r.min[other], r.max[other]));
            }
        }
    }

    for door in &plan.doors {
        let [na, nb] = &door.between;
        let (Some(a), Some(b)) = (room(na), room(nb)) else {
            return err(format!("door between `{na}` and `{nb}` names an unknown room"));
        };
        let Some((axis, coord, s0, s1)) = shared_wall(a, b) else {
            return err(format!("door between `{na}` and `{nb}` is not on a shared wall"));
        };
        if !(door.width > 0.0 && door.height > 0.0) {
            return err(format!("door between `{na}` and `{nb}` has non-positive size"));
        }
        if door.width > s1 - s0 + COORD_TOL {
            return err(format!(
                "door between `{na}` and `{nb}` is {:.3} m wide but the shared wall is {:.3} m",
                door.width,
                s1 - s0
            ));
        }
        if door.height > plan.height {
            return err(format!("door between `{na}` and `{nb}` is taller than the ceiling"));
        }
        let center = door.center.unwrap_or(0.5 * (s0 + s1));
        let (d0, d1) = (center - 0.5 * door.width, center + 0.5 * door.width);
        if d0 < s0 - COORD_TOL || d1 > s1 + COORD_TOL {
            return err(format!("door between `{na}` and `{nb}` extends past the shared wall"));
        }
        lines.get_mut(&wall_key(axis, coord)).expect("shared wall line exists").doors.push((d0, d1, door.height));
    }

    if !plan.rooms.iter().any(|r| r.contains(receiver.x, receiver.z)) || !(receiver.y > 0.0 && receiver.y < plan.height) {
        return err(format!("receiver {:?} is not inside any room", receiver.to_array()));
    }

    let mut mesh = MeshBuilder::default();
    let h = plan.height;
    let mut floor = Vec::new();
    let mut ceiling = Vec::new();
    for r in &plan.rooms {
        let (x0, z0, x1, z1) = (r.min[0], r.min[1], r.max[0], r.max[1]);
        floor.extend(mesh.quad([
            Vec3::new(x0, 0.0, z0),
            Vec3::new(x1, 0.0, z0),
            Vec3::new(x1, 0.0, z1),
            Vec3::new(x0, 0.0, z1),
        ]));
        ceiling.extend(mesh.quad([
            Vec3::new(x0, h, z0),
            Vec3::new(x0, h, z1),
            Vec3::new(x1, h, z1),
            Vec3::new(x1, h, z0),
        ]));
    }

    let mut walls = Vec::new();
    for ((axis, _), line) in &lines {
        let mut cuts: Vec<f64> = Vec::new();
        for &(a, b) in &line.spans {
            cuts.push(a);
            cuts.push(b);
        }
        for &(a, b, _) in &line.doors {
            cuts.push(a);
            cuts.push(b);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < COORD_TOL);
        for w in cuts.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            let mid = 0.5 * (u0 + u1);
            if !line.spans.iter().any(|&(a, b)| mid > a && mid < b) {
                continue;
            }
            let bottom = line
                .doors
                .iter()
                .filter(|&&(a, b, _)| mid > a && mid < b)
                .map(|&(_, _, dh)| dh)
                .fold(0.0, f64::max);
            if h - bottom <= COORD_TOL {
                continue;
            }
            let at = |u: f64, y: f64| {
                if *axis == 0 {
                    Vec3::new(line.coord, y, u)
                } else {
                    Vec3::new(u, y, line.coord)
                }
            };
            walls.extend(mesh.quad([at(u0, bottom), at(u1, bottom), at(u1, h), at(u0, h)]));
        }
    }

    let regions = plan
        .rooms
        .iter()
        .map(|r| Region {
            name: r.name.clone(),
            min: Vec3::new(r.min[0], 0.0, r.min[1]),
            max: Vec3::new(r.max[0], h, r.max[1]),
        })
        .collect();

    Scene::new(
        mesh.vertices,
        vec![
            Surface { triangles: walls, material: 0 },
            Surface { triangles: floor, material: 0 },
            Surface { triangles: ceiling, material: 0 },
        ],
        vec![wall_material],
        regions,
        Receiver { position: receiver, facing: Vec3::new(1.0, 0.0, 0.0) },
        None,
    )
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Point3>,
}

impl MeshBuilder {
    fn quad(&mut self, corners: [Point3; 4]) -> [[usize; 3]; 2] {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&corners);
        [[base, base + 1, base + 2], [base, base + 2, base + 3]]
    }
}

/// Single axis-aligned room with one corner at the origin.
pub fn shoebox(dims: Vec3, material: Material, receiver: Point3) -> Result<Scene, SceneError> {
    let plan = FloorPlan {
        height: dims.y,
        rooms: vec![RoomSpec::new("room", [0.0, 0.0], [dims.x, dims.z])],
        doors: vec![],
    };
    build_house(&plan, material, receiver)
}

/// Ten-room single-level house, 15.6 m × 8.3 m floor with a 4.4 m ceiling.
///
/// Two rows of five rooms; every north room opens onto the room south of it
/// and the south rooms open onto each other.
pub fn house10_plan() -> FloorPlan {
    let south = [("entry", 3.6), ("living", 2.8), ("dining", 3.2), ("kitchen", 3.0), ("laundry", 3.0)];
    let north = [("bedroom_1", 2.6), ("bath", 3.4), ("study", 3.0), ("bedroom_2", 3.4), ("bedroom_3", 3.2)];
    let split_z = 4.5;
    let depth = 8.3;

    let mut rooms = Vec::new();
    let mut x = 0.0;
    for (name, w) in south {
        rooms.push(RoomSpec::new(name, [x, 0.0], [round_cm(x + w), split_z]));
        x = round_cm(x + w);
    }
    let mut x = 0.0;
    for (name, w) in north {
        rooms.push(RoomSpec::new(name, [x, split_z], [round_cm(x + w), depth]));
        x = round_cm(x + w);
    }

    let doors = vec![
        Door::new("entry", "living", Some(3.4)),
        Door::new("living", "dining", Some(1.2)),
        Door::new("dining", "kitchen", Some(3.5)),
        Door::new("kitchen", "laundry", Some(1.0)),
        Door::new("entry", "bedroom_1", Some(2.0)),
        Door::new("living", "bath", Some(4.3)),
        Door::new("dining", "study", Some(8.2)),
        Door::new("kitchen", "bedroom_2", Some(10.3)),
        Door::new("laundry", "bedroom_3", Some(14.9)),
    ];
    FloorPlan { height: 4.4, rooms, doors }
}

fn round_cm(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Receiver pose of the ten-room preset: corner of the entry room, facing into the house.
pub fn house10_receiver() -> Point3 {
    Vec3::new(1.1, 1.5, 1.0)
}

impl Scene {
    /// The ten-room preset built with default plaster walls.
    pub fn house10() -> Scene {
        build_house(&house10_plan(), Material::new("plaster", 0.25, 0.4), house10_receiver())
            .expect("preset floor plan is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_rooms(door_width: f64) -> Result<Scene, SceneError> {
        let plan = FloorPlan {
            height: 3.0,
            rooms: vec![
                RoomSpec::new("a", [0.0, 0.0], [4.0, 3.0]),
                RoomSpec::new("b", [4.0, 0.0], [8.0, 3.0]),
            ],
            doors: vec![Door { between: ["a".into(), "b".into()], center: None, width: door_width, height: 2.0 }],
        };
        build_house(&plan, Material::new("wall", 0.2, 0.1), Vec3::new(1.0, 1.5, 1.0))
    }

    #[test]
    fn two_rooms_with_door() {
        let scene = two_rooms(1.0).unwrap();
        assert_eq!(scene.regions().len(), 2);
        // Through the door: from room a to room b, no hit until b's far wall.
        let hit = scene.intersect(Vec3::new(2.0, 1.0, 1.5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.point.x - 8.0).abs() < 1e-9, "{hit:?}");
        // Above the door the shared wall is solid.
        let hit = scene.intersect(Vec3::new(2.0, 2.5, 1.5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.point.x - 4.0).abs() < 1e-9);
        // Beside the door as well.
        let hit = scene.intersect(Vec3::new(2.0, 1.0, 0.5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((hit.point.x - 4.0).abs() < 1e-9);
        let ext = scene.bounding_box().extent();
        assert_eq!(ext.to_array(), [8.0, 3.0, 3.0]);
    }

    #[test]
    fn ray_through_opening_escapes_open_mesh() {
        // Drop room b's geometry so room a's door opens to the outside.
        let mut doc = two_rooms(1.0).unwrap().to_document();
        let verts = doc.vertices.clone();
        for s in &mut doc.surfaces {
            s.triangles.retain(|t| t.iter().all(|&i| verts[i].x <= 4.0 + 1e-9));
        }
        doc.regions.truncate(1);
        let scene = doc.into_scene().unwrap();
        assert!(scene.intersect(Vec3::new(2.0, 1.0, 1.5), Vec3::new(1.0, 0.0, 0.0)).is_none());
        assert!(scene.intersect(Vec3::new(2.0, 1.0, 0.5), Vec3::new(1.0, 0.0, 0.0)).is_some());
    }

    #[test]
    fn door_wider_than_wall_is_rejected() {
        assert!(matches!(two_rooms(3.5), Err(SceneError::Plan(_))));
    }

    #[test]
    fn door_off_shared_wall_is_rejected() {
        let plan = FloorPlan {
            height: 3.0,
            rooms: vec![
                RoomSpec::new("a", [0.0, 0.0], [4.0, 3.0]),
                RoomSpec::new("b", [5.0, 0.0], [8.0, 3.0]),
            ],
            doors: vec![Door::new("a", "b", None)],
        };
        let err = build_house(&plan, Material::new("w", 0.2, 0.1), Vec3::new(1.0, 1.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("not on a shared wall"), "{err}");
    }

    #[test]
    fn overlapping_rooms_are_rejected() {
        let plan = FloorPlan {
            height: 3.0,
            rooms: vec![
                RoomSpec::new("a", [0.0, 0.0], [4.0, 3.0]),
                RoomSpec::new("b", [3.0, 0.0], [8.0, 3.0]),
            ],
            doors: vec![],
        };
        assert!(build_house(&plan, Material::new("w", 0.2, 0.1), Vec3::new(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn house10_dimensions() {
        let scene = Scene::house10();
        assert_eq!(scene.regions().len(), 10);
        let e = scene.bounding_box().extent();
        assert!((e.x - 15.6).abs() < 1e-9 && (e.y - 4.4).abs() < 1e-9 && (e.z - 8.3).abs() < 1e-9);
    }

    #[test]
    fn house10_round_trips_through_json() {
        let scene = Scene::house10();
        let back = Scene::from_json(&scene.to_json()).unwrap();
        assert_eq!(back.vertices().len(), scene.vertices().len());
        assert_eq!(back.triangle_count(), scene.triangle_count());
    }
}
