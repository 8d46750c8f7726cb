//! The `echoloc-scene/1` JSON document.
//!
//! ```json
//! {
//!   "format": "echoloc-scene/1",
//!   "vertices": [[0.0, 0.0, 0.0], ...],
//!   "surfaces": [{"triangles": [[0, 1, 2], ...], "material": 0}],
//!   "materials": [{"name": "plaster", "absorption": 0.2, "scattering": 0.3}],
//!   "regions": [{"name": "kitchen", "min": [0, 0, 0], "max": [3, 4.4, 4]}],
//!   "receiver": {"position": [1.2, 1.5, 1.0], "facing": [1, 0, 0]},
//!   "bounds": {"min": [...], "max": [...]}
//! }
//! ```
//!
//! `bounds` is optional and defaults to the vertex bounding box. Coordinates
//! are meters with y pointing up.

use serde::{Deserialize, Serialize};

use super::{Aabb, Material, Point3, Receiver, Region, Scene, SceneError, Surface};

pub const SCENE_FORMAT: &str = "echoloc-scene/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub format: String,
    pub vertices: Vec<Point3>,
    pub surfaces: Vec<Surface>,
    pub materials: Vec<Material>,
    #[serde(default)]
    pub regions: Vec<Region>,
    pub receiver: Receiver,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Aabb>,
}

impl SceneDocument {
    pub fn parse(text: &str) -> Result<SceneDocument, SceneError> {
        let doc: SceneDocument = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        if doc.format != SCENE_FORMAT {
            return Err(SceneError::Parse(format!(
                "unsupported format `{}`, expected `{SCENE_FORMAT}`",
                doc.format
            )));
        }
        Ok(doc)
    }

    pub fn into_scene(self) -> Result<Scene, SceneError> {
        Scene::new(self.vertices, self.surfaces, self.materials, self.regions, self.receiver, self.bounds)
    }

    pub fn to_json(&self) -> String {
        // Serialization of plain data cannot fail.
        let mut s = serde_json::to_string_pretty(self).expect("scene document serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "format": "echoloc-scene/1",
      "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0],[0,0,1],[1,0,1],[1,1,1],[0,1,1]],
      "surfaces": [{"material": 0, "triangles": [
        [0,1,2],[0,2,3],[4,6,5],[4,7,6],[0,4,5],[0,5,1],
        [3,2,6],[3,6,7],[0,3,7],[0,7,4],[1,5,6],[1,6,2]]}],
      "materials": [{"name": "wall", "absorption": 0.3, "scattering": 0.1}],
      "regions": [{"name": "room", "min": [0,0,0], "max": [1,1,1]}],
      "receiver": {"position": [0.5,0.5,0.5], "facing": [1,0,0]}
    }"#;

    #[test]
    fn minimal_box_parses() {
        let scene = Scene::from_json(MINIMAL).unwrap();
        assert_eq!(scene.triangle_count(), 12);
        assert_eq!(scene.regions().len(), 1);
        assert_eq!(scene.bounding_box().extent().to_array(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn wrong_format_tag_is_a_parse_error() {
        let text = MINIMAL.replace("echoloc-scene/1", "echoloc-scene/9");
        assert!(matches!(Scene::from_json(&text), Err(SceneError::Parse(_))));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = &MINIMAL[..MINIMAL.len() / 2];
        assert!(matches!(Scene::from_json(text), Err(SceneError::Parse(_))));
    }
}
