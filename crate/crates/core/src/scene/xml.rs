//! Scene file format.
//!
//! ```xml
//! <?xml version="1.0"?>
//! <document>
//!   <scene id="plant" name="plant">
//!     <part classId="0" className="ground" material="opaque">
//!       <filter type="objloader">
//!         <param type="string" key="filepath" value="groundplane.obj"/>
//!       </filter>
//!       <filter type="translate">
//!         <param type="vec3" key="offset" value="0;0;0"/>
//!       </filter>
//!     </part>
//!   </scene>
//! </document>
//! ```
//!
//! Parts are never rotated; a `rotate` filter is rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use roxmltree::Node;

use super::{Material, Scene, SceneError, ScenePart};
use crate::asset::{label_name, palette_color, AssetError, LabelRegistry, MeshAsset};
use crate::geometry::Vec3;
use crate::xml::{
    attr, child, children, escape_attr, optional_attr, parse_document, reject, required_attr,
    Rejection, DECLARATION,
};

impl From<Rejection> for SceneError {
    fn from((element, reason): Rejection) -> Self {
        SceneError::MalformedSceneXml { element, reason }
    }
}

pub fn write_scene_xml(scene: &Scene) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(DECLARATION);
    out.push('\n');
    out.push_str("<document>\n");
    let name = escape_attr(&scene.name);
    let _ = writeln!(out, "  <scene id=\"{name}\" name=\"{name}\">");
    for part in &scene.parts {
        let _ = writeln!(
            out,
            "    <part classId=\"{}\" className=\"{}\" material=\"{}\">",
            part.label.id,
            escape_attr(&part.label.name),
            part.material.as_str()
        );
        let _ = writeln!(out, "      <filter type=\"objloader\">");
        let _ = writeln!(
            out,
            "        <param type=\"string\" key=\"filepath\" value=\"{}\"/>",
            escape_attr(&part.source.to_string_lossy())
        );
        let _ = writeln!(out, "      </filter>");
        let t = part.translation;
        let _ = writeln!(out, "      <filter type=\"translate\">");
        let _ = writeln!(
            out,
            "        <param type=\"vec3\" key=\"offset\" value=\"{};{};{}\"/>",
            t.x, t.y, t.z
        );
        let _ = writeln!(out, "      </filter>");
        let _ = writeln!(out, "    </part>");
    }
    out.push_str("  </scene>\n");
    out.push_str("</document>\n");
    out.into_bytes()
}

fn param<'a>(filter: Node<'a, '_>, key: &str) -> Result<&'a str, Rejection> {
    children(filter, "param")
        .find(|p| p.attribute("key") == Some(key))
        .ok_or_else(|| reject("filter", format!("missing param {key:?}")))
        .and_then(|p| required_attr(p, "value"))
}

fn parse_vec3(raw: &str) -> Result<Vec3, Rejection> {
    let parts: Vec<&str> = raw.split(';').map(str::trim).collect();
    let bad = || reject("param", format!("expected \"x;y;z\", got {raw:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut c = [0.0f64; 3];
    for (slot, s) in c.iter_mut().zip(&parts) {
        *slot = s.parse().map_err(|_| bad())?;
        if !slot.is_finite() {
            return Err(bad());
        }
    }
    Ok(Vec3::new(c[0], c[1], c[2]))
}

/// Parses a scene file. `load` resolves each `filepath` to a mesh; it is
/// called once per distinct path.
pub fn parse_scene_xml<F>(bytes: &[u8], mut load: F) -> Result<Scene, SceneError>
where
    F: FnMut(&Path) -> Result<MeshAsset, AssetError>,
{
    let doc = parse_document(bytes)?;
    let root = doc.root_element();
    if !root.has_tag_name("document") {
        return Err(reject(
            "document",
            format!("unexpected root <{}>", root.tag_name().name()),
        )
        .into());
    }
    let scene_node = child(root, "scene").ok_or_else(|| reject("document", "missing <scene>"))?;
    let id = required_attr(scene_node, "id")?.to_string();

    let mut loaded: HashMap<PathBuf, MeshAsset> = HashMap::new();
    let mut colored: HashMap<(PathBuf, u32), Arc<MeshAsset>> = HashMap::new();
    let mut registry = LabelRegistry::new();
    let mut parts = Vec::new();

    for (index, part_node) in children(scene_node, "part").enumerate() {
        let class_id: u32 = attr(part_node, "classId")?;
        let material: Material = optional_attr(part_node, "material")?.unwrap_or_default();

        let mut source = None;
        let mut translation = Vec3::ZERO;
        for filter in children(part_node, "filter") {
            match required_attr(filter, "type")? {
                "objloader" => source = Some(PathBuf::from(param(filter, "filepath")?)),
                "translate" => translation = parse_vec3(param(filter, "offset")?)?,
                "rotate" => return Err(SceneError::RotationUnsupported { part: index }),
                other => {
                    return Err(
                        reject("filter", format!("unsupported filter type {other:?}")).into(),
                    )
                }
            }
        }
        let source = source
            .ok_or_else(|| reject("part", format!("part {index} has no objloader filter")))?;

        let class_name = match (part_node.attribute("className"), registry.by_id(class_id)) {
            (Some(n), _) => n.to_string(),
            (None, Some(known)) => known.name.clone(),
            (None, None) => label_name(
                &source
                    .file_name()
                    .map(|f| f.to_string_lossy())
                    .unwrap_or_default(),
            ),
        };
        let label = registry.insert(class_id, &class_name)?;

        // One load per file; one colored copy per (file, class) pair.
        let asset = match colored.get(&(source.clone(), class_id)) {
            Some(a) => a.clone(),
            None => {
                let base = match loaded.get(&source) {
                    Some(m) => m,
                    None => {
                        let mesh = load(&source).map_err(|e| match e {
                            AssetError::MissingFile(_) => SceneError::MissingAsset(source.clone()),
                            e => SceneError::Asset(e),
                        })?;
                        loaded.entry(source.clone()).or_insert(mesh)
                    }
                };
                let mut mesh = base.clone();
                mesh.color = palette_color(class_id);
                let mesh = Arc::new(mesh);
                colored.insert((source.clone(), class_id), mesh.clone());
                mesh
            }
        };

        parts.push(ScenePart {
            source,
            asset,
            translation,
            label,
            part_index: index as u32,
            material,
        });
    }
    if parts.is_empty() {
        return Err(reject("scene", "no parts").into());
    }
    Scene::from_parts(&id, parts)
}
