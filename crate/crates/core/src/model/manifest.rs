use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub reference_label: Option<u32>,
}

/// The list of images to evaluate.
///
/// ```json
/// {"entries":[{"id":"img1","image_path":"a.png","reference_label":3}]}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Schema validation only; paths are left as written.
pub fn parse_manifest(text: &str) -> Result<Manifest, ModelError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| ModelError::schema("$", e.to_string()))?;
    let entries = root
        .as_object()
        .ok_or_else(|| ModelError::schema("$", "expected an object"))?
        .get("entries")
        .ok_or_else(|| ModelError::schema("entries", "missing"))?
        .as_array()
        .ok_or_else(|| ModelError::schema("entries", "expected an array"))?;

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for (i, raw) in entries.iter().enumerate() {
        let at = |field: &str| format!("entries[{i}].{field}");
        let obj = raw
            .as_object()
            .ok_or_else(|| ModelError::schema(format!("entries[{i}]"), "expected an object"))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| ModelError::schema(at("id"), "expected a string"))?;
        if id.is_empty() {
            return Err(ModelError::schema(at("id"), "must not be empty"));
        }
        let image_path = obj
            .get("image_path")
            .and_then(Value::as_str)
            .ok_or_else(|| ModelError::schema(at("image_path"), "expected a string"))?;
        let reference_label = match obj.get("reference_label") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .and_then(|l| u32::try_from(l).ok())
                    .ok_or_else(|| {
                        ModelError::schema(at("reference_label"), "expected a non-negative integer")
                    })?,
            ),
        };
        if !seen.insert(id.to_owned()) {
            return Err(ModelError::DuplicateId(id.to_owned()));
        }
        out.push(ManifestEntry {
            id: id.to_owned(),
            image_path: PathBuf::from(image_path),
            reference_label,
        });
    }
    Ok(Manifest { entries: out })
}

/// Reads and validates a manifest. Relative image paths are resolved against
/// the manifest's directory and must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ModelError::MissingFile(path.to_path_buf()),
        _ => ModelError::Io(e),
    })?;
    let mut manifest = parse_manifest(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for entry in &mut manifest.entries {
        if entry.image_path.is_relative() {
            entry.image_path = base.join(&entry.image_path);
        }
        if !entry.image_path.is_file() {
            return Err(ModelError::MissingFile(entry.image_path.clone()));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_entries() {
        let m = parse_manifest(
            r#"{"entries":[{"id":"a","image_path":"a.png","reference_label":3},
                          {"id":"b","image_path":"b.jpg","reference_label":null}]}"#,
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[0].reference_label, Some(3));
        assert_eq!(m.entries[1].reference_label, None);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_manifest(
            r#"{"entries":[{"id":"img1","image_path":"a.png"},{"id":"img1","image_path":"b.png"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateId(id) if id == "img1"));
    }

    #[test]
    fn empty_entries_is_valid() {
        assert!(parse_manifest(r#"{"entries":[]}"#).unwrap().is_empty());
    }

    #[test]
    fn schema_violations_name_the_field() {
        let cases = [
            (r#"[]"#, "$"),
            (r#"{}"#, "entries"),
            (r#"{"entries":[{"image_path":"a"}]}"#, "entries[0].id"),
            (r#"{"entries":[{"id":"a","image_path":5}]}"#, "entries[0].image_path"),
            (
                r#"{"entries":[{"id":"a","image_path":"x","reference_label":-1}]}"#,
                "entries[0].reference_label",
            ),
        ];
        for (text, field) in cases {
            match parse_manifest(text) {
                Err(ModelError::SchemaViolation { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn load_resolves_relative_paths_and_checks_existence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"x").unwrap();
        let mpath = dir.path().join("m.json");
        std::fs::write(&mpath, r#"{"entries":[{"id":"a","image_path":"a.png"}]}"#).unwrap();
        let m = load_manifest(&mpath).unwrap();
        assert_eq!(m.entries[0].image_path, dir.path().join("a.png"));

        std::fs::write(&mpath, r#"{"entries":[{"id":"a","image_path":"nope.png"}]}"#).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(ModelError::MissingFile(_))));
        assert!(matches!(
            load_manifest(dir.path().join("absent.json")),
            Err(ModelError::MissingFile(_))
        ));
    }
}
