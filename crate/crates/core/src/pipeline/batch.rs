use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ProductInput;

/// One manifest line: `{"image": "path", "id": "optional external id"}`.
/// Relative paths resolve against the manifest's directory. A path ending in
/// `.txt` is read as a textual product description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ManifestEntry {
    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.image
                .file_name()
                .map_or_else(|| self.image.display().to_string(), |n| n.to_string_lossy().into_owned())
        })
    }

    /// Reads the referenced file.
    pub fn read(&self) -> std::io::Result<ProductInput> {
        let label = self.label();
        if self.image.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt")) {
            Ok(ProductInput::Text {
                text: std::fs::read_to_string(&self.image)?,
                label,
            })
        } else {
            Ok(ProductInput::Image {
                bytes: std::fs::read(&self.image)?,
                label,
            })
        }
    }
}

/// Parses a JSON-lines manifest; blank lines are skipped.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), n + 1))?;
        if entry.image.is_relative() {
            entry.image = base.join(&entry.image);
        }
        entries.push(entry);
    }
    Ok(entries)
}
