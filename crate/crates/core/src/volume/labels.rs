use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, Volume, VolumeError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub raw: i64,
    pub id: u16,
    pub name: String,
}

/// Mapping from raw atlas ids to contiguous internal ids `1..n_labels`.
/// Internal id 0 is background and is never listed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTable {
    labels: Vec<LabelEntry>,
}

impl LabelTable {
    pub fn new(labels: Vec<LabelEntry>) -> Result<Self> {
        let t = Self { labels };
        t.validate()?;
        Ok(t)
    }

    /// Internal ids `1..=n` with raw id equal to internal id.
    pub fn identity(n: u16) -> Self {
        Self {
            labels: (1..=n)
                .map(|i| LabelEntry {
                    raw: i as i64,
                    id: i,
                    name: format!("label_{i}"),
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut raws = HashSet::new();
        let mut ids = HashSet::new();
        for e in &self.labels {
            if !raws.insert(e.raw) {
                return Err(VolumeError::LabelTable(format!("duplicate raw id {}", e.raw)));
            }
            if !ids.insert(e.id) {
                return Err(VolumeError::LabelTable(format!("duplicate internal id {}", e.id)));
            }
        }
        let n = self.labels.len() as u16;
        if let Some(bad) = self.labels.iter().find(|e| e.id == 0 || e.id > n) {
            return Err(VolumeError::LabelTable(format!(
                "internal id {} outside 1..={n}",
                bad.id
            )));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.labels
    }

    /// Total label count including background.
    pub fn n_labels(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn name_of(&self, id: u16) -> Option<&str> {
        if id == 0 {
            return Some("background");
        }
        self.labels.iter().find(|e| e.id == id).map(|e| e.name.as_str())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let t: LabelTable = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("label table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Maps raw ids to internal ids; ids missing from the table become 0.
pub fn remap_labels(v: &Volume, table: &LabelTable) -> Result<Volume> {
    if !v.dtype().is_integer() {
        return Err(VolumeError::NotInteger(v.dtype()));
    }
    let map: HashMap<i64, u16> = table.labels.iter().map(|e| (e.raw, e.id)).collect();
    let out: Vec<u16> = (0..v.len())
        .map(|i| {
            let raw = v.data().get_i64(i).expect("integer dtype");
            map.get(&raw).copied().unwrap_or(0)
        })
        .collect();
    Volume::from_labels(v.dims(), v.spacing(), &out)
}
