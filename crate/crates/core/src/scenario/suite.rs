use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Category, Scenario, ScenarioError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub name: String,
    pub file: String,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub scenarios: Vec<ManifestEntry>,
}

impl SuiteManifest {
    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.scenarios {
            *counts.entry(e.category).or_insert(0) += 1;
        }
        counts
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: display.clone(), source })?;
    let s: Scenario = serde_json::from_str(&text).map_err(|source| ScenarioError::Parse { path: display, source })?;
    s.validate()?;
    Ok(s)
}

/// The scenario files listed by a `manifest.json`, loaded and validated.
#[derive(Clone, Debug)]
pub struct Suite {
    pub dir: PathBuf,
    pub manifest: SuiteManifest,
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    pub fn load(dir: impl AsRef<Path>) -> Result<Suite, ScenarioError> {
        let dir = dir.as_ref().to_path_buf();
        let manifest_path = dir.join("manifest.json");
        let display = manifest_path.display().to_string();
        let text = fs::read_to_string(&manifest_path)
            .map_err(|source| ScenarioError::Io { path: display.clone(), source })?;
        let manifest: SuiteManifest =
            serde_json::from_str(&text).map_err(|source| ScenarioError::Parse { path: display, source })?;
        let mut scenarios = Vec::with_capacity(manifest.scenarios.len());
        for entry in &manifest.scenarios {
            let s = load_scenario(&dir.join(&entry.file))?;
            if s.id != entry.id || s.category != entry.category {
                return Err(ScenarioError::Invalid {
                    id: entry.id.clone(),
                    reason: format!("manifest entry disagrees with {} (id {}, category {:?})", entry.file, s.id, s.category),
                });
            }
            scenarios.push(s);
        }
        Ok(Suite { dir, manifest, scenarios })
    }

    /// The suite shipped with the crate.
    pub fn bundled() -> Result<Suite, ScenarioError> {
        Suite::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios"))
    }

    pub fn from_scenarios(scenarios: Vec<Scenario>) -> Suite {
        let manifest = SuiteManifest {
            scenarios: scenarios
                .iter()
                .map(|s| ManifestEntry {
                    id: s.id.clone(),
                    name: s.name.clone(),
                    file: format!("{}.json", s.id),
                    category: s.category,
                })
                .collect(),
        };
        Suite { dir: PathBuf::new(), manifest, scenarios }
    }

    pub fn get(&self, id: &str) -> Result<&Scenario, ScenarioError> {
        self.scenarios.iter().find(|s| s.id == id).ok_or_else(|| ScenarioError::UnknownScenario(id.into()))
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}
