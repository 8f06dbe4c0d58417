use std::path::{Path, PathBuf};

use mgltree::algorithms::Fallback;
use mgltree::bounds::EpsilonSpec;
use mgltree::data::{load_csv, AttributeSchema, Dataset, SplitSpec};
use mgltree::eval::{DataSource, ExperimentConfig, Method};
use mgltree::groups::HierarchySpec;
use mgltree::learners::LearnerSpec;
use mgltree::risk::Loss;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

fn default_methods() -> Vec<Method> {
    vec![Method::Erm, Method::GroupErm, Method::Prepend, Method::MglTree]
}

fn default_trials() -> usize {
    10
}

fn default_fallback() -> Fallback {
    Fallback::Root
}

/// Everything a run needs, in one JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// CSV path, relative to the config file.
    pub data: PathBuf,
    pub schema: AttributeSchema,
    pub hierarchy: HierarchySpec,
    pub learners: Vec<LearnerSpec>,
    pub epsilon: EpsilonSpec,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub prepend_cap: Option<usize>,
    #[serde(default = "default_fallback")]
    pub fallback: Fallback,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub struct Loaded {
    pub file: RunConfigFile,
    pub base: PathBuf,
}

/// Sets `a.b.c` in a JSON object. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Failure::usage(format!("--set {key}: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Failure::usage("--set with an empty key"))
}

impl Loaded {
    pub fn read(path: &Path, overrides: &[String]) -> Result<Loaded, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let file: RunConfigFile = serde_json::from_value(doc)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        file.schema.validate().map_err(|e| Failure::usage(e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { file, base })
    }

    pub fn data_path(&self) -> PathBuf {
        self.base.join(&self.file.data)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.file.output_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.base.join(p),
            (None, None) => self.base.join("out"),
        }
    }

    pub fn dataset(&self) -> mgltree::Result<Dataset> {
        load_csv(self.data_path(), &self.file.schema)
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let f = &self.file;
        ExperimentConfig {
            data: Some(DataSource {
                path: self.data_path(),
                schema: f.schema.clone(),
            }),
            hierarchy: f.hierarchy.clone(),
            learners: f.learners.clone(),
            epsilon: f.epsilon,
            loss: f.loss,
            trials: f.trials,
            test_fraction: f.split.test_fraction,
            seed: f.split.seed,
            methods: f.methods.clone(),
            prepend_cap: f.prepend_cap,
            fallback: f.fallback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_nest_and_parse() {
        let mut doc = json!({"trials": 10, "split": {"seed": 1}});
        apply_override(&mut doc, "trials=3").unwrap();
        apply_override(&mut doc, "split.seed=9").unwrap();
        apply_override(&mut doc, "data=other.csv").unwrap();
        apply_override(&mut doc, "epsilon.kind=constant").unwrap();
        assert_eq!(doc["trials"], 3);
        assert_eq!(doc["split"]["seed"], 9);
        assert_eq!(doc["data"], "other.csv");
        assert_eq!(doc["epsilon"]["kind"], "constant");
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "trials.x=1").is_err());
    }
}
