use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    BinaryLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Pre-declared category set. When absent, categories are inferred from
    /// the data (sorted distinct values).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn categorical(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: None,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: None,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::BinaryLabel,
            categories: None,
        }
    }
}

/// Derives a categorical attribute from a numeric column.
///
/// A value `v` maps to `labels[i]` for the first `i` with `v < edges[i]`,
/// and to the last label when `v` is at or above every edge. With edges
/// `[35, 60]` and labels `[Ya, Ma, Oa]` this gives `age < 35`,
/// `35 <= age < 60` and `age >= 60`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub source: String,
    pub name: String,
    pub edges: Vec<f64>,
    pub labels: Vec<String>,
}

impl BinSpec {
    pub fn assign(&self, value: f64) -> usize {
        self.edges
            .iter()
            .position(|&edge| value < edge)
            .unwrap_or(self.edges.len())
    }
}

/// Column layout of a tabular dataset and the attributes used for grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    pub columns: Vec<ColumnSpec>,
    pub label: String,
    #[serde(default)]
    pub group_attributes: Vec<String>,
    #[serde(default)]
    pub bins: Vec<BinSpec>,
    /// Drop group attributes from the model feature vector.
    #[serde(default)]
    pub exclude_group_features: bool,
}

impl AttributeSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: AttributeSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn bin(&self, name: &str) -> Option<&BinSpec> {
        self.bins.iter().find(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self
            .columns
            .iter()
            .map(|c| &c.name)
            .chain(self.bins.iter().map(|b| &b.name))
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{name}`")));
            }
        }

        match self.column(&self.label) {
            None => {
                return Err(Error::Schema(format!(
                    "missing label column `{}`",
                    self.label
                )))
            }
            Some(c) if c.kind != ColumnKind::BinaryLabel => {
                return Err(Error::Schema(format!(
                    "label column `{}` must have kind binary_label",
                    self.label
                )))
            }
            Some(_) => {}
        }
        if let Some(extra) = self
            .columns
            .iter()
            .find(|c| c.kind == ColumnKind::BinaryLabel && c.name != self.label)
        {
            return Err(Error::Schema(format!(
                "column `{}` has kind binary_label but is not the label",
                extra.name
            )));
        }

        for column in &self.columns {
            if let Some(cats) = &column.categories {
                if column.kind != ColumnKind::Categorical {
                    return Err(Error::Schema(format!(
                        "column `{}` declares categories but is not categorical",
                        column.name
                    )));
                }
                let distinct: HashSet<_> = cats.iter().collect();
                if distinct.len() != cats.len() {
                    return Err(Error::Schema(format!(
                        "column `{}` declares duplicate categories",
                        column.name
                    )));
                }
            }
        }

        for bin in &self.bins {
            match self.column(&bin.source) {
                Some(c) if c.kind == ColumnKind::Numeric => {}
                Some(_) => {
                    return Err(Error::Schema(format!(
                        "bin `{}` source `{}` is not numeric",
                        bin.name, bin.source
                    )))
                }
                None => {
                    return Err(Error::Schema(format!(
                        "bin `{}` references missing column `{}`",
                        bin.name, bin.source
                    )))
                }
            }
            if bin.labels.len() != bin.edges.len() + 1 {
                return Err(Error::Schema(format!(
                    "bin `{}` needs {} labels for {} edges",
                    bin.name,
                    bin.edges.len() + 1,
                    bin.edges.len()
                )));
            }
            if bin.edges.windows(2).any(|w| !(w[0] < w[1])) || bin.edges.iter().any(|e| !e.is_finite()) {
                return Err(Error::Schema(format!(
                    "bin `{}` edges must be finite and strictly increasing",
                    bin.name
                )));
            }
        }

        for attr in &self.group_attributes {
            let categorical = self.bin(attr).is_some()
                || matches!(self.column(attr), Some(c) if c.kind == ColumnKind::Categorical);
            if !categorical {
                return match self.column(attr) {
                    None => Err(Error::Schema(format!(
                        "group attribute `{attr}` is not a column"
                    ))),
                    Some(_) => Err(Error::Schema(format!(
                        "group attribute `{attr}` must be categorical (bin numeric attributes first)"
                    ))),
                };
            }
        }
        Ok(())
    }
}

/// Where a categorical attribute's values come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeSource {
    Column,
    Bin { source: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub categories: Vec<String>,
    pub source: AttributeSource,
}

impl Attribute {
    pub fn code(&self, category: &str) -> Option<u32> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| i as u32)
    }
}

/// The resolved categorical attributes of a dataset: every categorical
/// column followed by every bin, with concrete category lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttributeSet {
    attrs: Vec<Attribute>,
}

impl AttributeSet {
    pub fn new(attrs: Vec<Attribute>) -> Self {
        AttributeSet { attrs }
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attrs.iter()
    }

    pub fn get(&self, index: usize) -> &Attribute {
        &self.attrs[index]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Attribute> {
        self.attrs.iter().find(|a| a.name == name)
    }
}
