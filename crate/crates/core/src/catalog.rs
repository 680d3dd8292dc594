//! The operation catalog: which editing operations exist, their category,
//! and which entity roles they accept as objects and parameters.
//!
//! The catalog is data, loaded from a TOML document (`data/catalog.toml`
//! ships as the built-in catalog), so new operations need no code change.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ComponentKind;

const BUILTIN: &str = include_str!("../data/catalog.toml");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog is not valid TOML: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("operation `{op}` references unknown {what} `{name}`")]
    UnknownReference {
        op: String,
        what: &'static str,
        name: String,
    },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown value kind `{0}`")]
    UnknownKind(String),
}

/// The six operation categories, in execution-rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Data,
    Encoding,
    Mark,
    Styling,
    Layout,
    Annotate,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Data,
        Category::Encoding,
        Category::Mark,
        Category::Styling,
        Category::Layout,
        Category::Annotate,
    ];

    /// Global operations rank before local ones.
    pub fn rank(self) -> usize {
        self as usize
    }
}

impl FromStr for Category {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| format!("{c:?}") == s)
            .ok_or_else(|| CatalogError::UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// How values of a parameter role are written and read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Color,
    Measure,
    Field,
    Keyword,
    Text,
    Bool,
    Count,
    Range,
    Position,
    Literal,
}

impl FromStr for ValueKind {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "color" => ValueKind::Color,
            "measure" => ValueKind::Measure,
            "field" => ValueKind::Field,
            "keyword" => ValueKind::Keyword,
            "text" => ValueKind::Text,
            "bool" => ValueKind::Bool,
            "count" => ValueKind::Count,
            "range" => ValueKind::Range,
            "position" => ValueKind::Position,
            "literal" => ValueKind::Literal,
            other => return Err(CatalogError::UnknownKind(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterRole {
    pub name: String,
    pub kind: ValueKind,
    /// Allowed keyword values; empty means unrestricted.
    pub options: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleClass {
    Object,
    Parameter,
}

/// A BIO entity role and how synthesis treats it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRole {
    pub name: String,
    pub class: RoleClass,
    /// Parameter role used when the entity is packaged without an operation.
    pub parameter: Option<String>,
    /// Property name under which the entity can refine an object selector.
    pub selector_property: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationKind {
    pub name: String,
    pub category: Category,
    pub expected_object_roles: BTreeSet<String>,
    /// entity role -> parameter role
    pub parameter_map: BTreeMap<String, String>,
    pub implied_objects: Vec<ComponentKind>,
}

impl OperationKind {
    /// Parameter roles this operation can receive.
    pub fn expected_parameter_roles(&self) -> BTreeSet<&str> {
        self.parameter_map.values().map(String::as_str).collect()
    }

    pub fn accepts_object(&self, entity_role: &str) -> bool {
        self.expected_object_roles.contains(entity_role)
    }

    pub fn parameter_for(&self, entity_role: &str) -> Option<&str> {
        self.parameter_map.get(entity_role).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub version: String,
    operations: Vec<OperationKind>,
    index: BTreeMap<String, usize>,
    parameter_roles: BTreeMap<String, ParameterRole>,
    entity_roles: BTreeMap<String, EntityRole>,
}

#[derive(Deserialize)]
struct RawCatalog {
    version: String,
    #[serde(default)]
    parameter_role: Vec<RawParameterRole>,
    #[serde(default)]
    entity_role: Vec<RawEntityRole>,
    #[serde(default)]
    operation: Vec<RawOperation>,
}

#[derive(Deserialize)]
struct RawParameterRole {
    name: String,
    kind: String,
    #[serde(default)]
    options: Vec<String>,
}

#[derive(Deserialize)]
struct RawEntityRole {
    name: String,
    class: String,
    parameter: Option<String>,
    selector_property: Option<String>,
}

#[derive(Deserialize)]
struct RawOperation {
    name: String,
    category: String,
    #[serde(default)]
    objects: Vec<String>,
    #[serde(default)]
    implied_objects: Vec<String>,
    #[serde(default)]
    parameters: BTreeMap<String, String>,
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_toml(BUILTIN).expect("built-in catalog is valid"))
    }

    pub fn from_toml(text: &str) -> Result<Catalog, CatalogError> {
        let raw: RawCatalog = toml::from_str(text)?;

        let mut parameter_roles = BTreeMap::new();
        for p in raw.parameter_role {
            let role = ParameterRole {
                kind: p.kind.parse()?,
                name: p.name.clone(),
                options: p.options,
            };
            if parameter_roles.insert(p.name.clone(), role).is_some() {
                return Err(CatalogError::Duplicate {
                    what: "parameter role",
                    name: p.name,
                });
            }
        }

        let mut entity_roles = BTreeMap::new();
        for e in raw.entity_role {
            let class = match e.class.as_str() {
                "object" => RoleClass::Object,
                "parameter" => RoleClass::Parameter,
                other => return Err(CatalogError::UnknownKind(other.to_string())),
            };
            if let Some(p) = &e.parameter {
                if !parameter_roles.contains_key(p) {
                    return Err(CatalogError::UnknownReference {
                        op: e.name.clone(),
                        what: "parameter role",
                        name: p.clone(),
                    });
                }
            }
            let role = EntityRole {
                name: e.name.clone(),
                class,
                parameter: e.parameter,
                selector_property: e.selector_property,
            };
            if entity_roles.insert(e.name.clone(), role).is_some() {
                return Err(CatalogError::Duplicate {
                    what: "entity role",
                    name: e.name,
                });
            }
        }

        let mut operations = Vec::new();
        let mut index = BTreeMap::new();
        for op in raw.operation {
            for role in op.objects.iter().chain(op.parameters.keys()) {
                if !entity_roles.contains_key(role) {
                    return Err(CatalogError::UnknownReference {
                        op: op.name.clone(),
                        what: "entity role",
                        name: role.clone(),
                    });
                }
            }
            for param in op.parameters.values() {
                if !parameter_roles.contains_key(param) {
                    return Err(CatalogError::UnknownReference {
                        op: op.name.clone(),
                        what: "parameter role",
                        name: param.clone(),
                    });
                }
            }
            let mut implied = Vec::new();
            for name in &op.implied_objects {
                let kind = ComponentKind::from_name(name).ok_or_else(|| CatalogError::UnknownReference {
                    op: op.name.clone(),
                    what: "component",
                    name: name.clone(),
                })?;
                implied.push(kind);
            }
            if index.insert(op.name.clone(), operations.len()).is_some() {
                return Err(CatalogError::Duplicate {
                    what: "operation",
                    name: op.name,
                });
            }
            operations.push(OperationKind {
                category: op.category.parse()?,
                name: op.name,
                expected_object_roles: op.objects.into_iter().collect(),
                parameter_map: op.parameters,
                implied_objects: implied,
            });
        }

        Ok(Catalog {
            version: raw.version,
            operations,
            index,
            parameter_roles,
            entity_roles,
        })
    }

    pub fn operation(&self, name: &str) -> Option<&OperationKind> {
        self.index.get(name).map(|&i| &self.operations[i])
    }

    pub fn operations(&self) -> &[OperationKind] {
        &self.operations
    }

    pub fn parameter_role(&self, name: &str) -> Option<&ParameterRole> {
        self.parameter_roles.get(name)
    }

    pub fn parameter_roles(&self) -> impl Iterator<Item = &ParameterRole> {
        self.parameter_roles.values()
    }

    pub fn entity_role(&self, name: &str) -> Option<&EntityRole> {
        self.entity_roles.get(name)
    }

    pub fn entity_roles(&self) -> impl Iterator<Item = &EntityRole> {
        self.entity_roles.values()
    }

    pub fn category_of(&self, op: &str) -> Option<Category> {
        self.operation(op).map(|o| o.category)
    }
}
