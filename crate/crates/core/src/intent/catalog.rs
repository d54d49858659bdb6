use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{parse_instruction, ControlInstruction, IntentError, SchemaIssue};

pub const CATALOG_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgKind {
    Int,
    Real,
    Number,
    Word,
}

impl ArgKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "int" | "integer" => Some(Self::Int),
            "real" | "float" => Some(Self::Real),
            "number" => Some(Self::Number),
            "word" | "text" | "string" => Some(Self::Word),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFunction {
    pub id: String,
    pub display: String,
    /// Argument signature; empty for argument-free functions.
    pub args: Vec<ArgKind>,
    /// Concrete instruction this function issues, when the catalog pins one.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "instruction_text")]
    pub instruction: Option<ControlInstruction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    /// Instruction device name such as `Lamp` or `Robot arm`.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub device_type: Option<String>,
    pub functions: Vec<DeviceFunction>,
    pub status: BTreeMap<String, String>,
    pub address: String,
    /// Fields this schema does not know, kept verbatim.
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceCatalog {
    #[serde(rename = "devices")]
    pub entries: Vec<CatalogEntry>,
}

mod instruction_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::intent::{parse_instruction, ControlInstruction};

    pub fn serialize<S: Serializer>(v: &Option<ControlInstruction>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(i) => s.serialize_str(&i.render()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ControlInstruction>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| parse_instruction(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl DeviceCatalog {
    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("catalog serializes")
    }

    pub fn to_value(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("schema_version".into(), CATALOG_SCHEMA_VERSION.into());
        doc.insert(
            "devices".into(),
            serde_json::to_value(&self.entries).expect("catalog serializes"),
        );
        Value::Object(doc)
    }
}

impl CatalogEntry {
    /// Instruction issued by `function`: the pinned one, otherwise
    /// `$<type or name> (<function id>)`.
    pub fn action_for(&self, function: &DeviceFunction) -> Result<ControlInstruction, IntentError> {
        if let Some(i) = &function.instruction {
            return Ok(i.clone());
        }
        let device = self.device_type.as_deref().unwrap_or(&self.name);
        let text = format!("${device} ({})", function.id);
        parse_instruction(&text).map_err(|e| IntentError::InvalidInstruction(format!("{text}: {e}")))
    }
}

struct Issues(Vec<SchemaIssue>);

impl Issues {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(SchemaIssue {
            path: path.to_string(),
            message: message.into(),
        });
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_function(v: &Value, path: &str, issues: &mut Issues) -> Option<DeviceFunction> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(DeviceFunction {
            id: s.trim().to_string(),
            display: s.trim().to_string(),
            args: Vec::new(),
            instruction: None,
        }),
        Value::Object(obj) => {
            let before = issues.0.len();
            let id = match obj.get("id") {
                Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
                Some(_) => {
                    issues.push(&format!("{path}.id"), "must be a non-empty string");
                    String::new()
                }
                None => {
                    issues.push(&format!("{path}.id"), "missing");
                    String::new()
                }
            };
            let display = match obj.get("display") {
                None => id.clone(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => {
                    issues.push(&format!("{path}.display"), "must be a string");
                    String::new()
                }
            };
            let mut args = Vec::new();
            match obj.get("args") {
                None => {}
                Some(Value::Array(kinds)) => {
                    for (k, kind) in kinds.iter().enumerate() {
                        match kind.as_str().and_then(ArgKind::parse) {
                            Some(a) => args.push(a),
                            None => {
                                issues.push(&format!("{path}.args[{k}]"), "expected one of int, real, number, word")
                            }
                        }
                    }
                }
                Some(_) => issues.push(&format!("{path}.args"), "must be an array"),
            }
            let instruction = match obj.get("instruction") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => match parse_instruction(s) {
                    Ok(i) => Some(i),
                    Err(e) => {
                        issues.push(&format!("{path}.instruction"), e.to_string());
                        None
                    }
                },
                Some(_) => {
                    issues.push(&format!("{path}.instruction"), "must be an instruction string");
                    None
                }
            };
            (issues.0.len() == before).then_some(DeviceFunction {
                id,
                display,
                args,
                instruction,
            })
        }
        _ => {
            issues.push(path, "function must be a non-empty string or an object");
            None
        }
    }
}

fn parse_entry(v: &Value, path: &str, issues: &mut Issues) -> Option<CatalogEntry> {
    let Value::Object(obj) = v else {
        issues.push(path, "device must be an object");
        return None;
    };
    let before = issues.0.len();
    let name = match obj.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => {
            issues.push(&format!("{path}.name"), "must be a non-empty string");
            String::new()
        }
        None => {
            issues.push(&format!("{path}.name"), "missing");
            String::new()
        }
    };
    let device_type = match obj.get("type") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Some(_) => {
            issues.push(&format!("{path}.type"), "must be a non-empty string");
            None
        }
    };
    let mut functions = Vec::new();
    match obj.get("functions") {
        Some(Value::Array(items)) => {
            for (i, f) in items.iter().enumerate() {
                if let Some(f) = parse_function(f, &format!("{path}.functions[{i}]"), issues) {
                    functions.push(f);
                }
            }
        }
        Some(_) => issues.push(&format!("{path}.functions"), "must be an array"),
        None => issues.push(&format!("{path}.functions"), "missing"),
    }
    let mut status = BTreeMap::new();
    match obj.get("status") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => {
            status.insert("power".to_string(), s.clone());
        }
        Some(Value::Object(m)) => {
            for (k, v) in m {
                match scalar_text(v) {
                    Some(t) => {
                        status.insert(k.clone(), t);
                    }
                    None => issues.push(&format!("{path}.status.{k}"), "must be a string, number or boolean"),
                }
            }
        }
        Some(_) => issues.push(&format!("{path}.status"), "must be a string or an object"),
    }
    let address = match obj.get("address") {
        None | Some(Value::Null) => String::new(),
        Some(v) => scalar_text(v).unwrap_or_else(|| {
            issues.push(&format!("{path}.address"), "must be a string");
            String::new()
        }),
    };
    let extras = obj
        .iter()
        .filter(|(k, _)| !["name", "type", "functions", "status", "address"].contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    (issues.0.len() == before).then_some(CatalogEntry {
        name,
        device_type,
        functions,
        status,
        address,
        extras,
    })
}

/// Parses a catalog document, either `{"devices": [...]}` or a bare array.
/// Either the whole catalog is returned or every problem found, each tagged
/// with its JSON path.
pub fn parse_device_catalog(doc: &str) -> Result<DeviceCatalog, IntentError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| {
        IntentError::Schema(vec![SchemaIssue {
            path: "$".into(),
            message: format!("malformed JSON: {e}"),
        }])
    })?;
    catalog_from_value(&value)
}

pub fn catalog_from_value(value: &Value) -> Result<DeviceCatalog, IntentError> {
    let mut issues = Issues(Vec::new());
    let (items, base) = match value {
        Value::Array(items) => (items.as_slice(), "$".to_string()),
        Value::Object(obj) => {
            match obj.get("schema_version") {
                None => {}
                Some(v) if v.as_u64() == Some(CATALOG_SCHEMA_VERSION) => {}
                Some(_) => issues.push("$.schema_version", format!("expected {CATALOG_SCHEMA_VERSION}")),
            }
            match obj.get("devices") {
                Some(Value::Array(items)) => (items.as_slice(), "$.devices".to_string()),
                Some(_) => {
                    issues.push("$.devices", "must be an array");
                    return Err(IntentError::Schema(issues.0));
                }
                None => {
                    issues.push("$.devices", "missing");
                    return Err(IntentError::Schema(issues.0));
                }
            }
        }
        _ => {
            issues.push("$", "expected an object or an array");
            return Err(IntentError::Schema(issues.0));
        }
    };

    let mut entries: Vec<CatalogEntry> = Vec::new();
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("{base}[{i}]");
        if let Some(entry) = parse_entry(item, &path, &mut issues) {
            let name_path = format!("{path}.name");
            if let Some(first) = seen.get(&entry.name) {
                issues.push(
                    &name_path,
                    format!("duplicate device name {:?} (first at {first})", entry.name),
                );
                continue;
            }
            seen.insert(entry.name.clone(), name_path);
            entries.push(entry);
        }
    }
    if issues.0.is_empty() {
        Ok(DeviceCatalog { entries })
    } else {
        Err(IntentError::Schema(issues.0))
    }
}
