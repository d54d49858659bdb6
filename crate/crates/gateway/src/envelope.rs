use bci_core::intent::{
    catalog_from_value, plan_from_value, DeviceCatalog, Domain, IntentError, SchemaIssue, TaskPlan,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{GatewayError, LlmRequest, RequestContext, RequestKind};

/// JSON Schema every reply must satisfy; embedded verbatim in prompts.
pub const ENVELOPE_SCHEMA: &str = r#"{
  "type": "object",
  "required": ["kind"],
  "oneOf": [
    {
      "properties": {
        "kind": {"const": "catalog"},
        "catalog": {
          "type": "object",
          "required": ["devices"],
          "properties": {
            "devices": {
              "type": "array",
              "minItems": 1,
              "items": {
                "type": "object",
                "required": ["name", "functions", "status", "address"],
                "properties": {
                  "name": {"type": "string"},
                  "type": {"type": "string"},
                  "functions": {
                    "type": "array",
                    "items": {
                      "type": "object",
                      "required": ["id"],
                      "properties": {
                        "id": {"type": "string"},
                        "display": {"type": "string"},
                        "args": {"type": "array", "items": {"enum": ["int", "real", "number", "word"]}},
                        "instruction": {"type": "string", "pattern": "^\\$[^(]+\\(.*\\)$"}
                      }
                    }
                  },
                  "status": {"type": "object", "additionalProperties": {"type": "string"}},
                  "address": {"type": "string"}
                }
              }
            }
          }
        }
      },
      "required": ["catalog"]
    },
    {
      "properties": {
        "kind": {"const": "task_plan"},
        "plan": {
          "type": "object",
          "required": ["domain", "steps"],
          "properties": {
            "goal": {"type": "string"},
            "domain": {"enum": ["arm", "uav", "home"]},
            "steps": {
              "type": "array",
              "minItems": 1,
              "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                  "kind": {"enum": ["movement", "posture", "grab", "place", "path", "speed", "task"]},
                  "params": {"type": "object"},
                  "instruction": {"type": "string"},
                  "description": {"type": "string"}
                }
              }
            }
          }
        }
      },
      "required": ["plan"]
    },
    {
      "properties": {
        "kind": {"const": "clarification"},
        "question": {"type": "string", "minLength": 1}
      },
      "required": ["question"]
    }
  ]
}"#;

/// A validated reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Catalog(DeviceCatalog),
    TaskPlan(TaskPlan),
    Clarification { question: String },
}

fn issue(path: &str, message: impl Into<String>) -> SchemaIssue {
    SchemaIssue {
        path: path.into(),
        message: message.into(),
    }
}

fn nested(err: IntentError, prefix: &str) -> Vec<SchemaIssue> {
    match err {
        IntentError::Schema(v) => v
            .into_iter()
            .map(|i| SchemaIssue {
                path: i.path.replacen('$', prefix, 1),
                message: i.message,
            })
            .collect(),
        other => vec![issue(prefix, other.to_string())],
    }
}

/// Parses the reply as JSON, tolerating a Markdown code fence or prose around
/// a single object.
fn extract_json(raw: &str) -> Result<Value, String> {
    let t = raw.trim();
    let unfenced = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .and_then(|s| s.trim_end().strip_suffix("```"))
        .unwrap_or(t)
        .trim();
    match serde_json::from_str::<Value>(unfenced) {
        Ok(v) => Ok(v),
        Err(e) => {
            let (Some(a), Some(b)) = (unfenced.find('{'), unfenced.rfind('}')) else {
                return Err(e.to_string());
            };
            if a < b {
                serde_json::from_str(&unfenced[a..=b]).map_err(|_| e.to_string())
            } else {
                Err(e.to_string())
            }
        }
    }
}

fn check(raw: &str, req: &LlmRequest) -> Result<Payload, Vec<SchemaIssue>> {
    let value = extract_json(raw).map_err(|e| vec![issue("$", format!("reply is not JSON: {e}"))])?;
    let Value::Object(obj) = &value else {
        return Err(vec![issue("$", "reply must be a JSON object")]);
    };
    let kind = match obj.get("kind") {
        Some(Value::String(k)) => k.as_str(),
        _ => return Err(vec![issue("$.kind", "missing or not a string")]),
    };
    let body_key = match kind {
        "catalog" => "catalog",
        "task_plan" => "plan",
        "clarification" => "question",
        other => {
            return Err(vec![issue(
                "$.kind",
                format!("{other:?} is not one of catalog, task_plan, clarification"),
            )])
        }
    };
    let mut issues: Vec<SchemaIssue> = obj
        .keys()
        .filter(|k| !["kind", "schema_version", body_key].contains(&k.as_str()))
        .map(|k| issue(&format!("$.{k}"), "unexpected field"))
        .collect();
    let Some(body) = obj.get(body_key) else {
        issues.push(issue(&format!("$.{body_key}"), "missing"));
        return Err(issues);
    };
    let payload = match kind {
        "catalog" => {
            if req.kind != RequestKind::ParadigmPlan {
                issues.push(issue("$.kind", "a catalog does not answer a task-plan request"));
                return Err(issues);
            }
            let catalog = catalog_from_value(body).map_err(|e| {
                let mut v = issues.clone();
                v.extend(nested(e, "$.catalog"));
                v
            })?;
            if catalog.is_empty() {
                issues.push(issue("$.catalog.devices", "no devices"));
            }
            if let Some(known) = req.catalog() {
                for (i, e) in catalog.entries.iter().enumerate() {
                    if known.get(&e.name).is_none() {
                        issues.push(issue(
                            &format!("$.catalog.devices[{i}].name"),
                            format!("{:?} is not a known device", e.name),
                        ));
                    }
                }
            }
            Payload::Catalog(catalog)
        }
        "task_plan" => {
            let declared = body.get("domain").and_then(Value::as_str).and_then(Domain::parse);
            let domain = match (&req.context, declared) {
                (RequestContext::Domain(d), _) => Some(*d),
                (_, Some(d)) => Some(d),
                _ => None,
            };
            let Some(domain) = domain else {
                issues.push(issue("$.plan.domain", "missing or not one of arm, uav, home"));
                return Err(issues);
            };
            match plan_from_value(body, domain) {
                Ok(plan) => Payload::TaskPlan(plan),
                Err(e) => {
                    issues.extend(nested(e, "$.plan"));
                    return Err(issues);
                }
            }
        }
        _ => match body {
            Value::String(q) if !q.trim().is_empty() => Payload::Clarification { question: q.clone() },
            _ => {
                issues.push(issue("$.question", "must be a non-empty string"));
                return Err(issues);
            }
        },
    };
    if issues.is_empty() {
        Ok(payload)
    } else {
        Err(issues)
    }
}

/// Validates reply text against the envelope schema and the request.
pub fn validate_response(raw: &str, req: &LlmRequest) -> Result<Payload, GatewayError> {
    check(raw, req).map_err(|issues| GatewayError::Schema {
        issues,
        raw: raw.to_string(),
    })
}

impl Payload {
    /// Envelope JSON that [`validate_response`] accepts.
    pub fn to_envelope(&self) -> Value {
        match self {
            Self::Catalog(c) => serde_json::json!({"kind": "catalog", "catalog": c.to_value()}),
            Self::TaskPlan(p) => serde_json::json!({"kind": "task_plan", "plan": p.to_value()}),
            Self::Clarification { question } => serde_json::json!({"kind": "clarification", "question": question}),
        }
    }
}
