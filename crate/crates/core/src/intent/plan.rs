use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{parse_instruction, Arg, ControlInstruction, IntentError, SchemaIssue};

pub const PLAN_SCHEMA_VERSION: u64 = 1;

pub const ARM_DEVICE: &str = "Robot arm";
pub const UAV_DEVICE: &str = "Quadcopter";
pub const HOME_DEVICES: [&str; 4] = ["Lamp", "Thermostat", "Curtain", "TV"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Arm,
    Uav,
    Home,
}

impl Domain {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "arm" => Some(Self::Arm),
            "uav" => Some(Self::Uav),
            "home" => Some(Self::Home),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arm => "arm",
            Self::Uav => "uav",
            Self::Home => "home",
        }
    }

    pub fn device_types(self) -> &'static [&'static str] {
        match self {
            Self::Arm => &[ARM_DEVICE],
            Self::Uav => &[UAV_DEVICE],
            Self::Home => &HOME_DEVICES,
        }
    }

    fn kinds(self) -> &'static [StepKind] {
        match self {
            Self::Arm => &[
                StepKind::Movement,
                StepKind::Posture,
                StepKind::Grab,
                StepKind::Place,
                StepKind::Task,
            ],
            Self::Uav => &[StepKind::Path, StepKind::Speed, StepKind::Task],
            Self::Home => &[StepKind::Task],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Movement,
    Posture,
    Grab,
    Place,
    Path,
    Speed,
    Task,
}

impl StepKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "movement" => Self::Movement,
            "posture" => Self::Posture,
            "grab" => Self::Grab,
            "place" => Self::Place,
            "path" => Self::Path,
            "speed" => Self::Speed,
            "task" => Self::Task,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub kind: StepKind,
    #[serde(with = "instruction_string")]
    pub instruction: ControlInstruction,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub goal: String,
    pub domain: Domain,
    pub steps: Vec<PlanStep>,
}

mod instruction_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::intent::{parse_instruction, ControlInstruction};

    pub fn serialize<S: Serializer>(v: &ControlInstruction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ControlInstruction, D::Error> {
        let text = String::deserialize(d)?;
        parse_instruction(&text).map_err(serde::de::Error::custom)
    }
}

impl TaskPlan {
    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("plan serializes");
        v.as_object_mut()
            .expect("plan is an object")
            .insert("schema_version".into(), PLAN_SCHEMA_VERSION.into());
        v
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }
}

fn json_number(v: &Value) -> Option<Arg> {
    if let Some(i) = v.as_i64() {
        Some(Arg::Int(i))
    } else {
        v.as_f64().filter(|f| f.is_finite()).map(Arg::Real)
    }
}

struct StepParams<'a> {
    obj: Option<&'a Map<String, Value>>,
    path: String,
    issues: Vec<SchemaIssue>,
}

impl StepParams<'_> {
    fn has(&self, key: &str) -> bool {
        self.obj.is_some_and(|o| o.contains_key(key))
    }

    fn number(&mut self, key: &str, default: Option<i64>) -> Arg {
        match self.obj.and_then(|o| o.get(key)) {
            Some(v) => json_number(v).unwrap_or_else(|| {
                self.issue(key, "must be a number");
                Arg::Int(0)
            }),
            None => match default {
                Some(d) => Arg::Int(d),
                None => {
                    self.issue(key, "missing");
                    Arg::Int(0)
                }
            },
        }
    }

    fn word(&mut self, key: &str) -> Option<String> {
        match self.obj.and_then(|o| o.get(key)) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_lowercase()),
            Some(_) => {
                self.issue(key, "must be a non-empty string");
                None
            }
            None => {
                self.issue(key, "missing");
                None
            }
        }
    }

    fn issue(&mut self, key: &str, message: &str) {
        self.issues.push(SchemaIssue {
            path: format!("{}.params.{key}", self.path),
            message: message.into(),
        });
    }
}

fn instr(device: &str, args: Vec<Arg>) -> ControlInstruction {
    ControlInstruction {
        device: device.into(),
        args,
    }
}

/// Builds the instruction for a step described by structured parameters.
fn compile_params(domain: Domain, kind: StepKind, p: &mut StepParams) -> Option<ControlInstruction> {
    let arm = ARM_DEVICE;
    let uav = UAV_DEVICE;
    Some(match (domain, kind) {
        (Domain::Arm, StepKind::Movement) => {
            if p.has("x") || p.has("y") || p.has("z") {
                instr(arm, vec![p.number("x", None), p.number("y", None), p.number("z", None)])
            } else {
                let (dx, dy, dz) = (
                    p.number("dx", Some(0)),
                    p.number("dy", Some(0)),
                    p.number("dz", Some(0)),
                );
                instr(arm, vec![Arg::word("move"), dx, dy, dz])
            }
        }
        (Domain::Arm, StepKind::Posture) => instr(arm, vec![Arg::word("rotate"), p.number("rotate_deg", None)]),
        (Domain::Arm, StepKind::Grab) => instr(arm, vec![Arg::word("grab")]),
        (Domain::Arm, StepKind::Place) => {
            if p.has("x") || p.has("y") || p.has("z") {
                let xyz = [p.number("x", None), p.number("y", None), p.number("z", None)];
                let mut args = vec![Arg::word("place")];
                args.extend(xyz);
                instr(arm, args)
            } else {
                instr(arm, vec![Arg::word("place")])
            }
        }
        (Domain::Uav, StepKind::Path) => {
            if p.has("direction") {
                let dir = p.word("direction")?;
                if !["north", "south", "east", "west"].contains(&dir.as_str()) {
                    p.issue("direction", "expected north, south, east or west");
                    return None;
                }
                instr(uav, vec![Arg::Word(dir), p.number("distance_m", None)])
            } else {
                instr(
                    uav,
                    vec![
                        p.number("forward_m", Some(0)),
                        p.number("up_m", Some(0)),
                        p.number("left_m", Some(0)),
                        p.number("yaw_deg", Some(0)),
                    ],
                )
            }
        }
        (Domain::Uav, StepKind::Speed) => instr(uav, vec![Arg::word("speed"), p.number("speed_mps", None)]),
        (Domain::Uav, StepKind::Task) | (Domain::Arm, StepKind::Task) => {
            let action = p.word("action")?;
            let device = if domain == Domain::Uav { uav } else { arm };
            let i = instr(device, vec![Arg::Word(action)]);
            if i.validate().is_err() {
                p.issue("action", "not a valid instruction word");
                return None;
            }
            i
        }
        (Domain::Home, _) => {
            p.issues.push(SchemaIssue {
                path: format!("{}.instruction", p.path),
                message: "home steps need an explicit instruction".into(),
            });
            return None;
        }
        _ => unreachable!("kind checked against domain"),
    })
}

fn describe(i: &ControlInstruction) -> String {
    i.render()
}

/// Parses a task plan for `domain`. Each step carries a `kind` plus either an
/// `instruction` string or structured `params`.
pub fn parse_task_plan(doc: &str, domain: Domain) -> Result<TaskPlan, IntentError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| {
        IntentError::Schema(vec![SchemaIssue {
            path: "$".into(),
            message: format!("malformed JSON: {e}"),
        }])
    })?;
    plan_from_value(&value, domain)
}

pub fn plan_from_value(value: &Value, domain: Domain) -> Result<TaskPlan, IntentError> {
    let mut issues = Vec::new();
    let issue = |issues: &mut Vec<SchemaIssue>, path: &str, message: String| {
        issues.push(SchemaIssue {
            path: path.into(),
            message,
        })
    };
    let Value::Object(obj) = value else {
        return Err(IntentError::Schema(vec![SchemaIssue {
            path: "$".into(),
            message: "expected an object".into(),
        }]));
    };
    match obj.get("schema_version") {
        None => {}
        Some(v) if v.as_u64() == Some(PLAN_SCHEMA_VERSION) => {}
        Some(_) => issue(
            &mut issues,
            "$.schema_version",
            format!("expected {PLAN_SCHEMA_VERSION}"),
        ),
    }
    match obj.get("domain") {
        None => {}
        Some(Value::String(s)) if Domain::parse(s) == Some(domain) => {}
        Some(other) => issue(
            &mut issues,
            "$.domain",
            format!("expected {:?}, found {other}", domain.as_str()),
        ),
    }
    let goal = match obj.get("goal") {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            issue(&mut issues, "$.goal", "must be a string".into());
            String::new()
        }
    };
    let items = match obj.get("steps") {
        Some(Value::Array(items)) if !items.is_empty() => items.as_slice(),
        Some(Value::Array(_)) => {
            issue(&mut issues, "$.steps", "plan has no steps".into());
            &[]
        }
        Some(_) => {
            issue(&mut issues, "$.steps", "must be an array".into());
            &[]
        }
        None => {
            issue(&mut issues, "$.steps", "missing".into());
            &[]
        }
    };

    let mut steps = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.steps[{i}]");
        let Value::Object(step) = item else {
            issue(&mut issues, &path, "step must be an object".into());
            continue;
        };
        let kind = match step.get("kind") {
            Some(Value::String(s)) => match StepKind::parse(s) {
                Some(k) if domain.kinds().contains(&k) => Some(k),
                Some(_) => {
                    issue(
                        &mut issues,
                        &format!("{path}.kind"),
                        format!("kind {s:?} not allowed for {} plans", domain.as_str()),
                    );
                    None
                }
                None => {
                    issue(&mut issues, &format!("{path}.kind"), format!("unknown step kind {s:?}"));
                    None
                }
            },
            _ => {
                issue(&mut issues, &format!("{path}.kind"), "missing or not a string".into());
                None
            }
        };
        let description = match step.get("description") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                issue(&mut issues, &format!("{path}.description"), "must be a string".into());
                None
            }
        };
        let Some(kind) = kind else { continue };
        let instruction = match step.get("instruction") {
            Some(Value::String(text)) => match parse_instruction(text) {
                Ok(ins) if domain.device_types().contains(&ins.device.as_str()) => Some(ins),
                Ok(ins) => {
                    issue(
                        &mut issues,
                        &format!("{path}.instruction"),
                        format!("device {:?} is not a {} device", ins.device, domain.as_str()),
                    );
                    None
                }
                Err(e) => {
                    issue(&mut issues, &format!("{path}.instruction"), e.to_string());
                    None
                }
            },
            Some(_) => {
                issue(
                    &mut issues,
                    &format!("{path}.instruction"),
                    "must be an instruction string".into(),
                );
                None
            }
            None => {
                let params = match step.get("params") {
                    None => None,
                    Some(Value::Object(m)) => Some(m),
                    Some(_) => {
                        issue(&mut issues, &format!("{path}.params"), "must be an object".into());
                        continue;
                    }
                };
                let mut p = StepParams {
                    obj: params,
                    path: path.clone(),
                    issues: Vec::new(),
                };
                let compiled = compile_params(domain, kind, &mut p);
                let ok = p.issues.is_empty();
                issues.extend(p.issues);
                compiled.filter(|_| ok)
            }
        };
        if let Some(instruction) = instruction {
            steps.push(PlanStep {
                kind,
                description: description.unwrap_or_else(|| describe(&instruction)),
                instruction,
            });
        }
    }
    if issues.is_empty() {
        Ok(TaskPlan { goal, domain, steps })
    } else {
        Err(IntentError::Schema(issues))
    }
}

/// Instructions in step order.
pub fn compile_plan(plan: &TaskPlan) -> Vec<ControlInstruction> {
    plan.steps.iter().map(|s| s.instruction.clone()).collect()
}
