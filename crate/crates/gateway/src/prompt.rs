use serde_json::{json, Map, Value};

use crate::{LlmRequest, RequestContext, RequestKind, ENVELOPE_SCHEMA};

/// Prompt length in characters never exceeds
/// `PROMPT_BASE_CHARS + max_blocks * PROMPT_PER_BLOCK_CHARS`.
pub const PROMPT_BASE_CHARS: usize = 6_000;
pub const PROMPT_PER_BLOCK_CHARS: usize = 5_000;
pub const MAX_PROMPT_BLOCKS: usize = 256;

const MAX_USER_TEXT: usize = 1_000;
const MAX_LANGUAGE: usize = 35;
const MAX_NAME: usize = 64;
const MAX_ID: usize = 48;
const MAX_DISPLAY: usize = 64;
const MAX_INSTRUCTION: usize = 128;
const MAX_ARGS: usize = 8;
const MAX_STATUS: usize = 4;
const MAX_STATUS_TEXT: usize = 32;

fn clip(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

pub fn prompt_length_bound(max_blocks: usize) -> usize {
    PROMPT_BASE_CHARS + max_blocks.clamp(1, MAX_PROMPT_BLOCKS) * PROMPT_PER_BLOCK_CHARS
}

/// Compact device listing with at most `budget` functions in total.
fn listing(req: &LlmRequest, budget: usize) -> Option<String> {
    let RequestContext::Catalog(catalog) = &req.context else {
        return None;
    };
    let mut left = budget;
    let mut devices = Vec::new();
    for e in &catalog.entries {
        if left == 0 {
            break;
        }
        let functions: Vec<Value> = e
            .functions
            .iter()
            .take(left)
            .map(|f| {
                let mut m = Map::new();
                m.insert("id".into(), clip(&f.id, MAX_ID).into());
                m.insert("display".into(), clip(&f.display, MAX_DISPLAY).into());
                if !f.args.is_empty() {
                    let args: Vec<Value> = f
                        .args
                        .iter()
                        .take(MAX_ARGS)
                        .map(|a| serde_json::to_value(a).unwrap_or(Value::Null))
                        .collect();
                    m.insert("args".into(), args.into());
                }
                if let Some(i) = &f.instruction {
                    m.insert("instruction".into(), clip(&i.render(), MAX_INSTRUCTION).into());
                }
                Value::Object(m)
            })
            .collect();
        if functions.is_empty() {
            continue;
        }
        left -= functions.len();
        let status: Map<String, Value> = e
            .status
            .iter()
            .take(MAX_STATUS)
            .map(|(k, v)| (clip(k, MAX_STATUS_TEXT), clip(v, MAX_STATUS_TEXT).into()))
            .collect();
        let mut d = Map::new();
        d.insert("name".into(), clip(&e.name, MAX_NAME).into());
        if let Some(t) = &e.device_type {
            d.insert("type".into(), clip(t, MAX_NAME).into());
        }
        d.insert("functions".into(), functions.into());
        d.insert("status".into(), status.into());
        d.insert("address".into(), clip(&e.address, MAX_NAME).into());
        devices.push(Value::Object(d));
    }
    Some(json!({ "devices": devices }).to_string())
}

/// Full prompt for a request. Deterministic; the user's text is quoted as is
/// (up to a length cap) so its language reaches the model unchanged.
pub fn build_prompt(req: &LlmRequest) -> String {
    let blocks = req.max_blocks.clamp(1, MAX_PROMPT_BLOCKS);
    let mut p = String::new();
    p.push_str(
        "You turn requests from a brain-computer interface user into JSON for a device controller.\n\
         Reply with exactly one JSON object that satisfies this JSON Schema, with no other text:\n",
    );
    p.push_str(ENVELOPE_SCHEMA);
    p.push('\n');
    match req.kind {
        RequestKind::ParadigmPlan => p.push_str(
            "Task: choose the devices and functions from the listing below that serve the request and \
             answer with kind \"catalog\", copying names, addresses and instructions exactly. \
             If the request is a multi-step robot arm or drone task, answer with kind \"task_plan\" instead. \
             If the request is unclear, answer with kind \"clarification\" and a short question.\n",
        ),
        RequestKind::TaskPlan => p.push_str(
            "Task: break the request into ordered steps for the named domain and answer with kind \"task_plan\". \
             If the request is unclear, answer with kind \"clarification\" and a short question.\n",
        ),
    }
    p.push_str(&format!("Offer at most {blocks} functions or steps in total.\n"));
    p.push_str(&format!(
        "Write every display text and question in the user's language ({}).\n",
        clip(&req.language, MAX_LANGUAGE)
    ));
    match &req.context {
        RequestContext::Domain(d) => p.push_str(&format!("Domain: {}\n", d.as_str())),
        RequestContext::Catalog(_) => {
            p.push_str("Devices: ");
            p.push_str(&listing(req, blocks).unwrap_or_default());
            p.push('\n');
        }
        RequestContext::None => {}
    }
    p.push_str("Request: ");
    p.push_str(&clip(&req.user_text, MAX_USER_TEXT));
    p.push('\n');
    p
}
