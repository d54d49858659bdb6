use bci_core::devices::{discover, Fleet};
use bci_core::intent::{parse_task_plan, CatalogEntry, DeviceCatalog, Domain};
use bci_core::langmodel::normalize_text;

use crate::{ChatMessage, GatewayError, LlmClient, LlmRequest, Payload, Provider, RequestContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleAction {
    /// Lights, air conditioning and television with all their functions.
    HomeAppliances,
    LampOn,
    LampOff,
    ArmPickAndPlace,
    UavPhoto,
}

#[derive(Debug, Clone, Copy)]
pub struct MockRule {
    pub id: &'static str,
    /// Lowercase phrases; any one occurring in the lowercased text fires the rule.
    pub phrases: &'static [&'static str],
    pub action: RuleAction,
}

const RULES: &[MockRule] = &[
    MockRule {
        id: "arm-pick-place",
        phrases: &[
            "grab",
            "pick up",
            "robot arm",
            "robotic arm",
            "agarra",
            "coge el",
            "brazo",
            "抓",
            "机械臂",
            "attrape",
            "saisis",
            "bras robot",
            "greif",
            "roboterarm",
        ],
        action: RuleAction::ArmPickAndPlace,
    },
    MockRule {
        id: "uav-photo",
        phrases: &[
            "fly",
            "drone",
            "uav",
            "quadcopter",
            "take a photo",
            "vuela",
            "dron",
            "foto",
            "无人机",
            "飞到",
            "拍照",
            "vole",
            "photo",
            "flieg",
            "drohne",
        ],
        action: RuleAction::UavPhoto,
    },
    MockRule {
        id: "lamp-off",
        phrases: &[
            "turn off the light",
            "switch off the light",
            "lights off",
            "light off",
            "apaga la luz",
            "关灯",
            "关掉灯",
            "éteins la lumière",
            "licht aus",
            "mach das licht aus",
        ],
        action: RuleAction::LampOff,
    },
    MockRule {
        id: "lamp-on",
        phrases: &[
            "turn on the light",
            "switch on the light",
            "lights on",
            "light on",
            "enciende la luz",
            "prende la luz",
            "开灯",
            "打开灯",
            "allume la lumière",
            "licht an",
            "mach das licht an",
            "schalte das licht ein",
        ],
        action: RuleAction::LampOn,
    },
    MockRule {
        id: "home-appliances",
        phrases: &[
            "appliance",
            "home",
            "house",
            "light",
            "air condition",
            "television",
            "tv",
            "electrodoméstic",
            "casa",
            "luz",
            "aire acondicionado",
            "televisión",
            "家电",
            "家居",
            "灯",
            "空调",
            "电视",
            "appareil",
            "maison",
            "lumière",
            "climatis",
            "télé",
            "haushalt",
            "gerät",
            "licht",
            "klimaanlage",
            "fernseh",
        ],
        action: RuleAction::HomeAppliances,
    },
];

/// Rules in match order; the first rule with a matching phrase wins.
pub fn mock_rules() -> &'static [MockRule] {
    RULES
}

fn localized_display(id: &str, language: &str) -> Option<&'static str> {
    let lang = language.split(['-', '_']).next().unwrap_or("");
    let table: &[(&str, [&str; 4])] = &[
        // es, zh, fr, de
        ("on", ["encender", "打开", "allumer", "einschalten"]),
        ("off", ["apagar", "关闭", "éteindre", "ausschalten"]),
        (
            "dim",
            ["atenuar al 30%", "调暗到30%", "tamiser à 30 %", "auf 30 % dimmen"],
        ),
        ("open", ["abrir", "打开", "ouvrir", "öffnen"]),
        ("close", ["cerrar", "关闭", "fermer", "schließen"]),
        (
            "set_22",
            ["poner a 22 °C", "设为22°C", "régler sur 22 °C", "auf 22 °C stellen"],
        ),
        (
            "set_26",
            ["poner a 26 °C", "设为26°C", "régler sur 26 °C", "auf 26 °C stellen"],
        ),
    ];
    let col = ["es", "zh", "fr", "de"].iter().position(|l| *l == lang)?;
    table.iter().find(|(k, _)| *k == id).map(|(_, v)| v[col])
}

fn clarification(language: &str) -> &'static str {
    match language.split(['-', '_']).next().unwrap_or("") {
        "es" => "¿Qué dispositivo quieres controlar y qué debe hacer?",
        "zh" => "您想控制哪个设备？要做什么？",
        "fr" => "Quel appareil voulez-vous contrôler, et que doit-il faire ?",
        "de" => "Welches Gerät möchten Sie steuern, und was soll es tun?",
        _ => "Which device would you like to control, and what should it do?",
    }
}

/// Rule-based stand-in for a remote model. Identical requests give
/// byte-identical replies.
#[derive(Debug, Clone, Default)]
pub struct MockClient;

impl MockClient {
    pub fn new() -> Self {
        Self
    }

    pub fn matching_rule(text: &str) -> Option<&'static MockRule> {
        let lower = text.to_lowercase();
        let words = normalize_text(text, "und");
        RULES.iter().find(|r| {
            r.phrases.iter().any(|p| {
                if p.is_ascii() && !p.contains(' ') {
                    // Whole words only, so "tv" does not fire inside other words.
                    words.iter().any(|w| w.starts_with(p))
                } else {
                    lower.contains(p)
                }
            })
        })
    }

    fn scoped(catalog: &DeviceCatalog, types: &[&str], functions: Option<&str>, language: &str) -> DeviceCatalog {
        let entries: Vec<CatalogEntry> = catalog
            .entries
            .iter()
            .filter(|e| e.device_type.as_deref().is_some_and(|t| types.contains(&t)))
            .filter_map(|e| {
                let mut e = e.clone();
                if let Some(f) = functions {
                    e.functions.retain(|x| x.id == f);
                }
                for f in &mut e.functions {
                    if let Some(d) = localized_display(&f.id, language) {
                        f.display = d.to_string();
                    }
                }
                (!e.functions.is_empty()).then_some(e)
            })
            .collect();
        DeviceCatalog { entries }
    }

    fn reply(req: &LlmRequest) -> Payload {
        let fallback;
        let catalog = match &req.context {
            RequestContext::Catalog(c) => c,
            _ => {
                fallback = discover(&Fleet::demo());
                &fallback
            }
        };
        let domain_only = match &req.context {
            RequestContext::Domain(d) => Some(*d),
            _ => None,
        };
        let ask = || Payload::Clarification {
            question: clarification(&req.language).to_string(),
        };
        let Some(rule) = Self::matching_rule(&req.user_text) else {
            return ask();
        };
        let home = |types: &[&str], f: Option<&str>| {
            if domain_only.is_some() {
                return ask();
            }
            let c = Self::scoped(catalog, types, f, &req.language);
            if c.is_empty() {
                ask()
            } else {
                Payload::Catalog(c)
            }
        };
        match rule.action {
            RuleAction::HomeAppliances => home(&["Lamp", "Thermostat", "TV"], None),
            RuleAction::LampOn => home(&["Lamp"], Some("on")),
            RuleAction::LampOff => home(&["Lamp"], Some("off")),
            RuleAction::ArmPickAndPlace if domain_only.is_none_or_domain(Domain::Arm) => Payload::TaskPlan(
                parse_task_plan(
                    r#"{"goal": "grab the object and place it in the designated position", "domain": "arm", "steps": [
                        {"kind": "movement", "params": {"dx": 5, "dy": 0, "dz": 0}, "description": "move over the object"},
                        {"kind": "posture", "params": {"rotate_deg": 45}, "description": "adjust gripper posture"},
                        {"kind": "grab", "description": "grab the object"},
                        {"kind": "place", "params": {"x": 10, "y": 40, "z": 25}, "description": "place it at the target"}
                    ]}"#,
                    Domain::Arm,
                )
                .expect("built-in arm plan is valid"),
            ),
            RuleAction::UavPhoto if domain_only.is_none_or_domain(Domain::Uav) => Payload::TaskPlan(
                parse_task_plan(
                    r#"{"goal": "fly to the specified location and take a photo", "domain": "uav", "steps": [
                        {"kind": "path", "params": {"forward_m": 20, "up_m": 10}, "description": "fly to the location"},
                        {"kind": "speed", "params": {"speed_mps": 5}, "description": "set cruise speed"},
                        {"kind": "task", "params": {"action": "photo"}, "description": "take a photo"}
                    ]}"#,
                    Domain::Uav,
                )
                .expect("built-in uav plan is valid"),
            ),
            _ => ask(),
        }
    }
}

trait DomainFilter {
    fn is_none_or_domain(&self, d: Domain) -> bool;
}

impl DomainFilter for Option<Domain> {
    fn is_none_or_domain(&self, d: Domain) -> bool {
        self.map_or(true, |x| x == d)
    }
}

impl LlmClient for MockClient {
    fn provider(&self) -> Provider {
        Provider::Mock
    }

    fn complete(&self, req: &LlmRequest, _messages: &[ChatMessage]) -> Result<String, GatewayError> {
        Ok(Self::reply(req).to_envelope().to_string())
    }
}
