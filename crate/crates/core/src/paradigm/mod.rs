//! Flicker interface generation: one block per device action plus
//! navigation, each with its own frequency, color and screen rectangle.

mod labels;
mod layout;

pub use labels::navigation_label;
pub use layout::{allocate_frequencies, allocate_from_grid, band_capacity, layout_blocks, Rect};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{parse_instruction, Arg, ControlInstruction, DeviceCatalog, TaskPlan};

pub const PARADIGM_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BAND_HZ: (f64, f64) = (8.0, 15.8);
pub const DEFAULT_MIN_SEP_HZ: f64 = 0.2;
pub const NAVIGATION_DEVICE: &str = "Nav";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockRole {
    Action,
    Back,
    Home,
    Confirm,
    Next,
    Prev,
}

impl BlockRole {
    pub fn is_navigation(self) -> bool {
        self != Self::Action
    }

    fn keyword(self) -> &'static str {
        match self {
            Self::Action => "action",
            Self::Back => "back",
            Self::Home => "home",
            Self::Confirm => "confirm",
            Self::Next => "next",
            Self::Prev => "prev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmBlock {
    pub block_id: String,
    pub label: String,
    pub role: BlockRole,
    /// Catalog device the action belongs to; `None` for navigation.
    pub device: Option<String>,
    #[serde(with = "instruction_text")]
    pub action: ControlInstruction,
    pub freq_hz: f64,
    pub phase_rad: f64,
    pub color: Rgb,
    pub text_color: Rgb,
    pub rect: Rect,
}

mod instruction_text {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmSpec {
    pub schema_version: u32,
    pub blocks: Vec<ParadigmBlock>,
    pub band_hz: (f64, f64),
    pub min_sep_hz: f64,
    pub revision: u64,
    pub language: String,
    pub page: usize,
    pub page_count: usize,
    pub background: Rgb,
}

impl ParadigmSpec {
    pub fn block(&self, id: &str) -> Option<&ParadigmBlock> {
        self.blocks.iter().find(|b| b.block_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("paradigm serializes")
    }
}

/// How block frequencies are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "grid_hz", rename_all = "snake_case")]
pub enum FrequencyStrategy {
    /// Evenly spaced across the band.
    EvenSpacing,
    /// Spread across the frequencies a decoder was calibrated on.
    CalibratedGrid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmPrefs {
    pub band_hz: (f64, f64),
    pub min_sep_hz: f64,
    /// Screen width over height.
    pub aspect: f64,
    pub background: Rgb,
    pub foreground: Rgb,
    /// Accent color per instruction device type, overriding the defaults.
    pub accents: BTreeMap<String, Rgb>,
    pub strategy: FrequencyStrategy,
    /// Revision of the paradigm being replaced; the new one is one higher.
    pub prior_revision: u64,
}

impl Default for ParadigmPrefs {
    fn default() -> Self {
        Self {
            band_hz: DEFAULT_BAND_HZ,
            min_sep_hz: DEFAULT_MIN_SEP_HZ,
            aspect: 16.0 / 9.0,
            background: Rgb::new(0, 0, 0),
            foreground: Rgb::new(255, 255, 255),
            accents: BTreeMap::new(),
            strategy: FrequencyStrategy::EvenSpacing,
            prior_revision: 0,
        }
    }
}

impl ParadigmPrefs {
    fn capacity(&self) -> usize {
        match &self.strategy {
            FrequencyStrategy::EvenSpacing => band_capacity(self.band_hz, self.min_sep_hz),
            FrequencyStrategy::CalibratedGrid(grid) => {
                let (lo, hi) = self.band_hz;
                let mut g: Vec<f64> = grid
                    .iter()
                    .copied()
                    .filter(|f| *f >= lo - 1e-9 && *f <= hi + 1e-9)
                    .collect();
                g.sort_by(f64::total_cmp);
                g.dedup();
                g.len()
            }
        }
    }

    fn frequencies(&self, n: usize) -> Result<Vec<f64>, ParadigmError> {
        match &self.strategy {
            FrequencyStrategy::EvenSpacing => allocate_frequencies(n, self.band_hz, self.min_sep_hz),
            FrequencyStrategy::CalibratedGrid(grid) => allocate_from_grid(n, grid, self.band_hz, self.min_sep_hz),
        }
    }

    fn accent(&self, device_type: Option<&str>) -> Rgb {
        let key = device_type.unwrap_or(NAVIGATION_DEVICE);
        if let Some(c) = self.accents.get(key) {
            return *c;
        }
        match key {
            "Lamp" => Rgb::new(255, 200, 0),
            "Thermostat" => Rgb::new(0, 180, 255),
            "Curtain" => Rgb::new(60, 200, 120),
            "TV" => Rgb::new(170, 90, 255),
            "Robot arm" => Rgb::new(255, 120, 0),
            "Quadcopter" => Rgb::new(40, 120, 255),
            NAVIGATION_DEVICE => Rgb::new(128, 128, 128),
            _ => Rgb::new(200, 200, 200),
        }
    }
}

/// Generated pages; page 0 is shown first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmPages {
    pub pages: Vec<ParadigmSpec>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParadigmError {
    #[error("invalid band {lo}-{hi} Hz with separation {min_sep} Hz")]
    InvalidBand { lo: f64, hi: f64, min_sep: f64 },
    #[error("{requested} blocks requested, band holds at most {max}")]
    Infeasible { requested: usize, max: usize },
    #[error("nothing to show: {0}")]
    Empty(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    FrequencyOutOfBand,
    Separation,
    RectOutOfBounds,
    Overlap,
    TooManyBlocks,
    DuplicateId,
    ActionRoundTrip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub block_ids: Vec<String>,
    pub message: String,
}

/// One selectable action before frequencies and rectangles are assigned.
struct Item {
    id_hint: String,
    label: String,
    role: BlockRole,
    device: Option<String>,
    device_type: Option<String>,
    action: ControlInstruction,
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn nav_item(role: BlockRole, language: &str) -> Item {
    Item {
        id_hint: format!("nav:{}", role.keyword()),
        label: navigation_label(role, language).to_string(),
        role,
        device: None,
        device_type: None,
        action: ControlInstruction {
            device: NAVIGATION_DEVICE.into(),
            args: vec![Arg::word(role.keyword())],
        },
    }
}

/// Splits `n_actions` into pages; every page also carries back/home/confirm
/// and prev/next where needed.
fn paginate(n_actions: usize, capacity: usize) -> Result<Vec<usize>, ParadigmError> {
    const FIXED: usize = 3;
    if n_actions + FIXED <= capacity {
        return Ok(vec![n_actions]);
    }
    // A middle page needs prev and next, so at least one action must fit.
    if capacity < FIXED + 3 {
        return Err(ParadigmError::Infeasible {
            requested: n_actions + FIXED,
            max: capacity,
        });
    }
    let mut sizes = Vec::new();
    let mut remaining = n_actions;
    loop {
        let has_prev = !sizes.is_empty() as usize;
        let room_if_last = capacity - FIXED - has_prev;
        if remaining <= room_if_last {
            sizes.push(remaining);
            return Ok(sizes);
        }
        let take = room_if_last - 1;
        sizes.push(take);
        remaining -= take;
    }
}

fn assemble(items: Vec<Item>, prefs: &ParadigmPrefs, language: &str) -> Result<Vec<ParadigmSpec>, ParadigmError> {
    let (actions, nav): (Vec<Item>, Vec<Item>) = items.into_iter().partition(|i| i.role == BlockRole::Action);
    debug_assert!(nav.is_empty());
    let sizes = paginate(actions.len(), prefs.capacity())?;
    let page_count = sizes.len();
    let revision = prefs.prior_revision + 1;
    let mut pages = Vec::with_capacity(page_count);
    let mut actions = actions.into_iter();
    for (page, size) in sizes.into_iter().enumerate() {
        let mut page_items: Vec<Item> = actions.by_ref().take(size).collect();
        if page > 0 {
            page_items.push(nav_item(BlockRole::Prev, language));
        }
        if page + 1 < page_count {
            page_items.push(nav_item(BlockRole::Next, language));
        }
        for role in [BlockRole::Back, BlockRole::Home, BlockRole::Confirm] {
            page_items.push(nav_item(role, language));
        }
        let freqs = prefs.frequencies(page_items.len())?;
        let rects = layout_blocks(page_items.len(), prefs.aspect);
        let mut seen = BTreeSet::new();
        let blocks = page_items
            .into_iter()
            .zip(freqs)
            .zip(rects)
            .map(|((item, freq_hz), rect)| {
                let mut id = item.id_hint.clone();
                let mut k = 2;
                while !seen.insert(id.clone()) {
                    id = format!("{}#{k}", item.id_hint);
                    k += 1;
                }
                ParadigmBlock {
                    block_id: id,
                    label: item.label,
                    role: item.role,
                    device: item.device,
                    color: prefs.accent(item.device_type.as_deref()),
                    text_color: prefs.foreground,
                    action: item.action,
                    freq_hz,
                    phase_rad: 0.0,
                    rect,
                }
            })
            .collect();
        pages.push(ParadigmSpec {
            schema_version: PARADIGM_SCHEMA_VERSION,
            blocks,
            band_hz: prefs.band_hz,
            min_sep_hz: prefs.min_sep_hz,
            revision,
            language: language.to_string(),
            page,
            page_count,
            background: prefs.background,
        });
    }
    Ok(pages)
}

/// One block per (device, function) in catalog order plus navigation. Blocks
/// that do not fit one page spill onto further pages linked by prev/next.
pub fn build_paradigm(
    catalog: &DeviceCatalog,
    prefs: &ParadigmPrefs,
    language: &str,
) -> Result<ParadigmPages, ParadigmError> {
    if catalog.is_empty() {
        return Err(ParadigmError::Empty("catalog has no devices".into()));
    }
    let mut warnings = Vec::new();
    let mut items = Vec::new();
    for entry in &catalog.entries {
        if entry.functions.is_empty() {
            warnings.push(format!("device {:?} has no functions; no blocks generated", entry.name));
            continue;
        }
        for f in &entry.functions {
            let action = entry
                .action_for(f)
                .map_err(|e| ParadigmError::InvalidAction(format!("{} / {}: {e}", entry.name, f.id)))?;
            items.push(Item {
                id_hint: format!("{}:{}", slug(&entry.name), slug(&f.id)),
                label: format!("{}: {}", entry.name, f.display),
                role: BlockRole::Action,
                device: Some(entry.name.clone()),
                device_type: Some(entry.device_type.clone().unwrap_or_else(|| action.device.clone())),
                action,
            });
        }
    }
    if items.is_empty() {
        return Err(ParadigmError::Empty("no device offers any function".into()));
    }
    Ok(ParadigmPages {
        pages: assemble(items, prefs, language)?,
        warnings,
    })
}

/// One block per plan step, in step order, plus navigation.
pub fn build_plan_paradigm(
    plan: &TaskPlan,
    prefs: &ParadigmPrefs,
    language: &str,
) -> Result<ParadigmPages, ParadigmError> {
    if plan.steps.is_empty() {
        return Err(ParadigmError::Empty("plan has no steps".into()));
    }
    let items = plan
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| Item {
            id_hint: format!("step:{}", i + 1),
            label: format!("{}. {}", i + 1, s.description),
            role: BlockRole::Action,
            device: None,
            device_type: Some(s.instruction.device.clone()),
            action: s.instruction.clone(),
        })
        .collect();
    Ok(ParadigmPages {
        pages: assemble(items, prefs, language)?,
        warnings: Vec::new(),
    })
}

/// Checks every invariant and reports all violations.
pub fn validate_paradigm(spec: &ParadigmSpec) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let (lo, hi) = spec.band_hz;
    let slack = 1e-9;
    let mut ids = BTreeSet::new();
    for b in &spec.blocks {
        if !(b.freq_hz >= lo - slack && b.freq_hz <= hi + slack) {
            v.push(Violation {
                kind: ViolationKind::FrequencyOutOfBand,
                block_ids: vec![b.block_id.clone()],
                message: format!("{} Hz outside {lo}-{hi} Hz", b.freq_hz),
            });
        }
        if !b.rect.within_unit_square() {
            v.push(Violation {
                kind: ViolationKind::RectOutOfBounds,
                block_ids: vec![b.block_id.clone()],
                message: format!("{:?} leaves the unit square", b.rect),
            });
        }
        if !ids.insert(b.block_id.as_str()) {
            v.push(Violation {
                kind: ViolationKind::DuplicateId,
                block_ids: vec![b.block_id.clone()],
                message: "block id used twice".into(),
            });
        }
        if parse_instruction(&b.action.render()).as_ref() != Ok(&b.action) {
            v.push(Violation {
                kind: ViolationKind::ActionRoundTrip,
                block_ids: vec![b.block_id.clone()],
                message: format!("action {:?} does not survive render/parse", b.action.render()),
            });
        }
    }
    for (i, a) in spec.blocks.iter().enumerate() {
        for b in &spec.blocks[i + 1..] {
            if (a.freq_hz - b.freq_hz).abs() < spec.min_sep_hz - slack {
                v.push(Violation {
                    kind: ViolationKind::Separation,
                    block_ids: vec![a.block_id.clone(), b.block_id.clone()],
                    message: format!(
                        "{} Hz and {} Hz closer than {} Hz",
                        a.freq_hz, b.freq_hz, spec.min_sep_hz
                    ),
                });
            }
            if a.rect.intersection_area(&b.rect) > 0.0 {
                v.push(Violation {
                    kind: ViolationKind::Overlap,
                    block_ids: vec![a.block_id.clone(), b.block_id.clone()],
                    message: "rectangles overlap".into(),
                });
            }
        }
    }
    let max = if spec.min_sep_hz > 0.0 && hi >= lo {
        band_capacity(spec.band_hz, spec.min_sep_hz)
    } else {
        0
    };
    if spec.blocks.len() > max {
        v.push(Violation {
            kind: ViolationKind::TooManyBlocks,
            block_ids: Vec::new(),
            message: format!("{} blocks, band holds {max}", spec.blocks.len()),
        });
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pagination_arithmetic() {
        assert_eq!(paginate(37, 40).unwrap(), vec![37]);
        assert_eq!(paginate(60, 40).unwrap(), vec![36, 24]);
        assert_eq!(paginate(100, 40).unwrap(), vec![36, 35, 29]);
        assert!(paginate(10, 5).is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Living Room light"), "living-room-light");
        assert_eq!(slug("set_22"), "set-22");
        assert_eq!(slug("客厅 灯"), "客厅-灯");
    }
}
