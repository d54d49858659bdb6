use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Power {
    On,
    Off,
}

impl Power {
    pub fn from_flag(on: bool) -> Self {
        if on {
            Self::On
        } else {
            Self::Off
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::On => "on",
            Self::Off => "off",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeDeviceState {
    pub name: String,
    pub power: Power,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brightness: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    /// Curtains only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
    pub room: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    /// Centimetres.
    pub position: [f64; 3],
    pub gripper_angle_deg: f64,
    pub gripper: Gripper,
    pub held_object: Option<String>,
    /// Loose objects in the workspace and where they rest.
    pub objects: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photo {
    pub position: [f64; 3],
    /// Fleet tick at which the photo was taken.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    /// `(north_m, east_m, up_m)`.
    pub position: [f64; 3],
    pub speed_mps: f64,
    /// Degrees clockwise from north, in `[0, 360)`.
    pub heading_deg: f64,
    pub photos: Vec<Photo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum DeviceState {
    Home(HomeDeviceState),
    Arm(ArmState),
    Uav(UavState),
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl DeviceState {
    /// Flat text view used for catalog status fields.
    pub fn status(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self {
            DeviceState::Home(h) => {
                m.insert("power".into(), h.power.as_str().into());
                if let Some(b) = h.brightness {
                    m.insert("brightness".into(), b.to_string());
                }
                if let Some(t) = h.temperature_c {
                    m.insert("temperature_c".into(), num(t));
                }
                if let Some(o) = h.open {
                    m.insert("position".into(), if o { "open" } else { "closed" }.into());
                }
            }
            DeviceState::Arm(a) => {
                let [x, y, z] = a.position;
                m.insert("position_cm".into(), format!("{}, {}, {}", num(x), num(y), num(z)));
                m.insert(
                    "gripper".into(),
                    match a.gripper {
                        Gripper::Open => "open".into(),
                        Gripper::Closed => "closed".into(),
                    },
                );
                m.insert("gripper_angle_deg".into(), num(a.gripper_angle_deg));
                m.insert(
                    "holding".into(),
                    a.held_object.clone().unwrap_or_else(|| "nothing".into()),
                );
            }
            DeviceState::Uav(u) => {
                let [n, e, up] = u.position;
                m.insert("position_m".into(), format!("{}, {}, {}", num(n), num(e), num(up)));
                m.insert("speed_mps".into(), num(u.speed_mps));
                m.insert("heading_deg".into(), num(u.heading_deg));
                m.insert("photos".into(), u.photos.len().to_string());
            }
        }
        m
    }
}
