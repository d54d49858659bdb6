//! Simulated device fleet. Instructions are routed through a binding table
//! keyed by the instruction device name, so adding a device type means adding
//! a row, not touching the parser.

mod state;
mod transitions;

pub use state::{ArmState, DeviceState, Gripper, HomeDeviceState, Photo, Power, UavState};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::intent::{ArgKind, CatalogEntry, ControlInstruction, DeviceCatalog, DeviceFunction};
use transitions::{Binding, BINDINGS};

pub const ARM_WORKSPACE_CM: (f64, f64) = (0.0, 50.0);
pub const GRAB_TOLERANCE_CM: f64 = 1.0;
pub const THERMOSTAT_RANGE_C: (f64, f64) = (10.0, 35.0);
pub const UAV_MAX_SPEED_MPS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Lamp,
    Thermostat,
    Curtain,
    Tv,
    RobotArm,
    Quadcopter,
}

impl DeviceKind {
    fn binding(self) -> &'static Binding {
        BINDINGS.iter().find(|b| b.kind == self).expect("every kind is bound")
    }

    /// Device name used in instructions, e.g. `Robot arm`.
    pub fn instruction_name(self) -> &'static str {
        self.binding().instruction
    }

    /// Physical actuators; a session asks for explicit confirmation first.
    pub fn requires_confirmation(self) -> bool {
        matches!(self, Self::RobotArm | Self::Quadcopter)
    }

    pub fn from_instruction_name(name: &str) -> Option<Self> {
        BINDINGS
            .iter()
            .find(|b| b.instruction.eq_ignore_ascii_case(name))
            .map(|b| b.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub name: String,
    pub kind: DeviceKind,
    pub room: Option<String>,
    pub address: String,
    pub state: DeviceState,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error("{device}: {reason}")]
    BadArguments { device: String, reason: String },
    #[error("{device} refused: {reason}")]
    Refused { device: String, reason: String },
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub device: String,
    pub instruction: ControlInstruction,
    pub before: DeviceState,
    pub after: DeviceState,
    /// Human-readable line, e.g. `living room light: power on`.
    pub event: String,
}

/// Registered devices ordered by name, plus a logical clock advanced by every
/// successful execution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    devices: Vec<Device>,
    tick: u64,
}

impl Fleet {
    pub fn new(mut devices: Vec<Device>) -> Result<Self, DeviceError> {
        devices.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = devices.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(DeviceError::InvalidFleet(format!("duplicate device {:?}", w[0].name)));
        }
        Ok(Self { devices, tick: 0 })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Living-room and bedroom lights, air conditioner, TV, bedroom curtain,
    /// robot arm with a cube at (30, 25, 25) cm, and a quadcopter.
    pub fn demo() -> Self {
        let home = |name: &str, kind, room: &str, address: &str, state: HomeDeviceState| Device {
            name: name.into(),
            kind,
            room: Some(room.into()),
            address: address.into(),
            state: DeviceState::Home(state),
        };
        let blank = |name: &str, room: &str| HomeDeviceState {
            name: name.into(),
            power: Power::Off,
            brightness: None,
            temperature_c: None,
            open: None,
            room: room.into(),
        };
        let mut objects = BTreeMap::new();
        objects.insert("cube".to_string(), [30.0, 25.0, 25.0]);
        let devices = vec![
            home(
                "living room light",
                DeviceKind::Lamp,
                "living room",
                "light.living_room",
                HomeDeviceState {
                    brightness: Some(100),
                    ..blank("living room light", "living room")
                },
            ),
            home(
                "bedroom light",
                DeviceKind::Lamp,
                "bedroom",
                "light.bedroom",
                HomeDeviceState {
                    brightness: Some(100),
                    ..blank("bedroom light", "bedroom")
                },
            ),
            home(
                "air conditioner",
                DeviceKind::Thermostat,
                "living room",
                "climate.air_conditioner",
                HomeDeviceState {
                    temperature_c: Some(24.0),
                    ..blank("air conditioner", "living room")
                },
            ),
            home(
                "tv",
                DeviceKind::Tv,
                "living room",
                "media_player.tv",
                blank("tv", "living room"),
            ),
            home(
                "bedroom curtain",
                DeviceKind::Curtain,
                "bedroom",
                "cover.bedroom_curtain",
                HomeDeviceState {
                    open: Some(false),
                    ..blank("bedroom curtain", "bedroom")
                },
            ),
            Device {
                name: "robot arm".into(),
                kind: DeviceKind::RobotArm,
                room: None,
                address: "arm.robot_arm".into(),
                state: DeviceState::Arm(ArmState {
                    position: [25.0, 25.0, 25.0],
                    gripper_angle_deg: 0.0,
                    gripper: Gripper::Open,
                    held_object: None,
                    objects,
                }),
            },
            Device {
                name: "quadcopter".into(),
                kind: DeviceKind::Quadcopter,
                room: None,
                address: "uav.quadcopter".into(),
                state: DeviceState::Uav(UavState {
                    position: [0.0, 0.0, 0.0],
                    speed_mps: 0.0,
                    heading_deg: 0.0,
                    photos: Vec::new(),
                }),
            },
        ];
        Self::new(devices).expect("demo fleet names are unique")
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn get(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Resolves the target device of an instruction: by room for room-scoped
    /// types (first argument), otherwise the single device of that type.
    fn resolve(&self, instr: &ControlInstruction) -> Result<(usize, &'static Binding, usize), DeviceError> {
        let kind = DeviceKind::from_instruction_name(&instr.device)
            .ok_or_else(|| DeviceError::UnknownDevice(instr.device.clone()))?;
        let binding = kind.binding();
        let candidates: Vec<usize> = (0..self.devices.len())
            .filter(|&i| self.devices[i].kind == kind)
            .collect();
        if binding.by_room {
            let room = instr
                .args
                .first()
                .and_then(|a| a.as_word())
                .ok_or_else(|| DeviceError::BadArguments {
                    device: instr.device.clone(),
                    reason: "first argument must name a room".into(),
                })?;
            let idx = candidates
                .into_iter()
                .find(|&i| {
                    self.devices[i]
                        .room
                        .as_deref()
                        .is_some_and(|r| r.eq_ignore_ascii_case(room))
                })
                .ok_or_else(|| DeviceError::UnknownDevice(format!("{} in {room}", instr.device)))?;
            Ok((idx, binding, 1))
        } else {
            match candidates.as_slice() {
                [only] => Ok((*only, binding, 0)),
                [] => Err(DeviceError::UnknownDevice(instr.device.clone())),
                _ => Err(DeviceError::BadArguments {
                    device: instr.device.clone(),
                    reason: "several devices of this type are registered".into(),
                }),
            }
        }
    }

    /// Applies an instruction. On any error no device state changes.
    pub fn execute(&mut self, instr: &ControlInstruction) -> Result<ExecutionResult, DeviceError> {
        let (idx, binding, skip) = self.resolve(instr)?;
        let device = &self.devices[idx];
        let mut next = device.state.clone();
        let event =
            (binding.apply)(&instr.args[skip..], &mut next, self.tick).map_err(|e| e.into_error(&device.name))?;
        let result = ExecutionResult {
            device: device.name.clone(),
            instruction: instr.clone(),
            before: device.state.clone(),
            after: next.clone(),
            event: format!("{}: {event}", device.name),
        };
        self.devices[idx].state = next;
        self.tick += 1;
        Ok(result)
    }

    pub fn query_state(&self, name: &str) -> Result<DeviceState, DeviceError> {
        self.get(name)
            .map(|d| d.state.clone())
            .ok_or_else(|| DeviceError::UnknownDevice(name.into()))
    }

    /// Kind of device an instruction would reach, without executing it.
    pub fn target_kind(&self, instr: &ControlInstruction) -> Result<DeviceKind, DeviceError> {
        self.resolve(instr).map(|(i, _, _)| self.devices[i].kind)
    }
}

fn arg_kinds(i: &ControlInstruction) -> Vec<ArgKind> {
    i.args
        .iter()
        .map(|a| match a {
            crate::intent::Arg::Int(_) => ArgKind::Int,
            crate::intent::Arg::Real(_) => ArgKind::Real,
            crate::intent::Arg::Word(_) => ArgKind::Word,
        })
        .collect()
}

/// Catalog of every registered device with live status, ordered by name.
pub fn discover(fleet: &Fleet) -> DeviceCatalog {
    let entries = fleet
        .devices
        .iter()
        .map(|d| {
            let binding = d.kind.binding();
            let functions = (binding.functions)(d)
                .into_iter()
                .map(|(id, display, instruction)| DeviceFunction {
                    id: id.into(),
                    display,
                    args: arg_kinds(&instruction),
                    instruction: Some(instruction),
                })
                .collect();
            let mut extras = BTreeMap::new();
            if let Some(room) = &d.room {
                extras.insert("room".to_string(), Value::String(room.clone()));
            }
            CatalogEntry {
                name: d.name.clone(),
                device_type: Some(binding.instruction.into()),
                functions,
                status: d.state.status(),
                address: d.address.clone(),
                extras,
            }
        })
        .collect();
    DeviceCatalog { entries }
}

pub fn execute(fleet: &mut Fleet, instr: &ControlInstruction) -> Result<ExecutionResult, DeviceError> {
    fleet.execute(instr)
}

pub fn query_state(fleet: &Fleet, name: &str) -> Result<DeviceState, DeviceError> {
    fleet.query_state(name)
}
