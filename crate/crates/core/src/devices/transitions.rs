use crate::intent::{parse_instruction, Arg, ControlInstruction};

use super::state::{ArmState, DeviceState, Gripper, HomeDeviceState, Photo, Power, UavState};
use super::{
    Device, DeviceError, DeviceKind, ARM_WORKSPACE_CM, GRAB_TOLERANCE_CM, THERMOSTAT_RANGE_C, UAV_MAX_SPEED_MPS,
};

pub(super) enum Fail {
    Args(String),
    Refused(String),
}

impl Fail {
    pub(super) fn into_error(self, device: &str) -> DeviceError {
        match self {
            Fail::Args(reason) => DeviceError::BadArguments {
                device: device.into(),
                reason,
            },
            Fail::Refused(reason) => DeviceError::Refused {
                device: device.into(),
                reason,
            },
        }
    }
}

type Apply = fn(&[Arg], &mut DeviceState, u64) -> Result<String, Fail>;
type Functions = fn(&Device) -> Vec<(&'static str, String, ControlInstruction)>;

pub(super) struct Binding {
    pub instruction: &'static str,
    pub kind: DeviceKind,
    /// First argument selects the device by room.
    pub by_room: bool,
    pub apply: Apply,
    pub functions: Functions,
}

pub(super) const BINDINGS: &[Binding] = &[
    Binding {
        instruction: "Lamp",
        kind: DeviceKind::Lamp,
        by_room: true,
        apply: lamp,
        functions: lamp_functions,
    },
    Binding {
        instruction: "Thermostat",
        kind: DeviceKind::Thermostat,
        by_room: false,
        apply: thermostat,
        functions: thermostat_functions,
    },
    Binding {
        instruction: "Curtain",
        kind: DeviceKind::Curtain,
        by_room: true,
        apply: curtain,
        functions: curtain_functions,
    },
    Binding {
        instruction: "TV",
        kind: DeviceKind::Tv,
        by_room: true,
        apply: tv,
        functions: tv_functions,
    },
    Binding {
        instruction: "Robot arm",
        kind: DeviceKind::RobotArm,
        by_room: false,
        apply: arm,
        functions: arm_functions,
    },
    Binding {
        instruction: "Quadcopter",
        kind: DeviceKind::Quadcopter,
        by_room: false,
        apply: uav,
        functions: uav_functions,
    },
];

fn usage(expected: &str) -> Fail {
    Fail::Args(format!("expected {expected}"))
}

fn flag(a: &Arg) -> Option<bool> {
    match a.as_i64() {
        Some(0) => Some(false),
        Some(1) => Some(true),
        _ => None,
    }
}

fn home(s: &mut DeviceState) -> &mut HomeDeviceState {
    match s {
        DeviceState::Home(h) => h,
        _ => unreachable!("home binding on a non-home device"),
    }
}

fn lamp(args: &[Arg], s: &mut DeviceState, _: u64) -> Result<String, Fail> {
    let h = home(s);
    match args {
        [f] => {
            let on = flag(f).ok_or_else(|| usage("(room, 0|1) or (room, brightness, 0..100)"))?;
            h.power = Power::from_flag(on);
            Ok(format!("power {}", h.power.as_str()))
        }
        [Arg::Word(w), level] if w == "brightness" => {
            let v = level.as_i64().ok_or_else(|| usage("an integer brightness"))?;
            if !(0..=100).contains(&v) {
                return Err(Fail::Refused(format!("brightness {v} outside 0-100")));
            }
            h.brightness = Some(v as u8);
            Ok(format!("brightness {v}"))
        }
        _ => Err(usage("(room, 0|1) or (room, brightness, 0..100)")),
    }
}

fn thermostat(args: &[Arg], s: &mut DeviceState, _: u64) -> Result<String, Fail> {
    let h = home(s);
    let set_power = |h: &mut HomeDeviceState, a: &Arg| {
        let on = flag(a).ok_or_else(|| usage("power 0|1"))?;
        h.power = Power::from_flag(on);
        Ok(format!("power {}", h.power.as_str()))
    };
    match args {
        [f] => set_power(h, f),
        [Arg::Word(w), f] if w == "power" => set_power(h, f),
        [Arg::Word(w), t] if w == "set" => {
            let t = t.as_f64().ok_or_else(|| usage("a numeric temperature"))?;
            let (lo, hi) = THERMOSTAT_RANGE_C;
            if !(lo..=hi).contains(&t) {
                return Err(Fail::Refused(format!("temperature {t} °C outside {lo}-{hi} °C")));
            }
            h.temperature_c = Some(t);
            Ok(format!("target {t} °C"))
        }
        _ => Err(usage("(set, celsius), (power, 0|1) or (0|1)")),
    }
}

fn curtain(args: &[Arg], s: &mut DeviceState, _: u64) -> Result<String, Fail> {
    let h = home(s);
    let open = match args {
        [Arg::Word(w)] if w == "open" => true,
        [Arg::Word(w)] if w == "close" || w == "closed" => false,
        [f] => flag(f).ok_or_else(|| usage("(room, open|close)"))?,
        _ => return Err(usage("(room, open|close)")),
    };
    h.open = Some(open);
    Ok(if open { "opened".into() } else { "closed".into() })
}

fn tv(args: &[Arg], s: &mut DeviceState, _: u64) -> Result<String, Fail> {
    let h = home(s);
    match args {
        [f] => {
            let on = flag(f).ok_or_else(|| usage("(room, 0|1)"))?;
            h.power = Power::from_flag(on);
            Ok(format!("power {}", h.power.as_str()))
        }
        _ => Err(usage("(room, 0|1)")),
    }
}

fn numbers<const N: usize>(args: &[Arg], what: &str) -> Result<[f64; N], Fail> {
    if args.len() != N {
        return Err(usage(what));
    }
    let mut out = [0.0; N];
    for (o, a) in out.iter_mut().zip(args) {
        *o = a.as_f64().ok_or_else(|| usage(what))?;
    }
    Ok(out)
}

fn fmt3(p: [f64; 3]) -> String {
    let f = |v: f64| {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    };
    format!("({}, {}, {})", f(p[0]), f(p[1]), f(p[2]))
}

fn in_workspace(p: [f64; 3]) -> Result<(), Fail> {
    let (lo, hi) = ARM_WORKSPACE_CM;
    if p.iter().all(|v| (lo..=hi).contains(v)) {
        Ok(())
    } else {
        Err(Fail::Refused(format!(
            "{} cm is outside the {lo}-{hi} cm workspace",
            fmt3(p)
        )))
    }
}

fn arm(args: &[Arg], s: &mut DeviceState, _: u64) -> Result<String, Fail> {
    let DeviceState::Arm(a) = s else {
        unreachable!("arm binding on a non-arm device")
    };
    let verb = args.first().and_then(Arg::as_word);
    match verb {
        None => {
            let p = numbers::<3>(args, "(x, y, z) in cm")?;
            move_arm(a, p)
        }
        Some("move") => {
            let d = numbers::<3>(&args[1..], "(move, dx, dy, dz)")?;
            let p = [a.position[0] + d[0], a.position[1] + d[1], a.position[2] + d[2]];
            move_arm(a, p)
        }
        Some("home") if args.len() == 1 => move_arm(a, [25.0, 25.0, 25.0]),
        Some("rotate") => {
            let [deg] = numbers::<1>(&args[1..], "(rotate, degrees)")?;
            a.gripper_angle_deg = (a.gripper_angle_deg + deg).rem_euclid(360.0);
            Ok(format!("gripper rotated to {} deg", a.gripper_angle_deg))
        }
        Some("grab") if args.len() == 1 => {
            if a.gripper == Gripper::Closed {
                return Err(Fail::Refused("gripper is closed".into()));
            }
            let nearest = a
                .objects
                .iter()
                .map(|(id, p)| (id.clone(), dist(*p, a.position)))
                .filter(|(_, d)| *d <= GRAB_TOLERANCE_CM)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            let Some((id, _)) = nearest else {
                return Err(Fail::Refused(format!("no object within {GRAB_TOLERANCE_CM} cm")));
            };
            a.objects.remove(&id);
            a.gripper = Gripper::Closed;
            a.held_object = Some(id.clone());
            Ok(format!("grabbed {id}"))
        }
        Some("place") => {
            if args.len() != 1 {
                let p = numbers::<3>(&args[1..], "(place) or (place, x, y, z)")?;
                in_workspace(p)?;
                if a.held_object.is_none() {
                    return Err(Fail::Refused("not holding anything".into()));
                }
                a.position = p;
            }
            let Some(id) = a.held_object.take() else {
                return Err(Fail::Refused("not holding anything".into()));
            };
            a.objects.insert(id.clone(), a.position);
            a.gripper = Gripper::Open;
            Ok(format!("placed {id} at {} cm", fmt3(a.position)))
        }
        Some("open") if args.len() == 1 => {
            if a.held_object.is_some() {
                return Err(Fail::Refused("holding an object; use place".into()));
            }
            a.gripper = Gripper::Open;
            Ok("gripper open".into())
        }
        Some("close") if args.len() == 1 => {
            a.gripper = Gripper::Closed;
            Ok("gripper closed".into())
        }
        _ => Err(usage(
            "(x, y, z), (move, dx, dy, dz), (rotate, deg), (grab), (place[, x, y, z]), (open), (close) or (home)",
        )),
    }
}

fn move_arm(a: &mut ArmState, p: [f64; 3]) -> Result<String, Fail> {
    in_workspace(p)?;
    a.position = p;
    Ok(format!("moved to {} cm", fmt3(p)))
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn fly(u: &mut UavState, north: f64, east: f64, up: f64) -> Result<String, Fail> {
    let next = [u.position[0] + north, u.position[1] + east, u.position[2] + up];
    if next[2] < 0.0 {
        return Err(Fail::Refused(format!("altitude {} m below ground", next[2])));
    }
    u.position = next;
    Ok(format!("at {} m", fmt3(next)))
}

fn uav(args: &[Arg], s: &mut DeviceState, tick: u64) -> Result<String, Fail> {
    let DeviceState::Uav(u) = s else {
        unreachable!("uav binding on a non-uav device")
    };
    match args.first().and_then(Arg::as_word) {
        None => {
            // Body frame: forward along the heading, left 90° counter-clockwise.
            let [fwd, up, left, yaw] = numbers::<4>(args, "(forward_m, up_m, left_m, yaw_deg)")?;
            let h = u.heading_deg.to_radians();
            let north = fwd * h.cos() + left * h.sin();
            let east = fwd * h.sin() - left * h.cos();
            let line = fly(u, north, east, up)?;
            u.heading_deg = (u.heading_deg + yaw).rem_euclid(360.0);
            Ok(line)
        }
        Some(dir @ ("north" | "south" | "east" | "west")) => {
            let [m] = numbers::<1>(&args[1..], "(direction, metres)")?;
            if m < 0.0 {
                return Err(Fail::Args("distance must be non-negative".into()));
            }
            let (n, e) = match dir {
                "north" => (m, 0.0),
                "south" => (-m, 0.0),
                "east" => (0.0, m),
                _ => (0.0, -m),
            };
            fly(u, n, e, 0.0)
        }
        Some("speed") => {
            let [v] = numbers::<1>(&args[1..], "(speed, m/s)")?;
            if !(0.0..=UAV_MAX_SPEED_MPS).contains(&v) {
                return Err(Fail::Refused(format!("speed {v} m/s outside 0-{UAV_MAX_SPEED_MPS}")));
            }
            u.speed_mps = v;
            Ok(format!("speed {v} m/s"))
        }
        Some("photo") if args.len() == 1 => {
            u.photos.push(Photo {
                position: u.position,
                timestamp: tick,
            });
            Ok(format!("photo {} at {} m", u.photos.len(), fmt3(u.position)))
        }
        _ => Err(usage(
            "(forward, up, left, yaw), (north|south|east|west, m), (speed, m/s) or (photo)",
        )),
    }
}

fn ins(text: &str) -> ControlInstruction {
    parse_instruction(text).expect("built-in function instruction parses")
}

fn room(d: &Device) -> &str {
    d.room.as_deref().unwrap_or("home")
}

fn lamp_functions(d: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    let r = room(d);
    vec![
        ("on", "turn on".into(), ins(&format!("$Lamp ({r}, 1)"))),
        ("off", "turn off".into(), ins(&format!("$Lamp ({r}, 0)"))),
        ("dim", "dim to 30%".into(), ins(&format!("$Lamp ({r}, brightness, 30)"))),
    ]
}

fn thermostat_functions(_: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    vec![
        ("on", "turn on".into(), ins("$Thermostat (power, 1)")),
        ("off", "turn off".into(), ins("$Thermostat (power, 0)")),
        ("set_22", "set 22 °C".into(), ins("$Thermostat (set, 22)")),
        ("set_26", "set 26 °C".into(), ins("$Thermostat (set, 26)")),
    ]
}

fn curtain_functions(d: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    let r = room(d);
    vec![
        ("open", "open".into(), ins(&format!("$Curtain ({r}, open)"))),
        ("close", "close".into(), ins(&format!("$Curtain ({r}, close)"))),
    ]
}

fn tv_functions(d: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    let r = room(d);
    vec![
        ("on", "turn on".into(), ins(&format!("$TV ({r}, 1)"))),
        ("off", "turn off".into(), ins(&format!("$TV ({r}, 0)"))),
    ]
}

fn arm_functions(_: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    vec![
        ("home", "home position".into(), ins("$Robot arm (home)")),
        ("x_plus", "move +X 5 cm".into(), ins("$Robot arm (move, 5, 0, 0)")),
        ("x_minus", "move -X 5 cm".into(), ins("$Robot arm (move, -5, 0, 0)")),
        ("y_plus", "move +Y 5 cm".into(), ins("$Robot arm (move, 0, 5, 0)")),
        ("y_minus", "move -Y 5 cm".into(), ins("$Robot arm (move, 0, -5, 0)")),
        ("z_plus", "raise 5 cm".into(), ins("$Robot arm (move, 0, 0, 5)")),
        ("z_minus", "lower 5 cm".into(), ins("$Robot arm (move, 0, 0, -5)")),
        ("rotate", "rotate gripper 45°".into(), ins("$Robot arm (rotate, 45)")),
        ("grab", "grab".into(), ins("$Robot arm (grab)")),
        ("place", "place".into(), ins("$Robot arm (place)")),
    ]
}

fn uav_functions(_: &Device) -> Vec<(&'static str, String, ControlInstruction)> {
    vec![
        ("forward", "forward 1 m".into(), ins("$Quadcopter (1, 0, 0, 0)")),
        ("left", "left 1 m".into(), ins("$Quadcopter (0, 0, 1, 0)")),
        ("right", "right 1 m".into(), ins("$Quadcopter (0, 0, -1, 0)")),
        ("up", "up 1 m".into(), ins("$Quadcopter (0, 1, 0, 0)")),
        ("down", "down 1 m".into(), ins("$Quadcopter (0, -1, 0, 0)")),
        ("turn", "turn right 90°".into(), ins("$Quadcopter (0, 0, 0, 90)")),
        ("north", "fly 100 m north".into(), ins("$Quadcopter (north, 100)")),
        ("speed", "speed 5 m/s".into(), ins("$Quadcopter (speed, 5)")),
        ("photo", "take photo".into(), ins("$Quadcopter (photo)")),
    ]
}
