use bci_core::devices::{discover, DeviceError, DeviceState, Fleet, Gripper, Power};
use bci_core::intent::{parse_device_catalog, parse_instruction};

fn run(fleet: &mut Fleet, text: &str) -> Result<String, DeviceError> {
    fleet.execute(&parse_instruction(text).unwrap()).map(|r| r.event)
}

fn home(fleet: &Fleet, name: &str) -> bci_core::devices::HomeDeviceState {
    match fleet.query_state(name).unwrap() {
        DeviceState::Home(h) => h,
        other => panic!("{name} is {other:?}"),
    }
}

#[test]
fn demo_catalog_lists_the_fleet() {
    let fleet = Fleet::demo();
    let catalog = discover(&fleet);
    let names: Vec<&str> = catalog.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "air conditioner",
            "bedroom curtain",
            "bedroom light",
            "living room light",
            "quadcopter",
            "robot arm",
            "tv"
        ]
    );
    assert!(catalog
        .entries
        .iter()
        .all(|e| !e.functions.is_empty() && !e.address.is_empty()));
    // Same schema as catalogs from the LLM.
    assert_eq!(parse_device_catalog(&catalog.to_json()).unwrap(), catalog);
    assert!(discover(&Fleet::empty()).is_empty());
}

#[test]
fn discovery_reflects_state_changes() {
    let mut fleet = Fleet::demo();
    assert_eq!(
        discover(&fleet).get("living room light").unwrap().status["power"],
        "off"
    );
    run(&mut fleet, "$Lamp (living room, 1)").unwrap();
    assert_eq!(discover(&fleet).get("living room light").unwrap().status["power"], "on");
}

#[test]
fn table_instructions_execute() {
    let mut fleet = Fleet::demo();
    run(&mut fleet, "$Lamp (living room, 1)").unwrap();
    assert_eq!(home(&fleet, "living room light").power, Power::On);
    assert_eq!(home(&fleet, "bedroom light").power, Power::Off);

    run(&mut fleet, "$Robot arm (10, 20, 30)").unwrap();
    let DeviceState::Arm(a) = fleet.query_state("robot arm").unwrap() else {
        panic!()
    };
    assert_eq!(a.position, [10.0, 20.0, 30.0]);

    run(&mut fleet, "$Quadcopter (0, 0, 1, 0)").unwrap();
    let DeviceState::Uav(u) = fleet.query_state("quadcopter").unwrap() else {
        panic!()
    };
    assert_eq!(u.position, [0.0, -1.0, 0.0]);

    run(&mut fleet, "$Thermostat (set, 22)").unwrap();
    assert_eq!(home(&fleet, "air conditioner").temperature_c, Some(22.0));
    run(&mut fleet, "$Curtain (bedroom, open)").unwrap();
    assert_eq!(home(&fleet, "bedroom curtain").open, Some(true));
}

#[test]
fn failures_leave_fleet_untouched() {
    let mut fleet = Fleet::demo();
    run(&mut fleet, "$Lamp (bedroom, 1)").unwrap();
    let before = fleet.clone();
    for bad in [
        "$Thermostat (set, 99)",
        "$Lamp (kitchen, 1)",
        "$Lamp (living room, 2)",
        "$Toaster (1)",
        "$Robot arm (60, 0, 0)",
        "$Robot arm (1, 2)",
        "$Robot arm (place)",
        "$Quadcopter (0, -5, 0, 0)",
        "$Quadcopter (speed, 20)",
    ] {
        assert!(run(&mut fleet, bad).is_err(), "{bad} should fail");
        assert_eq!(fleet, before, "{bad} changed state");
    }
    assert!(matches!(
        run(&mut fleet, "$Thermostat (set, 99)"),
        Err(DeviceError::Refused { .. })
    ));
    assert!(matches!(
        run(&mut fleet, "$Toaster (1)"),
        Err(DeviceError::UnknownDevice(_))
    ));
}

#[test]
fn arm_grab_and_place_protocol() {
    let mut fleet = Fleet::demo();
    // Cube sits 5 cm along +X from the start position.
    assert!(run(&mut fleet, "$Robot arm (grab)").is_err());
    run(&mut fleet, "$Robot arm (move, 5, 0, 0)").unwrap();
    run(&mut fleet, "$Robot arm (rotate, 45)").unwrap();
    run(&mut fleet, "$Robot arm (grab)").unwrap();
    assert!(run(&mut fleet, "$Robot arm (grab)").is_err(), "gripper already closed");
    run(&mut fleet, "$Robot arm (place, 10, 40, 25)").unwrap();
    let DeviceState::Arm(a) = fleet.query_state("robot arm").unwrap() else {
        panic!()
    };
    assert_eq!(a.gripper, Gripper::Open);
    assert_eq!(a.held_object, None);
    assert_eq!(a.objects["cube"], [10.0, 40.0, 25.0]);
    assert_eq!(a.gripper_angle_deg, 45.0);
    assert!(run(&mut fleet, "$Robot arm (place)").is_err());
}

#[test]
fn uav_body_frame_and_photos() {
    let mut fleet = Fleet::demo();
    run(&mut fleet, "$Quadcopter (0, 10, 0, 90)").unwrap();
    // Facing east, "left" points north.
    run(&mut fleet, "$Quadcopter (0, 0, 1, 0)").unwrap();
    run(&mut fleet, "$Quadcopter (north, 100)").unwrap();
    run(&mut fleet, "$Quadcopter (speed, 5)").unwrap();
    run(&mut fleet, "$Quadcopter (photo)").unwrap();
    run(&mut fleet, "$Quadcopter (photo)").unwrap();
    assert!(run(&mut fleet, "$Quadcopter (speed, -1)").is_err());
    let DeviceState::Uav(u) = fleet.query_state("quadcopter").unwrap() else {
        panic!()
    };
    assert!((u.position[0] - 101.0).abs() < 1e-9);
    assert!(u.position[1].abs() < 1e-9);
    assert_eq!(u.position[2], 10.0);
    assert_eq!(u.heading_deg, 90.0);
    assert_eq!(u.speed_mps, 5.0);
    assert_eq!(u.photos.len(), 2);
    assert!(u.photos[0].timestamp < u.photos[1].timestamp);
}

#[test]
fn same_sequence_same_final_state() {
    let script = [
        "$Lamp (living room, 1)",
        "$Robot arm (move, 5, 0, 0)",
        "$Robot arm (grab)",
        "$Thermostat (set, 30)",
        "$Quadcopter (east, 3)",
        "$Quadcopter (photo)",
    ];
    let mut a = Fleet::demo();
    let mut b = Fleet::demo();
    for s in script {
        run(&mut a, s).unwrap();
        run(&mut b, s).unwrap();
    }
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn queries() {
    let fleet = Fleet::demo();
    let tv = home(&fleet, "tv");
    assert_eq!(tv.power, Power::Off);
    assert_eq!(home(&fleet, "air conditioner").temperature_c, Some(24.0));
    assert!(matches!(
        fleet.query_state("fridge"),
        Err(DeviceError::UnknownDevice(_))
    ));
}

#[test]
fn every_catalog_function_executes_or_refuses_cleanly() {
    let fleet = Fleet::demo();
    for entry in discover(&fleet).entries {
        for f in &entry.functions {
            let mut scratch = fleet.clone();
            let instr = f.instruction.clone().unwrap();
            match scratch.execute(&instr) {
                Ok(r) => assert_eq!(r.device, entry.name),
                Err(DeviceError::Refused { device, .. }) => assert_eq!(device, entry.name),
                Err(e) => panic!("{}: {e}", instr.render()),
            }
        }
    }
}
