use bci_core::intent::{parse_instruction, render_instruction, Arg, ControlInstruction};
use proptest::prelude::*;

const TABLE_ROWS: [&str; 5] = [
    "$Robot arm (10, 20, 30)",
    "$Quadcopter (0, 0, 1, 0)",
    "$Lamp (living room, 1)",
    "$Thermostat (set, 22)",
    "$Curtain (bedroom, open)",
];

#[test]
fn table_rows_round_trip_byte_identical() {
    for row in TABLE_ROWS {
        let parsed = parse_instruction(row).unwrap();
        assert_eq!(render_instruction(&parsed), row);
    }
    let arm = parse_instruction(TABLE_ROWS[0]).unwrap();
    assert_eq!(arm.device, "Robot arm");
    assert_eq!(arm.args, vec![Arg::Int(10), Arg::Int(20), Arg::Int(30)]);
    let lamp = parse_instruction(TABLE_ROWS[2]).unwrap();
    assert_eq!(lamp.args, vec![Arg::word("living room"), Arg::Int(1)]);
    let thermo = parse_instruction(TABLE_ROWS[3]).unwrap();
    assert_eq!(thermo.args, vec![Arg::word("set"), Arg::Int(22)]);
}

#[test]
fn unspaced_form_canonicalizes() {
    let i = parse_instruction("$Robot arm(10, 20, 30)").unwrap();
    assert_eq!(i.render(), TABLE_ROWS[0]);
    let once = i.render();
    assert_eq!(parse_instruction(&once).unwrap().render(), once);
}

#[test]
fn blank_input_is_an_error() {
    for s in ["", "\n\n", "   \t "] {
        assert_eq!(parse_instruction(s).unwrap_err().offset, 0, "{s:?}");
    }
}

fn word() -> impl Strategy<Value = String> {
    let piece = "[A-Za-z\u{4e00}-\u{4e20}\u{e9}_/.-][A-Za-z0-9\u{e9}_/.-]{0,7}";
    prop::collection::vec(piece, 1..4)
        .prop_map(|w| w.join(" "))
        .prop_filter("must not read as a number", |s| {
            ControlInstruction::new("X", vec![Arg::Word(s.clone())]).is_ok()
        })
}

fn arg() -> impl Strategy<Value = Arg> {
    prop_oneof![
        any::<i64>().prop_map(Arg::Int),
        any::<f64>()
            .prop_filter("finite", |v| v.is_finite())
            .prop_map(Arg::Real),
        (-1000i32..1000, 1u32..1000).prop_map(|(a, b)| Arg::Real(a as f64 + b as f64 / 1000.0)),
        word().prop_map(Arg::Word),
    ]
}

fn instruction() -> impl Strategy<Value = ControlInstruction> {
    (word(), prop::collection::vec(arg(), 0..6)).prop_map(|(device, args)| ControlInstruction { device, args })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_render_round_trip(instr in instruction()) {
        let text = render_instruction(&instr);
        let back = parse_instruction(&text).unwrap();
        prop_assert_eq!(&back, &instr);
        prop_assert_eq!(render_instruction(&back), text);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,40}") {
        if let Ok(i) = parse_instruction(&s) {
            let once = render_instruction(&i);
            prop_assert_eq!(render_instruction(&parse_instruction(&once).unwrap()), once);
        }
    }
}
