//! Property tests for the interpreter, the directive language, and the
//! emitters.

use figrelabel_core::{
    concat_matrix, convert_length, emit_label_listing, emit_relabeled_eps, emit_tex_overlay,
    execute, parse_dsc, parse_spec, print_spec, resolve, tokenize, Directive, Length,
    ListingFormat, Matrix, Point, PsObject, RelabelSpec, TokenKind, Unit, Vm, VmConfig,
};
use proptest::prelude::*;

fn well_conditioned_matrix() -> impl Strategy<Value = Matrix> {
    let entry = -100.0f64..100.0;
    (
        entry.clone(),
        entry.clone(),
        entry.clone(),
        entry.clone(),
        -1000.0f64..1000.0,
        -1000.0f64..1000.0,
    )
        .prop_map(|(a, b, c, d, tx, ty)| Matrix::new(a, b, c, d, tx, ty))
        .prop_filter("invertible and well conditioned", |m| {
            m.determinant().abs() > 1e-3
        })
}

fn point() -> impl Strategy<Value = Point> {
    (-1000.0f64..1000.0, -1000.0f64..1000.0).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #[test]
    fn transform_itransform_inverse(m in well_conditioned_matrix(), p in point()) {
        let there = m.transform_point(p);
        let back = m.inverse_transform_point(there).unwrap();
        prop_assert!((back.x - p.x).abs() < 1e-9);
        prop_assert!((back.y - p.y).abs() < 1e-9);
    }

    #[test]
    fn idtransform_ignores_translation_bitwise(
        m in well_conditioned_matrix(),
        d in point(),
        tx in -1e6f64..1e6,
        ty in -1e6f64..1e6,
    ) {
        let mut shifted = m;
        shifted.tx = tx;
        shifted.ty = ty;
        let a = m.inverse_transform_delta(d).unwrap();
        let b = shifted.inverse_transform_delta(d).unwrap();
        prop_assert!(a.bits_eq(&b));
    }

    #[test]
    fn rotation_roundtrip(theta in -720.0f64..720.0, p in point()) {
        let ctm = concat_matrix(
            &concat_matrix(&Matrix::IDENTITY, &Matrix::rotation_degrees(theta)),
            &Matrix::rotation_degrees(-theta),
        );
        let q = ctm.transform_point(p);
        prop_assert!((q.x - p.x).abs() < 1e-9);
        prop_assert!((q.y - p.y).abs() < 1e-9);
    }
}

/// Small grammar of CTM-touching fragments for the gsave round-trip check.
fn ctm_fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        (1..10i32, 1..10i32).prop_map(|(a, b)| format!("{} {} scale", a, b)),
        (-360..360i32).prop_map(|r| format!("{} rotate", r)),
        (-50..50i32, -50..50i32).prop_map(|(x, y)| format!("{} {} translate", x, y)),
        (-5..5i32, 1..5i32).prop_map(|(x, s)| format!("[{} 0 0 {} 1 2] concat", s.max(1), s + x.abs())),
        (0..100i32, 0..100i32).prop_map(|(x, y)| format!("{} {} moveto", x, y)),
        Just("newpath".to_string()),
    ]
}

proptest! {
    #[test]
    fn gsave_grestore_restores_state_exactly(
        setup in proptest::collection::vec(ctm_fragment(), 0..4),
        inner in proptest::collection::vec(ctm_fragment(), 0..6),
    ) {
        let mut program = setup.join(" ");
        program.push_str(" gsave ");
        program.push_str(&inner.join(" "));
        program.push_str(" grestore");

        let before_prog = setup.join(" ");
        let mut vm = Vm::new(VmConfig::default());
        vm.run(&tokenize(before_prog.as_bytes()).unwrap()).unwrap();
        let before = vm.graphics_state().clone();

        let mut vm2 = Vm::new(VmConfig::default());
        vm2.run(&tokenize(program.as_bytes()).unwrap()).unwrap();
        let after = vm2.graphics_state();

        prop_assert_eq!(&before.ctm, &after.ctm);
        prop_assert_eq!(&before.current_point, &after.current_point);
    }
}

/// Every show-family invocation records exactly one label with the exact
/// string bytes.
fn show_invocation(idx: usize) -> impl Strategy<Value = (String, Vec<u8>)> {
    let label = proptest::collection::vec(0u8..=255, 0..6);
    (0..9usize, label, 0..500i32, 0..500i32).prop_map(move |(which, label, x, y)| {
        let ps_string = String::from_utf8(figrelabel_core::encode_ps_string(&label)).unwrap();
        let _ = idx;
        let call = match which {
            0 => format!("{} {} moveto {} show", x, y, ps_string),
            1 => format!("{} {} moveto 1 0 {} ashow", x, y, ps_string),
            2 => format!("{} {} moveto 1 0 32 {} widthshow", x, y, ps_string),
            3 => format!("{} {} moveto 1 0 32 1 0 {} awidthshow", x, y, ps_string),
            4 => format!("{} {} moveto {} [1] xshow", x, y, ps_string),
            5 => format!("{} {} moveto {} [1] yshow", x, y, ps_string),
            6 => format!("{} {} moveto {} [1 1] xyshow", x, y, ps_string),
            7 => format!("{} {} moveto {{pop pop}} {} cshow", x, y, ps_string),
            _ => format!("{} {} moveto {{pop pop}} {} kshow", x, y, ps_string),
        };
        (call, label)
    })
}

proptest! {
    #[test]
    fn interception_is_complete(
        calls in proptest::collection::vec(show_invocation(0), 0..12)
    ) {
        let program: String = calls.iter().map(|(c, _)| c.as_str()).collect::<Vec<_>>().join("\n");
        let result = execute(&tokenize(program.as_bytes()).unwrap(), &VmConfig::default()).unwrap();
        prop_assert_eq!(result.labels.len(), calls.len());
        for (record, (_, expected)) in result.labels.iter().zip(&calls) {
            prop_assert_eq!(&record.bytes, expected);
        }
    }

    #[test]
    fn ps_string_encoding_round_trips(bytes in proptest::collection::vec(0u8..=255, 0..64)) {
        let encoded = figrelabel_core::encode_ps_string(&bytes);
        let tokens = tokenize(&encoded).unwrap();
        prop_assert_eq!(tokens.len(), 1);
        prop_assert_eq!(tokens[0].decoded.as_deref(), Some(bytes.as_slice()));
    }

    #[test]
    fn tokenizer_is_total(bytes in proptest::collection::vec(0u8..=255, 0..256)) {
        // any byte soup either tokenizes or reports a positioned error
        if let Ok(tokens) = tokenize(&bytes) {
            for t in &tokens {
                prop_assert!(bytes[t.pos.offset..].starts_with(&t.text));
            }
        }
    }

    #[test]
    fn tokenizer_offsets_lossless_on_valid_programs(
        words in proptest::collection::vec(
            prop_oneof![
                Just("[".to_string()), Just("]".to_string()),
                Just("{".to_string()), Just("}".to_string()),
                "[a-zA-Z]{1,8}".prop_map(|s| s),
                (-1000i32..1000).prop_map(|n| n.to_string()),
                (-100.0f64..100.0).prop_map(|r| format!("{:.3}", r)),
                proptest::collection::vec(0u8..=255u8, 0..8)
                    .prop_map(|b| String::from_utf8(figrelabel_core::encode_ps_string(&b)).unwrap()),
            ],
            0..40,
        )
    ) {
        let source = words.join(" ");
        let tokens = tokenize(source.as_bytes()).unwrap();
        for t in &tokens {
            prop_assert!(source.as_bytes()[t.pos.offset..].starts_with(&t.text));
        }
        // token count matches the words fed in (braces and strings are single tokens)
        prop_assert_eq!(tokens.len(), words.len());
    }
}

fn label_bytes() -> impl Strategy<Value = Vec<u8>> {
    // small alphabet forces duplicates
    proptest::collection::vec(prop_oneof![Just(b'A'), Just(b'B'), Just(0xe9u8)], 1..3)
}

proptest! {
    #[test]
    fn find_label_matches_brute_force(
        entries in proptest::collection::vec((label_bytes(), point()), 0..20),
        query in label_bytes(),
    ) {
        let mut table = figrelabel_core::LabelTable::new();
        for (bytes, anchor) in &entries {
            table.append(bytes.clone(), *anchor);
        }
        prop_assert!(table.index_is_consistent());

        let fallback = Point::new(-1.0, -2.0);
        let (got, found) = table.find_label(&query, fallback);

        // oracle: linear scan for the lowest sequence number
        let brute = entries.iter().enumerate().find(|(_, (b, _))| *b == query);
        match brute {
            Some((_, (_, anchor))) => {
                prop_assert!(found);
                prop_assert!(got.bits_eq(anchor));
            }
            None => {
                prop_assert!(!found);
                prop_assert!(got.bits_eq(&fallback));
            }
        }
    }
}

fn any_unit() -> impl Strategy<Value = Unit> {
    prop_oneof![
        Just(Unit::Bp),
        Just(Unit::Pt),
        Just(Unit::In),
        Just(Unit::TrueIn),
        Just(Unit::Cm),
        Just(Unit::Mm),
    ]
}

fn any_length() -> impl Strategy<Value = Length> {
    ((-1e4f64..1e4), any_unit()).prop_map(|(v, u)| Length::new(v, u))
}

fn any_directive() -> impl Strategy<Value = Directive> {
    let bytes = proptest::collection::vec(0u8..=255, 1..8);
    let text = proptest::collection::vec(0u8..=255, 0..8);
    prop_oneof![
        (bytes, text.clone(), any_length(), any_length()).prop_map(|(old, new_text, dx, dy)| {
            Directive::Relabel {
                old,
                new_text,
                dx,
                dy,
            }
        }),
        (any_length(), any_length(), text).prop_map(|(x, y, text)| Directive::ExtraLabel {
            x,
            y,
            text
        }),
    ]
}

proptest! {
    #[test]
    fn spec_print_parse_round_trip(
        figure in "[a-zA-Z0-9_./ -]{1,24}",
        width in proptest::option::of(any_length()),
        size in any_length(),
        directives in proptest::collection::vec(any_directive(), 0..8),
    ) {
        let spec = RelabelSpec {
            figure: figure.trim().to_string(),
            width,
            font_name: "Helvetica".into(),
            font_size: size,
            directives,
        };
        prop_assume!(!spec.figure.is_empty());
        let printed = print_spec(&spec);
        let reparsed = parse_spec(&printed).unwrap();
        prop_assert_eq!(reparsed, spec);
    }

    #[test]
    fn unit_conversion_is_linear(a in -1e3f64..1e3, x in -1e3f64..1e3, u in any_unit()) {
        let scaled = Length::new(a * x, u).bp_value();
        let reference = a * Length::new(x, u).bp_value();
        let tol = 1e-12 * (1.0 + scaled.abs().max(reference.abs()));
        prop_assert!((scaled - reference).abs() <= tol);
        prop_assert_eq!(Length::new(0.0, u).bp_value(), 0.0);
    }

    #[test]
    fn convert_length_parses_its_own_display(len in any_length()) {
        let shown = len.to_string();
        let back = convert_length(&shown).unwrap();
        prop_assert_eq!(back, len);
    }
}

// End-to-end: a generated figure + spec, applied and re-extracted. The
// emitted document must contain exactly the replacement shows at the
// scaled anchor positions and none of the originals.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn apply_self_consistency(
        coords in proptest::collection::vec((5..195i32, 5..95i32), 1..6),
        use_width in any::<bool>(),
    ) {
        let mut body = String::from(
            "%!PS-Adobe-3.0 EPSF-3.0\n%%BoundingBox: 0 0 200 100\n%%EndComments\n",
        );
        let mut spec_src = String::from("figure prop.eps\n");
        if use_width {
            spec_src.push_str("width 3truein\n");
        }
        for (i, (x, y)) in coords.iter().enumerate() {
            body.push_str(&format!("{} {} moveto (L{}) show\n", x, y, i));
            spec_src.push_str(&format!("relabel \"L{}\" \"R{}\"\n", i, i));
        }
        body.push_str("%%EOF\n");

        let tokens = tokenize(body.as_bytes()).unwrap();
        let table = execute(&tokens, &VmConfig::default()).unwrap().labels;
        let meta = parse_dsc(body.as_bytes()).unwrap();
        let spec = parse_spec(&spec_src).unwrap();
        let plan = resolve(&spec, &table, &meta, false).unwrap();
        let out = emit_relabeled_eps(body.as_bytes(), &plan, &spec);

        let result = execute(&tokenize(&out).unwrap(), &VmConfig::default()).unwrap();
        prop_assert_eq!(result.labels.len(), plan.placements.len());
        for (r, p) in result.labels.iter().zip(&plan.placements) {
            prop_assert_eq!(&r.bytes, &p.text);
            prop_assert!((r.anchor.x - (p.anchor.x + p.dx) * plan.scale).abs() < 1e-6);
            prop_assert!((r.anchor.y - (p.anchor.y + p.dy) * plan.scale).abs() < 1e-6);
        }

        // the overlay is scale independent
        let overlay = emit_tex_overlay(&plan);
        prop_assert_eq!(overlay.lines().count(), plan.placements.len());

        // listings stay in seq order
        let tsv = emit_label_listing(&table, ListingFormat::Tsv);
        prop_assert_eq!(tsv.lines().count(), table.len() + 1);
    }
}

// Executing is a pure function of (program, config).
proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn execution_is_deterministic(
        calls in proptest::collection::vec(show_invocation(0), 0..6)
    ) {
        let program: String = calls.iter().map(|(c, _)| c.as_str()).collect::<Vec<_>>().join("\n");
        let tokens = tokenize(program.as_bytes()).unwrap();
        let a = execute(&tokens, &VmConfig::default()).unwrap();
        let b = execute(&tokens, &VmConfig::default()).unwrap();
        prop_assert_eq!(a.labels.records(), b.labels.records());
        prop_assert_eq!(a.steps_used, b.steps_used);
    }
}

#[test]
fn tokenize_classifies_numbers_not_names() {
    // spot checks that the strategies above rely on
    for (src, ok) in [("16#ff", true), ("1e", false), ("-.5", true)] {
        let t = tokenize(src.as_bytes()).unwrap();
        let is_num = matches!(
            t[0].kind,
            TokenKind::Integer(_) | TokenKind::Real(_) | TokenKind::RadixNumber(_)
        );
        assert_eq!(is_num, ok, "{}", src);
    }
}

#[test]
fn step_budget_is_respected_on_fixture_corpus() {
    // every equivalence fixture terminates well inside the default budget
    let mut worst = 0;
    for body in FIXTURE_BODIES {
        let tokens = tokenize(body.as_bytes()).unwrap();
        let r = execute(&tokens, &VmConfig::default()).unwrap();
        worst = worst.max(r.steps_used);
    }
    assert!(worst < 10_000, "fixtures should be tiny, used {}", worst);
}

const FIXTURE_BODIES: &[&str] = &[
    "72 50 moveto (Bc) show 10 20 moveto (Ab) show",
    "2 2 scale 36 25 moveto (Bc) show",
    "0 1 100 { dup moveto (x) show } for",
];

#[test]
fn vm_objects_are_shared_by_identity() {
    let mut vm = Vm::new(VmConfig::default());
    vm.run(&tokenize(b"/a [1 2 3] def /b a def b 0 99 put a 0 get").unwrap())
        .unwrap();
    match vm.operand_stack() {
        [PsObject::Number(n)] => assert_eq!(*n, 99.0),
        other => panic!("expected [99], got {:?}", other),
    }
}
