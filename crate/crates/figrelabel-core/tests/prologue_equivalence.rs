//! Equivalence oracle: the interpreter runs the original TeX-era
//! interception prolog verbatim (the dictionary of `Mshow`/`findlabel`
//! plus the show-family redefinitions) over each fixture body, and the
//! label triples read back out of `rllist` must match the native
//! interception path bit for bit.

use figrelabel_core::{
    execute, tokenize, Matrix, PsObject, SaveRestoreMode, Vm, VmConfig,
};

/// The legacy interception dictionary, exactly as the TeX package shipped
/// it: `Mshow` appends (string, x, y) triples to `rllist`, `findlabel`
/// scans them newest-to-oldest with every match overwriting the result
/// registers, so the first-recorded occurrence wins.
const INTERCEPT_PROLOG: &str = "\
userdict /MTGdict 99 dict put MTGdict begin
  /Mshow {[ MTGdict /rllist get aload length 2 add -1 roll
    currentpoint transform ] MTGdict /rllist 3 2 roll put} def
  /findlabel {/sought exch def
    /MTGx 3 index def /MTGy 2 index def aload length 3 idiv dup 0 eq
      {pop}
      {{2 index sought eq
          {/MTGy exch def /MTGx exch def pop}
          {pop pop pop}
        ifelse}
      repeat}
    ifelse exch MTGx exch sub exch MTGy exch sub idtransform translate
    } def
  end
";

/// The activation block: neutered save/restore plus the nine operator
/// redefinitions with their exact arities.
const SAVE_NEUTERING: &str = "/save {false} def /restore {pop} def\n";

const SHOW_REDEFS: &str = "\
/show {Mshow} def
/ashow {Mshow pop pop} def /widthshow {Mshow pop pop pop} def /awidthshow
{Mshow 5 {pop} repeat} def /xshow {pop Mshow} def /yshow {pop Mshow} def
/xyshow {pop Mshow} def /cshow {Mshow pop} def /kshow {Mshow pop} def
";

type Triple = (Vec<u8>, u64, u64);

fn config(mode: SaveRestoreMode) -> VmConfig {
    VmConfig {
        save_restore_mode: mode,
        ..VmConfig::default()
    }
}

/// Run the body natively and return bit-level label triples.
fn native_triples(body: &str, mode: SaveRestoreMode) -> Vec<Triple> {
    let tokens = tokenize(body.as_bytes()).expect("fixture tokenizes");
    let result = execute(&tokens, &config(mode)).expect("fixture executes");
    result
        .labels
        .records()
        .iter()
        .map(|r| (r.bytes.clone(), r.anchor.x.to_bits(), r.anchor.y.to_bits()))
        .collect()
}

fn verbatim_program(body: &str, mode: SaveRestoreMode, epilogue: &str) -> String {
    let neutering = match mode {
        SaveRestoreMode::Neutered => SAVE_NEUTERING,
        SaveRestoreMode::Faithful => "",
    };
    format!(
        "{INTERCEPT_PROLOG}MTGdict begin\n/rllist [] def\n{neutering}{SHOW_REDEFS}{body}\n{epilogue}"
    )
}

/// Run the verbatim prolog + redefinitions + body, then read `rllist` off
/// the machine.
fn verbatim_triples(body: &str, mode: SaveRestoreMode) -> Vec<Triple> {
    let program = verbatim_program(body, mode, "clear MTGdict /rllist get aload pop");
    let tokens = tokenize(program.as_bytes()).expect("prolog tokenizes");
    let mut vm = Vm::new(config(mode));
    vm.run(&tokens).expect("verbatim run executes");
    // nothing may have leaked through to the native interception path
    assert!(
        vm.labels().is_empty(),
        "verbatim run must shadow every show operator"
    );
    let stack = vm.operand_stack();
    assert_eq!(stack.len() % 3, 0, "rllist holds whole triples");
    stack
        .chunks(3)
        .map(|chunk| {
            let bytes = match &chunk[0] {
                PsObject::StringBytes(s) => s.borrow().clone(),
                other => panic!("expected string in rllist, got {:?}", other),
            };
            let x = match chunk[1] {
                PsObject::Number(n) => n.to_bits(),
                ref other => panic!("expected number in rllist, got {:?}", other),
            };
            let y = match chunk[2] {
                PsObject::Number(n) => n.to_bits(),
                ref other => panic!("expected number in rllist, got {:?}", other),
            };
            (bytes, x, y)
        })
        .collect()
}

fn assert_equivalent(body: &str, mode: SaveRestoreMode) {
    let native = native_triples(body, mode);
    let verbatim = verbatim_triples(body, mode);
    assert_eq!(native, verbatim, "mode {:?}, fixture:\n{}", mode, body);
    assert!(
        !native.is_empty() || body.contains("newpath"),
        "fixture should record something: {}",
        body
    );
}

pub const FIXTURES: &[&str] = &[
    // plain shows, identity CTM
    "72 50 moveto (Bc) show 10 20 moveto (Ab) show",
    // the five-string demo with five different show operators
    "/Helvetica findfont 10 scalefont setfont
     30 80 moveto (Ab) show
     120 40 moveto 2 0 (P) ashow
     72 50 moveto 1 0 32 (Bc) widthshow
     150 70 moveto (IP\") [5 5 5] xshow
     60 10 moveto {pop pop} (P') kshow",
    // duplicate label strings at distinct anchors
    "10 10 moveto (P) show 90 90 moveto (P) show 50 50 moveto (Q) show",
    // scaled CTM
    "2 2 scale 36 25 moveto (Bc) show",
    // rotation and translation
    "30 rotate 10 -7 translate 5 5 moveto (R) show",
    // gsave/grestore bracketing
    "gsave 3 1 scale 10 10 moveto (in) show grestore 20 20 moveto (out) show",
    // the remaining show operators
    "5 5 moveto 1 2 3 4 5 (W) awidthshow
     6 6 moveto (Y) [2] yshow
     7 7 moveto (XY) [1 2 3 4] xyshow
     8 8 moveto {pop pop} (C) cshow",
    // consecutive shows share one anchor
    "33 44 moveto (a) show (b) show (c) show",
    // concat and setmatrix
    "[2 0 0 3 5 7] concat 1 1 moveto (M) show matrix setmatrix 2 2 moveto (I) show",
    // save/restore interacting with the CTM (differential between modes)
    "save 2 2 scale 1 1 moveto (s) show restore 10 10 moveto (L) show",
    // labels produced in a loop through one shared string
    "/lbl (T) def 0 1 2 { 10 mul dup moveto lbl show } for",
    // path operators feeding the current point
    "0 0 10 0 90 arc (A) show 5 5 rmoveto (B) show newpath 3 4 moveto (C) show",
];

#[test]
fn all_fixtures_equivalent_in_neutered_mode() {
    for body in FIXTURES {
        assert_equivalent(body, SaveRestoreMode::Neutered);
    }
}

#[test]
fn all_fixtures_equivalent_in_faithful_mode() {
    for body in FIXTURES {
        assert_equivalent(body, SaveRestoreMode::Faithful);
    }
}

#[test]
fn save_restore_differential_between_modes() {
    let body = "save 2 2 scale 1 1 moveto (s) show restore 10 10 moveto (L) show";
    let faithful = native_triples(body, SaveRestoreMode::Faithful);
    let neutered = native_triples(body, SaveRestoreMode::Neutered);
    // (s) records identically: the scale is live either way
    assert_eq!(faithful[0], neutered[0]);
    assert_eq!(faithful[1].1, 10.0f64.to_bits());
    assert_eq!(faithful[1].2, 10.0f64.to_bits());
    assert_eq!(neutered[1].1, 20.0f64.to_bits());
    assert_eq!(neutered[1].2, 20.0f64.to_bits());
}

/// Duplicate handling pinned through a verbatim `findlabel` call: the
/// result registers must land on the FIRST recorded anchor.
#[test]
fn verbatim_findlabel_first_occurrence_wins() {
    let body = "10 10 moveto (P) show 90 90 moveto (P) show";
    let epilogue = "40 7 transform MTGdict /rllist get (P) findlabel MTGx MTGy";
    let program = verbatim_program(body, SaveRestoreMode::Neutered, epilogue);
    let mut vm = Vm::new(config(SaveRestoreMode::Neutered));
    vm.run(&tokenize(program.as_bytes()).unwrap()).unwrap();
    let stack = vm.operand_stack();
    let (x, y) = match &stack[stack.len() - 2..] {
        [PsObject::Number(x), PsObject::Number(y)] => (*x, *y),
        other => panic!("expected MTGx MTGy, got {:?}", other),
    };

    // native lookup agrees bit for bit
    let tokens = tokenize(body.as_bytes()).unwrap();
    let table = execute(&tokens, &config(SaveRestoreMode::Neutered))
        .unwrap()
        .labels;
    let (anchor, found) = table.find_label(b"P", figrelabel_core::Point::ZERO);
    assert!(found);
    assert_eq!(anchor.x.to_bits(), x.to_bits());
    assert_eq!(anchor.y.to_bits(), y.to_bits());
    assert_eq!(x, 10.0);
    assert_eq!(y, 10.0);
}

/// Empty-table fallback branch (`dup 0 eq {pop}`): findlabel over an empty
/// rllist leaves the caller's own position in the registers and performs a
/// net-zero translate.
#[test]
fn verbatim_findlabel_empty_table_fallback() {
    let epilogue =
        "5 5 transform MTGdict /rllist get (Zz) findlabel MTGx MTGy matrix currentmatrix aload pop";
    let program = verbatim_program("", SaveRestoreMode::Neutered, epilogue);
    let mut vm = Vm::new(config(SaveRestoreMode::Neutered));
    vm.run(&tokenize(program.as_bytes()).unwrap()).unwrap();
    let nums: Vec<f64> = vm
        .operand_stack()
        .iter()
        .map(|o| match o {
            PsObject::Number(n) => *n,
            other => panic!("expected number, got {:?}", other),
        })
        .collect();
    // MTGx MTGy fell back to the caller's transformed position
    assert_eq!(&nums[..2], &[5.0, 5.0]);
    // and the CTM is still the identity: the translate was exactly zero
    let ident = Matrix::IDENTITY;
    let expect = [ident.a, ident.b, ident.c, ident.d, ident.tx, ident.ty];
    for (got, want) in nums[2..].iter().zip(expect) {
        assert_eq!(got.to_bits(), want.to_bits());
    }

    // native fallback returns the identical point with found=false
    let table = figrelabel_core::LabelTable::new();
    let fallback = figrelabel_core::Point::new(5.0, 5.0);
    let (p, found) = table.find_label(b"Zz", fallback);
    assert!(!found);
    assert!(p.bits_eq(&fallback));
}
