//! Extraction and replacement of text labels in Encapsulated PostScript
//! figures.
//!
//! The crate interprets a restricted Level-1 PostScript subset, intercepting
//! the nine `show`-family text operators to record each label string together
//! with the device-space point it would have been painted at. A small
//! line-oriented directive language then maps old label strings to
//! replacement text, and the emitter rewrites the figure: original label
//! painting is suppressed by a generated prologue and the replacements are
//! painted at the recorded anchors in a trailer.
//!
//! Everything here is pure computation over byte buffers; file and terminal
//! handling lives in the companion `figrelabel` binary crate. The crate is
//! `no_std` (with `alloc`) so the interpreter can also be embedded.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dsc;
pub mod emit;
pub mod escape;
pub mod labels;
mod math;
pub mod matrix;
pub mod object;
pub mod relabel;
pub mod syntax;
pub mod vm;

pub use dsc::{parse_dsc, BoundingBox, DocumentMeta, DscError};
pub use emit::{
    emit_label_listing, emit_relabeled_eps, emit_tex_overlay, resolve, EmitError, EmitPlan,
    ListingFormat, Placement, Suppress,
};
pub use labels::{LabelRecord, LabelTable};
pub use matrix::{concat_matrix, Matrix, Point};
pub use object::{Dict, DictKey, PsObject};
pub use relabel::{
    convert_length, parse_spec, print_spec, Directive, Length, LengthError, RelabelSpec,
    SpecError, Unit,
};
pub use syntax::{encode_ps_string, tokenize, Position, SyntaxError, Token, TokenKind};
pub use vm::{
    execute, ExtractionResult, GraphicsState, Operator, SaveRestoreMode, UnknownOperatorMode,
    Vm, VmConfig, VmError, VmErrorKind, VmWarning, DEFAULT_MAX_STEPS,
};
