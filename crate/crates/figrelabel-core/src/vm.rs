//! Stack-machine interpreter for the restricted PostScript subset.
//!
//! The machine executes enough of Level-1 PostScript to run real figure
//! bodies: operand/dictionary stacks, procedures and control flow, the CTM
//! and path state. Painting operators consume their operands and draw
//! nothing. The nine `show`-family operators are intercepted: each records
//! its string operand together with `transform(ctm, currentpoint)` into a
//! [`LabelTable`] and paints nothing, leaving the current point and the
//! rest of the graphics state untouched.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::labels::LabelTable;
use crate::math;
use crate::matrix::{concat_matrix, Matrix, Point};
use crate::object::{Dict, DictKey, PsObject, SharedArray, SharedDict, SharedString};
use crate::syntax::{lossy_bytes, Position, Token, TokenKind};

/// How `save` and `restore` behave.
///
/// `Faithful` snapshots the graphics state so a figure-internal restore
/// resets the CTM it changed. `Neutered` reproduces the interception
/// prologue's `/save {false} def /restore {pop} def` compatibility trick:
/// save pushes `false`, restore pops one operand, nothing is rolled back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaveRestoreMode {
    #[default]
    Faithful,
    Neutered,
}

/// Reaction to a name that resolves nowhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownOperatorMode {
    #[default]
    Error,
    /// Record a warning and consume nothing. Opt-in: a wrong-arity guess
    /// would silently corrupt the stack, so skipping must be deliberate.
    PermissiveNoop,
}

#[derive(Debug, Clone)]
pub struct VmConfig {
    pub save_restore_mode: SaveRestoreMode,
    pub unknown_operator_mode: UnknownOperatorMode,
    pub max_steps: u64,
}

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

impl Default for VmConfig {
    fn default() -> VmConfig {
        VmConfig {
            save_restore_mode: SaveRestoreMode::default(),
            unknown_operator_mode: UnknownOperatorMode::default(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// CTM plus pen position. The current point is kept in user-space units and
/// is absent until a `moveto` and after `newpath`/`showpage`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicsState {
    pub ctm: Matrix,
    pub current_point: Option<Point>,
    pub subpath_start: Option<Point>,
}

impl Default for GraphicsState {
    fn default() -> GraphicsState {
        GraphicsState {
            ctm: Matrix::IDENTITY,
            current_point: None,
            subpath_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VmErrorKind {
    StackUnderflow,
    TypeMismatch(&'static str),
    UndefinedName(String),
    RangeCheck(&'static str),
    SingularMatrix,
    NoCurrentPoint,
    /// Operators that cannot be skipped by arity (inline image data and
    /// friends); always fatal, even in permissive mode, because mis-skipping
    /// their data corrupts everything after it.
    UnsupportedOperator(String),
    StepBudgetExceeded,
    UnmatchedMark,
    UnbalancedProcedure,
    RecursionLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmError {
    pub kind: VmErrorKind,
    pub pos: Option<Position>,
}

impl fmt::Display for VmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            VmErrorKind::StackUnderflow => write!(f, "operand stack underflow")?,
            VmErrorKind::TypeMismatch(expected) => {
                write!(f, "type mismatch: expected {}", expected)?
            }
            VmErrorKind::UndefinedName(name) => write!(f, "undefined name: {}", name)?,
            VmErrorKind::RangeCheck(what) => write!(f, "range check: {}", what)?,
            VmErrorKind::SingularMatrix => write!(f, "singular matrix")?,
            VmErrorKind::NoCurrentPoint => write!(f, "no current point")?,
            VmErrorKind::UnsupportedOperator(name) => {
                write!(f, "unsupported operator: {}", name)?
            }
            VmErrorKind::StepBudgetExceeded => write!(f, "step budget exceeded")?,
            VmErrorKind::UnmatchedMark => write!(f, "no mark on operand stack")?,
            VmErrorKind::UnbalancedProcedure => write!(f, "unbalanced procedure braces")?,
            VmErrorKind::RecursionLimit => write!(f, "procedure recursion too deep")?,
        }
        if let Some(pos) = self.pos {
            write!(f, " at byte {} (line {})", pos.offset, pos.line)?;
        }
        Ok(())
    }
}

impl core::error::Error for VmError {}

#[derive(Debug, Clone, PartialEq)]
pub struct VmWarning {
    pub message: String,
    pub pos: Option<Position>,
}

/// Outcome of a successful run: recorded labels in execution order,
/// warnings, and how much of the step budget was used.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    pub labels: LabelTable,
    pub warnings: Vec<VmWarning>,
    pub steps_used: u64,
}

/// Built-in operators. The `systemdict` is populated from this table, so
/// `load`, `where` and user redefinitions all behave uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(missing_docs)]
pub enum Operator {
    // operand stack
    Dup, Pop, Exch, Copy, Index, Roll, Count, Clear, Mark, Cleartomark, Counttomark,
    // arithmetic
    Add, Sub, Mul, Div, Idiv, Mod, Neg, Abs, Round, Truncate, Floor, Ceiling, Sqrt,
    Atan, Sin, Cos, Exp, Ln, Log,
    // comparison and logic
    Eq, Ne, Gt, Ge, Lt, Le, And, Or, Not, Xor, True, False,
    // control
    Exec, If, IfElse, For, Repeat, Loop, Exit, Forall, Quit, Stop,
    // composite objects
    Array, Aload, Astore, Length, Get, Put, Getinterval, Putinterval, StringOp,
    // dictionaries
    DictOp, Def, Load, Begin, End, Store, Known, Where, Currentdict, Userdict, Systemdict,
    // conversions
    Cvi, Cvr, Cvx, Cvlit, Cvn, Cvs,
    // procedures
    Bind,
    // graphics state
    Gsave, Grestore, Save, Restore,
    // CTM
    Translate, Scale, Rotate, Concat, MatrixOp, Currentmatrix, Setmatrix,
    Transform, Itransform, Dtransform, Idtransform,
    // path and current point
    Moveto, Rmoveto, Lineto, Rlineto, Curveto, Rcurveto, Closepath, Newpath,
    Currentpoint, Arc, Arcn,
    // painting no-ops
    Stroke, Fill, Eofill, Clip, Eoclip, Setlinewidth, Setlinecap, Setlinejoin,
    Setmiterlimit, Setdash, Setgray, Setrgbcolor, Sethsbcolor, Setcmykcolor, Showpage,
    // fonts
    Findfont, Scalefont, Makefont, Setfont, Definefont, Currentfont, Stringwidth,
    // intercepted text painting
    Show, Ashow, Widthshow, Awidthshow, Xshow, Yshow, Xyshow, Cshow, Kshow,
    // never skippable
    Image, Colorimage, Imagemask, Readhexstring, Currentfile, Stopped, Run,
}

/// Name table; the single source of truth for `systemdict`.
const OPERATOR_TABLE: &[(&str, Operator)] = &[
    ("dup", Operator::Dup), ("pop", Operator::Pop), ("exch", Operator::Exch),
    ("copy", Operator::Copy), ("index", Operator::Index), ("roll", Operator::Roll),
    ("count", Operator::Count), ("clear", Operator::Clear), ("mark", Operator::Mark),
    ("cleartomark", Operator::Cleartomark), ("counttomark", Operator::Counttomark),
    ("add", Operator::Add), ("sub", Operator::Sub), ("mul", Operator::Mul),
    ("div", Operator::Div), ("idiv", Operator::Idiv), ("mod", Operator::Mod),
    ("neg", Operator::Neg), ("abs", Operator::Abs), ("round", Operator::Round),
    ("truncate", Operator::Truncate), ("floor", Operator::Floor),
    ("ceiling", Operator::Ceiling), ("sqrt", Operator::Sqrt), ("atan", Operator::Atan),
    ("sin", Operator::Sin), ("cos", Operator::Cos), ("exp", Operator::Exp),
    ("ln", Operator::Ln), ("log", Operator::Log),
    ("eq", Operator::Eq), ("ne", Operator::Ne), ("gt", Operator::Gt),
    ("ge", Operator::Ge), ("lt", Operator::Lt), ("le", Operator::Le),
    ("and", Operator::And), ("or", Operator::Or), ("not", Operator::Not),
    ("xor", Operator::Xor), ("true", Operator::True), ("false", Operator::False),
    ("exec", Operator::Exec), ("if", Operator::If), ("ifelse", Operator::IfElse),
    ("for", Operator::For), ("repeat", Operator::Repeat), ("loop", Operator::Loop),
    ("exit", Operator::Exit), ("forall", Operator::Forall), ("quit", Operator::Quit),
    ("stop", Operator::Stop),
    ("array", Operator::Array), ("aload", Operator::Aload), ("astore", Operator::Astore),
    ("length", Operator::Length), ("get", Operator::Get), ("put", Operator::Put),
    ("getinterval", Operator::Getinterval), ("putinterval", Operator::Putinterval),
    ("string", Operator::StringOp),
    ("dict", Operator::DictOp), ("def", Operator::Def), ("load", Operator::Load),
    ("begin", Operator::Begin), ("end", Operator::End), ("store", Operator::Store),
    ("known", Operator::Known), ("where", Operator::Where),
    ("currentdict", Operator::Currentdict), ("userdict", Operator::Userdict),
    ("systemdict", Operator::Systemdict),
    ("cvi", Operator::Cvi), ("cvr", Operator::Cvr), ("cvx", Operator::Cvx),
    ("cvlit", Operator::Cvlit), ("cvn", Operator::Cvn), ("cvs", Operator::Cvs),
    ("bind", Operator::Bind),
    ("gsave", Operator::Gsave), ("grestore", Operator::Grestore),
    ("save", Operator::Save), ("restore", Operator::Restore),
    ("translate", Operator::Translate), ("scale", Operator::Scale),
    ("rotate", Operator::Rotate), ("concat", Operator::Concat),
    ("matrix", Operator::MatrixOp), ("currentmatrix", Operator::Currentmatrix),
    ("setmatrix", Operator::Setmatrix), ("transform", Operator::Transform),
    ("itransform", Operator::Itransform), ("dtransform", Operator::Dtransform),
    ("idtransform", Operator::Idtransform),
    ("moveto", Operator::Moveto), ("rmoveto", Operator::Rmoveto),
    ("lineto", Operator::Lineto), ("rlineto", Operator::Rlineto),
    ("curveto", Operator::Curveto), ("rcurveto", Operator::Rcurveto),
    ("closepath", Operator::Closepath), ("newpath", Operator::Newpath),
    ("currentpoint", Operator::Currentpoint), ("arc", Operator::Arc),
    ("arcn", Operator::Arcn),
    ("stroke", Operator::Stroke), ("fill", Operator::Fill), ("eofill", Operator::Eofill),
    ("clip", Operator::Clip), ("eoclip", Operator::Eoclip),
    ("setlinewidth", Operator::Setlinewidth), ("setlinecap", Operator::Setlinecap),
    ("setlinejoin", Operator::Setlinejoin), ("setmiterlimit", Operator::Setmiterlimit),
    ("setdash", Operator::Setdash), ("setgray", Operator::Setgray),
    ("setrgbcolor", Operator::Setrgbcolor), ("sethsbcolor", Operator::Sethsbcolor),
    ("setcmykcolor", Operator::Setcmykcolor), ("showpage", Operator::Showpage),
    ("findfont", Operator::Findfont), ("scalefont", Operator::Scalefont),
    ("makefont", Operator::Makefont), ("setfont", Operator::Setfont),
    ("definefont", Operator::Definefont), ("currentfont", Operator::Currentfont),
    ("stringwidth", Operator::Stringwidth),
    ("show", Operator::Show), ("ashow", Operator::Ashow),
    ("widthshow", Operator::Widthshow), ("awidthshow", Operator::Awidthshow),
    ("xshow", Operator::Xshow), ("yshow", Operator::Yshow), ("xyshow", Operator::Xyshow),
    ("cshow", Operator::Cshow), ("kshow", Operator::Kshow),
    ("image", Operator::Image), ("colorimage", Operator::Colorimage),
    ("imagemask", Operator::Imagemask), ("readhexstring", Operator::Readhexstring),
    ("currentfile", Operator::Currentfile), ("stopped", Operator::Stopped),
    ("run", Operator::Run),
];

impl Operator {
    pub fn name(self) -> &'static str {
        OPERATOR_TABLE
            .iter()
            .find(|(_, op)| *op == self)
            .map(|(name, _)| *name)
            .unwrap_or("?")
    }
}

const MAX_EXEC_DEPTH: u32 = 1_000;

/// What a unit of execution asked the surrounding frames to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    /// Unwind to the nearest enclosing loop.
    Exit,
    /// Halt the whole program (quit/stop).
    Stop,
}

struct SaveSnapshot {
    id: u64,
    gstate: GraphicsState,
    gsave_stack: Vec<GraphicsState>,
}

/// A single-threaded interpreter instance. Distinct instances are fully
/// independent; an [`ExtractionResult`] is plain data and freely shareable.
pub struct Vm {
    config: VmConfig,
    operands: Vec<PsObject>,
    dicts: Vec<SharedDict>,
    systemdict: SharedDict,
    userdict: SharedDict,
    gstate: GraphicsState,
    gsave_stack: Vec<GraphicsState>,
    save_stack: Vec<SaveSnapshot>,
    next_save_id: u64,
    labels: LabelTable,
    warnings: Vec<VmWarning>,
    steps: u64,
    depth: u32,
    stringwidth_warned: bool,
    current_pos: Option<Position>,
}

/// Run a whole tokenized program and return the recorded labels.
pub fn execute(program: &[Token], config: &VmConfig) -> Result<ExtractionResult, VmError> {
    let mut vm = Vm::new(config.clone());
    vm.run(program)?;
    Ok(vm.into_result())
}

impl Vm {
    pub fn new(config: VmConfig) -> Vm {
        debug_assert!(config.max_steps > 0);
        let mut system = Dict::new();
        for (name, op) in OPERATOR_TABLE {
            system.insert(DictKey::name(name.as_bytes()), PsObject::Operator(*op));
        }
        let systemdict = Rc::new(RefCell::new(system));
        let userdict = Rc::new(RefCell::new(Dict::new()));
        Vm {
            config,
            operands: Vec::new(),
            dicts: alloc::vec![systemdict.clone(), userdict.clone()],
            systemdict,
            userdict,
            gstate: GraphicsState::default(),
            gsave_stack: Vec::new(),
            save_stack: Vec::new(),
            next_save_id: 1,
            labels: LabelTable::new(),
            warnings: Vec::new(),
            steps: 0,
            depth: 0,
            stringwidth_warned: false,
            current_pos: None,
        }
    }

    /// Execute a token list at the top level. `quit`/`stop` halt cleanly.
    pub fn run(&mut self, program: &[Token]) -> Result<(), VmError> {
        match self.run_tokens(program)? {
            Flow::Continue | Flow::Stop => Ok(()),
            Flow::Exit => {
                self.warn("exit outside of a loop halted execution");
                Ok(())
            }
        }
    }

    /// Final operand stack, bottom first. Debug entry point for tests.
    pub fn operand_stack(&self) -> &[PsObject] {
        &self.operands
    }

    /// Resolve a name through the dictionary stack without executing it.
    pub fn lookup(&self, name: &[u8]) -> Option<PsObject> {
        let key = DictKey::name(name);
        self.dicts
            .iter()
            .rev()
            .find_map(|d| d.borrow().get(&key).cloned())
    }

    pub fn graphics_state(&self) -> &GraphicsState {
        &self.gstate
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn warnings(&self) -> &[VmWarning] {
        &self.warnings
    }

    pub fn steps_used(&self) -> u64 {
        self.steps
    }

    pub fn into_result(self) -> ExtractionResult {
        ExtractionResult {
            labels: self.labels,
            warnings: self.warnings,
            steps_used: self.steps,
        }
    }

    fn fail(&self, kind: VmErrorKind) -> VmError {
        VmError {
            kind,
            pos: self.current_pos,
        }
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(VmWarning {
            message: message.into(),
            pos: self.current_pos,
        });
    }

    fn tick(&mut self) -> Result<(), VmError> {
        self.steps += 1;
        if self.steps >= self.config.max_steps {
            Err(self.fail(VmErrorKind::StepBudgetExceeded))
        } else {
            Ok(())
        }
    }

    // ---- operand stack helpers -------------------------------------------

    fn push(&mut self, obj: PsObject) {
        self.operands.push(obj);
    }

    fn pop(&mut self) -> Result<PsObject, VmError> {
        self.operands
            .pop()
            .ok_or_else(|| self.fail(VmErrorKind::StackUnderflow))
    }

    fn peek(&self) -> Result<&PsObject, VmError> {
        self.operands
            .last()
            .ok_or_else(|| self.fail(VmErrorKind::StackUnderflow))
    }

    fn pop_number(&mut self) -> Result<f64, VmError> {
        match self.pop()? {
            PsObject::Number(n) => Ok(n),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("number"))),
        }
    }

    /// Numbers are doubles throughout; integer contexts accept values within
    /// 1e-9 of an integer and reject the rest.
    fn pop_integer(&mut self) -> Result<i64, VmError> {
        let n = self.pop_number()?;
        let rounded = libm::round(n);
        if (n - rounded).abs() > 1e-9 || rounded.abs() >= 9.0e15 {
            return Err(self.fail(VmErrorKind::TypeMismatch("integer")));
        }
        Ok(rounded as i64)
    }

    fn pop_bool(&mut self) -> Result<bool, VmError> {
        match self.pop()? {
            PsObject::Bool(b) => Ok(b),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("boolean"))),
        }
    }

    fn pop_string(&mut self) -> Result<SharedString, VmError> {
        match self.pop()? {
            PsObject::StringBytes(s) => Ok(s),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("string"))),
        }
    }

    fn pop_array(&mut self) -> Result<SharedArray, VmError> {
        match self.pop()? {
            PsObject::Array(a) => Ok(a),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("array"))),
        }
    }

    fn pop_dict(&mut self) -> Result<SharedDict, VmError> {
        match self.pop()? {
            PsObject::Dict(d) => Ok(d),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("dictionary"))),
        }
    }

    fn pop_key(&mut self) -> Result<DictKey, VmError> {
        let obj = self.pop()?;
        DictKey::from_object(&obj).ok_or_else(|| self.fail(VmErrorKind::TypeMismatch("key")))
    }

    /// Pop something executable: a procedure or an operator.
    fn pop_executable(&mut self) -> Result<PsObject, VmError> {
        match self.pop()? {
            obj @ (PsObject::Procedure(_) | PsObject::Operator(_)) => Ok(obj),
            _ => Err(self.fail(VmErrorKind::TypeMismatch("procedure"))),
        }
    }

    // ---- execution --------------------------------------------------------

    fn run_tokens(&mut self, tokens: &[Token]) -> Result<Flow, VmError> {
        let mut i = 0;
        while i < tokens.len() {
            let flow = self.exec_token(tokens, &mut i)?;
            if flow != Flow::Continue {
                return Ok(flow);
            }
        }
        Ok(Flow::Continue)
    }

    fn exec_token(&mut self, tokens: &[Token], i: &mut usize) -> Result<Flow, VmError> {
        let token = &tokens[*i];
        self.current_pos = Some(token.pos);
        self.tick()?;
        match &token.kind {
            TokenKind::Integer(v) => {
                self.push(PsObject::Number(*v as f64));
                *i += 1;
            }
            TokenKind::Real(v) => {
                self.push(PsObject::Number(*v));
                *i += 1;
            }
            TokenKind::RadixNumber(v) => {
                self.push(PsObject::Number(*v as f64));
                *i += 1;
            }
            TokenKind::String | TokenKind::HexString => {
                let bytes = token.decoded.clone().unwrap_or_default();
                self.push(PsObject::string(bytes));
                *i += 1;
            }
            TokenKind::LiteralName => {
                self.push(PsObject::literal_name(token.name_bytes()));
                *i += 1;
            }
            TokenKind::ExecutableName => {
                *i += 1;
                return self.exec_name(&token.text);
            }
            TokenKind::ProcOpen => {
                let body = self.collect_procedure(tokens, i)?;
                self.push(PsObject::Procedure(body));
            }
            TokenKind::ProcClose => {
                return Err(self.fail(VmErrorKind::UnbalancedProcedure));
            }
            TokenKind::ArrayOpen => {
                self.push(PsObject::Mark);
                *i += 1;
            }
            TokenKind::ArrayClose => {
                let items = self.collect_to_mark()?;
                self.push(PsObject::array(items));
                *i += 1;
            }
            TokenKind::DscComment => {
                *i += 1;
            }
        }
        Ok(Flow::Continue)
    }

    /// `i` points at a `{`; collect the body tokens and leave `i` past the
    /// matching `}`.
    fn collect_procedure(
        &mut self,
        tokens: &[Token],
        i: &mut usize,
    ) -> Result<Rc<Vec<Token>>, VmError> {
        let open = *i;
        let mut depth = 1usize;
        let mut j = open + 1;
        while j < tokens.len() {
            match tokens[j].kind {
                TokenKind::ProcOpen => depth += 1,
                TokenKind::ProcClose => {
                    depth -= 1;
                    if depth == 0 {
                        let body = tokens[open + 1..j].to_vec();
                        *i = j + 1;
                        return Ok(Rc::new(body));
                    }
                }
                _ => {}
            }
            j += 1;
        }
        Err(self.fail(VmErrorKind::UnbalancedProcedure))
    }

    fn collect_to_mark(&mut self) -> Result<Vec<PsObject>, VmError> {
        let mark_at = self
            .operands
            .iter()
            .rposition(|o| matches!(o, PsObject::Mark))
            .ok_or_else(|| self.fail(VmErrorKind::UnmatchedMark))?;
        let items = self.operands.split_off(mark_at + 1);
        self.operands.pop(); // the mark
        Ok(items)
    }

    fn exec_name(&mut self, name: &[u8]) -> Result<Flow, VmError> {
        match self.lookup(name) {
            Some(PsObject::Procedure(body)) => self.run_procedure(body),
            Some(PsObject::Operator(op)) => self.dispatch(op),
            Some(value) => {
                self.push(value);
                Ok(Flow::Continue)
            }
            None => match self.config.unknown_operator_mode {
                UnknownOperatorMode::Error => {
                    Err(self.fail(VmErrorKind::UndefinedName(lossy_bytes(name))))
                }
                UnknownOperatorMode::PermissiveNoop => {
                    self.warn(format!("unknown operator skipped: {}", lossy_bytes(name)));
                    Ok(Flow::Continue)
                }
            },
        }
    }

    fn run_procedure(&mut self, body: Rc<Vec<Token>>) -> Result<Flow, VmError> {
        if self.depth >= MAX_EXEC_DEPTH {
            return Err(self.fail(VmErrorKind::RecursionLimit));
        }
        self.depth += 1;
        let flow = self.run_tokens(&body);
        self.depth -= 1;
        flow
    }

    /// Run any executable object; literal objects execute to themselves.
    fn exec_object(&mut self, obj: PsObject) -> Result<Flow, VmError> {
        match obj {
            PsObject::Procedure(body) => self.run_procedure(body),
            PsObject::Operator(op) => self.dispatch(op),
            PsObject::Name {
                ref bytes,
                literal: false,
            } => {
                let name = bytes.to_vec();
                self.exec_name(&name)
            }
            other => {
                self.push(other);
                Ok(Flow::Continue)
            }
        }
    }

    // ---- matrix helpers ----------------------------------------------------

    fn matrix_from_array(&self, arr: &SharedArray) -> Result<Matrix, VmError> {
        let arr = arr.borrow();
        if arr.len() != 6 {
            return Err(self.fail(VmErrorKind::RangeCheck("matrix array must have 6 elements")));
        }
        let mut v = [0.0f64; 6];
        for (slot, obj) in v.iter_mut().zip(arr.iter()) {
            match obj {
                PsObject::Number(n) => *slot = *n,
                _ => return Err(self.fail(VmErrorKind::TypeMismatch("matrix of numbers"))),
            }
        }
        Ok(Matrix::new(v[0], v[1], v[2], v[3], v[4], v[5]))
    }

    fn store_matrix(&self, arr: &SharedArray, m: &Matrix) -> Result<(), VmError> {
        let mut a = arr.borrow_mut();
        if a.len() != 6 {
            return Err(self.fail(VmErrorKind::RangeCheck("matrix array must have 6 elements")));
        }
        let vals = [m.a, m.b, m.c, m.d, m.tx, m.ty];
        for (slot, v) in a.iter_mut().zip(vals) {
            *slot = PsObject::Number(v);
        }
        Ok(())
    }

    /// For `transform`-family operators that accept an optional matrix on
    /// top of the numeric operands.
    fn pop_matrix_or_ctm(&mut self) -> Result<Matrix, VmError> {
        if matches!(self.peek()?, PsObject::Array(_)) {
            let arr = self.pop_array()?;
            self.matrix_from_array(&arr)
        } else {
            Ok(self.gstate.ctm)
        }
    }

    /// `translate`/`scale`/`rotate` matrix form: fill the operand array and
    /// push it back instead of touching the CTM.
    fn ctm_op(&mut self, inner: Matrix, matrix_form: Option<SharedArray>) -> Result<(), VmError> {
        match matrix_form {
            Some(arr) => {
                self.store_matrix(&arr, &inner)?;
                self.push(PsObject::Array(arr));
            }
            None => {
                self.gstate.ctm = concat_matrix(&self.gstate.ctm, &inner);
            }
        }
        Ok(())
    }

    fn maybe_matrix_operand(&mut self) -> Option<SharedArray> {
        if matches!(self.operands.last(), Some(PsObject::Array(_))) {
            match self.pop() {
                Ok(PsObject::Array(a)) => Some(a),
                _ => unreachable!(),
            }
        } else {
            None
        }
    }

    // ---- show interception --------------------------------------------------

    /// Record one intercepted show. The anchor is the device-space image of
    /// the current point; the graphics state, including the current point,
    /// stays exactly as it was, so consecutive shows without an intervening
    /// moveto record the same anchor.
    fn record_show(&mut self, string: &SharedString) -> Result<(), VmError> {
        let cp = self
            .gstate
            .current_point
            .ok_or_else(|| self.fail(VmErrorKind::NoCurrentPoint))?;
        let anchor = self.gstate.ctm.transform_point(cp);
        self.labels.append(string.borrow().clone(), anchor);
        Ok(())
    }

    /// Shared arity plumbing: the string operand is always consumed and
    /// recorded first, then `extra` further operands are dropped, mirroring
    /// the interception prologue's `Mshow pop ...` definitions.
    fn show_op(&mut self, string_under_top: bool, extra: usize) -> Result<(), VmError> {
        let deferred = if string_under_top {
            Some(self.pop()?)
        } else {
            None
        };
        let s = self.pop_string()?;
        self.record_show(&s)?;
        drop(deferred);
        for _ in 0..extra {
            self.pop()?;
        }
        Ok(())
    }

    fn push_point(&mut self, p: Point) {
        self.push(PsObject::Number(p.x));
        self.push(PsObject::Number(p.y));
    }

    fn pop_point(&mut self) -> Result<Point, VmError> {
        let y = self.pop_number()?;
        let x = self.pop_number()?;
        Ok(Point::new(x, y))
    }

    fn require_current_point(&self) -> Result<Point, VmError> {
        self.gstate
            .current_point
            .ok_or_else(|| self.fail(VmErrorKind::NoCurrentPoint))
    }

    fn fresh_font_dict(&mut self) {
        self.push(PsObject::Dict(Rc::new(RefCell::new(Dict::new()))));
    }

    // ---- the operator table ---------------------------------------------------

    fn dispatch(&mut self, op: Operator) -> Result<Flow, VmError> {
        use Operator as Op;
        match op {
            // -- operand stack ------------------------------------------------
            // any -> any any
            Op::Dup => {
                let top = self.peek()?.clone();
                self.push(top);
            }
            Op::Pop => {
                self.pop()?;
            }
            // any1 any2 -> any2 any1
            Op::Exch => {
                let a = self.pop()?;
                let b = self.pop()?;
                self.push(a);
                self.push(b);
            }
            // any1..anyN n -> any1..anyN any1..anyN
            Op::Copy => {
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("copy count negative")));
                }
                let n = n as usize;
                if n > self.operands.len() {
                    return Err(self.fail(VmErrorKind::StackUnderflow));
                }
                let start = self.operands.len() - n;
                for k in 0..n {
                    let obj = self.operands[start + k].clone();
                    self.push(obj);
                }
            }
            // anyN..any0 n -> anyN..any0 anyN
            Op::Index => {
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("index negative")));
                }
                let n = n as usize;
                if n >= self.operands.len() {
                    return Err(self.fail(VmErrorKind::StackUnderflow));
                }
                let obj = self.operands[self.operands.len() - 1 - n].clone();
                self.push(obj);
            }
            // a(n-1)..a0 n j -> rolled window of n
            Op::Roll => {
                let j = self.pop_integer()?;
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("roll window negative")));
                }
                let n = n as usize;
                if n > self.operands.len() {
                    return Err(self.fail(VmErrorKind::StackUnderflow));
                }
                if n > 0 {
                    let shift = j.rem_euclid(n as i64) as usize;
                    let len = self.operands.len();
                    self.operands[len - n..].rotate_right(shift);
                }
            }
            Op::Count => {
                let n = self.operands.len();
                self.push(PsObject::Number(n as f64));
            }
            Op::Clear => self.operands.clear(),
            Op::Mark => self.push(PsObject::Mark),
            Op::Cleartomark => {
                self.collect_to_mark()?;
            }
            Op::Counttomark => {
                let above = self
                    .operands
                    .iter()
                    .rposition(|o| matches!(o, PsObject::Mark))
                    .map(|at| self.operands.len() - 1 - at)
                    .ok_or_else(|| self.fail(VmErrorKind::UnmatchedMark))?;
                self.push(PsObject::Number(above as f64));
            }

            // -- arithmetic ----------------------------------------------------
            Op::Add => {
                let b = self.pop_number()?;
                let a = self.pop_number()?;
                self.push(PsObject::Number(a + b));
            }
            Op::Sub => {
                let b = self.pop_number()?;
                let a = self.pop_number()?;
                self.push(PsObject::Number(a - b));
            }
            Op::Mul => {
                let b = self.pop_number()?;
                let a = self.pop_number()?;
                self.push(PsObject::Number(a * b));
            }
            Op::Div => {
                let b = self.pop_number()?;
                let a = self.pop_number()?;
                if b == 0.0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("division by zero")));
                }
                self.push(PsObject::Number(a / b));
            }
            Op::Idiv => {
                let b = self.pop_integer()?;
                let a = self.pop_integer()?;
                if b == 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("division by zero")));
                }
                self.push(PsObject::Number((a / b) as f64));
            }
            Op::Mod => {
                let b = self.pop_integer()?;
                let a = self.pop_integer()?;
                if b == 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("division by zero")));
                }
                self.push(PsObject::Number((a % b) as f64));
            }
            Op::Neg => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(-a));
            }
            Op::Abs => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::abs(a)));
            }
            Op::Round => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::round_half_up(a)));
            }
            Op::Truncate => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::trunc(a)));
            }
            Op::Floor => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::floor(a)));
            }
            Op::Ceiling => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::ceil(a)));
            }
            Op::Sqrt => {
                let a = self.pop_number()?;
                if a < 0.0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("sqrt of a negative number")));
                }
                self.push(PsObject::Number(math::sqrt(a)));
            }
            // num den atan -> degrees in [0, 360)
            Op::Atan => {
                let den = self.pop_number()?;
                let num = self.pop_number()?;
                self.push(PsObject::Number(math::atan2_deg(num, den)));
            }
            Op::Sin => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::sin_deg(a)));
            }
            Op::Cos => {
                let a = self.pop_number()?;
                self.push(PsObject::Number(math::cos_deg(a)));
            }
            // base exponent exp -> base^exponent
            Op::Exp => {
                let e = self.pop_number()?;
                let b = self.pop_number()?;
                let r = math::pow(b, e);
                if r.is_nan() {
                    return Err(self.fail(VmErrorKind::RangeCheck("undefined exponentiation")));
                }
                self.push(PsObject::Number(r));
            }
            Op::Ln => {
                let a = self.pop_number()?;
                if a <= 0.0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("log of a non-positive number")));
                }
                self.push(PsObject::Number(math::ln(a)));
            }
            Op::Log => {
                let a = self.pop_number()?;
                if a <= 0.0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("log of a non-positive number")));
                }
                self.push(PsObject::Number(math::log10(a)));
            }

            // -- comparison and logic -----------------------------------------
            Op::Eq => {
                let b = self.pop()?;
                let a = self.pop()?;
                self.push(PsObject::Bool(a.ps_eq(&b)));
            }
            Op::Ne => {
                let b = self.pop()?;
                let a = self.pop()?;
                self.push(PsObject::Bool(!a.ps_eq(&b)));
            }
            Op::Gt => self.comparison(|o| o == core::cmp::Ordering::Greater)?,
            Op::Ge => self.comparison(|o| o != core::cmp::Ordering::Less)?,
            Op::Lt => self.comparison(|o| o == core::cmp::Ordering::Less)?,
            Op::Le => self.comparison(|o| o != core::cmp::Ordering::Greater)?,
            Op::And => self.bitwise(|a, b| a & b, |a, b| a && b)?,
            Op::Or => self.bitwise(|a, b| a | b, |a, b| a || b)?,
            Op::Xor => self.bitwise(|a, b| a ^ b, |a, b| a ^ b)?,
            Op::Not => match self.pop()? {
                PsObject::Bool(b) => self.push(PsObject::Bool(!b)),
                PsObject::Number(n) => {
                    self.push(PsObject::Number(n));
                    let i = self.pop_integer()?;
                    self.push(PsObject::Number(!i as f64));
                }
                _ => return Err(self.fail(VmErrorKind::TypeMismatch("boolean or integer"))),
            },
            Op::True => self.push(PsObject::Bool(true)),
            Op::False => self.push(PsObject::Bool(false)),

            // -- control -------------------------------------------------------
            Op::Exec => {
                let obj = self.pop()?;
                return self.exec_object(obj);
            }
            Op::If => {
                let body = self.pop_executable()?;
                let cond = self.pop_bool()?;
                if cond {
                    return self.exec_object(body);
                }
            }
            Op::IfElse => {
                let otherwise = self.pop_executable()?;
                let body = self.pop_executable()?;
                let cond = self.pop_bool()?;
                return self.exec_object(if cond { body } else { otherwise });
            }
            // initial increment limit proc for
            Op::For => {
                let body = self.pop_executable()?;
                let limit = self.pop_number()?;
                let increment = self.pop_number()?;
                let mut control = self.pop_number()?;
                loop {
                    if increment >= 0.0 {
                        if control > limit {
                            break;
                        }
                    } else if control < limit {
                        break;
                    }
                    self.tick()?;
                    self.push(PsObject::Number(control));
                    match self.exec_object(body.clone())? {
                        Flow::Continue => {}
                        Flow::Exit => break,
                        Flow::Stop => return Ok(Flow::Stop),
                    }
                    // a zero increment never advances; the step budget
                    // bounds that case
                    control += increment;
                }
            }
            Op::Repeat => {
                let body = self.pop_executable()?;
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("repeat count negative")));
                }
                for _ in 0..n {
                    self.tick()?;
                    match self.exec_object(body.clone())? {
                        Flow::Continue => {}
                        Flow::Exit => break,
                        Flow::Stop => return Ok(Flow::Stop),
                    }
                }
            }
            Op::Loop => {
                let body = self.pop_executable()?;
                loop {
                    self.tick()?;
                    match self.exec_object(body.clone())? {
                        Flow::Continue => {}
                        Flow::Exit => break,
                        Flow::Stop => return Ok(Flow::Stop),
                    }
                }
            }
            Op::Exit => return Ok(Flow::Exit),
            Op::Forall => {
                let body = self.pop_executable()?;
                let target = self.pop()?;
                let items: Vec<PsObject> = match target {
                    PsObject::Array(a) => a.borrow().clone(),
                    PsObject::StringBytes(s) => s
                        .borrow()
                        .iter()
                        .map(|&b| PsObject::Number(b as f64))
                        .collect(),
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("array or string"))),
                };
                for item in items {
                    self.tick()?;
                    self.push(item);
                    match self.exec_object(body.clone())? {
                        Flow::Continue => {}
                        Flow::Exit => break,
                        Flow::Stop => return Ok(Flow::Stop),
                    }
                }
            }
            Op::Quit | Op::Stop => return Ok(Flow::Stop),

            // -- composite objects ----------------------------------------------
            Op::Array => {
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("array size negative")));
                }
                self.push(PsObject::array(alloc::vec![PsObject::Null; n as usize]));
            }
            // array aload a0..a(n-1) array
            Op::Aload => {
                let arr = self.pop_array()?;
                let items = arr.borrow().clone();
                for item in items {
                    self.push(item);
                }
                self.push(PsObject::Array(arr));
            }
            // a0..a(n-1) array astore array
            Op::Astore => {
                let arr = self.pop_array()?;
                let n = arr.borrow().len();
                if n > self.operands.len() {
                    return Err(self.fail(VmErrorKind::StackUnderflow));
                }
                let start = self.operands.len() - n;
                let items = self.operands.split_off(start);
                *arr.borrow_mut() = items;
                self.push(PsObject::Array(arr));
            }
            Op::Length => {
                let n = match self.pop()? {
                    PsObject::Array(a) => a.borrow().len(),
                    PsObject::StringBytes(s) => s.borrow().len(),
                    PsObject::Dict(d) => d.borrow().len(),
                    PsObject::Name { bytes, .. } => bytes.len(),
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("composite object"))),
                };
                self.push(PsObject::Number(n as f64));
            }
            Op::Get => {
                let key = self.pop()?;
                match self.pop()? {
                    PsObject::Array(a) => {
                        let idx = self.index_in(&key, a.borrow().len(), "array index")?;
                        let item = a.borrow()[idx].clone();
                        self.push(item);
                    }
                    PsObject::StringBytes(s) => {
                        let idx = self.index_in(&key, s.borrow().len(), "string index")?;
                        let b = s.borrow()[idx];
                        self.push(PsObject::Number(b as f64));
                    }
                    PsObject::Dict(d) => {
                        let k = DictKey::from_object(&key)
                            .ok_or_else(|| self.fail(VmErrorKind::TypeMismatch("key")))?;
                        let v = d.borrow().get(&k).cloned().ok_or_else(|| {
                            self.fail(VmErrorKind::UndefinedName(describe_key(&k)))
                        })?;
                        self.push(v);
                    }
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("composite object"))),
                }
            }
            Op::Put => {
                let value = self.pop()?;
                let key = self.pop()?;
                match self.pop()? {
                    PsObject::Array(a) => {
                        let idx = self.index_in(&key, a.borrow().len(), "array index")?;
                        a.borrow_mut()[idx] = value;
                    }
                    PsObject::StringBytes(s) => {
                        let idx = self.index_in(&key, s.borrow().len(), "string index")?;
                        let byte = match value {
                            PsObject::Number(n) if (0.0..=255.0).contains(&n) => n as u8,
                            PsObject::Number(_) => {
                                return Err(
                                    self.fail(VmErrorKind::RangeCheck("string byte out of range"))
                                )
                            }
                            _ => return Err(self.fail(VmErrorKind::TypeMismatch("integer"))),
                        };
                        s.borrow_mut()[idx] = byte;
                    }
                    PsObject::Dict(d) => {
                        let k = DictKey::from_object(&key)
                            .ok_or_else(|| self.fail(VmErrorKind::TypeMismatch("key")))?;
                        d.borrow_mut().insert(k, value);
                    }
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("composite object"))),
                }
            }
            Op::Getinterval => {
                let count = self.pop_integer()?;
                let index = self.pop_integer()?;
                let obj = self.pop()?;
                let (idx, cnt) = self.interval(index, count)?;
                match obj {
                    PsObject::Array(a) => {
                        let src = a.borrow();
                        if idx + cnt > src.len() {
                            return Err(self.fail(VmErrorKind::RangeCheck("interval out of bounds")));
                        }
                        let sub = src[idx..idx + cnt].to_vec();
                        drop(src);
                        self.push(PsObject::array(sub));
                    }
                    PsObject::StringBytes(s) => {
                        let src = s.borrow();
                        if idx + cnt > src.len() {
                            return Err(self.fail(VmErrorKind::RangeCheck("interval out of bounds")));
                        }
                        let sub = src[idx..idx + cnt].to_vec();
                        drop(src);
                        self.push(PsObject::string(sub));
                    }
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("array or string"))),
                }
            }
            Op::Putinterval => {
                let source = self.pop()?;
                let index = self.pop_integer()?;
                let target = self.pop()?;
                let (idx, _) = self.interval(index, 0)?;
                match (target, source) {
                    (PsObject::Array(dst), PsObject::Array(src)) => {
                        let items = src.borrow().clone();
                        let mut d = dst.borrow_mut();
                        if idx + items.len() > d.len() {
                            return Err(self.fail(VmErrorKind::RangeCheck("interval out of bounds")));
                        }
                        d[idx..idx + items.len()].clone_from_slice(&items);
                    }
                    (PsObject::StringBytes(dst), PsObject::StringBytes(src)) => {
                        let bytes = src.borrow().clone();
                        let mut d = dst.borrow_mut();
                        if idx + bytes.len() > d.len() {
                            return Err(self.fail(VmErrorKind::RangeCheck("interval out of bounds")));
                        }
                        d[idx..idx + bytes.len()].copy_from_slice(&bytes);
                    }
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("matching composites"))),
                }
            }
            Op::StringOp => {
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("string size negative")));
                }
                self.push(PsObject::string(alloc::vec![0u8; n as usize]));
            }

            // -- dictionaries -----------------------------------------------------
            Op::DictOp => {
                let n = self.pop_integer()?;
                if n < 0 {
                    return Err(self.fail(VmErrorKind::RangeCheck("dict size negative")));
                }
                self.push(PsObject::Dict(Rc::new(RefCell::new(Dict::new()))));
            }
            // key value def -
            Op::Def => {
                let value = self.pop()?;
                let key = self.pop_key()?;
                self.dicts
                    .last()
                    .expect("dict stack never empty")
                    .borrow_mut()
                    .insert(key, value);
            }
            Op::Load => {
                let key = self.pop_key()?;
                let value = self
                    .dicts
                    .iter()
                    .rev()
                    .find_map(|d| d.borrow().get(&key).cloned())
                    .ok_or_else(|| self.fail(VmErrorKind::UndefinedName(describe_key(&key))))?;
                self.push(value);
            }
            Op::Begin => {
                let d = self.pop_dict()?;
                self.dicts.push(d);
            }
            Op::End => {
                // userdict and systemdict are permanent
                if self.dicts.len() <= 2 {
                    return Err(self.fail(VmErrorKind::StackUnderflow));
                }
                self.dicts.pop();
            }
            Op::Store => {
                let value = self.pop()?;
                let key = self.pop_key()?;
                let holder = self
                    .dicts
                    .iter()
                    .rev()
                    .find(|d| d.borrow().contains(&key))
                    .cloned();
                match holder {
                    Some(d) => d.borrow_mut().insert(key, value),
                    None => self
                        .dicts
                        .last()
                        .expect("dict stack never empty")
                        .borrow_mut()
                        .insert(key, value),
                }
            }
            Op::Known => {
                let key = self.pop_key()?;
                let d = self.pop_dict()?;
                let known = d.borrow().contains(&key);
                self.push(PsObject::Bool(known));
            }
            Op::Where => {
                let key = self.pop_key()?;
                let holder = self
                    .dicts
                    .iter()
                    .rev()
                    .find(|d| d.borrow().contains(&key))
                    .cloned();
                match holder {
                    Some(d) => {
                        self.push(PsObject::Dict(d));
                        self.push(PsObject::Bool(true));
                    }
                    None => self.push(PsObject::Bool(false)),
                }
            }
            Op::Currentdict => {
                let d = self.dicts.last().expect("dict stack never empty").clone();
                self.push(PsObject::Dict(d));
            }
            Op::Userdict => {
                let d = self.userdict.clone();
                self.push(PsObject::Dict(d));
            }
            Op::Systemdict => {
                let d = self.systemdict.clone();
                self.push(PsObject::Dict(d));
            }

            // -- conversions -------------------------------------------------------
            Op::Cvi => {
                let v = self.conv_number()?;
                self.push(PsObject::Number(math::trunc(v)));
            }
            Op::Cvr => {
                let v = self.conv_number()?;
                self.push(PsObject::Number(v));
            }
            Op::Cvx => match self.pop()? {
                PsObject::Name { bytes, .. } => {
                    self.push(PsObject::Name {
                        bytes,
                        literal: false,
                    });
                }
                obj @ (PsObject::Procedure(_) | PsObject::Operator(_)) => self.push(obj),
                _ => return Err(self.fail(VmErrorKind::TypeMismatch("name or procedure"))),
            },
            Op::Cvlit => match self.pop()? {
                PsObject::Name { bytes, .. } => {
                    self.push(PsObject::Name {
                        bytes,
                        literal: true,
                    });
                }
                obj => self.push(obj),
            },
            Op::Cvn => {
                let s = self.pop_string()?;
                let bytes = s.borrow().clone();
                self.push(PsObject::literal_name(&bytes));
            }
            // any buffer cvs substring
            Op::Cvs => {
                let buffer = self.pop_string()?;
                let text: Vec<u8> = match self.pop()? {
                    PsObject::Number(n) => format_number(n).into_bytes(),
                    PsObject::Bool(b) => if b { "true" } else { "false" }.as_bytes().to_vec(),
                    PsObject::StringBytes(s) => s.borrow().clone(),
                    PsObject::Name { bytes, .. } => bytes.to_vec(),
                    _ => return Err(self.fail(VmErrorKind::TypeMismatch("convertible value"))),
                };
                {
                    let mut buf = buffer.borrow_mut();
                    if text.len() > buf.len() {
                        return Err(self.fail(VmErrorKind::RangeCheck("cvs buffer too small")));
                    }
                    buf[..text.len()].copy_from_slice(&text);
                }
                self.push(PsObject::string(text));
            }

            // -- procedures ---------------------------------------------------------
            // Early binding is irrelevant here: name lookup happens at call
            // time against the same dictionaries.
            Op::Bind => {
                let p = self.pop_executable()?;
                self.push(p);
            }

            // -- graphics state -------------------------------------------------------
            Op::Gsave => {
                self.gsave_stack.push(self.gstate.clone());
            }
            Op::Grestore => match self.gsave_stack.pop() {
                Some(g) => self.gstate = g,
                None => self.warn("grestore with no matching gsave ignored"),
            },
            Op::Save => match self.config.save_restore_mode {
                SaveRestoreMode::Neutered => self.push(PsObject::Bool(false)),
                SaveRestoreMode::Faithful => {
                    let id = self.next_save_id;
                    self.next_save_id += 1;
                    self.save_stack.push(SaveSnapshot {
                        id,
                        gstate: self.gstate.clone(),
                        gsave_stack: self.gsave_stack.clone(),
                    });
                    self.push(PsObject::Save(id));
                }
            },
            Op::Restore => match self.config.save_restore_mode {
                SaveRestoreMode::Neutered => {
                    self.pop()?;
                }
                SaveRestoreMode::Faithful => {
                    let id = match self.pop()? {
                        PsObject::Save(id) => id,
                        _ => return Err(self.fail(VmErrorKind::TypeMismatch("save token"))),
                    };
                    let at = self
                        .save_stack
                        .iter()
                        .rposition(|s| s.id == id)
                        .ok_or_else(|| self.fail(VmErrorKind::RangeCheck("stale save token")))?;
                    let snap = self.save_stack.swap_remove(at);
                    self.save_stack.truncate(at);
                    self.gstate = snap.gstate;
                    self.gsave_stack = snap.gsave_stack;
                }
            },

            // -- CTM ---------------------------------------------------------------------
            Op::Translate => {
                let m = self.maybe_matrix_operand();
                let p = self.pop_point()?;
                self.ctm_op(Matrix::translation(p.x, p.y), m)?;
            }
            Op::Scale => {
                let m = self.maybe_matrix_operand();
                let p = self.pop_point()?;
                self.ctm_op(Matrix::scaling(p.x, p.y), m)?;
            }
            Op::Rotate => {
                let m = self.maybe_matrix_operand();
                let angle = self.pop_number()?;
                self.ctm_op(Matrix::rotation_degrees(angle), m)?;
            }
            Op::Concat => {
                let arr = self.pop_array()?;
                let m = self.matrix_from_array(&arr)?;
                self.gstate.ctm = concat_matrix(&self.gstate.ctm, &m);
            }
            Op::MatrixOp => {
                let m = Matrix::IDENTITY;
                self.push(PsObject::array(
                    [m.a, m.b, m.c, m.d, m.tx, m.ty]
                        .iter()
                        .map(|&v| PsObject::Number(v))
                        .collect(),
                ));
            }
            Op::Currentmatrix => {
                let arr = self.pop_array()?;
                let ctm = self.gstate.ctm;
                self.store_matrix(&arr, &ctm)?;
                self.push(PsObject::Array(arr));
            }
            Op::Setmatrix => {
                let arr = self.pop_array()?;
                self.gstate.ctm = self.matrix_from_array(&arr)?;
            }
            Op::Transform => {
                let m = self.pop_matrix_or_ctm()?;
                let p = self.pop_point()?;
                self.push_point(m.transform_point(p));
            }
            Op::Itransform => {
                let m = self.pop_matrix_or_ctm()?;
                let p = self.pop_point()?;
                let r = m
                    .inverse_transform_point(p)
                    .ok_or_else(|| self.fail(VmErrorKind::SingularMatrix))?;
                self.push_point(r);
            }
            Op::Dtransform => {
                let m = self.pop_matrix_or_ctm()?;
                let d = self.pop_point()?;
                self.push_point(m.transform_delta(d));
            }
            Op::Idtransform => {
                let m = self.pop_matrix_or_ctm()?;
                let d = self.pop_point()?;
                let r = m
                    .inverse_transform_delta(d)
                    .ok_or_else(|| self.fail(VmErrorKind::SingularMatrix))?;
                self.push_point(r);
            }

            // -- path and current point -----------------------------------------------
            Op::Moveto => {
                let p = self.pop_point()?;
                self.gstate.current_point = Some(p);
                self.gstate.subpath_start = Some(p);
            }
            Op::Rmoveto => {
                let d = self.pop_point()?;
                let cp = self.require_current_point()?;
                let p = Point::new(cp.x + d.x, cp.y + d.y);
                self.gstate.current_point = Some(p);
                self.gstate.subpath_start = Some(p);
            }
            Op::Lineto => {
                let p = self.pop_point()?;
                self.require_current_point()?;
                self.gstate.current_point = Some(p);
            }
            Op::Rlineto => {
                let d = self.pop_point()?;
                let cp = self.require_current_point()?;
                self.gstate.current_point = Some(Point::new(cp.x + d.x, cp.y + d.y));
            }
            Op::Curveto => {
                let p3 = self.pop_point()?;
                let _p2 = self.pop_point()?;
                let _p1 = self.pop_point()?;
                self.require_current_point()?;
                self.gstate.current_point = Some(p3);
            }
            Op::Rcurveto => {
                let d3 = self.pop_point()?;
                let _d2 = self.pop_point()?;
                let _d1 = self.pop_point()?;
                let cp = self.require_current_point()?;
                self.gstate.current_point = Some(Point::new(cp.x + d3.x, cp.y + d3.y));
            }
            Op::Closepath => {
                if let Some(start) = self.gstate.subpath_start {
                    self.gstate.current_point = Some(start);
                }
            }
            Op::Newpath => {
                self.gstate.current_point = None;
                self.gstate.subpath_start = None;
            }
            Op::Currentpoint => {
                let cp = self.require_current_point()?;
                self.push_point(cp);
            }
            // x y r angle1 angle2 arc -
            Op::Arc | Op::Arcn => {
                let a2 = self.pop_number()?;
                let a1 = self.pop_number()?;
                let r = self.pop_number()?;
                let c = self.pop_point()?;
                let start = Point::new(c.x + r * math::cos_deg(a1), c.y + r * math::sin_deg(a1));
                let end = Point::new(c.x + r * math::cos_deg(a2), c.y + r * math::sin_deg(a2));
                if self.gstate.current_point.is_none() {
                    self.gstate.subpath_start = Some(start);
                }
                self.gstate.current_point = Some(end);
            }

            // -- painting no-ops: consume operands, draw nothing ------------------------
            Op::Stroke | Op::Fill | Op::Eofill | Op::Clip | Op::Eoclip => {}
            Op::Setlinewidth | Op::Setlinecap | Op::Setlinejoin | Op::Setmiterlimit
            | Op::Setgray => {
                self.pop()?;
            }
            Op::Setdash => {
                self.pop()?;
                self.pop()?;
            }
            Op::Setrgbcolor | Op::Sethsbcolor => {
                for _ in 0..3 {
                    self.pop()?;
                }
            }
            Op::Setcmykcolor => {
                for _ in 0..4 {
                    self.pop()?;
                }
            }
            Op::Showpage => {
                self.gstate.current_point = None;
                self.gstate.subpath_start = None;
            }

            // -- fonts: opaque dictionaries, no metrics ----------------------------------
            Op::Findfont => {
                self.pop()?;
                self.fresh_font_dict();
            }
            Op::Scalefont | Op::Makefont | Op::Definefont => {
                self.pop()?;
                self.pop()?;
                self.fresh_font_dict();
            }
            Op::Setfont => {
                self.pop()?;
            }
            Op::Currentfont => self.fresh_font_dict(),
            // No metrics exist, so zero width is the only self-consistent
            // answer; flagged once per run.
            Op::Stringwidth => {
                self.pop_string()?;
                if !self.stringwidth_warned {
                    self.stringwidth_warned = true;
                    self.warn("stringwidth has no font metrics; returning 0 0");
                }
                self.push(PsObject::Number(0.0));
                self.push(PsObject::Number(0.0));
            }

            // -- intercepted show family --------------------------------------------------
            // string show
            Op::Show => self.show_op(false, 0)?,
            // ax ay string ashow
            Op::Ashow => self.show_op(false, 2)?,
            // cx cy char string widthshow
            Op::Widthshow => self.show_op(false, 3)?,
            // cx cy char ax ay string awidthshow
            Op::Awidthshow => self.show_op(false, 5)?,
            // string numarray xshow / yshow / xyshow
            Op::Xshow | Op::Yshow | Op::Xyshow => self.show_op(true, 0)?,
            // proc string cshow / kshow
            Op::Cshow | Op::Kshow => self.show_op(false, 1)?,

            // -- never skippable -----------------------------------------------------------
            Op::Image | Op::Colorimage | Op::Imagemask | Op::Readhexstring
            | Op::Currentfile | Op::Stopped | Op::Run => {
                return Err(self.fail(VmErrorKind::UnsupportedOperator(op.name().to_owned())));
            }
        }
        Ok(Flow::Continue)
    }

    fn comparison(
        &mut self,
        accept: impl Fn(core::cmp::Ordering) -> bool,
    ) -> Result<(), VmError> {
        let b = self.pop()?;
        let a = self.pop()?;
        let ord = match (&a, &b) {
            (PsObject::Number(x), PsObject::Number(y)) => x
                .partial_cmp(y)
                .ok_or_else(|| self.fail(VmErrorKind::RangeCheck("unordered comparison")))?,
            (PsObject::StringBytes(x), PsObject::StringBytes(y)) => x.borrow().cmp(&y.borrow()),
            _ => return Err(self.fail(VmErrorKind::TypeMismatch("numbers or strings"))),
        };
        self.push(PsObject::Bool(accept(ord)));
        Ok(())
    }

    fn bitwise(
        &mut self,
        ints: impl Fn(i64, i64) -> i64,
        bools: impl Fn(bool, bool) -> bool,
    ) -> Result<(), VmError> {
        let b = self.pop()?;
        let a = self.pop()?;
        match (a, b) {
            (PsObject::Bool(x), PsObject::Bool(y)) => self.push(PsObject::Bool(bools(x, y))),
            (a @ PsObject::Number(_), b @ PsObject::Number(_)) => {
                self.push(a);
                let x = self.pop_integer()?;
                self.push(b);
                let y = self.pop_integer()?;
                self.push(PsObject::Number(ints(x, y) as f64));
            }
            _ => return Err(self.fail(VmErrorKind::TypeMismatch("booleans or integers"))),
        }
        Ok(())
    }

    fn conv_number(&mut self) -> Result<f64, VmError> {
        match self.pop()? {
            PsObject::Number(n) => Ok(n),
            PsObject::StringBytes(s) => {
                let bytes = s.borrow();
                core::str::from_utf8(&bytes)
                    .ok()
                    .and_then(|t| t.trim().parse::<f64>().ok())
                    .ok_or_else(|| self.fail(VmErrorKind::TypeMismatch("numeric string")))
            }
            _ => Err(self.fail(VmErrorKind::TypeMismatch("number"))),
        }
    }

    fn index_in(&self, key: &PsObject, len: usize, what: &'static str) -> Result<usize, VmError> {
        let idx = match key {
            PsObject::Number(n) => {
                let r = libm::round(*n);
                if (n - r).abs() > 1e-9 {
                    return Err(self.fail(VmErrorKind::TypeMismatch("integer")));
                }
                r
            }
            _ => return Err(self.fail(VmErrorKind::TypeMismatch("integer"))),
        };
        if idx < 0.0 || idx >= len as f64 {
            return Err(self.fail(VmErrorKind::RangeCheck(what)));
        }
        Ok(idx as usize)
    }

    fn interval(&self, index: i64, count: i64) -> Result<(usize, usize), VmError> {
        if index < 0 || count < 0 {
            return Err(self.fail(VmErrorKind::RangeCheck("interval out of bounds")));
        }
        Ok((index as usize, count as usize))
    }
}

fn describe_key(key: &DictKey) -> String {
    match key {
        DictKey::Name(bytes) => lossy_bytes(bytes),
        DictKey::Number(bits) => format_number(f64::from_bits(*bits)),
        DictKey::Bool(b) => b.to_string(),
    }
}

/// Number formatting for `cvs`: integers without a fraction, reals with
/// the shortest round-trip form.
fn format_number(n: f64) -> String {
    if n.is_finite() && n == math::trunc(n) && math::abs(n) < 9.0e15 {
        format!("{}", n as i64)
    } else {
        format!("{}", n)
    }
}
