//! Values on the interpreter stacks.
//!
//! Composite objects (arrays, strings, dictionaries) have shared identity:
//! a `put` through one reference is visible through every other, which the
//! interception protocol relies on when it grows its label list in place.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::syntax::Token;
use crate::vm::Operator;

pub type SharedString = Rc<RefCell<Vec<u8>>>;
pub type SharedArray = Rc<RefCell<Vec<PsObject>>>;
pub type SharedDict = Rc<RefCell<Dict>>;

#[derive(Debug, Clone)]
pub enum PsObject {
    Null,
    Number(f64),
    Bool(bool),
    StringBytes(SharedString),
    Name { bytes: Rc<[u8]>, literal: bool },
    Mark,
    Array(SharedArray),
    Procedure(Rc<Vec<Token>>),
    Dict(SharedDict),
    /// Token pushed by `save` in faithful mode.
    Save(u64),
    /// A built-in operator; what `load` yields for system names.
    Operator(Operator),
}

impl PsObject {
    pub fn string(bytes: Vec<u8>) -> PsObject {
        PsObject::StringBytes(Rc::new(RefCell::new(bytes)))
    }

    pub fn array(items: Vec<PsObject>) -> PsObject {
        PsObject::Array(Rc::new(RefCell::new(items)))
    }

    pub fn literal_name(bytes: &[u8]) -> PsObject {
        PsObject::Name {
            bytes: bytes.into(),
            literal: true,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            PsObject::Null => "null",
            PsObject::Number(_) => "number",
            PsObject::Bool(_) => "boolean",
            PsObject::StringBytes(_) => "string",
            PsObject::Name { .. } => "name",
            PsObject::Mark => "mark",
            PsObject::Array(_) => "array",
            PsObject::Procedure(_) => "procedure",
            PsObject::Dict(_) => "dictionary",
            PsObject::Save(_) => "save",
            PsObject::Operator(_) => "operator",
        }
    }

    /// PostScript `eq`: numbers by value, strings and names by bytes
    /// (cross-comparable), composites by identity.
    pub fn ps_eq(&self, other: &PsObject) -> bool {
        use PsObject::*;
        match (self, other) {
            (Null, Null) => true,
            (Number(a), Number(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (Mark, Mark) => true,
            (Save(a), Save(b)) => a == b,
            (Operator(a), Operator(b)) => a == b,
            (StringBytes(a), StringBytes(b)) => *a.borrow() == *b.borrow(),
            (Name { bytes: a, .. }, Name { bytes: b, .. }) => a == b,
            (StringBytes(s), Name { bytes: n, .. }) | (Name { bytes: n, .. }, StringBytes(s)) => {
                *s.borrow() == **n
            }
            (Array(a), Array(b)) => Rc::ptr_eq(a, b),
            (Dict(a), Dict(b)) => Rc::ptr_eq(a, b),
            (Procedure(a), Procedure(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Dictionary keys. Strings are interned to name keys, the way PostScript
/// dictionaries treat string keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DictKey {
    Name(Vec<u8>),
    /// Keyed by bit pattern so any finite number works.
    Number(u64),
    Bool(bool),
}

impl DictKey {
    pub fn from_object(obj: &PsObject) -> Option<DictKey> {
        match obj {
            PsObject::Name { bytes, .. } => Some(DictKey::Name(bytes.to_vec())),
            PsObject::StringBytes(s) => Some(DictKey::Name(s.borrow().clone())),
            PsObject::Number(n) => Some(DictKey::Number(n.to_bits())),
            PsObject::Bool(b) => Some(DictKey::Bool(*b)),
            _ => None,
        }
    }

    pub fn name(bytes: &[u8]) -> DictKey {
        DictKey::Name(bytes.to_vec())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dict {
    entries: BTreeMap<DictKey, PsObject>,
}

impl Dict {
    pub fn new() -> Dict {
        Dict::default()
    }

    pub fn get(&self, key: &DictKey) -> Option<&PsObject> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: DictKey, value: PsObject) {
        self.entries.insert(key, value);
    }

    pub fn contains(&self, key: &DictKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
