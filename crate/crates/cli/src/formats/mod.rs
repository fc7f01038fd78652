//! File formats: model JSON, tensor dumps, sample CSVs and recovery JSON.
//! Layouts are described in `docs/formats.md`.

pub mod model_json;
pub mod recovery_json;
pub mod samples;
pub mod tensor;

use std::fmt;

use serde_json::{Map, Value};

/// Malformed input.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError(pub String);

impl FormatError {
    pub fn new(msg: impl Into<String>) -> Self {
        FormatError(msg.into())
    }

    pub fn core(e: tui_core::Error) -> Self {
        FormatError(e.to_string())
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FormatError {}

/// JSON object with a path prefix for error messages.
pub(crate) struct Obj<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Obj<'a> {
    pub fn root(v: &'a Value) -> Result<Self, FormatError> {
        let map = v.as_object().ok_or_else(|| FormatError::new("expected a JSON object at the top level"))?;
        Ok(Obj { map, prefix: String::new() })
    }

    pub fn path(&self, field: &str) -> String {
        format!("{}{field}", self.prefix)
    }

    pub fn has(&self, field: &str) -> bool {
        self.map.contains_key(field)
    }

    pub fn get(&self, field: &str) -> Result<&'a Value, FormatError> {
        self.map.get(field).ok_or_else(|| FormatError::new(format!("missing field {}", self.path(field))))
    }

    pub fn child(&self, field: &str) -> Result<Obj<'a>, FormatError> {
        Ok(Obj { map: self.object(field)?, prefix: format!("{}.", self.path(field)) })
    }

    pub fn object(&self, field: &str) -> Result<&'a Map<String, Value>, FormatError> {
        self.get(field)?.as_object().ok_or_else(|| FormatError::new(format!("{}: expected an object", self.path(field))))
    }

    pub fn array(&self, field: &str) -> Result<&'a Vec<Value>, FormatError> {
        self.get(field)?.as_array().ok_or_else(|| FormatError::new(format!("{}: expected an array", self.path(field))))
    }

    pub fn str(&self, field: &str) -> Result<&'a str, FormatError> {
        self.get(field)?.as_str().ok_or_else(|| FormatError::new(format!("{}: expected a string", self.path(field))))
    }

    pub fn usize(&self, field: &str) -> Result<usize, FormatError> {
        self.get(field)?
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| FormatError::new(format!("{}: expected an unsigned integer", self.path(field))))
    }
}
