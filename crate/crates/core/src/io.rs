//! JSON helpers shared by the document schemas.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn check_schema(found: &str, path: &str) -> Result<()> {
    if found == crate::SCHEMA {
        Ok(())
    } else {
        Err(Error::schema(path, format!("expected \"{}\", found \"{found}\"", crate::SCHEMA)))
    }
}

/// Parses a document, reporting the first failing JSON path on error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
    match value.get("schema") {
        Some(serde_json::Value::String(s)) => check_schema(s, "$.schema")?,
        Some(_) => return Err(Error::schema("$.schema", "must be a string")),
        None => return Err(Error::schema("$.schema", "missing")),
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        Error::schema(path.replace(".[", "["), e.into_inner().to_string())
    })
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that round-trips, so output is deterministic.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}
