use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Category identifier in a source or target classification.
///
/// Surrounding whitespace is stripped on construction; comparison is
/// byte-exact (no case folding or other normalisation).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(Arc<str>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("key is empty after trimming whitespace")]
pub struct EmptyKey;

impl Key {
    pub fn new(text: &str) -> Result<Self, EmptyKey> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            Err(EmptyKey)
        } else {
            Ok(Key(Arc::from(trimmed)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl Borrow<str> for Key {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Key {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<&str> for Key {
    type Error = EmptyKey;
    fn try_from(text: &str) -> Result<Self, EmptyKey> {
        Key::new(text)
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Key::new(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_and_rejects_blank() {
        assert_eq!(Key::new("  BLX ").unwrap().as_str(), "BLX");
        assert_eq!(Key::new("   "), Err(EmptyKey));
        assert_eq!(Key::new(""), Err(EmptyKey));
    }

    #[test]
    fn byte_exact_comparison() {
        assert_ne!(Key::new("aus").unwrap(), Key::new("AUS").unwrap());
        assert!(Key::new("B").unwrap() < Key::new("a").unwrap());
    }
}
