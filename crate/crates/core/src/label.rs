//! Class identifiers and the name vocabulary that maps them to display names.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a class. Ordering follows the numeric id, which is also the
/// tie-breaking order used by [`crate::Posterior::argmax`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for LabelId {
    fn from(id: u32) -> Self {
        LabelId(id)
    }
}

/// Bidirectional map between class names and [`LabelId`]s.
///
/// Ids are assigned densely in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocabulary {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, LabelId>,
}

impl LabelVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for name in names {
            vocab.intern(name);
        }
        vocab
    }

    /// Returns the id for `name`, registering it if unseen.
    pub fn intern(&mut self, name: impl Into<String>) -> LabelId {
        let name = name.into();
        if let Some(&id) = self.lookup().get(&name) {
            return id;
        }
        let id = LabelId(self.names.len() as u32);
        self.names.push(name.clone());
        self.index.insert(name, id);
        id
    }

    pub fn get(&self, name: &str) -> Option<LabelId> {
        if self.index.len() == self.names.len() {
            return self.index.get(name).copied();
        }
        // deserialized vocabularies have an empty index
        self.names.iter().position(|n| n == name).map(|i| LabelId(i as u32))
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (0..self.names.len() as u32).map(LabelId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (LabelId, &str)> + '_ {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (LabelId(i as u32), n.as_str()))
    }

    fn lookup(&mut self) -> &HashMap<String, LabelId> {
        if self.index.len() != self.names.len() {
            self.index = self
                .names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), LabelId(i as u32)))
                .collect();
        }
        &self.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_appearance_order() {
        let mut v = LabelVocabulary::new();
        assert_eq!(v.intern("A"), LabelId(0));
        assert_eq!(v.intern("B"), LabelId(1));
        assert_eq!(v.intern("A"), LabelId(0));
        assert_eq!(v.len(), 2);
        assert_eq!(v.name(LabelId(1)), Some("B"));
    }

    #[test]
    fn survives_serde_round_trip() {
        let v = LabelVocabulary::from_names(["home", "work"]);
        let json = serde_json::to_string(&v).unwrap();
        let mut back: LabelVocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.get("work"), Some(LabelId(1)));
        assert_eq!(back.intern("other"), LabelId(2));
        assert_eq!(back.get("other"), Some(LabelId(2)));
    }
}
