use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Event;
use crate::error::{LatticeError, Result};

/// Dense item vocabulary. Indices are assigned in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ItemVocab {
    raw: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemVocab {
    pub fn build(events: &[Event]) -> Result<Self> {
        if events.is_empty() {
            return Err(LatticeError::EmptyDataset);
        }
        let mut vocab = ItemVocab {
            raw: Vec::new(),
            index: HashMap::new(),
        };
        for e in events {
            vocab.insert(&e.item);
        }
        Ok(vocab)
    }

    /// Vocabulary whose raw ids are exactly `raw`, in order. Duplicates are rejected.
    pub fn from_raw_ids(raw: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            if index.insert(r.clone(), i).is_some() {
                return Err(LatticeError::InvalidConfig(format!("duplicate item id {r:?}")));
            }
        }
        Ok(ItemVocab { raw, index })
    }

    /// Vocabulary `"0".."size-1"` for synthetic corpora.
    pub fn identity(size: usize) -> Self {
        ItemVocab::from_raw_ids((0..size).map(|i| i.to_string()).collect()).expect("distinct ids")
    }

    fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(item.to_string());
        self.index.insert(item.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw_of(&self, index: usize) -> Option<&str> {
        self.raw.get(index).map(String::as_str)
    }

    pub fn raw_ids(&self) -> &[String] {
        &self.raw
    }

    /// SHA-256 over the raw ids in index order, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.raw {
            h.update((r.len() as u64).to_le_bytes());
            h.update(r.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TryFrom<Vec<String>> for ItemVocab {
    type Error = LatticeError;

    fn try_from(raw: Vec<String>) -> Result<Self> {
        ItemVocab::from_raw_ids(raw)
    }
}

impl From<ItemVocab> for Vec<String> {
    fn from(v: ItemVocab) -> Self {
        v.raw
    }
}
